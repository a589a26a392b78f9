/* Copyright 2026 The facadegen Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "facade/servekit/servekit.h"

#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <set>

#include "facade/common/codec.h"
#include "facade/common/errors.h"
#include "facade/common/image.h"
#include "facade/evalkit/evalkit.h"
#include "test_support.h"

namespace facade::servekit {
namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;

using facade::testing::random_image;
using facade::testing::scratch_dir;
using facade::testing::tiny_net;
using viewgeom::constant_view;

std::string png_of(const torch::Tensor& chw) { return encode_png(tensor_to_image(chw)); }

nets::ModelBundle model() { return nets::ModelBundle::create(tiny_net(), 21); }

std::unique_ptr<TextureService> service(ServiceOptions o = {}) {
  auto s = std::make_unique<TextureService>(o);
  s->set_model(model(), "test");
  return s;
}

TEST(Sessions, IdempotentPerImageAndEncodeOnce) {
  auto svc = service();
  const auto a = png_of(random_image(1, 16)), b = png_of(random_image(2, 16));
  bool created = false;
  auto s1 = svc->register_texture(a, &created);
  EXPECT_TRUE(created);
  auto s2 = svc->register_texture(a, &created);
  EXPECT_FALSE(created);
  EXPECT_EQ(s1->id, s2->id);
  EXPECT_EQ(s1->image_sha256, sha256_hex(a));
  EXPECT_NE(svc->register_texture(b)->id, s1->id);
  EXPECT_EQ(svc->encoder_calls(), 2u);
  for (int i = 0; i < 20; ++i) svc->generate(s1->id, constant_view(16, 16, 0.05 * i, -0.3));
  EXPECT_EQ(svc->encoder_calls(), 2u);
  EXPECT_THROW(svc->register_texture("not a png"), std::exception);
  EXPECT_EQ(svc->health().sessions, 2u);
}

TEST(Sessions, ConcurrentRegistrationEncodesOnce) {
  auto svc = service();
  const auto a = png_of(random_image(3, 16));
  std::vector<std::thread> ts;
  std::vector<std::string> ids(8);
  for (int i = 0; i < 8; ++i) ts.emplace_back([&, i] { ids[i] = svc->register_texture(a)->id; });
  for (auto& t : ts) t.join();
  EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), 1u);
  EXPECT_EQ(svc->encoder_calls(), 1u);
}

TEST(Generate, DeterministicAndMatchesImprovePath) {
  auto svc = service();
  const auto png = png_of(random_image(4, 16));
  auto s = svc->register_texture(png);
  auto v = constant_view(16, 16, 0.3, 0.1);
  EXPECT_EQ(svc->generate_png(s->id, v), svc->generate_png(s->id, v));
  auto m = model();
  auto want = evalkit::improve_facade(m, image_to_tensor(decode_png(png)));
  EXPECT_TRUE(torch::equal(svc->generate(s->id, constant_view(16, 16, 0.0, 0.0)), want));
}

TEST(Generate, ErrorsMapToStatusCodes) {
  auto svc = service();
  auto s = svc->register_texture(png_of(random_image(5, 16)));
  try {
    svc->generate("0123456789abcdef0123456789abcdef", constant_view(16, 16, 0, 0));
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_EQ(error_response(e).first, 404);
  }
  viewgeom::ViewVectorPair bad = constant_view(16, 16, 0, 0);
  bad.theta_h[3] = 1.5f;
  try {
    svc->generate(s->id, bad);
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_EQ(error_response(e).first, 422);
  }
  TextureService empty;
  try {
    empty.generate(s->id, constant_view(16, 16, 0, 0));
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_EQ(error_response(e).first, 503);
  }
}

TEST(MicroBatch, BatchOneIsBitwiseAndBatchesWithinTolerance) {
  ServiceOptions direct;
  direct.micro_batch = false;
  auto a = service(), b = service(direct);
  const auto png = png_of(random_image(6, 16));
  auto sa = a->register_texture(png), sb = b->register_texture(png);
  auto v = constant_view(16, 16, -0.2, 0.4);
  EXPECT_TRUE(torch::equal(a->generate(sa->id, v), b->generate(sb->id, v)));

  std::vector<std::pair<std::string, viewgeom::ViewVectorPair>> reqs;
  auto other = a->register_texture(png_of(random_image(7, 16)));
  for (int i = 0; i < 8; ++i) {
    reqs.emplace_back(i % 2 ? other->id : sa->id, constant_view(16, 16, -0.7 + 0.2 * i, 0.1 * i));
  }
  auto batched = a->generate_many(reqs);
  ASSERT_EQ(batched.size(), 8u);
  for (int i = 0; i < 8; ++i) {
    auto single = b->generate(reqs[i].first == sa->id ? sb->id : b->register_texture(png_of(random_image(7, 16)))->id,
                              reqs[i].second);
    EXPECT_LE((batched[i] - single).abs().max().item<float>(), 1e-5f) << i;
  }
}

TEST(MicroBatch, ConcurrentRequestsOnOneSessionDoNotCrossTalk) {
  ServiceOptions o;
  o.batch_window = std::chrono::microseconds(20000);
  auto svc = service(o);
  auto s = svc->register_texture(png_of(random_image(8, 16)));
  std::vector<std::string> got(8);
  std::vector<std::thread> ts;
  for (int i = 0; i < 8; ++i) {
    ts.emplace_back([&, i] { got[i] = svc->generate_png(s->id, constant_view(16, 16, -0.8 + 0.2 * i, 0.0)); });
  }
  for (auto& t : ts) t.join();
  std::set<std::string> hashes;
  for (const auto& p : got) hashes.insert(sha256_hex(p));
  EXPECT_EQ(hashes.size(), 8u);
  // Each response matches the sequential answer for its own view.
  ServiceOptions direct;
  direct.micro_batch = false;
  auto ref = service(direct);
  auto rs = ref->register_texture(png_of(random_image(8, 16)));
  for (int i = 0; i < 8; ++i) {
    auto want = ref->generate(rs->id, constant_view(16, 16, -0.8 + 0.2 * i, 0.0));
    auto have = image_to_tensor(decode_png(got[i]));
    EXPECT_LE((have - want).abs().max().item<float>(), 2.0f / 255 + 1e-5f) << i;
  }
  EXPECT_GT(svc->throughput().frames, 0u);
}

TEST(Storm, ThousandRequestsLeaveWeightsUntouched) {
  auto svc = service();
  const auto before = svc->parameter_checksum();
  std::vector<std::string> ids;
  for (int i = 0; i < 4; ++i) ids.push_back(svc->register_texture(png_of(random_image(30 + i, 16)))->id);
  std::atomic<int> ok{0};
  std::vector<std::thread> ts;
  for (int t = 0; t < 4; ++t) {
    ts.emplace_back([&, t] {
      for (int i = 0; i < 250; ++i) {
        auto out = svc->generate(ids[(t + i) % 4], constant_view(16, 16, (i % 21 - 10) * 0.1, t * 0.2 - 0.3));
        if (torch::isfinite(out).all().item<bool>()) ++ok;
      }
    });
  }
  for (auto& t : ts) t.join();
  EXPECT_EQ(ok.load(), 1000);
  EXPECT_EQ(svc->parameter_checksum(), before);
  EXPECT_EQ(svc->encoder_calls(), 4u);
  EXPECT_EQ(svc->queue_depth(), 0u);
}

TEST(Health, StatesAndHashes) {
  TextureService empty;
  auto h = empty.health();
  EXPECT_EQ(h.status, "degraded");
  EXPECT_EQ(h.queue_depth, 0u);
  auto dir = scratch_dir("serve_health");
  nets::save_bundle(model(), dir / "m.fckpt");
  empty.load_model(dir / "m.fckpt");
  h = empty.health();
  EXPECT_EQ(h.status, "ok");
  EXPECT_EQ(h.checkpoint_sha256, file_sha256_hex(dir / "m.fckpt"));
  EXPECT_EQ(h.queue_depth, 0u);
  EXPECT_TRUE(h.to_json().contains("uptime_s"));
}

TEST(ParseView, ScalarsArraysAndErrors) {
  auto v = parse_view({{"theta_h", 0.25}, {"theta_v", -0.5}}, 8, 4);
  EXPECT_EQ(v.theta_h, std::vector<float>(8, 0.25f));
  EXPECT_EQ(v.theta_v, std::vector<float>(4, -0.5f));
  auto r = parse_view({{"theta_h", {-1.0, 1.0}}, {"theta_v", 0.0}}, 5, 5);
  EXPECT_EQ(r.theta_h, (std::vector<float>{-1.0f, -0.5f, 0.0f, 0.5f, 1.0f}));
  EXPECT_THROW(parse_view({{"theta_h", "x"}, {"theta_v", 0}}, 4, 4), InvalidArgument);
  EXPECT_THROW(parse_view({{"theta_h", 1.2}, {"theta_v", 0}}, 4, 4), Unprocessable);
  EXPECT_THROW(parse_view({{"theta_v", 0}}, 4, 4), InvalidArgument);
}

// ---- network front end ---------------------------------------------------------

std::pair<int, nlohmann::json> call(unsigned short port, http::verb verb, const std::string& target,
                                    const std::string& body = "") {
  asio::io_context io;
  tcp::socket sock(io);
  sock.connect({asio::ip::make_address("127.0.0.1"), port});
  http::request<http::string_body> req{verb, target, 11};
  req.set(http::field::host, "127.0.0.1");
  req.set(http::field::content_type, "application/json");
  req.body() = body;
  req.prepare_payload();
  http::write(sock, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(sock, buf, res);
  beast::error_code ec;
  sock.shutdown(tcp::socket::shutdown_both, ec);
  return {static_cast<int>(res.result_int()), nlohmann::json::parse(res.body())};
}

class HttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    svc_ = service();
    server_ = std::make_unique<HttpServer>(*svc_, "127.0.0.1", 0);
    server_->start();
    port_ = server_->port();
  }
  void TearDown() override { server_->stop(); }
  std::string register_one(std::uint64_t seed) {
    auto [code, body] = call(port_, http::verb::post, "/texture",
                             nlohmann::json{{"version", 1},
                                            {"image_png_b64", base64_encode(png_of(random_image(seed, 16)))}}
                                 .dump());
    EXPECT_EQ(code, 200) << body.dump();
    return body.value("session_id", "");
  }
  std::unique_ptr<TextureService> svc_;
  std::unique_ptr<HttpServer> server_;
  unsigned short port_ = 0;
};

TEST_F(HttpTest, RegisterGenerateAndHealth) {
  const auto id = register_one(1);
  EXPECT_EQ(register_one(1), id);
  auto [code, body] = call(port_, http::verb::post, "/generate",
                           nlohmann::json{{"version", 1}, {"session_id", id}, {"theta_h", 0.2}, {"theta_v", 0.0}}
                               .dump());
  ASSERT_EQ(code, 200) << body.dump();
  const auto png = base64_decode(body["png_b64"].get<std::string>());
  auto img = decode_png(png);
  EXPECT_EQ(img.width, 16);
  EXPECT_EQ(png, svc_->generate_png(id, constant_view(16, 16, 0.2, 0.0)));
  auto [sized_code, sized] = call(port_, http::verb::post, "/generate",
                                  nlohmann::json{{"session_id", id}, {"theta_h", 0}, {"theta_v", 0}, {"size", 32}}
                                      .dump());
  EXPECT_EQ(sized_code, 200);
  EXPECT_EQ(decode_png(base64_decode(sized["png_b64"].get<std::string>())).width, 32);
  auto [hcode, health] = call(port_, http::verb::get, "/healthz");
  EXPECT_EQ(hcode, 200);
  EXPECT_EQ(health["status"], "ok");
  EXPECT_EQ(health["queue_depth"], 0);
  EXPECT_EQ(call(port_, http::verb::get, "/throughput").first, 200);
  EXPECT_EQ(svc_->encoder_calls(), 1u);
}

TEST_F(HttpTest, StatusCodes) {
  const auto id = register_one(2);
  EXPECT_EQ(call(port_, http::verb::get, "/nowhere").first, 404);
  EXPECT_EQ(call(port_, http::verb::post, "/generate",
                 nlohmann::json{{"session_id", "ffffffffffffffffffffffffffffffff"}, {"theta_h", 0}, {"theta_v", 0}}
                     .dump())
                .first,
            404);
  EXPECT_EQ(call(port_, http::verb::post, "/generate",
                 nlohmann::json{{"session_id", id}, {"theta_h", 2.0}, {"theta_v", 0}}.dump())
                .first,
            422);
  EXPECT_EQ(call(port_, http::verb::post, "/generate", "{broken").first, 400);
  EXPECT_EQ(call(port_, http::verb::post, "/texture",
                 nlohmann::json{{"image_png_b64", base64_encode("nope")}}.dump())
                .first,
            400);
  EXPECT_EQ(call(port_, http::verb::post, "/generate",
                 nlohmann::json{{"version", 9}, {"session_id", id}, {"theta_h", 0}, {"theta_v", 0}}.dump())
                .first,
            400);
}

TEST(HttpDegraded, NoModelIs503) {
  TextureService svc;
  HttpServer server(svc, "127.0.0.1", 0);
  server.start();
  auto [code, body] = call(server.port(), http::verb::get, "/healthz");
  EXPECT_EQ(code, 200);
  EXPECT_EQ(body["status"], "degraded");
  EXPECT_EQ(call(server.port(), http::verb::post, "/texture",
                 nlohmann::json{{"image_png_b64", base64_encode(png_of(random_image(1, 16)))}}.dump())
                .first,
            503);
  server.stop();
}

TEST_F(HttpTest, StreamEchoesFrameIdsInOrder) {
  const auto id = register_one(3);
  asio::io_context io;
  websocket::stream<tcp::socket> ws(io);
  ws.next_layer().connect({asio::ip::make_address("127.0.0.1"), port_});
  ws.handshake("127.0.0.1", "/stream");
  for (int f = 0; f < 5; ++f) {
    nlohmann::json msg{{"session_id", id}, {"theta_h", -0.4 + 0.2 * f}, {"theta_v", 0.0}, {"frame_id", f}};
    ws.write(asio::buffer(msg.dump()));
    beast::flat_buffer buf;
    ws.read(buf);
    auto reply = nlohmann::json::parse(beast::buffers_to_string(buf.data()));
    EXPECT_EQ(reply["frame_id"], f);
    ASSERT_TRUE(reply.contains("png_b64")) << reply.dump();
    EXPECT_EQ(base64_decode(reply["png_b64"].get<std::string>()),
              svc_->generate_png(id, constant_view(16, 16, -0.4 + 0.2 * f, 0.0)));
  }
  ws.write(asio::buffer(nlohmann::json{{"session_id", "nope"}, {"theta_h", 0}, {"theta_v", 0}, {"frame_id", 9}}.dump()));
  beast::flat_buffer buf;
  ws.read(buf);
  auto err = nlohmann::json::parse(beast::buffers_to_string(buf.data()));
  EXPECT_EQ(err["frame_id"], 9);
  EXPECT_EQ(err["status"], 404);
  ws.close(websocket::close_code::normal);
  EXPECT_EQ(svc_->encoder_calls(), 1u);
}

}  // namespace
}  // namespace facade::servekit
