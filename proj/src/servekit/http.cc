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

#include <sys/socket.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <cmath>
#include <map>

#include "facade/common/codec.h"
#include "facade/common/errors.h"
#include "facade/servekit/servekit.h"

namespace facade::servekit {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

// ---- request handling ------------------------------------------------------------

namespace {

std::vector<float> parse_axis(const nlohmann::json& body, const char* key, int n) {
  if (!body.contains(key)) throw InvalidArgument(std::string("missing '") + key + "'");
  const auto& v = body.at(key);
  auto value = [key](const nlohmann::json& x) {
    if (!x.is_number()) throw InvalidArgument(std::string("'") + key + "' must hold numbers");
    const double d = x.get<double>();
    if (!std::isfinite(d) || d < -1.0 || d > 1.0) {
      throw Unprocessable(std::string("'") + key + "' entries must lie in [-1, 1]");
    }
    return static_cast<float>(d);
  };
  if (v.is_number()) return std::vector<float>(static_cast<std::size_t>(n), value(v));
  if (!v.is_array() || v.empty()) {
    throw InvalidArgument(std::string("'") + key + "' must be a number or a non-empty array");
  }
  std::vector<float> out;
  for (const auto& x : v) out.push_back(value(x));
  if (static_cast<int>(out.size()) != n) out = viewgeom::resample_linear(out, n);
  return out;
}

void check_version(const nlohmann::json& body) {
  if (!body.is_object()) throw InvalidArgument("body must be a JSON object");
  if (body.contains("version") && body.at("version") != kApiVersion) {
    throw InvalidArgument("unsupported API version (expected " + std::to_string(kApiVersion) + ")");
  }
}

std::string required_string(const nlohmann::json& body, const char* key) {
  if (!body.contains(key) || !body.at(key).is_string()) {
    throw InvalidArgument(std::string("'") + key + "' must be a string");
  }
  return body.at(key).get<std::string>();
}

}  // namespace

viewgeom::ViewVectorPair parse_view(const nlohmann::json& body, int width, int height) {
  viewgeom::ViewVectorPair v;
  v.theta_h = parse_axis(body, "theta_h", width);
  v.theta_v = parse_axis(body, "theta_v", height);
  return v;
}

std::pair<int, nlohmann::json> error_response(const std::exception& e) {
  int status = 500;
  if (dynamic_cast<const Unprocessable*>(&e)) {
    status = 422;
  } else if (dynamic_cast<const std::invalid_argument*>(&e) ||
             dynamic_cast<const nlohmann::json::exception*>(&e)) {
    status = 400;
  } else if (dynamic_cast<const NotFound*>(&e)) {
    status = 404;
  } else if (dynamic_cast<const Unavailable*>(&e)) {
    status = 503;
  }
  const char* kind = dynamic_cast<const Unavailable*>(&e)          ? "unavailable"
                     : dynamic_cast<const nlohmann::json::exception*>(&e) ? "invalid-argument"
                                                                          : error_kind(e);
  return {status, {{"version", kApiVersion}, {"error", {{"kind", kind}, {"message", e.what()}}}}};
}

std::pair<int, nlohmann::json> handle_register(TextureService& svc, const nlohmann::json& body) {
  check_version(body);
  const std::string png = base64_decode(required_string(body, "image_png_b64"));
  bool created = false;
  auto s = svc.register_texture(png, &created);
  return {200,
          {{"version", kApiVersion},
           {"session_id", s->id},
           {"image_sha256", s->image_sha256},
           {"created", created}}};
}

std::pair<int, nlohmann::json> handle_generate(TextureService& svc, const nlohmann::json& body) {
  check_version(body);
  const std::string id = required_string(body, "session_id");
  const int n = svc.image_size();
  if (n == 0) throw Unavailable("no model loaded");
  auto view = parse_view(body, n, n);
  std::optional<int> size;
  if (body.contains("size")) {
    if (!body.at("size").is_number_integer()) throw InvalidArgument("'size' must be an integer");
    size = body.at("size").get<int>();
  }
  const std::string png = svc.generate_png(id, view, size);
  const int out = size.value_or(n);
  return {200,
          {{"version", kApiVersion}, {"png_b64", base64_encode(png)}, {"width", out}, {"height", out}}};
}

nlohmann::json handle_stream_message(TextureService& svc, const nlohmann::json& msg) {
  nlohmann::json frame_id = msg.is_object() && msg.contains("frame_id") ? msg.at("frame_id")
                                                                        : nlohmann::json();
  try {
    if (!msg.is_object()) throw InvalidArgument("message must be a JSON object");
    const std::string id = required_string(msg, "session_id");
    const int n = svc.image_size();
    if (n == 0) throw Unavailable("no model loaded");
    const std::string png = svc.generate_png(id, parse_view(msg, n, n));
    return {{"frame_id", frame_id}, {"png_b64", base64_encode(png)}};
  } catch (const std::exception& e) {
    auto [status, body] = error_response(e);
    body["frame_id"] = frame_id;
    body["status"] = status;
    return body;
  }
}

// ---- server ----------------------------------------------------------------------

namespace {

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

Response json_response(const Request& req, int status, const nlohmann::json& body) {
  Response res{static_cast<http::status>(status), req.version()};
  res.set(http::field::content_type, "application/json");
  res.keep_alive(req.keep_alive());
  res.body() = body.dump();
  res.prepare_payload();
  return res;
}

Response route(TextureService& svc, const Request& req) {
  const auto target = std::string(req.target());
  try {
    if (req.method() == http::verb::get && target == "/healthz") {
      return json_response(req, 200, svc.health().to_json());
    }
    if (req.method() == http::verb::get && target == "/throughput") {
      return json_response(req, 200, svc.throughput().to_json());
    }
    if (req.method() == http::verb::post && (target == "/texture" || target == "/generate")) {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body());
      } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(std::string("malformed JSON body: ") + e.what());
      }
      auto [status, out] = target == "/texture" ? handle_register(svc, body)
                                                : handle_generate(svc, body);
      return json_response(req, status, out);
    }
    return json_response(req, 404,
                         {{"version", kApiVersion},
                          {"error", {{"kind", "not-found"}, {"message", "no route " + target}}}});
  } catch (const std::exception& e) {
    auto [status, body] = error_response(e);
    return json_response(req, status, body);
  }
}

}  // namespace

struct HttpServer::Impl {
  TextureService& svc;
  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::thread accept_thread;
  std::mutex mu;
  std::vector<std::thread> workers;
  std::map<std::uint64_t, int> open_fds;  // connection id -> socket
  std::uint64_t next_id = 0;
  std::atomic<bool> running{false};

  explicit Impl(TextureService& s) : svc(s) {}

  void untrack(std::uint64_t id) {
    std::lock_guard lock(mu);
    open_fds.erase(id);
  }

  void serve_stream(tcp::socket socket, const Request& req, std::uint64_t id) {
    websocket::stream<tcp::socket> ws(std::move(socket));
    struct Untrack {
      Impl* self;
      std::uint64_t id;
      ~Untrack() { self->untrack(id); }
    } untrack_on_exit{this, id};
    beast::error_code ec;
    ws.accept(req, ec);
    if (ec) return;
    for (;;) {
      beast::flat_buffer buf;
      ws.read(buf, ec);
      if (ec) return;
      nlohmann::json reply;
      try {
        reply = handle_stream_message(svc, nlohmann::json::parse(beast::buffers_to_string(buf.data())));
      } catch (const nlohmann::json::parse_error& e) {
        reply = {{"frame_id", nullptr},
                 {"status", 400},
                 {"version", kApiVersion},
                 {"error", {{"kind", "invalid-argument"}, {"message", e.what()}}}};
      }
      ws.text(true);
      ws.write(asio::buffer(reply.dump()), ec);
      if (ec) return;
    }
  }

  void serve(tcp::socket socket, std::uint64_t id) {
    beast::flat_buffer buffer;
    beast::error_code ec;
    for (;;) {
      http::request_parser<http::string_body> parser;
      parser.body_limit(32u << 20);
      http::read(socket, buffer, parser, ec);
      if (ec) break;
      Request req = parser.release();
      if (websocket::is_upgrade(req)) {
        if (req.target() == "/stream") {
          serve_stream(std::move(socket), req, id);
          return;
        }
        break;
      }
      auto res = route(svc, req);
      http::write(socket, res, ec);
      if (ec || !res.keep_alive()) break;
    }
    socket.shutdown(tcp::socket::shutdown_send, ec);
    untrack(id);
  }

  void accept_loop() {
    while (running) {
      beast::error_code ec;
      tcp::socket socket(io);
      acceptor.accept(socket, ec);
      if (ec) {
        if (!running) return;
        continue;
      }
      std::lock_guard lock(mu);
      const std::uint64_t id = next_id++;
      open_fds.emplace(id, socket.native_handle());
      workers.emplace_back(
          [this, id, s = std::move(socket)]() mutable { serve(std::move(s), id); });
    }
  }
};

HttpServer::HttpServer(TextureService& service, std::string address, unsigned short port)
    : impl_(std::make_unique<Impl>(service)) {
  tcp::endpoint ep(asio::ip::make_address(address), port);
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
  impl_->acceptor.bind(ep);
  impl_->acceptor.listen();
  port_ = impl_->acceptor.local_endpoint().port();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
  if (impl_->running.exchange(true)) return;
  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void HttpServer::stop() {
  if (!impl_->running.exchange(false)) return;
  ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
  beast::error_code ec;
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  impl_->acceptor.close(ec);
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(impl_->mu);
    for (const auto& [id, fd] : impl_->open_fds) ::shutdown(fd, SHUT_RDWR);
    workers.swap(impl_->workers);
  }
  for (auto& t : workers) t.join();
}

}  // namespace facade::servekit
