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

#ifndef FACADE_SERVEKIT_SERVEKIT_H_
#define FACADE_SERVEKIT_SERVEKIT_H_

#include <torch/torch.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "facade/nets/nets.h"
#include "json.hpp"

namespace facade::servekit {

// Wire schema version carried by every request and response body.
inline constexpr int kApiVersion = 1;

// No model loaded (HTTP 503).
class Unavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TextureSession {
  std::string id;
  std::string image_sha256;
  torch::Tensor z;  // [C_z,h,w]
  std::chrono::system_clock::time_point created;
};

struct Health {
  std::string status;  // "ok" or "degraded"
  std::string checkpoint_sha256;
  std::size_t queue_depth = 0;
  double uptime_s = 0.0;
  std::size_t sessions = 0;
  std::uint64_t encoder_calls = 0;

  nlohmann::json to_json() const;
};

struct Throughput {
  std::uint64_t frames = 0;
  std::uint64_t batches = 0;
  double mean_batch = 0.0;
  double frames_per_s = 0.0;  // over generator busy time

  nlohmann::json to_json() const;
};

struct ServiceOptions {
  bool micro_batch = true;
  std::size_t max_batch = 8;
  std::chrono::microseconds batch_window{2000};
};

class TextureService {
 public:
  explicit TextureService(ServiceOptions options = {});
  ~TextureService();
  TextureService(const TextureService&) = delete;
  TextureService& operator=(const TextureService&) = delete;

  // Loads a checkpoint; the health hash is the file's SHA-256.
  void load_model(const std::filesystem::path& checkpoint);
  void set_model(nets::ModelBundle model, std::string checkpoint_sha256);
  bool ready() const;
  int image_size() const;

  // Decodes a PNG, resizes it to the model resolution and encodes it once.
  // The same bytes always map to the same session.
  std::shared_ptr<const TextureSession> register_texture(std::string_view png_bytes,
                                                         bool* created = nullptr);
  std::shared_ptr<const TextureSession> find_session(const std::string& id) const;

  // [3,H,W] in [-1,1]. Throws NotFound for unknown sessions and
  // Unprocessable for out-of-range views.
  torch::Tensor generate(const std::string& session_id, const viewgeom::ViewVectorPair& view);
  // Several requests through one forward pass (bypasses the queue).
  std::vector<torch::Tensor> generate_many(
      const std::vector<std::pair<std::string, viewgeom::ViewVectorPair>>& requests);
  std::string generate_png(const std::string& session_id, const viewgeom::ViewVectorPair& view,
                           std::optional<int> size = std::nullopt);

  std::uint64_t encoder_calls() const { return encoder_calls_.load(); }
  std::size_t queue_depth() const;
  Health health() const;
  Throughput throughput() const;
  std::string parameter_checksum() const;

 private:
  struct Job {
    std::shared_ptr<const TextureSession> session;
    viewgeom::ViewVectorPair view;
    std::promise<torch::Tensor> result;
  };
  struct Entry {
    std::shared_future<std::shared_ptr<const TextureSession>> ready;
  };

  torch::Tensor forward(const std::vector<const TextureSession*>& sessions,
                        const std::vector<viewgeom::ViewVectorPair>& views);
  void worker_loop();
  std::shared_ptr<const TextureSession> require_session(const std::string& id) const;
  viewgeom::ViewVectorPair checked_view(const viewgeom::ViewVectorPair& view) const;

  ServiceOptions options_;
  const std::chrono::steady_clock::time_point started_;

  mutable std::mutex model_mu_;  // guards model_ and every forward pass
  std::optional<nets::ModelBundle> model_;
  std::string checkpoint_sha256_;
  std::atomic<int> image_size_{0};

  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, Entry> sessions_;  // keyed by image SHA-256
  std::atomic<std::uint64_t> encoder_calls_{0};

  mutable std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<std::unique_ptr<Job>> queue_;
  bool stopping_ = false;
  std::thread worker_;

  std::atomic<std::uint64_t> frames_{0};
  std::atomic<std::uint64_t> batches_{0};
  std::atomic<std::int64_t> busy_ns_{0};
};

// Parses a view from a request body: "theta_h"/"theta_v" are numbers
// (constant vectors) or arrays (linearly resampled when their length
// differs from the model resolution). Throws InvalidArgument on malformed
// values and Unprocessable on entries outside [-1, 1].
viewgeom::ViewVectorPair parse_view(const nlohmann::json& body, int width, int height);

// Maps an exception to an HTTP status and a {"version","error":{kind,message}} body.
std::pair<int, nlohmann::json> error_response(const std::exception& e);

// JSON request handling shared by the HTTP routes and the stream channel.
// Returns (status, body).
std::pair<int, nlohmann::json> handle_register(TextureService& svc, const nlohmann::json& body);
std::pair<int, nlohmann::json> handle_generate(TextureService& svc, const nlohmann::json& body);
// Stream message {session_id, theta_h, theta_v, frame_id} -> {frame_id, png_b64}
// (or {frame_id, error}).
nlohmann::json handle_stream_message(TextureService& svc, const nlohmann::json& msg);

// HTTP/1.1 + WebSocket front end on one port:
//   POST /texture   {"version":1, "image_png_b64"}            -> {"session_id", ...}
//   POST /generate  {"version":1, "session_id", "theta_h", "theta_v", "size"?}
//                                                             -> {"png_b64", ...}
//   GET  /healthz, GET /throughput
//   WS   /stream    per-frame messages as handle_stream_message
class HttpServer {
 public:
  HttpServer(TextureService& service, std::string address, unsigned short port);
  ~HttpServer();
  void start();
  void stop();
  unsigned short port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  unsigned short port_ = 0;
};

}  // namespace facade::servekit

#endif  // FACADE_SERVEKIT_SERVEKIT_H_
