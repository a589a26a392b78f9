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

#include <algorithm>

#include "facade/common/codec.h"
#include "facade/common/errors.h"
#include "facade/common/image.h"
#include "facade/servekit/servekit.h"

namespace facade::servekit {

nlohmann::json Health::to_json() const {
  return {{"version", kApiVersion},       {"status", status},
          {"checkpoint_sha256", checkpoint_sha256}, {"queue_depth", queue_depth},
          {"uptime_s", uptime_s},          {"sessions", sessions},
          {"encoder_calls", encoder_calls}};
}

nlohmann::json Throughput::to_json() const {
  return {{"version", kApiVersion}, {"frames", frames},           {"batches", batches},
          {"mean_batch", mean_batch}, {"frames_per_s", frames_per_s}};
}

TextureService::TextureService(ServiceOptions options)
    : options_(options), started_(std::chrono::steady_clock::now()) {
  if (options_.max_batch == 0) throw InvalidArgument("max_batch must be positive");
  if (options_.micro_batch) worker_ = std::thread([this] { worker_loop(); });
}

TextureService::~TextureService() {
  {
    std::lock_guard lock(queue_mu_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

void TextureService::load_model(const std::filesystem::path& checkpoint) {
  auto model = nets::load_bundle(checkpoint);
  set_model(std::move(model), file_sha256_hex(checkpoint));
}

void TextureService::set_model(nets::ModelBundle model, std::string checkpoint_sha256) {
  for (auto& p : model.encoder->parameters()) p.requires_grad_(false);
  for (auto& p : model.generator->parameters()) p.requires_grad_(false);
  model.encoder->eval();
  model.generator->eval();
  std::lock_guard lock(model_mu_);
  image_size_ = model.config.image_size;
  model_ = std::move(model);
  checkpoint_sha256_ = std::move(checkpoint_sha256);
  std::unique_lock slock(sessions_mu_);
  sessions_.clear();  // latents belong to the previous model
}

bool TextureService::ready() const {
  std::lock_guard lock(model_mu_);
  return model_.has_value();
}

int TextureService::image_size() const { return image_size_.load(); }

std::shared_ptr<const TextureSession> TextureService::register_texture(std::string_view png_bytes,
                                                                     bool* created) {
  const std::string hash = sha256_hex(png_bytes);
  std::promise<std::shared_ptr<const TextureSession>> promise;
  std::shared_future<std::shared_ptr<const TextureSession>> ready;
  bool owner = false;
  {
    std::unique_lock lock(sessions_mu_);
    auto it = sessions_.find(hash);
    if (it == sessions_.end()) {
      ready = promise.get_future().share();
      sessions_.emplace(hash, Entry{ready});
      owner = true;
    } else {
      ready = it->second.ready;
    }
  }
  if (created) *created = owner;
  if (!owner) return ready.get();

  try {
    const Image8 img = decode_png(png_bytes);
    torch::Tensor z;
    {
      std::lock_guard lock(model_mu_);
      if (!model_) throw Unavailable("no model loaded");
      const int n = model_->config.image_size;
      auto x = resize_chw(image_to_tensor(img), n, n);
      torch::NoGradGuard no_grad;
      z = nets::encode(*model_, x);
      ++encoder_calls_;
    }
    auto s = std::make_shared<TextureSession>();
    s->id = hash.substr(0, 32);
    s->image_sha256 = hash;
    s->z = z;
    s->created = std::chrono::system_clock::now();
    promise.set_value(s);
    return s;
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::unique_lock lock(sessions_mu_);
    sessions_.erase(hash);
    throw;
  }
}

std::shared_ptr<const TextureSession> TextureService::find_session(const std::string& id) const {
  std::shared_lock lock(sessions_mu_);
  // Session ids are hash prefixes, so the lookup is a lower_bound.
  auto it = sessions_.lower_bound(id);
  if (it == sessions_.end() || it->first.compare(0, id.size(), id) != 0 || id.size() != 32) {
    return nullptr;
  }
  auto f = it->second.ready;
  lock.unlock();
  try {
    return f.get();
  } catch (...) {
    return nullptr;
  }
}

std::shared_ptr<const TextureSession> TextureService::require_session(const std::string& id) const {
  auto s = find_session(id);
  if (!s) throw NotFound("unknown session '" + id + "'");
  return s;
}

viewgeom::ViewVectorPair TextureService::checked_view(const viewgeom::ViewVectorPair& view) const {
  const int n = image_size();
  if (n == 0) throw Unavailable("no model loaded");
  try {
    viewgeom::check_view_range(view);
  } catch (const InvalidArgument& e) {
    throw Unprocessable(e.what());
  }
  if (static_cast<int>(view.theta_h.size()) != n || static_cast<int>(view.theta_v.size()) != n) {
    throw InvalidArgument("view vectors must have length " + std::to_string(n));
  }
  return view;
}

torch::Tensor TextureService::forward(const std::vector<const TextureSession*>& sessions,
                                      const std::vector<viewgeom::ViewVectorPair>& views) {
  const auto t0 = std::chrono::steady_clock::now();
  torch::Tensor out;
  {
    std::lock_guard lock(model_mu_);
    if (!model_) throw Unavailable("no model loaded");
    torch::NoGradGuard no_grad;
    if (sessions.size() == 1) {
      out = nets::generate(*model_, sessions[0]->z, views[0]).unsqueeze(0);
    } else {
      std::vector<torch::Tensor> zs;
      for (const auto* s : sessions) zs.push_back(s->z);
      out = nets::generate(*model_, torch::stack(zs), nets::ViewBatch::from_pairs(views));
    }
  }
  busy_ns_ += std::chrono::duration_cast<std::chrono::nanoseconds>(
                  std::chrono::steady_clock::now() - t0)
                  .count();
  frames_ += sessions.size();
  ++batches_;
  return out;
}

torch::Tensor TextureService::generate(const std::string& session_id,
                                       const viewgeom::ViewVectorPair& view) {
  if (image_size() == 0) throw Unavailable("no model loaded");
  auto session = require_session(session_id);
  auto v = checked_view(view);
  if (!options_.micro_batch) return forward({session.get()}, {v})[0];
  auto job = std::make_unique<Job>();
  job->session = std::move(session);
  job->view = std::move(v);
  auto fut = job->result.get_future();
  {
    std::lock_guard lock(queue_mu_);
    if (stopping_) throw Unavailable("service is shutting down");
    queue_.push_back(std::move(job));
  }
  queue_cv_.notify_one();
  return fut.get();
}

std::vector<torch::Tensor> TextureService::generate_many(
    const std::vector<std::pair<std::string, viewgeom::ViewVectorPair>>& requests) {
  if (requests.empty()) return {};
  if (image_size() == 0) throw Unavailable("no model loaded");
  std::vector<std::shared_ptr<const TextureSession>> keep;
  std::vector<const TextureSession*> sessions;
  std::vector<viewgeom::ViewVectorPair> views;
  for (const auto& [id, view] : requests) {
    keep.push_back(require_session(id));
    sessions.push_back(keep.back().get());
    views.push_back(checked_view(view));
  }
  auto out = forward(sessions, views);
  return out.unbind(0);
}

std::string TextureService::generate_png(const std::string& session_id,
                                         const viewgeom::ViewVectorPair& view,
                                         std::optional<int> size) {
  auto img = generate(session_id, view);
  if (size) {
    if (*size <= 0 || *size > 4096) throw Unprocessable("size must lie in [1, 4096]");
    if (*size != img.size(1)) img = resize_chw(img, *size, *size);
  }
  return encode_png(tensor_to_image(img));
}

void TextureService::worker_loop() {
  for (;;) {
    std::vector<std::unique_ptr<Job>> batch;
    {
      std::unique_lock lock(queue_mu_);
      queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_ && queue_.empty()) return;
      // Give concurrent callers a short window to join the batch.
      const auto deadline = std::chrono::steady_clock::now() + options_.batch_window;
      while (queue_.size() < options_.max_batch && !stopping_ &&
             queue_cv_.wait_until(lock, deadline) != std::cv_status::timeout) {
      }
      while (!queue_.empty() && batch.size() < options_.max_batch) {
        batch.push_back(std::move(queue_.front()));
        queue_.pop_front();
      }
    }
    std::vector<const TextureSession*> sessions;
    std::vector<viewgeom::ViewVectorPair> views;
    for (const auto& j : batch) {
      sessions.push_back(j->session.get());
      views.push_back(j->view);
    }
    try {
      auto out = forward(sessions, views);
      for (std::size_t i = 0; i < batch.size(); ++i) batch[i]->result.set_value(out[i]);
    } catch (...) {
      for (auto& j : batch) j->result.set_exception(std::current_exception());
    }
  }
}

std::size_t TextureService::queue_depth() const {
  std::lock_guard lock(queue_mu_);
  return queue_.size();
}

Health TextureService::health() const {
  Health h;
  {
    std::lock_guard lock(model_mu_);
    h.status = model_ ? "ok" : "degraded";
    h.checkpoint_sha256 = checkpoint_sha256_;
  }
  h.queue_depth = queue_depth();
  h.uptime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  {
    std::shared_lock lock(sessions_mu_);
    h.sessions = sessions_.size();
  }
  h.encoder_calls = encoder_calls_.load();
  return h;
}

Throughput TextureService::throughput() const {
  Throughput t;
  t.frames = frames_.load();
  t.batches = batches_.load();
  t.mean_batch = t.batches ? static_cast<double>(t.frames) / static_cast<double>(t.batches) : 0.0;
  const double busy = static_cast<double>(busy_ns_.load()) * 1e-9;
  t.frames_per_s = busy > 0 ? static_cast<double>(t.frames) / busy : 0.0;
  return t;
}

std::string TextureService::parameter_checksum() const {
  std::lock_guard lock(model_mu_);
  if (!model_) return "";
  return nets::parameter_checksum(*model_);
}

}  // namespace facade::servekit
