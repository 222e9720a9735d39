#include "httplib.h"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <thread>

#include "ehrcheck/llm_gateway.hpp"
#include "ehrcheck/text_util.hpp"

namespace ehrcheck {

using nlohmann::json;

struct RemoteBackend::Impl {
  BackendConfig cfg;
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // path prefix, no trailing slash
  std::counting_semaphore<1024> slots;
  std::mutex cache_mutex;
  std::unordered_map<std::string, std::string> cache;
  std::size_t hits = 0;

  explicit Impl(BackendConfig c) : cfg(std::move(c)), slots(std::min(cfg.max_concurrent_requests, 1024)) {
    auto scheme_end = cfg.endpoint_url.find("://");
    auto path_start = cfg.endpoint_url.find('/', scheme_end + 3);
    origin = cfg.endpoint_url.substr(0, path_start);
    base_path = path_start == std::string::npos ? "" : cfg.endpoint_url.substr(path_start);
    while (!base_path.empty() && base_path.back() == '/') base_path.pop_back();
    load_cache();
  }

  std::string cache_key(const std::string& text) const {
    return hex64(fnv1a(cfg.model + '\x1f' + std::to_string(cfg.temperature) + '\x1f' + text));
  }

  void load_cache() {
    if (cfg.cache_path.empty() || !std::filesystem::exists(cfg.cache_path)) return;
    std::ifstream in(cfg.cache_path);
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      auto j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("key") || !j.contains("response")) continue;
      cache[j["key"].get<std::string>()] = j["response"].get<std::string>();
    }
  }

  void store(const std::string& key, const std::string& response) {
    cache[key] = response;
    if (cfg.cache_path.empty()) return;
    std::ofstream out(cfg.cache_path, std::ios::app);
    out << json{{"key", key}, {"response", response}}.dump() << '\n';
  }

  std::string call(const std::string& text) {
    httplib::Client client(origin);
    const auto secs = cfg.timeout_ms / 1000;
    const auto usecs = (cfg.timeout_ms % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);
    auto body = chat_request_body(cfg, text).dump();

    int backoff = cfg.retry.initial_backoff_ms;
    for (int attempt = 1;; ++attempt) {
      std::optional<BackendError> failure;
      auto res = client.Post(base_path + "/chat/completions", headers, body, "application/json");
      if (!res) {
        auto err = res.error();
        bool timeout = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
        failure.emplace(timeout ? BackendError::Kind::Timeout : BackendError::Kind::Transport,
                        "request to " + origin + " failed: " + httplib::to_string(err));
      } else if (res->status == 200) {
        return chat_response_text(res->body);
      } else {
        failure.emplace(BackendError::Kind::Http, "HTTP " + std::to_string(res->status) + " from " + origin);
        bool retryable = res->status == 429 || res->status >= 500;
        if (!retryable) throw *failure;
      }
      if (attempt >= cfg.retry.max_attempts) throw *failure;
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff = static_cast<int>(backoff * cfg.retry.backoff_multiplier);
    }
  }
};

RemoteBackend::RemoteBackend(BackendConfig cfg) {
  cfg.validate();
  impl_ = std::make_unique<Impl>(std::move(cfg));
}

RemoteBackend::~RemoteBackend() = default;

std::size_t RemoteBackend::cache_hits() const {
  std::lock_guard lock(impl_->cache_mutex);
  return impl_->hits;
}

std::string RemoteBackend::complete(const PromptInstance& prompt) {
  const auto key = impl_->cache_key(prompt.rendered_text);
  {
    std::lock_guard lock(impl_->cache_mutex);
    auto it = impl_->cache.find(key);
    if (it != impl_->cache.end()) {
      ++impl_->hits;
      return it->second;
    }
  }
  impl_->slots.acquire();
  std::string response;
  try {
    response = impl_->call(prompt.rendered_text);
  } catch (...) {
    impl_->slots.release();
    throw;
  }
  impl_->slots.release();
  std::lock_guard lock(impl_->cache_mutex);
  impl_->store(key, response);
  return response;
}

}  // namespace ehrcheck
