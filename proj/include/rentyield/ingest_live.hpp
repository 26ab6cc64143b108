#pragma once

// Live vendor fetching over HTTP(S) with bearer-token authorization and a
// shared rate limiter. HTTPS requires building with CPPHTTPLIB_OPENSSL_SUPPORT.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>

#include "rentyield/http.hpp"
#include "rentyield/error.hpp"
#include "rentyield/ingest.hpp"

namespace rentyield::ingest {

struct RateLimitPolicy {
  std::chrono::milliseconds min_interval{1000};  // 1 request per second
  std::chrono::milliseconds initial_backoff{1000};
  int max_retries = 4;  // on HTTP 429, doubling the backoff each time
};

// Spaces request starts at least min_interval apart across all callers.
class RateLimiter {
 public:
  explicit RateLimiter(RateLimitPolicy policy = {}) : policy_(policy) {}

  const RateLimitPolicy& policy() const { return policy_; }

  void acquire() {
    std::unique_lock lock(mutex_);
    const auto now = Clock::now();
    const auto slot = std::max(now, next_slot_);
    next_slot_ = slot + policy_.min_interval;
    lock.unlock();
    std::this_thread::sleep_until(slot);
  }

 private:
  using Clock = std::chrono::steady_clock;
  RateLimitPolicy policy_;
  std::mutex mutex_;
  Clock::time_point next_slot_{};
};

struct LiveSource {
  std::string base_url;
  std::string token;
};

// Reads YF_API_BASE / YF_API_TOKEN.
inline LiveSource live_source_from_env() {
  LiveSource s;
  if (const char* base = std::getenv("YF_API_BASE")) s.base_url = base;
  if (const char* token = std::getenv("YF_API_TOKEN")) s.token = token;
  return s;
}

inline RawPayload fetch_page(const SearchQuery& q, const LiveSource& source, RateLimiter& limiter) {
  if (source.token.empty()) fail(Errc::AuthError, "live mode requires an API token (YF_API_TOKEN)");
  const std::string url = build_query_url(q, source.base_url);

  const auto scheme_end = url.find("://") + 3;
  const auto path_start = url.find_first_of("/?", scheme_end);
  const std::string origin = url.substr(0, path_start);
  std::string target = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (target.front() == '?') target.insert(0, "/");

  std::unique_ptr<httplib::Client> client;
  try {
    client = std::make_unique<httplib::Client>(origin);
  } catch (const std::exception& e) {
    fail(Errc::NetworkError, std::string("cannot create client for ") + origin + ": " + e.what());
  }
  if (!client->is_valid()) fail(Errc::NetworkError, "unsupported endpoint " + origin);
  client->set_connection_timeout(std::chrono::seconds(10));
  client->set_read_timeout(std::chrono::seconds(30));
  const httplib::Headers headers{{"Authorization", "Bearer " + source.token}};

  auto backoff = limiter.policy().initial_backoff;
  for (int attempt = 0;; ++attempt) {
    limiter.acquire();
    auto res = client->Get(target, headers);
    if (!res) fail(Errc::NetworkError, "request to " + origin + " failed: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403)
      fail(Errc::AuthError, "vendor rejected credentials (HTTP " + std::to_string(res->status) + ")");
    if (res->status == 429) {
      if (attempt >= limiter.policy().max_retries)
        fail(Errc::RateLimited, "rate limited after " + std::to_string(attempt + 1) + " attempts");
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
      continue;
    }
    if (res->status < 200 || res->status >= 300)
      fail(Errc::NetworkError, "unexpected HTTP status " + std::to_string(res->status));
    if (res->body.empty()) fail(Errc::NetworkError, "empty response body");
    return RawPayload{res->body, std::chrono::system_clock::now(), q};
  }
}

}  // namespace rentyield::ingest
