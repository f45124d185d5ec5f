#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <semaphore>
#include <string>

#include "json.hpp"

namespace lightd::detail {

struct HttpClientOptions {
  std::string base_url;  // scheme://host[:port]
  std::chrono::milliseconds timeout{60000};
  int max_in_flight = 4;
};

/// JSON-over-HTTP POST helper with a bound on concurrent requests. Safe to
/// share between threads; each request opens its own connection.
class JsonHttpClient {
 public:
  static constexpr int kMaxInFlightLimit = 1024;

  explicit JsonHttpClient(HttpClientOptions options);

  /// Throws kBackendUnavailable on transport failure and kBackendError on a
  /// non-2xx status (message taken from the {code, message} body).
  nlohmann::json post(const std::string& path, const nlohmann::json& body,
                      const std::map<std::string, std::string>& headers = {}) const;

  /// Issues GET; same error mapping as post().
  nlohmann::json get(const std::string& path) const;

  const std::string& base_url() const noexcept { return options_.base_url; }

 private:
  HttpClientOptions options_;
  std::unique_ptr<std::counting_semaphore<kMaxInFlightLimit>> gate_;
};

/// Splits "https://host:port/v1/chat" into ("https://host:port", "/v1/chat").
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace lightd::detail
