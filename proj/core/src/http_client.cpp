#include "http_client.hpp"

#include "httplib.h"
#include "lightd/error.hpp"

namespace lightd::detail {
namespace {

class GateHold {
 public:
  explicit GateHold(std::counting_semaphore<JsonHttpClient::kMaxInFlightLimit>& s)
      : s_(s) {
    s_.acquire();
  }
  ~GateHold() { s_.release(); }
  GateHold(const GateHold&) = delete;
  GateHold& operator=(const GateHold&) = delete;

 private:
  std::counting_semaphore<JsonHttpClient::kMaxInFlightLimit>& s_;
};

nlohmann::json handle(const httplib::Result& res, const std::string& what) {
  if (!res) {
    throw Error(ErrorCode::kBackendUnavailable,
                what + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    std::string message = "HTTP " + std::to_string(res->status);
    auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_object() && body.contains("message") && body["message"].is_string()) {
      message += " " + body.value("code", std::string("error")) + ": " +
                 body["message"].get<std::string>();
    }
    throw Error(ErrorCode::kBackendError, what + ": " + message);
  }
  auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded()) {
    throw Error(ErrorCode::kBackendError, what + ": response is not JSON");
  }
  return body;
}

}  // namespace

JsonHttpClient::JsonHttpClient(HttpClientOptions options)
    : options_(std::move(options)) {
  if (options_.base_url.empty()) throw_invalid("http client: empty endpoint URL");
  if (options_.max_in_flight < 1 || options_.max_in_flight > kMaxInFlightLimit) {
    throw_invalid("http client: max_in_flight must be in [1, 1024]");
  }
  if (options_.timeout.count() <= 0) throw_invalid("http client: timeout must be positive");
  gate_ = std::make_unique<std::counting_semaphore<kMaxInFlightLimit>>(
      options_.max_in_flight);
}

nlohmann::json JsonHttpClient::post(
    const std::string& path, const nlohmann::json& body,
    const std::map<std::string, std::string>& headers) const {
  GateHold hold(*gate_);
  httplib::Client client(options_.base_url);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path, h, body.dump(), "application/json");
  return handle(res, "POST " + options_.base_url + path);
}

nlohmann::json JsonHttpClient::get(const std::string& path) const {
  GateHold hold(*gate_);
  httplib::Client client(options_.base_url);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  auto res = client.Get(path);
  return handle(res, "GET " + options_.base_url + path);
}

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw_invalid("malformed URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace lightd::detail
