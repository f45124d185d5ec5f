#include "lightd/relight.hpp"

#include <algorithm>
#include <cstdio>

#include "http_client.hpp"
#include "lightd/error.hpp"
#include "wire.hpp"

namespace lightd {

bool SurrogateRelightConfig::valid() const noexcept {
  return floor >= 0.0 && gain >= 0.0 && floor + gain <= 1.0;
}

SurrogateRelighter::SurrogateRelighter(SurrogateRelightConfig config)
    : config_(config) {
  if (!config_.valid()) {
    throw_invalid("surrogate relight: need floor >= 0, gain >= 0, floor + gain <= 1");
  }
}

std::string SurrogateRelighter::id() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "surrogate-relight(floor=%g,gain=%g)",
                config_.floor, config_.gain);
  return buf;
}

Image SurrogateRelighter::relight(const Image& lighting, const Image& clean,
                                  std::uint64_t /*seed*/) const {
  if (lighting.shape() != clean.shape()) {
    throw_invalid("relight: lighting and clean image shapes differ");
  }
  Image out = clean;
  auto o = out.data();
  const auto l = lighting.data();
  const auto i = clean.data();
  for (std::size_t k = 0; k < o.size(); ++k) {
    const double v = static_cast<double>(i[k]) * (config_.floor + config_.gain * l[k]);
    o[k] = std::clamp(static_cast<float>(v), 0.0f, 1.0f);
  }
  return out;
}

GradientTensor SurrogateRelighter::relight_vjp(const Image& lighting,
                                               const Image& clean,
                                               const GradientTensor& grad_relit,
                                               std::uint64_t /*seed*/) const {
  if (lighting.shape() != clean.shape() || grad_relit.shape() != clean.shape()) {
    throw_invalid("relight_vjp: shape mismatch");
  }
  GradientTensor out(clean.shape());
  auto o = out.data();
  const auto g = grad_relit.data();
  const auto i = clean.data();
  for (std::size_t k = 0; k < o.size(); ++k) {
    o[k] = static_cast<float>(static_cast<double>(g[k]) * config_.gain * i[k]);
  }
  return out;
}

BackendHealth probe_health(const RemoteEndpointConfig& config) {
  const detail::JsonHttpClient client(
      detail::HttpClientOptions{config.url, config.timeout, config.max_in_flight});
  const auto res = client.get("/health");
  if (!res.is_object() || !res.contains("status") || !res["status"].is_string()) {
    throw Error(ErrorCode::kBackendError, "/health: response lacks \"status\"");
  }
  BackendHealth h;
  h.status = res["status"].get<std::string>();
  if (res.contains("models") && res["models"].is_object()) {
    for (const auto& [role, id] : res["models"].items()) {
      if (id.is_string()) h.models[role] = id.get<std::string>();
    }
  }
  return h;
}

RemoteRelighter::RemoteRelighter(RemoteEndpointConfig config)
    : config_(std::move(config)),
      client_(std::make_unique<detail::JsonHttpClient>(detail::HttpClientOptions{
          config_.url, config_.timeout, config_.max_in_flight})) {}

RemoteRelighter::~RemoteRelighter() = default;

std::string RemoteRelighter::id() const { return "remote-relight(" + config_.url + ")"; }

Image RemoteRelighter::relight(const Image& lighting, const Image& clean,
                               std::uint64_t seed) const {
  const nlohmann::json req = {{"lighting", wire::encode_tensor(lighting)},
                              {"image", wire::encode_tensor(clean)},
                              {"seed", seed}};
  const auto res = client_->post("/relight", req);
  if (!res.contains("relit")) {
    throw Error(ErrorCode::kBackendError, "/relight: response lacks \"relit\"");
  }
  Image out = wire::decode_image(res["relit"]);
  if (out.shape() != clean.shape()) {
    throw Error(ErrorCode::kBackendError, "/relight: relit shape differs from image");
  }
  return out;
}

GradientTensor RemoteRelighter::relight_vjp(const Image& lighting,
                                            const Image& clean,
                                            const GradientTensor& grad_relit,
                                            std::uint64_t seed) const {
  const nlohmann::json req = {{"lighting", wire::encode_tensor(lighting)},
                              {"image", wire::encode_tensor(clean)},
                              {"grad_out", wire::encode_tensor(grad_relit)},
                              {"seed", seed}};
  const auto res = client_->post("/relight_vjp", req);
  if (!res.contains("grad_lighting")) {
    throw Error(ErrorCode::kBackendError,
                "/relight_vjp: response lacks \"grad_lighting\"");
  }
  if (res.value("approx", false)) approx_seen_.store(true);
  GradientTensor g = wire::decode_gradient(res["grad_lighting"]);
  if (g.shape() != lighting.shape()) {
    throw Error(ErrorCode::kBackendError,
                "/relight_vjp: gradient shape differs from lighting image");
  }
  return g;
}

}  // namespace lightd
