#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "lightd/image.hpp"

namespace lightd {

namespace detail {
class JsonHttpClient;
}

/// Relighting model: R = M(L, I), with an optional vector-Jacobian product
/// with respect to the lighting image L.
class RelightBackend {
 public:
  virtual ~RelightBackend() = default;

  virtual std::string id() const = 0;
  virtual bool has_vjp() const = 0;

  virtual Image relight(const Image& lighting, const Image& clean,
                        std::uint64_t seed = 0) const = 0;
  virtual GradientTensor relight_vjp(const Image& lighting, const Image& clean,
                                     const GradientTensor& grad_relit,
                                     std::uint64_t seed = 0) const = 0;
};

struct SurrogateRelightConfig {
  double floor = 0.3;
  double gain = 0.7;

  /// floor >= 0, gain >= 0, floor + gain <= 1.
  bool valid() const noexcept;
};

/// R = I * (floor + gain * L), elementwise. Differentiable everywhere.
class SurrogateRelighter final : public RelightBackend {
 public:
  explicit SurrogateRelighter(SurrogateRelightConfig config = {});

  std::string id() const override;
  bool has_vjp() const override { return true; }

  Image relight(const Image& lighting, const Image& clean,
                std::uint64_t seed = 0) const override;
  GradientTensor relight_vjp(const Image& lighting, const Image& clean,
                             const GradientTensor& grad_relit,
                             std::uint64_t seed = 0) const override;

  const SurrogateRelightConfig& config() const noexcept { return config_; }

 private:
  SurrogateRelightConfig config_;
};

struct RemoteEndpointConfig {
  std::string url;  // e.g. "http://127.0.0.1:8765"
  std::chrono::milliseconds timeout{120000};
  int max_in_flight = 4;
};

struct BackendHealth {
  std::string status;
  std::map<std::string, std::string> models;  // role -> model id
};

/// GET /health on a model server. Same error mapping as the POST clients.
BackendHealth probe_health(const RemoteEndpointConfig& config);

/// Client for POST /relight and POST /relight_vjp. VJPs from a remote model
/// may be approximate; approx_vjp_seen() reports whether the server ever
/// flagged one as such.
class RemoteRelighter final : public RelightBackend {
 public:
  explicit RemoteRelighter(RemoteEndpointConfig config);
  ~RemoteRelighter() override;

  std::string id() const override;
  bool has_vjp() const override { return true; }

  Image relight(const Image& lighting, const Image& clean,
                std::uint64_t seed = 0) const override;
  GradientTensor relight_vjp(const Image& lighting, const Image& clean,
                             const GradientTensor& grad_relit,
                             std::uint64_t seed = 0) const override;

  bool approx_vjp_seen() const noexcept { return approx_seen_.load(); }

 private:
  RemoteEndpointConfig config_;
  std::unique_ptr<detail::JsonHttpClient> client_;
  mutable std::atomic<bool> approx_seen_{false};
};

}  // namespace lightd
