#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lightd/image.hpp"
#include "lightd/relight.hpp"

namespace lightd {

namespace detail {
class JsonHttpClient;
}

/// J = match_term + nat_term. The attacker maximizes total.
struct LossBreakdown {
  double total = 0.0;
  double match_term = 0.0;
  double nat_term = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

struct LossAndGrad {
  LossBreakdown loss;
  GradientTensor grad;  // d total / d relit image
};

class VictimBackend {
 public:
  virtual ~VictimBackend() = default;

  virtual std::string id() const = 0;
  virtual bool has_grad() const = 0;

  virtual LossBreakdown loss(const Image& relit, const Image& clean,
                             std::string_view text) const = 0;
  virtual LossAndGrad loss_grad(const Image& relit, const Image& clean,
                                std::string_view text) const = 0;
};

struct EmbedderConfig {
  int patch_size = 16;
  int embed_dim = 64;
  std::uint64_t image_seed = 1;
  std::uint64_t text_seed = 2;
};

/// Seeded linear image/text encoder. Images are resized to P x P, flattened
/// and projected; text is hashed into character-trigram buckets and
/// projected. Both outputs are L2-normalized. Immutable after construction.
class SurrogateEmbedder {
 public:
  explicit SurrogateEmbedder(EmbedderConfig config = {});

  const EmbedderConfig& config() const noexcept { return config_; }
  int input_dim() const noexcept { return 3 * config_.patch_size * config_.patch_size; }

  std::vector<double> embed_image(const Image& img) const;
  std::vector<double> embed_text(std::string_view text) const;

  /// Value and image-gradient of cos(embed_image(img), target) for any
  /// nonzero `target`.
  double cosine_to(const Image& img, std::span<const double> target,
                   GradientTensor* grad) const;

 private:
  std::vector<double> project(const std::vector<double>& matrix,
                              std::span<const double> x) const;

  EmbedderConfig config_;
  std::vector<double> image_proj_;  // D x 3P^2, row-major
  std::vector<double> text_proj_;
};

/// Lowercase + collapse whitespace + trim.
std::string normalize_text(std::string_view text);

/// Character trigram bucket counts (64-bit FNV-1a, modulo `buckets`) of the
/// normalized text padded with one space on each side.
std::vector<double> trigram_features(std::string_view normalized, int buckets);

struct SurrogateVictimConfig {
  EmbedderConfig match{16, 64, 1, 2};
  EmbedderConfig naturalness{16, 64, 3, 4};
  double nat_weight = 1.0;
};

/// match_term = 1 - cos(f(R), text(T)); nat_term = nat_weight * cos(h(R), h(I)).
class SurrogateVictim final : public VictimBackend {
 public:
  explicit SurrogateVictim(SurrogateVictimConfig config = {});

  std::string id() const override;
  bool has_grad() const override { return true; }

  LossBreakdown loss(const Image& relit, const Image& clean,
                     std::string_view text) const override;
  LossAndGrad loss_grad(const Image& relit, const Image& clean,
                        std::string_view text) const override;

  /// Per-term value and gradient, for gradient checks.
  double match_term(const Image& relit, std::string_view text,
                    GradientTensor* grad) const;
  double nat_term(const Image& relit, const Image& clean,
                  GradientTensor* grad) const;

  const SurrogateEmbedder& match_embedder() const noexcept { return match_; }
  const SurrogateEmbedder& nat_embedder() const noexcept { return nat_; }
  const SurrogateVictimConfig& config() const noexcept { return config_; }

 private:
  SurrogateVictimConfig config_;
  SurrogateEmbedder match_;
  SurrogateEmbedder nat_;
};

/// Client for POST /loss_grad.
class RemoteVictim final : public VictimBackend {
 public:
  explicit RemoteVictim(RemoteEndpointConfig config);
  ~RemoteVictim() override;

  std::string id() const override;
  bool has_grad() const override { return true; }

  LossBreakdown loss(const Image& relit, const Image& clean,
                     std::string_view text) const override;
  LossAndGrad loss_grad(const Image& relit, const Image& clean,
                        std::string_view text) const override;

 private:
  RemoteEndpointConfig config_;
  std::unique_ptr<detail::JsonHttpClient> client_;
};

}  // namespace lightd
