#pragma once

// Adapting classifier-style perturbation attacks to the J objective: instead
// of stopping once a label flips, candidates are scored by J and the best
// one is kept.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "lightd/image.hpp"
#include "lightd/victim.hpp"

namespace lightd {

/// Emits perturbed versions of a clean image. Returns nullopt when the
/// stream is exhausted.
class CandidateGenerator {
 public:
  virtual ~CandidateGenerator() = default;
  virtual std::string name() const = 0;
  virtual std::optional<Image> next(const Image& clean) = 0;
};

using Matrix3 = std::array<std::array<double, 3>, 3>;

/// out_c = in_c ^ gamma_c
Image apply_gamma(const Image& img, const std::array<double, 3>& gamma);
/// out = clamp(C * in) per pixel.
Image apply_color_filter(const Image& img, const Matrix3& filter);

/// Per-channel gamma drawn log-uniformly from [0.5, 2].
class GammaLite final : public CandidateGenerator {
 public:
  explicit GammaLite(std::uint64_t seed) : rng_(seed) {}
  std::string name() const override { return "gamma_lite"; }
  std::optional<Image> next(const Image& clean) override;

 private:
  std::mt19937_64 rng_;
};

/// 3x3 color filter with entries Id + U(-0.3, 0.3).
class ColorFilterLite final : public CandidateGenerator {
 public:
  static constexpr double kMaxDeviation = 0.3;

  explicit ColorFilterLite(std::uint64_t seed) : rng_(seed) {}
  std::string name() const override { return "color_filter_lite"; }
  std::optional<Image> next(const Image& clean) override;

 private:
  std::mt19937_64 rng_;
};

struct TransferResult {
  Image best;
  double best_j = 0.0;
  double initial_j = 0.0;
  int evaluated = 0;  // candidates drawn from the generator
};

/// Scores up to `budget` candidates by J(candidate, clean, text) and keeps
/// the argmax, starting from the clean image itself.
TransferResult adapt_classifier_attack(CandidateGenerator& generator,
                                       const VictimBackend& victim,
                                       const Image& clean, std::string_view text,
                                       int budget);

}  // namespace lightd
