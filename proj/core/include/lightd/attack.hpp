#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lightd/image.hpp"
#include "lightd/lightgen.hpp"
#include "lightd/recommender.hpp"
#include "lightd/relight.hpp"
#include "lightd/victim.hpp"

namespace lightd {

struct AttackConfig {
  static constexpr int kMaxResizeCount = 16;

  double param_step = 0.02;         // step on colors and weight
  double image_step = 1.0 / 255.0;  // step on lighting-image pixels
  int param_iters = 20;
  int image_iters = 40;
  int resize_count = 5;
  /// Empty means `resize_count` factors evenly spaced over [0.5, 1.5]
  /// (a single factor is 1.0).
  std::vector<double> scale_factors;
  std::uint64_t seed = 0;
  bool keep_best = true;

  /// Throws kInvalidArgument when a field is out of range.
  void validate() const;
  std::vector<double> effective_scales() const;
};

std::vector<double> default_scale_factors(int count);

/// alpha * sign(g) with sign(0) == 0.
std::vector<double> sign_step(std::span<const double> gradient, double alpha);

struct ParamSearchResult {
  LightingParams best;
  std::vector<LossBreakdown> trace;  // initial point plus one entry per step
  std::size_t best_index = 0;
  double best_j = 0.0;
};

struct ImageSearchResult {
  Image best;
  std::vector<LossBreakdown> trace;
  std::size_t best_index = 0;
  double best_j = 0.0;
};

/// Sign ascent on (start color, end color, weight) through
/// J(relight(generate(theta), I)). Direction stays fixed.
ParamSearchResult optimize_lighting_params(const AttackConfig& cfg,
                                           const RelightBackend& relighter,
                                           const VictimBackend& victim,
                                           const LightingParams& init,
                                           const Image& clean,
                                           std::string_view text);

/// Gradient of J at native resolution summed over resized copies of the
/// lighting image, pulled back through the resize adjoints.
GradientTensor multiscale_lighting_gradient(const AttackConfig& cfg,
                                            const RelightBackend& relighter,
                                            const VictimBackend& victim,
                                            const Image& lighting,
                                            const Image& clean,
                                            std::string_view text,
                                            LossBreakdown* native_loss);

/// Multi-resolution sign ascent on the lighting image itself.
ImageSearchResult optimize_lighting_image_sga(const AttackConfig& cfg,
                                              const RelightBackend& relighter,
                                              const VictimBackend& victim,
                                              const Image& initial_lighting,
                                              const Image& clean,
                                              std::string_view text);

/// L <- clamp(L + alpha * sign(direction)).
void apply_sign_step(Image& lighting, std::span<const float> direction, double alpha);

struct AttackResult {
  Recommendation recommendation;
  LightingParams final_lighting;
  Image final_lighting_image;
  Image final_relit;
  std::vector<LossBreakdown> param_trace;
  std::vector<LossBreakdown> image_trace;
  LossBreakdown initial_loss;
  LossBreakdown best_loss;
  double params_best_j = 0.0;
  double best_j = 0.0;
  int iterations_used = 0;
  std::string relight_id;
  std::string victim_id;

  /// Both traces, parameter stage first.
  std::vector<LossBreakdown> j_trace() const;
};

/// Recommend -> parameter ascent -> render -> lighting-image ascent -> relight.
AttackResult run_lightd(const AttackConfig& cfg, const RelightBackend& relighter,
                        const VictimBackend& victim, const Recommender& recommender,
                        const Image& clean, std::string_view text,
                        std::string_view summary);

}  // namespace lightd
