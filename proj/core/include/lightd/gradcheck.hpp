#pragma once

// Central finite-difference checks of the analytic gradients, exposed for
// the `check-grad` CLI subcommand.

#include <cstdint>
#include <string>
#include <vector>

namespace lightd {

struct GradCheckReport {
  std::string module;
  int instances = 0;
  double step = 1e-3;
  double tolerance = 1e-3;
  /// Largest ||fd - analytic|| / max(||fd||, ||analytic||) over instances.
  double max_rel_error = 0.0;
  bool passed() const noexcept { return max_rel_error <= tolerance; }
};

/// Random parameters, sizes and upstream gradients; the weight is kept at
/// least 2 * step away from the ramp kink.
GradCheckReport check_lightgen_grad(std::uint64_t seed, int instances = 20);
/// Full lighting-image gradient of <relight(L, I), g> for the surrogate.
GradCheckReport check_relight_grad(std::uint64_t seed, int instances = 20);
/// Full image gradient of the surrogate victim's total J.
GradCheckReport check_victim_grad(std::uint64_t seed, int instances = 20);

std::vector<GradCheckReport> check_all_gradients(std::uint64_t seed, int instances = 20);

}  // namespace lightd
