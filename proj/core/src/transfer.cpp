#include "lightd/transfer.hpp"

#include <algorithm>
#include <cmath>

#include "lightd/error.hpp"

namespace lightd {

Image apply_gamma(const Image& img, const std::array<double, 3>& gamma) {
  for (double g : gamma) {
    if (!(g > 0.0) || !std::isfinite(g)) throw_invalid("apply_gamma: gamma must be positive");
  }
  Image out = img;
  auto d = out.data();
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double g = gamma[k % 3];
    d[k] = g == 1.0 ? d[k] : static_cast<float>(std::pow(static_cast<double>(d[k]), g));
  }
  out.clamp();
  return out;
}

Image apply_color_filter(const Image& img, const Matrix3& filter) {
  Image out = img;
  auto d = out.data();
  const auto src = img.data();
  for (std::size_t p = 0; p < d.size(); p += 3) {
    for (int r = 0; r < 3; ++r) {
      double v = 0.0;
      for (int c = 0; c < 3; ++c) v += filter[r][c] * src[p + c];
      d[p + r] = static_cast<float>(v);
    }
  }
  out.clamp();
  return out;
}

std::optional<Image> GammaLite::next(const Image& clean) {
  std::uniform_real_distribution<double> log_gamma(std::log(0.5), std::log(2.0));
  std::array<double, 3> gamma{};
  for (double& g : gamma) g = std::exp(log_gamma(rng_));
  return apply_gamma(clean, gamma);
}

std::optional<Image> ColorFilterLite::next(const Image& clean) {
  std::uniform_real_distribution<double> jitter(-kMaxDeviation, kMaxDeviation);
  Matrix3 m{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m[r][c] = (r == c ? 1.0 : 0.0) + jitter(rng_);
  }
  return apply_color_filter(clean, m);
}

TransferResult adapt_classifier_attack(CandidateGenerator& generator,
                                       const VictimBackend& victim,
                                       const Image& clean, std::string_view text,
                                       int budget) {
  if (budget < 0) throw_invalid("adapt_classifier_attack: budget must be >= 0");
  TransferResult out;
  out.best = clean;
  out.initial_j = victim.loss(clean, clean, text).total;
  out.best_j = out.initial_j;
  for (int i = 0; i < budget; ++i) {
    std::optional<Image> candidate = generator.next(clean);
    if (!candidate) break;
    ++out.evaluated;
    const double j = victim.loss(*candidate, clean, text).total;
    if (j > out.best_j) {
      out.best_j = j;
      out.best = std::move(*candidate);
    }
  }
  return out;
}

}  // namespace lightd
