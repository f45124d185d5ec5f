#include "lightd/attack.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "lightd/error.hpp"

namespace lightd {
namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Re-raises a toolkit error with a context prefix, keeping its code.
template <typename Fn>
auto with_context(const std::string& context, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), context + ": " + e.what());
  }
}

void check_finite(const LossBreakdown& loss) {
  if (!std::isfinite(loss.total) || !std::isfinite(loss.match_term) ||
      !std::isfinite(loss.nat_term)) {
    throw Error(ErrorCode::kNonFiniteLoss,
                "non-finite loss (match=" + std::to_string(loss.match_term) +
                    ", nat=" + std::to_string(loss.nat_term) + ")");
  }
}

std::array<double, 7> flatten(const LightingParamsGrad& g) {
  return {g.start_color[0], g.start_color[1], g.start_color[2], g.end_color[0],
          g.end_color[1],   g.end_color[2],   g.weight};
}

void require_gradients(const RelightBackend& relighter, const VictimBackend& victim) {
  if (!relighter.has_vjp()) {
    throw Error(ErrorCode::kUnsupportedCapability,
                relighter.id() + " does not provide relight_vjp");
  }
  if (!victim.has_grad()) {
    throw Error(ErrorCode::kUnsupportedCapability,
                victim.id() + " does not provide loss gradients");
  }
}

}  // namespace

std::vector<double> default_scale_factors(int count) {
  if (count < 1) throw_invalid("scale factor count must be >= 1");
  if (count == 1) return {1.0};
  std::vector<double> s(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) s[j] = 0.5 + static_cast<double>(j) / (count - 1);
  return s;
}

void AttackConfig::validate() const {
  if (!(param_step >= 0.0) || !(image_step >= 0.0) || !std::isfinite(param_step) ||
      !std::isfinite(image_step)) {
    throw_invalid("attack config: step sizes must be finite and non-negative");
  }
  if (param_iters < 0 || image_iters < 0) {
    throw_invalid("attack config: iteration counts must be >= 0");
  }
  if (resize_count < 1 || resize_count > kMaxResizeCount) {
    throw_invalid("attack config: resize_count must be in [1, 16]");
  }
  if (!scale_factors.empty()) {
    if (static_cast<int>(scale_factors.size()) != resize_count) {
      throw_invalid("attack config: scale_factors must have resize_count entries");
    }
    for (double s : scale_factors) {
      if (!(s > 0.0) || !std::isfinite(s)) {
        throw_invalid("attack config: scale factors must be positive");
      }
    }
  }
}

std::vector<double> AttackConfig::effective_scales() const {
  return scale_factors.empty() ? default_scale_factors(resize_count) : scale_factors;
}

std::vector<double> sign_step(std::span<const double> gradient, double alpha) {
  std::vector<double> out(gradient.size());
  for (std::size_t i = 0; i < gradient.size(); ++i) out[i] = alpha * sign_of(gradient[i]);
  return out;
}

void apply_sign_step(Image& lighting, std::span<const float> direction, double alpha) {
  auto d = lighting.data();
  if (direction.size() != d.size()) throw_invalid("apply_sign_step: shape mismatch");
  const auto step = static_cast<float>(alpha);
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (direction[k] > 0.0f) d[k] += step;
    else if (direction[k] < 0.0f) d[k] -= step;
  }
  lighting.clamp();
}

ParamSearchResult optimize_lighting_params(const AttackConfig& cfg,
                                           const RelightBackend& relighter,
                                           const VictimBackend& victim,
                                           const LightingParams& init,
                                           const Image& clean, std::string_view text) {
  cfg.validate();
  if (!init.valid()) throw_invalid("optimize_lighting_params: invalid initial params");
  if (cfg.param_iters > 0) require_gradients(relighter, victim);

  const int h = clean.height();
  const int w = clean.width();
  ParamSearchResult out;
  LightingParams theta = init;
  LightingParams last = init;

  for (int i = 0; i <= cfg.param_iters; ++i) {
    const bool step = i < cfg.param_iters;
    const std::string ctx = "iteration " + std::to_string(i);
    LossBreakdown loss;
    LightingParamsGrad g;
    with_context(ctx, [&] {
      const Image lighting = generate_lighting_image(theta, h, w);
      const Image relit = relighter.relight(lighting, clean, cfg.seed);
      if (!step) {
        loss = victim.loss(relit, clean, text);
        return 0;
      }
      LossAndGrad lg = victim.loss_grad(relit, clean, text);
      loss = lg.loss;
      check_finite(loss);
      const GradientTensor gl = relighter.relight_vjp(lighting, clean, lg.grad, cfg.seed);
      g = lighting_vjp_params(theta, h, w, gl);
      return 0;
    });
    check_finite(loss);

    out.trace.push_back(loss);
    if (out.trace.size() == 1 || loss.total > out.best_j) {
      out.best_j = loss.total;
      out.best_index = out.trace.size() - 1;
      out.best = theta;
    }
    last = theta;
    if (!step) break;

    const auto flat = flatten(g);
    const auto delta = sign_step(flat, cfg.param_step);
    for (int c = 0; c < 3; ++c) {
      theta.start_color[c] += delta[c];
      theta.end_color[c] += delta[3 + c];
    }
    theta.weight += delta[6];
    theta.project();
  }
  if (!cfg.keep_best) {
    out.best = last;
    out.best_index = out.trace.size() - 1;
    out.best_j = out.trace.back().total;
  }
  return out;
}

GradientTensor multiscale_lighting_gradient(const AttackConfig& cfg,
                                            const RelightBackend& relighter,
                                            const VictimBackend& victim,
                                            const Image& lighting, const Image& clean,
                                            std::string_view text,
                                            LossBreakdown* native_loss) {
  const int h = clean.height();
  const int w = clean.width();
  if (lighting.shape() != clean.shape()) {
    throw_invalid("lighting image must match the clean image resolution");
  }

  const Image relit = relighter.relight(lighting, clean, cfg.seed);
  const LossAndGrad native = victim.loss_grad(relit, clean, text);
  if (native_loss != nullptr) *native_loss = native.loss;
  check_finite(native.loss);
  const GradientTensor native_grad =
      relighter.relight_vjp(lighting, clean, native.grad, cfg.seed);

  std::vector<double> acc(clean.shape().size(), 0.0);
  for (double scale : cfg.effective_scales()) {
    const int sh = std::max(1, static_cast<int>(std::lround(scale * h)));
    const int sw = std::max(1, static_cast<int>(std::lround(scale * w)));
    GradientTensor contribution;
    if (sh == h && sw == w) {
      contribution = native_grad;
    } else {
      // Scaled copy, brought back to the native grid so relight's shape
      // contract holds; its gradient is pulled back through both resizes.
      const Image scaled = resize_bilinear(lighting, sh, sw);
      const Image restored = resize_bilinear(scaled, h, w);
      const Image r = relighter.relight(restored, clean, cfg.seed);
      const LossAndGrad lg = victim.loss_grad(r, clean, text);
      check_finite(lg.loss);
      const GradientTensor g_restored =
          relighter.relight_vjp(restored, clean, lg.grad, cfg.seed);
      contribution = resize_adjoint(resize_adjoint(g_restored, sh, sw), h, w);
    }
    const auto c = contribution.data();
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += c[k];
  }
  return GradientTensor::from_values(h, w, std::vector<float>(acc.begin(), acc.end()));
}

ImageSearchResult optimize_lighting_image_sga(const AttackConfig& cfg,
                                              const RelightBackend& relighter,
                                              const VictimBackend& victim,
                                              const Image& initial_lighting,
                                              const Image& clean, std::string_view text) {
  cfg.validate();
  if (initial_lighting.shape() != clean.shape()) {
    throw_invalid("optimize_lighting_image_sga: lighting must match image resolution");
  }
  if (cfg.image_iters > 0) require_gradients(relighter, victim);

  ImageSearchResult out;
  Image lighting = initial_lighting;
  for (int i = 0; i <= cfg.image_iters; ++i) {
    const bool step = i < cfg.image_iters;
    const std::string ctx = "iteration " + std::to_string(i);
    LossBreakdown loss;
    GradientTensor g;
    with_context(ctx, [&] {
      if (step) {
        g = multiscale_lighting_gradient(cfg, relighter, victim, lighting, clean, text,
                                         &loss);
      } else {
        loss = victim.loss(relighter.relight(lighting, clean, cfg.seed), clean, text);
      }
      check_finite(loss);
      return 0;
    });

    out.trace.push_back(loss);
    if (out.trace.size() == 1 || loss.total > out.best_j) {
      out.best_j = loss.total;
      out.best_index = out.trace.size() - 1;
      out.best = lighting;
    }
    if (!step) break;
    apply_sign_step(lighting, g.data(), cfg.image_step);
  }
  if (!cfg.keep_best) {
    out.best = lighting;
    out.best_index = out.trace.size() - 1;
    out.best_j = out.trace.back().total;
  }
  return out;
}

std::vector<LossBreakdown> AttackResult::j_trace() const {
  std::vector<LossBreakdown> all = param_trace;
  all.insert(all.end(), image_trace.begin(), image_trace.end());
  return all;
}

AttackResult run_lightd(const AttackConfig& cfg, const RelightBackend& relighter,
                        const VictimBackend& victim, const Recommender& recommender,
                        const Image& clean, std::string_view text,
                        std::string_view summary) {
  cfg.validate();
  AttackResult res;
  res.relight_id = relighter.id();
  res.victim_id = victim.id();
  res.recommendation = recommender.recommend(clean, summary);

  const ParamSearchResult params = with_context("stage params", [&] {
    return optimize_lighting_params(cfg, relighter, victim, res.recommendation.params,
                                    clean, text);
  });
  res.param_trace = params.trace;
  res.initial_loss = params.trace.front();
  res.params_best_j = params.best_j;
  res.final_lighting = params.best;

  const Image start = with_context("stage render", [&] {
    return generate_lighting_image(params.best, clean.height(), clean.width());
  });
  const ImageSearchResult image = with_context("stage image", [&] {
    return optimize_lighting_image_sga(cfg, relighter, victim, start, clean, text);
  });
  res.image_trace = image.trace;
  res.final_lighting_image = image.best;
  res.best_j = image.best_j;
  res.best_loss = image.trace[image.best_index];
  res.iterations_used = cfg.param_iters + cfg.image_iters;

  res.final_relit = with_context("stage relight", [&] {
    return relighter.relight(res.final_lighting_image, clean, cfg.seed);
  });
  return res;
}

}  // namespace lightd
