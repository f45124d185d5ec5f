#include "lightd/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>

#include "lightd/lightgen.hpp"
#include "lightd/relight.hpp"
#include "lightd/victim.hpp"

namespace lightd {
namespace {

constexpr double kStep = 1e-3;

double rel_error(const std::vector<double>& fd, const std::vector<double>& an) {
  double diff = 0.0, nf = 0.0, na = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    diff += (fd[i] - an[i]) * (fd[i] - an[i]);
    nf += fd[i] * fd[i];
    na += an[i] * an[i];
  }
  const double scale = std::sqrt(std::max(nf, na));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

Image random_image(std::mt19937_64& rng, int h, int w, double lo, double hi) {
  std::uniform_real_distribution<float> u(static_cast<float>(lo), static_cast<float>(hi));
  std::vector<float> px(Shape{h, w}.size());
  for (float& v : px) v = u(rng);
  return Image::from_pixels(h, w, std::move(px));
}

GradientTensor random_grad(std::mt19937_64& rng, int h, int w) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> g(Shape{h, w}.size());
  for (float& v : g) v = n(rng);
  return GradientTensor::from_values(h, w, std::move(g));
}

// Central differences of f over every pixel of x, using the step actually
// representable in float.
std::vector<double> image_fd(Image x, const std::function<double(const Image&)>& f) {
  std::vector<double> out(x.data().size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const float orig = x.data()[k];
    const float up = static_cast<float>(orig + kStep);
    const float down = static_cast<float>(orig - kStep);
    x.data()[k] = up;
    const double fp = f(x);
    x.data()[k] = down;
    const double fm = f(x);
    x.data()[k] = orig;
    out[k] = (fp - fm) / (static_cast<double>(up) - static_cast<double>(down));
  }
  return out;
}

// Continuous parameters in the order start rgb, end rgb, weight.
double& param_ref(LightingParams& p, int i) {
  if (i < 3) return p.start_color[i];
  if (i < 6) return p.end_color[i - 3];
  return p.weight;
}

std::array<double, 7> flatten(const LightingParamsGrad& g) {
  return {g.start_color[0], g.start_color[1], g.start_color[2], g.end_color[0],
          g.end_color[1],   g.end_color[2],   g.weight};
}

}  // namespace

GradCheckReport check_lightgen_grad(std::uint64_t seed, int instances) {
  GradCheckReport rep{"lightgen", instances, kStep, 1e-3, 0.0};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> color(0.05, 0.95);
  std::uniform_real_distribution<double> weight(0.05, 1.9);
  std::uniform_int_distribution<int> size(3, 12);
  std::uniform_int_distribution<int> dir(0, 3);

  for (int n = 0; n < instances; ++n) {
    const int h = size(rng);
    const int w = size(rng);
    LightingParams p;
    for (int c = 0; c < 3; ++c) {
      p.start_color[c] = color(rng);
      p.end_color[c] = color(rng);
    }
    p.direction = static_cast<Direction>(dir(rng));
    const int axis = (p.direction == Direction::kLeftToRight ||
                      p.direction == Direction::kRightToLeft) ? w : h;
    // Keep s = w/2 clear of every pixel coordinate t by more than the step.
    for (;;) {
      p.weight = weight(rng);
      const double s = p.weight / 2.0;
      bool clear = true;
      for (int i = 0; i < axis; ++i) {
        if (std::abs((i + 0.5) / axis - s) < 2.0 * kStep) clear = false;
      }
      if (clear) break;
    }
    const GradientTensor gl = random_grad(rng, h, w);
    auto f = [&](const LightingParams& q) {
      return dot(generate_lighting_image(q, h, w).data(), gl.data());
    };
    const LightingParamsGrad an = lighting_vjp_params(p, h, w, gl);
    const auto an_flat = flatten(an);
    std::vector<double> fd_v(7), an_v(an_flat.begin(), an_flat.end());
    for (int i = 0; i < 7; ++i) {
      LightingParams q = p;
      param_ref(q, i) = param_ref(p, i) + kStep;
      const double fp = f(q);
      param_ref(q, i) = param_ref(p, i) - kStep;
      const double fm = f(q);
      fd_v[i] = (fp - fm) / (2.0 * kStep);
    }
    rep.max_rel_error = std::max(rep.max_rel_error, rel_error(fd_v, an_v));
  }
  return rep;
}

GradCheckReport check_relight_grad(std::uint64_t seed, int instances) {
  GradCheckReport rep{"relight", instances, kStep, 1e-3, 0.0};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(2, 8);
  const SurrogateRelighter relighter;
  for (int n = 0; n < instances; ++n) {
    const int h = size(rng);
    const int w = size(rng);
    const Image light = random_image(rng, h, w, 0.05, 0.95);
    const Image clean = random_image(rng, h, w, 0.0, 1.0);
    const GradientTensor gr = random_grad(rng, h, w);
    const GradientTensor an = relighter.relight_vjp(light, clean, gr);
    const auto fd = image_fd(light, [&](const Image& l) {
      return dot(relighter.relight(l, clean).data(), gr.data());
    });
    rep.max_rel_error = std::max(
        rep.max_rel_error, rel_error(fd, {an.data().begin(), an.data().end()}));
  }
  return rep;
}

GradCheckReport check_victim_grad(std::uint64_t seed, int instances) {
  GradCheckReport rep{"victim", instances, kStep, 1e-3, 0.0};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(6, 20);
  static const char* kTexts[] = {"a red circle on a blue background",
                                 "two dogs playing in the snow",
                                 "what color is the square?", "a small boat"};
  for (int n = 0; n < instances; ++n) {
    SurrogateVictimConfig cfg;
    cfg.match.image_seed = rng();
    cfg.match.text_seed = rng();
    cfg.naturalness.image_seed = rng();
    const SurrogateVictim victim(cfg);
    const int h = size(rng);
    const int w = size(rng);
    const Image relit = random_image(rng, h, w, 0.05, 0.95);
    const Image clean = random_image(rng, h, w, 0.0, 1.0);
    const char* text = kTexts[n % 4];
    const LossAndGrad an = victim.loss_grad(relit, clean, text);
    const auto fd = image_fd(relit, [&](const Image& r) {
      return victim.loss(r, clean, text).total;
    });
    rep.max_rel_error = std::max(
        rep.max_rel_error, rel_error(fd, {an.grad.data().begin(), an.grad.data().end()}));
  }
  return rep;
}

std::vector<GradCheckReport> check_all_gradients(std::uint64_t seed, int instances) {
  return {check_lightgen_grad(seed, instances), check_relight_grad(seed + 1, instances),
          check_victim_grad(seed + 2, instances)};
}

}  // namespace lightd
