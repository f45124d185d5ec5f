#include <atomic>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "lightd/attack.hpp"
#include "lightd/error.hpp"
#include "lightd/synthetic.hpp"

using namespace lightd;

namespace {

struct Fixture {
  SurrogateRelighter relighter;
  SurrogateVictim victim;
  SyntheticScene scene = synthetic_scene(1001, 24, 24);
  LightingParams init{{0.6, 0.5, 0.4}, {0.3, 0.4, 0.7}, Direction::kTopToBottom, 1.0};
};

// Surrogate victim that starts failing after a number of calls.
class FlakyVictim final : public VictimBackend {
 public:
  FlakyVictim(int ok_calls, bool nan) : ok_calls_(ok_calls), nan_(nan) {}
  std::string id() const override { return "flaky"; }
  bool has_grad() const override { return true; }
  LossBreakdown loss(const Image& r, const Image& c, std::string_view t) const override {
    tick();
    return inner_.loss(r, c, t);
  }
  LossAndGrad loss_grad(const Image& r, const Image& c, std::string_view t) const override {
    if (calls_ >= ok_calls_ && nan_) {
      ++calls_;
      LossAndGrad lg = inner_.loss_grad(r, c, t);
      lg.loss.match_term = std::numeric_limits<double>::quiet_NaN();
      lg.loss.total = lg.loss.match_term;
      return lg;
    }
    tick();
    return inner_.loss_grad(r, c, t);
  }

 private:
  void tick() const {
    if (calls_++ >= ok_calls_ && !nan_) throw Error(ErrorCode::kBackendError, "boom");
  }
  SurrogateVictim inner_;
  int ok_calls_;
  bool nan_;
  mutable std::atomic<int> calls_{0};
};

class NoVjpRelighter final : public RelightBackend {
 public:
  std::string id() const override { return "no-vjp"; }
  bool has_vjp() const override { return false; }
  Image relight(const Image& l, const Image& c, std::uint64_t s) const override {
    return inner_.relight(l, c, s);
  }
  GradientTensor relight_vjp(const Image&, const Image&, const GradientTensor&,
                             std::uint64_t) const override {
    throw Error(ErrorCode::kUnsupportedCapability, "no vjp");
  }

 private:
  SurrogateRelighter inner_;
};

double j_of(const Fixture& f, const LightingParams& p) {
  const Image l = generate_lighting_image(p, f.scene.image.height(), f.scene.image.width());
  return f.victim.loss(f.relighter.relight(l, f.scene.image, 0), f.scene.image,
                       f.scene.captions[0]).total;
}

}  // namespace

TEST_SUITE("attack") {

TEST_CASE("config validation") {
  AttackConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = [](auto mutate) {
    AttackConfig x;
    mutate(x);
    CHECK_THROWS_AS(x.validate(), Error);
  };
  bad([](AttackConfig& x) { x.param_step = -0.1; });
  bad([](AttackConfig& x) { x.image_step = std::nan(""); });
  bad([](AttackConfig& x) { x.param_iters = -1; });
  bad([](AttackConfig& x) { x.image_iters = -1; });
  bad([](AttackConfig& x) { x.resize_count = 0; });
  bad([](AttackConfig& x) { x.resize_count = 17; });
  bad([](AttackConfig& x) { x.scale_factors = {1.0, 0.5}; });
  bad([](AttackConfig& x) {
    x.resize_count = 2;
    x.scale_factors = {1.0, 0.0};
  });
  CHECK(default_scale_factors(1) == std::vector<double>{1.0});
  CHECK(default_scale_factors(5) == std::vector<double>{0.5, 0.75, 1.0, 1.25, 1.5});
  CHECK_THROWS_AS(default_scale_factors(0), Error);
}

TEST_CASE("sign step matches alpha * sign(g) on random gradients") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  std::bernoulli_distribution zero(0.1);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> g(7);
    for (double& v : g) v = zero(rng) ? 0.0 : n(rng);
    const double alpha = std::abs(n(rng)) * 0.05;
    const auto s = sign_step(g, alpha);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double expect = g[i] == 0.0 ? 0.0 : std::copysign(alpha, g[i]);
      CHECK(s[i] == expect);
    }
  }
}

TEST_CASE("apply_sign_step clamps and ignores zero directions") {
  Image l = Image::from_pixels(1, 2, {0.0f, 0.5f, 1.0f, 0.999f, 0.2f, 0.3f});
  apply_sign_step(l, std::vector<float>{-1, 0, 1, 1, -2, 0}, 0.01);
  CHECK(l.data()[0] == 0.0f);
  CHECK(l.data()[1] == 0.5f);
  CHECK(l.data()[2] == 1.0f);
  CHECK(l.data()[3] == 1.0f);
  CHECK(l.data()[4] == doctest::Approx(0.19f));
  CHECK(l.data()[5] == 0.3f);
  CHECK_THROWS_AS(apply_sign_step(l, std::vector<float>{1}, 0.1), Error);
}

TEST_CASE("zero iterations evaluate the initial point only") {
  Fixture f;
  AttackConfig cfg;
  cfg.param_iters = 0;
  cfg.image_iters = 0;
  const auto p = optimize_lighting_params(cfg, f.relighter, f.victim, f.init, f.scene.image,
                                          f.scene.captions[0]);
  CHECK(p.trace.size() == 1);
  CHECK(p.best == f.init);
  CHECK(p.best_index == 0);
  CHECK(p.best_j == j_of(f, f.init));

  const Image start = generate_lighting_image(f.init, 24, 24);
  const auto s = optimize_lighting_image_sga(cfg, f.relighter, f.victim, start, f.scene.image,
                                             f.scene.captions[0]);
  CHECK(s.trace.size() == 1);
  CHECK(s.best.data().size() == start.data().size());
  CHECK(std::equal(s.best.data().begin(), s.best.data().end(), start.data().begin()));

  // no gradients needed when nothing is stepped
  NoVjpRelighter nv;
  CHECK_NOTHROW(optimize_lighting_params(cfg, nv, f.victim, f.init, f.scene.image, "x"));
  cfg.param_iters = 1;
  try {
    optimize_lighting_params(cfg, nv, f.victim, f.init, f.scene.image, "x");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnsupportedCapability);
  }
}

TEST_CASE("zero step keeps the first iterate") {
  Fixture f;
  AttackConfig cfg;
  cfg.param_step = 0.0;
  cfg.image_step = 0.0;
  cfg.param_iters = 4;
  cfg.image_iters = 3;
  const auto p = optimize_lighting_params(cfg, f.relighter, f.victim, f.init, f.scene.image,
                                          f.scene.captions[0]);
  REQUIRE(p.trace.size() == 5);
  for (const auto& l : p.trace) CHECK(l == p.trace.front());
  CHECK(p.best_index == 0);
  CHECK(p.best == f.init);
  const Image start = generate_lighting_image(f.init, 24, 24);
  const auto s = optimize_lighting_image_sga(cfg, f.relighter, f.victim, start, f.scene.image,
                                             f.scene.captions[0]);
  REQUIRE(s.trace.size() == 4);
  CHECK(s.best_index == 0);
}

TEST_CASE("keep-best returns the argmax of the trace") {
  Fixture f;
  AttackConfig cfg;
  cfg.param_step = 0.2;  // large enough to overshoot
  cfg.param_iters = 15;
  cfg.image_iters = 10;
  cfg.image_step = 0.1;
  const auto p = optimize_lighting_params(cfg, f.relighter, f.victim, f.init, f.scene.image,
                                          f.scene.captions[0]);
  double mx = -1e300;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < p.trace.size(); ++i) {
    if (p.trace[i].total > mx) {
      mx = p.trace[i].total;
      arg = i;
    }
  }
  CHECK(p.best_j == mx);
  CHECK(p.best_index == arg);
  CHECK(j_of(f, p.best) == mx);
  CHECK(p.best_j >= p.trace.front().total);

  const Image start = generate_lighting_image(f.init, 24, 24);
  const auto s = optimize_lighting_image_sga(cfg, f.relighter, f.victim, start, f.scene.image,
                                             f.scene.captions[0]);
  for (const auto& l : s.trace) CHECK(s.best_j >= l.total);
  CHECK(s.trace[s.best_index].total == s.best_j);

  cfg.keep_best = false;
  const auto last = optimize_lighting_params(cfg, f.relighter, f.victim, f.init,
                                             f.scene.image, f.scene.captions[0]);
  CHECK(last.best_j == last.trace.back().total);
  CHECK(last.best_index == last.trace.size() - 1);
}

TEST_CASE("single-scale SGA is the plain native gradient") {
  Fixture f;
  AttackConfig cfg;
  cfg.resize_count = 1;
  cfg.image_iters = 6;
  const std::string text = f.scene.captions[0];
  const Image& clean = f.scene.image;
  const Image start = generate_lighting_image(f.init, 24, 24);

  LossBreakdown nl;
  const auto g = multiscale_lighting_gradient(cfg, f.relighter, f.victim, start, clean, text, &nl);
  const auto lg = f.victim.loss_grad(f.relighter.relight(start, clean, 0), clean, text);
  const auto ref = f.relighter.relight_vjp(start, clean, lg.grad, 0);
  CHECK(nl == lg.loss);
  CHECK(std::equal(g.data().begin(), g.data().end(), ref.data().begin()));

  // hand-rolled loop
  Image l = start;
  std::vector<double> js;
  Image best = l;
  double best_j = -1e300;
  for (int i = 0; i <= cfg.image_iters; ++i) {
    const auto cur = f.victim.loss_grad(f.relighter.relight(l, clean, 0), clean, text);
    js.push_back(cur.loss.total);
    if (cur.loss.total > best_j) {
      best_j = cur.loss.total;
      best = l;
    }
    if (i == cfg.image_iters) break;
    apply_sign_step(l, f.relighter.relight_vjp(l, clean, cur.grad, 0).data(), cfg.image_step);
  }
  const auto s = optimize_lighting_image_sga(cfg, f.relighter, f.victim, start, clean, text);
  REQUIRE(s.trace.size() == js.size());
  for (std::size_t i = 0; i < js.size(); ++i) CHECK(s.trace[i].total == js[i]);
  CHECK(s.best_j == best_j);
  CHECK(std::equal(s.best.data().begin(), s.best.data().end(), best.data().begin()));
}

TEST_CASE("multi-scale gradient sums per-scale contributions") {
  Fixture f;
  AttackConfig cfg;
  cfg.resize_count = 3;
  cfg.scale_factors = {1.0, 1.0, 1.0};
  const Image start = generate_lighting_image(f.init, 24, 24);
  const auto g3 = multiscale_lighting_gradient(cfg, f.relighter, f.victim, start,
                                               f.scene.image, "a cat", nullptr);
  cfg.resize_count = 1;
  cfg.scale_factors = {1.0};
  const auto g1 = multiscale_lighting_gradient(cfg, f.relighter, f.victim, start,
                                               f.scene.image, "a cat", nullptr);
  for (std::size_t k = 0; k < g1.data().size(); ++k) {
    CHECK(g3.data()[k] == doctest::Approx(3.0 * g1.data()[k]).epsilon(1e-6));
  }
  CHECK_THROWS_AS(multiscale_lighting_gradient(cfg, f.relighter, f.victim,
                                               Image(5, 5, 0.5f), f.scene.image, "a",
                                               nullptr),
                  Error);
}

TEST_CASE("full pipeline is deterministic and improves J") {
  Fixture f;
  AttackConfig cfg;
  cfg.param_iters = 5;
  cfg.image_iters = 5;
  const Recommender rec;
  const auto a = run_lightd(cfg, f.relighter, f.victim, rec, f.scene.image,
                            f.scene.captions[0], f.scene.captions[0]);
  const auto b = run_lightd(cfg, f.relighter, f.victim, rec, f.scene.image,
                            f.scene.captions[0], f.scene.captions[0]);
  CHECK(a.j_trace() == b.j_trace());
  CHECK(a.final_lighting == b.final_lighting);
  CHECK(std::equal(a.final_relit.data().begin(), a.final_relit.data().end(),
                   b.final_relit.data().begin()));
  CHECK(a.j_trace().size() == 12);
  CHECK(a.best_j >= a.params_best_j);
  CHECK(a.params_best_j >= a.initial_loss.total);
  CHECK(a.recommendation.source == RecommendationSource::kHeuristic);
  CHECK(a.iterations_used == 10);
}

TEST_CASE("backend failures carry stage and iteration context") {
  Fixture f;
  AttackConfig cfg;
  cfg.param_iters = 5;
  cfg.image_iters = 5;
  const Recommender rec;
  const FlakyVictim flaky(2, false);
  try {
    run_lightd(cfg, f.relighter, flaky, rec, f.scene.image, "a cat", "a cat");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBackendError);
    const std::string msg = e.what();
    CHECK(msg.find("stage params") != std::string::npos);
    CHECK(msg.find("iteration 2") != std::string::npos);
    CHECK(msg.find("boom") != std::string::npos);
  }
  const FlakyVictim nan(1, true);
  try {
    run_lightd(cfg, f.relighter, nan, rec, f.scene.image, "a cat", "a cat");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFiniteLoss);
    CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
  }
}

}  // TEST_SUITE
