#include <cmath>
#include <random>

#include "doctest.h"
#include "fd_oracle.hpp"
#include "lightd/error.hpp"
#include "lightd/synthetic.hpp"
#include "lightd/victim.hpp"

using namespace lightd;

namespace {

Image random_image(std::mt19937_64& rng, int h, int w, float lo = 0.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> px(Shape{h, w}.size());
  for (float& v : px) v = u(rng);
  return Image::from_pixels(h, w, px);
}

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("victim") {

TEST_CASE("image embeddings are deterministic unit vectors") {
  std::mt19937_64 rng(1);
  const SurrogateEmbedder e;
  const SurrogateEmbedder e2;
  for (int t = 0; t < 50; ++t) {
    const Image img = random_image(rng, 5 + t % 20, 7 + t % 11);
    const auto v = e.embed_image(img);
    CHECK(v.size() == 64);
    CHECK(std::abs(norm(v) - 1.0) <= 1e-6);
    CHECK(e2.embed_image(img) == v);
  }
}

TEST_CASE("text embeddings: normalization, case and corpus norms") {
  const SurrogateEmbedder e;
  CHECK(e.embed_text("A") == e.embed_text("a"));
  CHECK(e.embed_text("  Two   dogs\tplay ") == e.embed_text("two dogs play"));
  CHECK(e.embed_text("a cat") != e.embed_text("a dog"));
  CHECK_THROWS_AS(e.embed_text("   "), Error);
  for (const auto& scene : synthetic_corpus(7, 34, 8, 8)) {
    for (const auto& c : scene.captions) CHECK(std::abs(norm(e.embed_text(c)) - 1.0) <= 1e-6);
  }
  CHECK(normalize_text("  Hello   WORLD ") == "hello world");
  const auto f = trigram_features("ab", 10);
  double total = 0;
  for (double v : f) total += v;
  CHECK(total == 2.0);  // " ab", "ab "
}

TEST_CASE("zero image is a degenerate embedding") {
  const SurrogateEmbedder e;
  try {
    e.embed_image(Image(4, 4, 0.0f));
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kDegenerateEmbedding);
  }
}

TEST_CASE("scale invariance") {
  std::mt19937_64 rng(2);
  const SurrogateVictim v;
  for (int t = 0; t < 10; ++t) {
    const Image x = random_image(rng, 9, 9, 0.0f, 0.5f);
    Image x2 = x;
    for (float& p : x2.data()) p *= 2.0f;
    const auto a = v.match_embedder().embed_image(x);
    const auto b = v.match_embedder().embed_image(x2);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
    CHECK(v.match_term(x, "a red circle", nullptr) ==
          doctest::Approx(v.match_term(x2, "a red circle", nullptr)).epsilon(1e-12));
  }
}

TEST_CASE("loss contract") {
  std::mt19937_64 rng(3);
  const SurrogateVictim v;
  for (int t = 0; t < 20; ++t) {
    const Image r = random_image(rng, 8, 10), i = random_image(rng, 8, 10);
    const auto l = v.loss(r, i, "some caption text");
    CHECK(std::abs(l.total - (l.match_term + l.nat_term)) <= 1e-9);
    CHECK(v.loss(i, i, "anything").nat_term == 1.0);
    const auto lg = v.loss_grad(r, i, "some caption text");
    CHECK(lg.loss == l);
    CHECK(lg.grad.shape() == r.shape());
  }
  CHECK_THROWS_AS(v.loss(Image(2, 2, 0.5f), Image(3, 2, 0.5f), "x"), Error);
}

TEST_CASE("match term is zero when image and text embeddings coincide") {
  // Shared projection seed and a 16x16 image whose pixels are the trigram
  // counts scaled by a power of two: both embeddings are the same vector.
  SurrogateVictimConfig cfg;
  cfg.match = EmbedderConfig{16, 64, 9, 9};
  const SurrogateVictim v(cfg);
  const std::string text = "a red circle";
  const auto counts = trigram_features(normalize_text(text), 3 * 16 * 16);
  const double mx = *std::max_element(counts.begin(), counts.end());
  REQUIRE((mx == 1.0 || mx == 2.0 || mx == 4.0));
  std::vector<float> px(counts.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(counts[i] / mx);
  const Image img = Image::from_pixels(16, 16, px);
  CHECK(v.match_embedder().embed_image(img) == v.match_embedder().embed_text(text));
  CHECK(v.match_term(img, text, nullptr) == 0.0);
}

TEST_CASE("nat term is stationary at R = I") {
  std::mt19937_64 rng(4);
  const SurrogateVictim v;
  const Image i = random_image(rng, 12, 12, 0.1f, 0.9f);
  GradientTensor g;
  v.nat_term(i, i, &g);
  std::normal_distribution<double> n;
  for (int t = 0; t < 10; ++t) {
    std::vector<double> d(i.data().size());
    for (double& x : d) x = n(rng);
    const double h = 1e-3;
    auto along = [&](double s) {
      std::vector<float> px(d.size());
      for (std::size_t k = 0; k < d.size(); ++k) px[k] = static_cast<float>(i.data()[k] + s * d[k] / 100.0);
      return v.nat_term(Image::from_pixels(12, 12, px), i, nullptr);
    };
    CHECK(std::abs((along(h) - along(-h)) / (2 * h)) <= 1e-6);
    double an = 0;
    for (std::size_t k = 0; k < d.size(); ++k) an += g.data()[k] * d[k] / 100.0;
    CHECK(std::abs(an) <= 1e-6);
  }
}

TEST_CASE("gradients match central differences for every term") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    SurrogateVictimConfig cfg;
    cfg.match.image_seed = 100 + t;
    cfg.match.text_seed = 200 + t;
    cfg.naturalness.image_seed = 300 + t;
    cfg.nat_weight = t % 2 == 0 ? 1.0 : 0.5;
    const SurrogateVictim v(cfg);
    const int h = 5 + t % 9, w = 6 + t % 7;
    const Image r = random_image(rng, h, w, 0.05f, 0.95f);
    const Image i = random_image(rng, h, w);
    const std::string text = t % 3 == 0 ? "two dogs play in the snow" : "a blue square";

    const auto lg = v.loss_grad(r, i, text);
    const auto fd = oracle::image_central_diff(
        [&](const Image& x) { return v.loss(x, i, text).total; }, r, 1e-3);
    CHECK(oracle::relative_error(fd, oracle::to_doubles(lg.grad.data())) <= 1e-3);

    GradientTensor gm, gn;
    v.match_term(r, text, &gm);
    v.nat_term(r, i, &gn);
    const auto fdm = oracle::image_central_diff(
        [&](const Image& x) { return v.match_term(x, text, nullptr); }, r, 1e-3);
    const auto fdn = oracle::image_central_diff(
        [&](const Image& x) { return v.nat_term(x, i, nullptr); }, r, 1e-3);
    CHECK(oracle::relative_error(fdm, oracle::to_doubles(gm.data())) <= 1e-3);
    CHECK(oracle::relative_error(fdn, oracle::to_doubles(gn.data())) <= 1e-3);
  }
}

TEST_CASE("directional derivative of the embedding cosine") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  for (int t = 0; t < 20; ++t) {
    const SurrogateEmbedder e(EmbedderConfig{16, 64, 40ull + t, 2});
    const Image img = random_image(rng, 20, 20, 0.1f, 0.9f);
    std::vector<double> u(64);
    for (double& x : u) x = n(rng);
    GradientTensor g;
    e.cosine_to(img, u, &g);
    std::vector<double> d(img.data().size());
    for (double& x : d) x = n(rng);
    // directional derivative along the perturbation float can actually hold
    const double h = 1e-3;
    std::vector<float> up(d.size()), down(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
      up[k] = static_cast<float>(img.data()[k] + h * d[k]);
      down[k] = static_cast<float>(img.data()[k] - h * d[k]);
    }
    const double fd = e.cosine_to(Image::from_pixels(20, 20, up), u, nullptr) -
                      e.cosine_to(Image::from_pixels(20, 20, down), u, nullptr);
    double an = 0;
    for (std::size_t k = 0; k < d.size(); ++k)
      an += g.data()[k] * (static_cast<double>(up[k]) - static_cast<double>(down[k]));
    CHECK(std::abs(fd - an) <= 1e-3 * std::max(std::abs(fd), std::abs(an)));
  }
}

}  // TEST_SUITE
