#include <random>

#include "doctest.h"
#include "fd_oracle.hpp"
#include "lightd/error.hpp"
#include "lightd/lightgen.hpp"

using namespace lightd;

namespace {

LightingParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::uniform_real_distribution<double> w(0.0, 2.0);
  std::uniform_int_distribution<int> d(0, 3);
  LightingParams p;
  for (int c = 0; c < 3; ++c) {
    p.start_color[c] = u(rng);
    p.end_color[c] = u(rng);
  }
  p.direction = static_cast<Direction>(d(rng));
  p.weight = w(rng);
  return p;
}

}  // namespace

TEST_SUITE("lightgen") {

TEST_CASE("equal colors give a constant image") {
  for (int d = 0; d < 4; ++d) {
    for (double w : {0.0, 0.7, 1.0, 2.0}) {
      LightingParams p{{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}, static_cast<Direction>(d), w};
      const Image img = generate_lighting_image(p, 5, 6);
      for (float v : img.data()) CHECK(v == 0.5f);
    }
  }
}

TEST_CASE("weight 2 is the constant start color") {
  LightingParams p{{0.9, 0.1, 0.3}, {0.0, 1.0, 0.2}, Direction::kBottomToTop, 2.0};
  const Image img = generate_lighting_image(p, 4, 7);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 7; ++x) {
      for (int c = 0; c < 3; ++c) CHECK(img.at(y, x, c) == static_cast<float>(p.start_color[c]));
    }
  }
}

TEST_CASE("four-column worked example") {
  LightingParams p{{1, 0, 0}, {0, 0, 1}, Direction::kLeftToRight, 1.0};
  const Image img = generate_lighting_image(p, 1, 4);
  const double red[] = {1, 1, 0.75, 0.25};
  const double blue[] = {0, 0, 0.25, 0.75};
  for (int x = 0; x < 4; ++x) {
    CHECK(std::abs(img.at(0, x, 0) - red[x]) <= 1e-6);
    CHECK(std::abs(img.at(0, x, 2) - blue[x]) <= 1e-6);
    CHECK(img.at(0, x, 1) == 0.0f);
  }
}

TEST_CASE("direction pairs are exact mirror images") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    LightingParams p = random_params(rng);
    const int h = 1 + t % 9, w = 1 + (t * 7) % 13;
    p.direction = Direction::kLeftToRight;
    const Image lr = generate_lighting_image(p, h, w);
    p.direction = Direction::kRightToLeft;
    CHECK(lr == flip_horizontal(generate_lighting_image(p, h, w)));
    p.direction = Direction::kTopToBottom;
    const Image tb = generate_lighting_image(p, h, w);
    p.direction = Direction::kBottomToTop;
    CHECK(tb == flip_vertical(generate_lighting_image(p, h, w)));
  }
}

TEST_CASE("monotone along the axis and inside the color segment") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 30; ++t) {
    LightingParams p = random_params(rng);
    p.direction = Direction::kLeftToRight;
    const Image img = generate_lighting_image(p, 2, 16);
    for (int c = 0; c < 3; ++c) {
      const double lo = std::min(p.start_color[c], p.end_color[c]);
      const double hi = std::max(p.start_color[c], p.end_color[c]);
      const double sgn = p.end_color[c] >= p.start_color[c] ? 1 : -1;
      for (int x = 0; x < 16; ++x) {
        CHECK(img.at(0, x, c) >= static_cast<float>(lo) - 1e-6f);
        CHECK(img.at(0, x, c) <= static_cast<float>(hi) + 1e-6f);
        if (x > 0) CHECK(sgn * (img.at(0, x, c) - img.at(0, x - 1, c)) >= -1e-6);
      }
    }
  }
}

TEST_CASE("invalid parameters are rejected") {
  LightingParams p;
  p.weight = NAN;
  CHECK_THROWS_AS(generate_lighting_image(p, 2, 2), Error);
  p.weight = 1.0;
  p.start_color[1] = 1.5;
  CHECK_THROWS_AS(generate_lighting_image(p, 2, 2), Error);
  CHECK_THROWS_AS(generate_lighting_image(LightingParams{}, 0, 2), Error);
  p.project();
  CHECK(p.valid());
}

TEST_CASE("vjp trivial cases") {
  LightingParams p{{0.2, 0.4, 0.6}, {0.9, 0.1, 0.5}, Direction::kTopToBottom, 2.0};
  const auto zero = lighting_vjp_params(p, 3, 4, GradientTensor(3, 4));
  CHECK(zero.weight == 0.0);
  for (int c = 0; c < 3; ++c) CHECK(zero.start_color[c] == 0.0);
  const auto g = lighting_vjp_params(p, 3, 4, GradientTensor(3, 4, 1.0f));
  CHECK(g.weight == 0.0);
  for (int c = 0; c < 3; ++c) {
    CHECK(g.end_color[c] == 0.0);
    CHECK(g.start_color[c] == doctest::Approx(12.0));
  }
  CHECK_THROWS_AS(lighting_vjp_params(p, 3, 4, GradientTensor(4, 3)), Error);
}

TEST_CASE("vjp matches central differences on 20 configurations") {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> n;
  for (int t = 0; t < 20; ++t) {
    LightingParams p = random_params(rng);
    const int h = 2 + t % 7, w = 3 + t % 5;
    const int axis = (p.direction == Direction::kLeftToRight ||
                      p.direction == Direction::kRightToLeft) ? w : h;
    // Move w off the kink.
    for (bool clear = false; !clear;) {
      clear = true;
      for (int i = 0; i < axis; ++i) {
        if (std::abs((i + 0.5) / axis - p.weight / 2) < 2e-3) clear = false;
      }
      if (!clear) p.weight = std::fmod(p.weight + 0.0137, 1.98);
    }
    std::vector<float> gv(Shape{h, w}.size());
    for (float& v : gv) v = n(rng);
    const auto gl = GradientTensor::from_values(h, w, gv);
    const auto an = lighting_vjp_params(p, h, w, gl);
    const std::vector<double> theta = {p.start_color[0], p.start_color[1], p.start_color[2],
                                       p.end_color[0],   p.end_color[1],   p.end_color[2],
                                       p.weight};
    const auto fd = oracle::central_diff(
        [&](const std::vector<double>& th) {
          LightingParams q = p;
          for (int c = 0; c < 3; ++c) {
            q.start_color[c] = th[c];
            q.end_color[c] = th[3 + c];
          }
          q.weight = th[6];
          return dot(generate_lighting_image(q, h, w).data(), gl.data());
        },
        theta, 1e-3);
    const std::vector<double> a = {an.start_color[0], an.start_color[1], an.start_color[2],
                                   an.end_color[0],   an.end_color[1],   an.end_color[2],
                                   an.weight};
    CHECK(oracle::relative_error(fd, a) <= 1e-3);
    for (int i = 0; i < 7; ++i) {
      CHECK(std::abs(fd[i] - a[i]) <= 1e-3 * std::max({std::abs(fd[i]), std::abs(a[i]), 1e-2}));
    }
  }
}

TEST_CASE("hex colors and direction names") {
  const auto c = parse_hex_color("#FF8000");
  REQUIRE(c);
  CHECK((*c)[0] == 1.0);
  CHECK((*c)[1] == doctest::Approx(128.0 / 255.0));
  CHECK(to_hex_color(*c) == "#FF8000");
  CHECK_FALSE(parse_hex_color("red"));
  CHECK_FALSE(parse_hex_color("#12345G"));
  for (int d = 0; d < 4; ++d) {
    const auto dir = static_cast<Direction>(d);
    CHECK(parse_direction(to_string(dir)) == dir);
  }
  CHECK_FALSE(parse_direction("diagonal"));
}

}  // TEST_SUITE
