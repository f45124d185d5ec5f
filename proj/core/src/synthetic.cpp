#include "lightd/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string_view>

#include "lightd/error.hpp"

namespace lightd {
namespace {

struct NamedColor {
  std::string_view name;
  std::array<float, 3> rgb;
};

constexpr std::array<NamedColor, 10> kPalette{{
    {"red", {0.82f, 0.16f, 0.14f}},
    {"green", {0.18f, 0.62f, 0.25f}},
    {"blue", {0.16f, 0.32f, 0.80f}},
    {"yellow", {0.93f, 0.84f, 0.20f}},
    {"orange", {0.95f, 0.55f, 0.12f}},
    {"purple", {0.52f, 0.24f, 0.66f}},
    {"white", {0.92f, 0.92f, 0.90f}},
    {"gray", {0.50f, 0.50f, 0.52f}},
    {"brown", {0.48f, 0.31f, 0.18f}},
    {"pink", {0.94f, 0.58f, 0.70f}},
}};

enum class Kind { kCircle, kSquare, kStripe };

constexpr std::array<std::string_view, 3> kKindName{"circle", "square", "stripe"};

struct Shape2D {
  Kind kind;
  std::size_t color;
  double cy, cx, radius;
};

// Signed distance (pixels, negative inside).
double signed_distance(const Shape2D& s, double y, double x) {
  switch (s.kind) {
    case Kind::kCircle:
      return std::hypot(y - s.cy, x - s.cx) - s.radius;
    case Kind::kSquare:
      return std::max(std::abs(y - s.cy), std::abs(x - s.cx)) - s.radius;
    case Kind::kStripe:
      return std::abs(y - s.cy) - 0.35 * s.radius;
  }
  return 1.0;
}

double smoothstep(double edge0, double edge1, double v) {
  const double t = std::clamp((v - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

std::string article(std::string_view word) {
  const char c = word.empty() ? 'x' : word.front();
  const bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
  return vowel ? "an" : "a";
}

}  // namespace

SyntheticScene synthetic_scene(std::uint64_t seed, int height, int width) {
  if (height < 8 || width < 8) throw_invalid("synthetic_scene: image must be >= 8x8");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_color(0, kPalette.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.015);

  const std::size_t bg = pick_color(rng);
  std::size_t bg2 = pick_color(rng);
  if (bg2 == bg) bg2 = (bg + 3) % kPalette.size();
  const bool vertical_bg = unit(rng) < 0.5;

  const int n_shapes = 1 + static_cast<int>(unit(rng) * 3.0);
  std::vector<Shape2D> shapes;
  const double base = std::min(height, width);
  for (int i = 0; i < n_shapes; ++i) {
    Shape2D s;
    s.kind = static_cast<Kind>(std::min<int>(2, static_cast<int>(unit(rng) * 3.0)));
    s.color = pick_color(rng);
    if (s.color == bg) s.color = (s.color + 5) % kPalette.size();
    s.radius = base * (0.10 + 0.15 * unit(rng));
    s.cy = height * (0.2 + 0.6 * unit(rng));
    s.cx = width * (0.2 + 0.6 * unit(rng));
    shapes.push_back(s);
  }
  // Soft light from a random side.
  const double light_angle = 2.0 * 3.141592653589793 * unit(rng);
  const double ly = std::sin(light_angle);
  const double lx = std::cos(light_angle);

  std::vector<float> px(Shape{height, width}.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double ty = (y + 0.5) / height;
      const double tx = (x + 0.5) / width;
      const double t = vertical_bg ? ty : tx;
      std::array<double, 3> c{};
      for (int k = 0; k < 3; ++k) {
        c[k] = (1.0 - t) * kPalette[bg].rgb[k] + t * (0.6 * kPalette[bg2].rgb[k] +
                                                       0.4 * kPalette[bg].rgb[k]);
      }
      for (const Shape2D& s : shapes) {
        const double a = 1.0 - smoothstep(-1.0, 1.0, signed_distance(s, y + 0.5, x + 0.5));
        if (a <= 0.0) continue;
        // Shading inside the shape for some depth.
        const double shade =
            0.85 + 0.15 * ((y + 0.5 - s.cy) * ly + (x + 0.5 - s.cx) * lx) / s.radius;
        for (int k = 0; k < 3; ++k) {
          c[k] = (1.0 - a) * c[k] + a * std::clamp(kPalette[s.color].rgb[k] * shade, 0.0, 1.0);
        }
      }
      const double vignette = 1.0 - 0.12 * ((tx - 0.5) * (tx - 0.5) + (ty - 0.5) * (ty - 0.5));
      const std::size_t o = (static_cast<std::size_t>(y) * width + x) * 3;
      for (int k = 0; k < 3; ++k) {
        px[o + k] = static_cast<float>(std::clamp(c[k] * vignette + noise(rng), 0.0, 1.0));
      }
    }
  }

  SyntheticScene scene;
  scene.image = Image::from_pixels(height, width, std::move(px));
  const Shape2D& main = shapes.front();
  const std::string color(kPalette[main.color].name);
  const std::string kind(kKindName[static_cast<int>(main.kind)]);
  const std::string bg_name(kPalette[bg].name);
  std::string first = article(color) + " " + color + " " + kind;
  if (shapes.size() > 1) {
    const Shape2D& other = shapes[1];
    const std::string oc(kPalette[other.color].name);
    first += " and " + article(oc) + " " + oc + " " +
             std::string(kKindName[static_cast<int>(other.kind)]);
  }
  scene.captions = {
      first + " on " + article(bg_name) + " " + bg_name + " background",
      "a " + bg_name + " background with " + article(color) + " " + color + " " + kind,
      "there is " + article(color) + " " + color + " " + kind + " in the picture",
  };
  scene.question = "what color is the " + kind + "?";
  scene.answer = color;
  return scene;
}

std::vector<SyntheticScene> synthetic_corpus(std::uint64_t base_seed, int count,
                                             int height, int width) {
  if (count < 0) throw_invalid("synthetic_corpus: count must be >= 0");
  std::vector<SyntheticScene> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(synthetic_scene(base_seed + i, height, width));
  return out;
}

}  // namespace lightd
