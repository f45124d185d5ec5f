#include "lightd/lightgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "lightd/error.hpp"

namespace lightd {
namespace {

// Axis coordinate in (0, 1) of pixel (y, x). The reversed directions use the
// mirrored index, 1 - (x + 0.5) / W == ((W - 1 - x) + 0.5) / W, so that
// flipping is bit-exact.
double axis_coordinate(Direction d, int y, int x, int height, int width) {
  switch (d) {
    case Direction::kLeftToRight: return (x + 0.5) / width;
    case Direction::kRightToLeft: return ((width - 1 - x) + 0.5) / width;
    case Direction::kTopToBottom: return (y + 0.5) / height;
    case Direction::kBottomToTop: return ((height - 1 - y) + 0.5) / height;
  }
  return 0.0;
}

double blend(double t, double s) {
  if (s >= 1.0 || t <= s) return 0.0;
  return (t - s) / (1.0 - s);
}

void check_params(const LightingParams& p) {
  for (int c = 0; c < 3; ++c) {
    if (std::isnan(p.start_color[c]) || std::isnan(p.end_color[c])) {
      throw_invalid("lighting params: NaN color component");
    }
  }
  if (std::isnan(p.weight)) throw_invalid("lighting params: NaN weight");
  if (!p.valid()) throw_invalid("lighting params: value outside its range");
}

int hex_digit(char ch) {
  if (ch >= '0' && ch <= '9') return ch - '0';
  if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
  if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
  return -1;
}

}  // namespace

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::kLeftToRight: return "left_to_right";
    case Direction::kRightToLeft: return "right_to_left";
    case Direction::kTopToBottom: return "top_to_bottom";
    case Direction::kBottomToTop: return "bottom_to_top";
  }
  return "left_to_right";
}

std::optional<Direction> parse_direction(std::string_view name) {
  for (Direction d : {Direction::kLeftToRight, Direction::kRightToLeft,
                      Direction::kTopToBottom, Direction::kBottomToTop}) {
    if (name == to_string(d)) return d;
  }
  return std::nullopt;
}

bool LightingParams::valid() const noexcept {
  for (int c = 0; c < 3; ++c) {
    if (!(start_color[c] >= 0.0 && start_color[c] <= 1.0)) return false;
    if (!(end_color[c] >= 0.0 && end_color[c] <= 1.0)) return false;
  }
  return weight >= 0.0 && weight <= kMaxWeight;
}

void LightingParams::project() noexcept {
  for (int c = 0; c < 3; ++c) {
    start_color[c] = std::clamp(start_color[c], 0.0, 1.0);
    end_color[c] = std::clamp(end_color[c], 0.0, 1.0);
  }
  weight = std::clamp(weight, 0.0, kMaxWeight);
}

Image generate_lighting_image(const LightingParams& p, int height, int width) {
  check_params(p);
  Image out(height, width);
  const double s = p.weight / 2.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double b = blend(axis_coordinate(p.direction, y, x, height, width), s);
      for (int c = 0; c < 3; ++c) {
        const double v = (1.0 - b) * p.start_color[c] + b * p.end_color[c];
        out.at(y, x, c) = std::clamp(static_cast<float>(v), 0.0f, 1.0f);
      }
    }
  }
  return out;
}

LightingParamsGrad lighting_vjp_params(const LightingParams& p, int height,
                                       int width, const GradientTensor& grad_l) {
  check_params(p);
  if (grad_l.shape() != Shape{height, width}) {
    throw_invalid("lighting_vjp_params: gradient shape mismatch");
  }
  LightingParamsGrad g;
  const double s = p.weight / 2.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double t = axis_coordinate(p.direction, y, x, height, width);
      const double b = blend(t, s);
      const bool on_ramp = s < 1.0 && t > s;
      const double db_dw = on_ramp ? 0.5 * (t - 1.0) / ((1.0 - s) * (1.0 - s)) : 0.0;
      for (int c = 0; c < 3; ++c) {
        const double gl = grad_l.at(y, x, c);
        g.start_color[c] += (1.0 - b) * gl;
        g.end_color[c] += b * gl;
        g.weight += (p.end_color[c] - p.start_color[c]) * db_dw * gl;
      }
    }
  }
  return g;
}

std::optional<Rgb> parse_hex_color(std::string_view hex) {
  if (hex.size() != 7 || hex[0] != '#') return std::nullopt;
  Rgb out{};
  for (int c = 0; c < 3; ++c) {
    const int hi = hex_digit(hex[1 + 2 * c]);
    const int lo = hex_digit(hex[2 + 2 * c]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out[c] = (hi * 16 + lo) / 255.0;
  }
  return out;
}

std::string to_hex_color(const Rgb& c) {
  char buf[8];
  auto q = [](double v) {
    return static_cast<int>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
  };
  std::snprintf(buf, sizeof buf, "#%02X%02X%02X", q(c[0]), q(c[1]), q(c[2]));
  return buf;
}

}  // namespace lightd
