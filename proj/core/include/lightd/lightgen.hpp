#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "lightd/image.hpp"

namespace lightd {

using Rgb = std::array<double, 3>;

enum class Direction { kLeftToRight, kRightToLeft, kTopToBottom, kBottomToTop };

std::string_view to_string(Direction d);
/// Accepts "left_to_right" style names; returns nullopt otherwise.
std::optional<Direction> parse_direction(std::string_view name);

/// Parameters of a two-color directional lighting ramp. `weight` in [0, 2]
/// sets a pure start-color band of fractional length weight/2 before the
/// linear ramp toward the end color.
struct LightingParams {
  static constexpr double kMaxWeight = 2.0;

  Rgb start_color{0.5, 0.5, 0.5};
  Rgb end_color{0.5, 0.5, 0.5};
  Direction direction = Direction::kLeftToRight;
  double weight = 1.0;

  bool valid() const noexcept;
  /// Clamps colors to [0,1] and weight to [0,2].
  void project() noexcept;

  bool operator==(const LightingParams&) const = default;
};

/// Gradient of a scalar loss with respect to the continuous parameters.
struct LightingParamsGrad {
  Rgb start_color{0, 0, 0};
  Rgb end_color{0, 0, 0};
  double weight = 0.0;
};

Image generate_lighting_image(const LightingParams& p, int height, int width);

/// Closed-form vector-Jacobian product of generate_lighting_image. The kink
/// at t == s contributes a zero subgradient.
LightingParamsGrad lighting_vjp_params(const LightingParams& p, int height,
                                       int width, const GradientTensor& grad_l);

/// "#RRGGBB" <-> Rgb helpers.
std::optional<Rgb> parse_hex_color(std::string_view hex);
std::string to_hex_color(const Rgb& c);

}  // namespace lightd
