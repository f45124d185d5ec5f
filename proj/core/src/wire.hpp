#pragma once

// Tensor encoding shared by the relight and victim wire endpoints:
//   {"shape": [H, W, 3], "dtype": "f32", "data": base64(LE row-major f32)}

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lightd/image.hpp"

namespace lightd::wire {

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

nlohmann::json encode_tensor(Shape shape, std::span<const float> values);
inline nlohmann::json encode_tensor(const Image& img) {
  return encode_tensor(img.shape(), img.data());
}
inline nlohmann::json encode_tensor(const GradientTensor& g) {
  return encode_tensor(g.shape(), g.data());
}

struct Tensor {
  Shape shape;
  std::vector<float> values;
};

Tensor decode_tensor(const nlohmann::json& j);
Image decode_image(const nlohmann::json& j);
GradientTensor decode_gradient(const nlohmann::json& j);

/// Body of a non-2xx response.
nlohmann::json error_body(std::string_view code, std::string_view message);

}  // namespace lightd::wire
