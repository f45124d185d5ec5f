#include "wire.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>

#include "lightd/error.hpp"

namespace lightd::wire {
namespace {

[[noreturn]] void parse_fail(const std::string& message) {
  throw Error(ErrorCode::kParseError, "wire: " + message);
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) parse_fail("base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) parse_fail("invalid base64 payload");
  std::size_t padding = 0;
  if (!text.empty() && text.back() == '=') ++padding;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

nlohmann::json encode_tensor(Shape shape, std::span<const float> values) {
  if (values.size() != shape.size()) throw_invalid("encode_tensor: shape/length mismatch");
  std::vector<std::uint8_t> bytes(values.size() * sizeof(float));
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int k = 0; k < 4; ++k) bytes[4 * i + k] = static_cast<std::uint8_t>(bits >> (8 * k));
  }
  return {{"shape", {shape.height, shape.width, Shape::kChannels}},
          {"dtype", "f32"},
          {"data", base64_encode(bytes)}};
}

Tensor decode_tensor(const nlohmann::json& j) {
  if (!j.is_object()) parse_fail("tensor must be an object");
  if (!j.contains("dtype") || j["dtype"] != "f32") parse_fail("dtype must be \"f32\"");
  if (!j.contains("shape") || !j["shape"].is_array() || j["shape"].size() != 3) {
    parse_fail("shape must be [H, W, 3]");
  }
  const auto& s = j["shape"];
  if (!s[0].is_number_integer() || !s[1].is_number_integer() || s[2] != 3) {
    parse_fail("shape must be [H, W, 3]");
  }
  Tensor t;
  t.shape = {s[0].get<int>(), s[1].get<int>()};
  if (t.shape.height < 1 || t.shape.width < 1) parse_fail("non-positive tensor dimension");
  if (!j.contains("data") || !j["data"].is_string()) parse_fail("data must be a base64 string");
  const auto bytes = base64_decode(j["data"].get_ref<const std::string&>());
  if (bytes.size() != t.shape.size() * sizeof(float)) {
    parse_fail("payload length does not match shape");
  }
  t.values.resize(t.shape.size());
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= std::uint32_t{bytes[4 * i + k]} << (8 * k);
    t.values[i] = std::bit_cast<float>(bits);
  }
  return t;
}

Image decode_image(const nlohmann::json& j) {
  Tensor t = decode_tensor(j);
  try {
    return Image::from_pixels(t.shape.height, t.shape.width, std::move(t.values));
  } catch (const Error& e) {
    parse_fail(std::string("image tensor: ") + e.what());
  }
}

GradientTensor decode_gradient(const nlohmann::json& j) {
  Tensor t = decode_tensor(j);
  try {
    return GradientTensor::from_values(t.shape.height, t.shape.width,
                                       std::move(t.values));
  } catch (const Error& e) {
    parse_fail(std::string("gradient tensor: ") + e.what());
  }
}

nlohmann::json error_body(std::string_view code, std::string_view message) {
  return {{"code", code}, {"message", message}};
}

}  // namespace lightd::wire
