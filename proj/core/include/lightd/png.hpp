#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lightd/image.hpp"

namespace lightd {

// PNG subset: color types 2 (RGB) and 6 (RGBA, alpha dropped), bit depths 8
// and 16, no interlacing. Samples decode to s / (2^depth - 1).
Image png_decode(std::span<const std::uint8_t> bytes);

// 8-bit RGB, values quantized with round-half-up.
std::vector<std::uint8_t> png_encode(const Image& img);

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace lightd
