#include "lightd/png.hpp"

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "lightd/error.hpp"

namespace lightd {
namespace {

constexpr std::array<std::uint8_t, 8> kSignature = {0x89, 'P', 'N', 'G',
                                                    '\r', '\n', 0x1a, '\n'};

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t pos) {
  return (std::uint32_t{b[pos]} << 24) | (std::uint32_t{b[pos + 1]} << 16) |
         (std::uint32_t{b[pos + 2]} << 8) | std::uint32_t{b[pos + 3]};
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               std::span<const std::uint8_t> payload) {
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + type_pos,
              static_cast<uInt>(4 + payload.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

struct Header {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int depth = 0;
  int color_type = 0;
};

}  // namespace

Image png_decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kSignature.size() ||
      std::memcmp(bytes.data(), kSignature.data(), kSignature.size()) != 0) {
    throw DecodeError(0, "missing PNG signature");
  }

  Header hdr;
  bool have_header = false;
  bool have_end = false;
  std::size_t idat_offset = 0;
  std::vector<std::uint8_t> compressed;

  std::size_t pos = kSignature.size();
  while (pos < bytes.size() && !have_end) {
    if (bytes.size() - pos < 12) throw DecodeError(pos, "truncated chunk header");
    const std::uint32_t len = read_u32(bytes, pos);
    if (len > bytes.size() - pos - 12) {
      throw DecodeError(pos, "chunk length exceeds stream");
    }
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const std::uint8_t* payload = bytes.data() + pos + 8;
    const std::uint32_t stored_crc = read_u32(bytes, pos + 8 + len);
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data() + pos + 4, len + 4);
    if (static_cast<std::uint32_t>(crc) != stored_crc) {
      throw DecodeError(pos, "chunk CRC mismatch");
    }

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw DecodeError(pos, "bad IHDR length");
      std::span<const std::uint8_t> p(payload, len);
      hdr.width = read_u32(p, 0);
      hdr.height = read_u32(p, 4);
      hdr.depth = p[8];
      hdr.color_type = p[9];
      if (p[10] != 0 || p[11] != 0) throw DecodeError(pos, "bad compression or filter method");
      if (p[12] != 0) {
        throw Error(ErrorCode::kUnsupportedFormat, "interlaced PNG not supported");
      }
      if (hdr.width == 0 || hdr.height == 0 || hdr.width > (1u << 24) ||
          hdr.height > (1u << 24)) {
        throw DecodeError(pos, "bad image dimensions");
      }
      if (hdr.color_type != 2 && hdr.color_type != 6) {
        throw Error(ErrorCode::kUnsupportedFormat,
                    "unsupported PNG color type " + std::to_string(hdr.color_type));
      }
      if (hdr.depth != 8 && hdr.depth != 16) {
        throw Error(ErrorCode::kUnsupportedFormat,
                    "unsupported PNG bit depth " + std::to_string(hdr.depth));
      }
      have_header = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      if (!have_header) throw DecodeError(pos, "IDAT before IHDR");
      if (compressed.empty()) idat_offset = pos;
      compressed.insert(compressed.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      have_end = true;
    } else if ((type[0] & 0x20) == 0) {
      throw Error(ErrorCode::kUnsupportedFormat,
                  "unsupported critical chunk " + std::string(type, 4));
    }
    pos += 12 + len;
  }
  if (!have_header) throw DecodeError(pos, "missing IHDR");
  if (!have_end) throw DecodeError(pos, "missing IEND (truncated stream)");
  if (compressed.empty()) throw DecodeError(pos, "missing IDAT");

  const int channels = hdr.color_type == 6 ? 4 : 3;
  const std::size_t bytes_per_sample = hdr.depth / 8;
  const std::size_t bpp = channels * bytes_per_sample;
  const std::size_t stride = hdr.width * bpp;
  const std::size_t expected = hdr.height * (stride + 1);

  std::vector<std::uint8_t> raw(expected);
  uLongf raw_len = static_cast<uLongf>(expected);
  const int rc = uncompress(raw.data(), &raw_len, compressed.data(),
                            static_cast<uLong>(compressed.size()));
  if (rc != Z_OK || raw_len != expected) {
    throw DecodeError(idat_offset, "corrupt or truncated image data");
  }

  std::vector<std::uint8_t> prev(stride, 0);
  std::vector<std::uint8_t> cur(stride);
  std::vector<float> pixels(static_cast<std::size_t>(hdr.width) * hdr.height * 3);
  const float denom = hdr.depth == 8 ? 255.0f : 65535.0f;
  std::size_t out = 0;
  for (std::uint32_t y = 0; y < hdr.height; ++y) {
    const std::uint8_t* row = raw.data() + y * (stride + 1);
    const int filter = row[0];
    for (std::size_t i = 0; i < stride; ++i) {
      const int x = row[1 + i];
      const int a = i >= bpp ? cur[i - bpp] : 0;
      const int b = prev[i];
      const int c = i >= bpp ? prev[i - bpp] : 0;
      int v = 0;
      switch (filter) {
        case 0: v = x; break;
        case 1: v = x + a; break;
        case 2: v = x + b; break;
        case 3: v = x + (a + b) / 2; break;
        case 4: v = x + paeth(a, b, c); break;
        default:
          throw DecodeError(idat_offset, "bad filter type " + std::to_string(filter) +
                                             " on row " + std::to_string(y));
      }
      cur[i] = static_cast<std::uint8_t>(v & 0xff);
    }
    for (std::uint32_t x = 0; x < hdr.width; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        const std::size_t at = x * bpp + ch * bytes_per_sample;
        const unsigned s = bytes_per_sample == 1
                               ? cur[at]
                               : (unsigned{cur[at]} << 8) | unsigned{cur[at + 1]};
        pixels[out++] = static_cast<float>(s) / denom;
      }
    }
    std::swap(prev, cur);
  }
  return Image::from_pixels(static_cast<int>(hdr.height),
                            static_cast<int>(hdr.width), std::move(pixels));
}

std::vector<std::uint8_t> png_encode(const Image& img) {
  if (img.empty()) throw_invalid("png_encode: empty image");
  const std::size_t stride = static_cast<std::size_t>(img.width()) * 3;
  std::vector<std::uint8_t> raw;
  raw.reserve(img.height() * (stride + 1));
  const auto data = img.data();
  for (int y = 0; y < img.height(); ++y) {
    raw.push_back(0);
    for (std::size_t i = 0; i < stride; ++i) {
      const double v = data[y * stride + i];
      const double q = std::floor(v * 255.0 + 0.5);
      raw.push_back(static_cast<std::uint8_t>(q < 0 ? 0 : (q > 255 ? 255 : q)));
    }
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(),
                static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw Error(ErrorCode::kIoError, "png_encode: deflate failed");
  }
  compressed.resize(bound);

  std::vector<std::uint8_t> out(kSignature.begin(), kSignature.end());
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(img.width()));
  put_u32(ihdr, static_cast<std::uint32_t>(img.height()));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", compressed);
  put_chunk(out, "IEND", {});
  return out;
}

Image read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return png_decode(bytes);
}

void write_png(const std::filesystem::path& path, const Image& img) {
  const auto bytes = png_encode(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

}  // namespace lightd
