#include "lightd/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lightd/error.hpp"

namespace lightd {
namespace {

void check_dims(int height, int width, const char* what) {
  if (height < 1 || width < 1) {
    throw_invalid(std::string(what) + ": dimensions must be positive, got " +
                  std::to_string(height) + "x" + std::to_string(width));
  }
}

// Interpolation taps along one axis for the half-pixel-center convention.
struct Taps {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> frac;
};

Taps make_taps(int in_size, int out_size) {
  Taps t;
  t.lo.resize(out_size);
  t.hi.resize(out_size);
  t.frac.resize(out_size);
  const double scale = static_cast<double>(in_size) / out_size;
  for (int i = 0; i < out_size; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
    const int lo = static_cast<int>(std::floor(src));
    t.lo[i] = lo;
    t.hi[i] = std::min(lo + 1, in_size - 1);
    t.frac[i] = src - lo;
  }
  return t;
}

}  // namespace

Image::Image(int height, int width, float fill) {
  check_dims(height, width, "Image");
  if (!(fill >= 0.0f && fill <= 1.0f)) throw_invalid("Image: fill outside [0,1]");
  shape_ = {height, width};
  data_.assign(shape_.size(), fill);
}

Image Image::from_pixels(int height, int width, std::vector<float> pixels) {
  check_dims(height, width, "Image");
  Image img;
  img.shape_ = {height, width};
  if (pixels.size() != img.shape_.size()) {
    throw_invalid("Image: expected " + std::to_string(img.shape_.size()) +
                  " values, got " + std::to_string(pixels.size()));
  }
  for (float v : pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw_invalid("Image: pixel value outside [0,1] or not finite");
    }
  }
  img.data_ = std::move(pixels);
  return img;
}

void Image::clamp() {
  for (float& v : data_) {
    if (std::isnan(v)) {
      v = 0.0f;
    } else {
      v = std::clamp(v, 0.0f, 1.0f);
    }
  }
}

GradientTensor::GradientTensor(int height, int width, float fill) {
  check_dims(height, width, "GradientTensor");
  shape_ = {height, width};
  data_.assign(shape_.size(), fill);
}

GradientTensor GradientTensor::from_values(int height, int width,
                                           std::vector<float> values) {
  GradientTensor g(height, width);
  if (values.size() != g.shape_.size()) {
    throw_invalid("GradientTensor: expected " + std::to_string(g.shape_.size()) +
                  " values, got " + std::to_string(values.size()));
  }
  g.data_ = std::move(values);
  if (!g.all_finite()) throw_invalid("GradientTensor: non-finite value");
  return g;
}

bool GradientTensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

GradientTensor& GradientTensor::operator+=(const GradientTensor& other) {
  if (other.shape_ != shape_) throw_invalid("GradientTensor +=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

std::vector<double> resize_bilinear_values(const Image& src, int out_height,
                                           int out_width) {
  check_dims(out_height, out_width, "resize_bilinear");
  if (src.empty()) throw_invalid("resize_bilinear: empty source");
  const Taps ty = make_taps(src.height(), out_height);
  const Taps tx = make_taps(src.width(), out_width);

  std::vector<double> out(Shape{out_height, out_width}.size());
  std::size_t k = 0;
  for (int y = 0; y < out_height; ++y) {
    const double fy = ty.frac[y];
    for (int x = 0; x < out_width; ++x) {
      const double fx = tx.frac[x];
      for (int c = 0; c < Shape::kChannels; ++c) {
        const double top = (1.0 - fx) * src.at(ty.lo[y], tx.lo[x], c) +
                           fx * src.at(ty.lo[y], tx.hi[x], c);
        const double bottom = (1.0 - fx) * src.at(ty.hi[y], tx.lo[x], c) +
                              fx * src.at(ty.hi[y], tx.hi[x], c);
        out[k++] = (1.0 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

Image resize_bilinear(const Image& src, int out_height, int out_width) {
  const std::vector<double> values = resize_bilinear_values(src, out_height, out_width);
  std::vector<float> out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    out[k] = std::clamp(static_cast<float>(values[k]), 0.0f, 1.0f);
  }
  return Image::from_pixels(out_height, out_width, std::move(out));
}

GradientTensor resize_adjoint(const GradientTensor& grad_out, int src_height,
                              int src_width) {
  check_dims(src_height, src_width, "resize_adjoint");
  if (grad_out.height() < 1 || grad_out.width() < 1) {
    throw_invalid("resize_adjoint: empty gradient");
  }
  const int out_h = grad_out.height();
  const int out_w = grad_out.width();
  const Taps ty = make_taps(src_height, out_h);
  const Taps tx = make_taps(src_width, out_w);

  std::vector<double> acc(Shape{src_height, src_width}.size(), 0.0);
  auto idx = [src_width](int y, int x, int c) {
    return (static_cast<std::size_t>(y) * src_width + x) * Shape::kChannels + c;
  };
  for (int y = 0; y < out_h; ++y) {
    const double fy = ty.frac[y];
    for (int x = 0; x < out_w; ++x) {
      const double fx = tx.frac[x];
      for (int c = 0; c < Shape::kChannels; ++c) {
        const double g = grad_out.at(y, x, c);
        acc[idx(ty.lo[y], tx.lo[x], c)] += (1.0 - fy) * (1.0 - fx) * g;
        acc[idx(ty.lo[y], tx.hi[x], c)] += (1.0 - fy) * fx * g;
        acc[idx(ty.hi[y], tx.lo[x], c)] += fy * (1.0 - fx) * g;
        acc[idx(ty.hi[y], tx.hi[x], c)] += fy * fx * g;
      }
    }
  }
  std::vector<float> values(acc.begin(), acc.end());
  return GradientTensor::from_values(src_height, src_width, std::move(values));
}

Image flip_horizontal(const Image& src) {
  Image out = src;
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      for (int c = 0; c < Shape::kChannels; ++c) {
        out.at(y, x, c) = src.at(y, src.width() - 1 - x, c);
      }
    }
  }
  return out;
}

Image flip_vertical(const Image& src) {
  Image out = src;
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      for (int c = 0; c < Shape::kChannels; ++c) {
        out.at(y, x, c) = src.at(src.height() - 1 - y, x, c);
      }
    }
  }
  return out;
}

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw_invalid("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return s;
}

}  // namespace lightd
