#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lightd {

struct Shape {
  static constexpr int kChannels = 3;

  int height = 0;
  int width = 0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           kChannels;
  }
  bool operator==(const Shape&) const = default;
};

/// H x W x 3 interleaved RGB, row-major, values in [0, 1].
///
/// The range invariant holds after every public constructor and after
/// clamp(). Mutable access through data() is for in-place updates that are
/// followed by clamp().
class Image {
 public:
  Image() = default;
  Image(int height, int width, float fill = 0.0f);

  /// Validates shape, length, finiteness and range.
  static Image from_pixels(int height, int width, std::vector<float> pixels);

  Shape shape() const noexcept { return shape_; }
  int height() const noexcept { return shape_.height; }
  int width() const noexcept { return shape_.width; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  float at(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }
  float& at(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }

  /// Projects every element onto [0, 1]; NaN maps to 0.
  void clamp();

  bool operator==(const Image& other) const = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * shape_.width + x) * Shape::kChannels +
           c;
  }

  Shape shape_;
  std::vector<float> data_;
};

/// Same layout as Image with unbounded (finite) values.
class GradientTensor {
 public:
  GradientTensor() = default;
  GradientTensor(int height, int width, float fill = 0.0f);
  explicit GradientTensor(Shape shape, float fill = 0.0f)
      : GradientTensor(shape.height, shape.width, fill) {}

  static GradientTensor from_values(int height, int width,
                                    std::vector<float> values);

  Shape shape() const noexcept { return shape_; }
  int height() const noexcept { return shape_.height; }
  int width() const noexcept { return shape_.width; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  float at(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }
  float& at(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }

  bool all_finite() const noexcept;
  GradientTensor& operator+=(const GradientTensor& other);

  bool operator==(const GradientTensor& other) const = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * shape_.width + x) * Shape::kChannels +
           c;
  }

  Shape shape_;
  std::vector<float> data_;
};

/// Bilinear resize with half-pixel centers and edge clamping. The output
/// is a linear function of the input.
Image resize_bilinear(const Image& src, int out_height, int out_width);

/// The same linear map evaluated without rounding to float; interleaved RGB.
std::vector<double> resize_bilinear_values(const Image& src, int out_height,
                                           int out_width);

/// Exact transpose of resize_bilinear: <resize(x), y> == <x, adjoint(y)>.
GradientTensor resize_adjoint(const GradientTensor& grad_out, int src_height,
                              int src_width);

Image flip_horizontal(const Image& src);
Image flip_vertical(const Image& src);

/// Inner product accumulated in double.
double dot(std::span<const float> a, std::span<const float> b);

}  // namespace lightd
