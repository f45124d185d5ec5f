#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "lightd/image.hpp"

namespace lightd::metrics {

/// Asymmetric generalized Gaussian parameters.
struct AggdParams {
  double shape = 0.0;
  double left_scale = 0.0;
  double right_scale = 0.0;
  double mean = 0.0;
};

/// Moment-matching fit; the shape is looked up on the grid 0.2:0.001:10.
/// Needs at least 16 samples with both signs present.
AggdParams aggd_fit(std::span<const double> samples);

inline constexpr int kNiqeFeaturesPerScale = 18;
inline constexpr int kNiqeFeatureDim = 2 * kNiqeFeaturesPerScale;
using NiqeFeature = std::array<double, kNiqeFeatureDim>;

struct NiqeOptions {
  int patch_size = 96;
  double sharpness_threshold = 0.75;
};

enum class PatchSelection {
  kSharp,  // patches whose mean local deviation >= threshold * image maximum
  kAll,
};

/// Luminance is 0.299 R + 0.587 G + 0.114 B on a 0..255 scale. Two scales
/// (native, bilinear half). Per scale: MSCN shape and mean scale, then
/// shape, mean, left and right scale for the horizontal, vertical and two
/// diagonal neighbor products.
std::vector<NiqeFeature> niqe_features(const Image& img, PatchSelection selection,
                                       const NiqeOptions& options = {});

struct NiqeModel {
  struct Meta {
    std::size_t corpus_size = 0;
    std::size_t patch_count = 0;
    int patch_size = 96;
    double sharpness_threshold = 0.75;
    int scales = 2;
  };

  std::vector<double> mean;  // kNiqeFeatureDim
  std::vector<double> cov;   // kNiqeFeatureDim^2, row-major
  Meta meta;

  /// Dimensions, symmetry within 1e-9 and eigenvalues >= -1e-9.
  bool valid() const;
};

/// Throws kInsufficientData for fewer than 10 images or fewer than 2 patches.
NiqeModel niqe_fit(std::span<const Image> pristine, const NiqeOptions& options = {});

/// sqrt(d^T pinv((cov_model + cov) / 2) d) with d = mean_model - mean;
/// eigenvalues below 1e-10 are dropped from the pseudo-inverse.
double niqe_distance(const NiqeModel& model, std::span<const double> mean,
                     std::span<const double> cov);

/// Scores all patches of `img`; needs at least 2 patches.
double niqe_score(const NiqeModel& model, const Image& img);

void save_niqe_model(const std::filesystem::path& path, const NiqeModel& model);
NiqeModel load_niqe_model(const std::filesystem::path& path);

}  // namespace lightd::metrics
