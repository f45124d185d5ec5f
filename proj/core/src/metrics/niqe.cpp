#include "lightd/metrics/niqe.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "json.hpp"
#include "lightd/error.hpp"

namespace lightd::metrics {
namespace {

constexpr std::size_t kMinAggdSamples = 16;
constexpr std::size_t kMinFitImages = 10;
constexpr double kEigenFloor = 1e-10;

struct ShapeTable {
  std::vector<double> shape;
  std::vector<double> ratio;  // Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a))
};

const ShapeTable& shape_table() {
  static const ShapeTable table = [] {
    ShapeTable t;
    for (int i = 0; i <= 9800; ++i) {
      const double a = 0.2 + 0.001 * i;
      t.shape.push_back(a);
      const double g2 = std::tgamma(2.0 / a);
      t.ratio.push_back(g2 * g2 / (std::tgamma(1.0 / a) * std::tgamma(3.0 / a)));
    }
    return t;
  }();
  return table;
}

// Row-major single-channel plane.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<double> v;

  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

Plane luminance(const Image& img) {
  Plane p{img.height(), img.width(), {}};
  p.v.resize(static_cast<std::size_t>(p.height) * p.width);
  const auto d = img.data();
  for (std::size_t i = 0; i < p.v.size(); ++i) {
    p.v[i] = 255.0 * (0.299 * d[3 * i] + 0.587 * d[3 * i + 1] + 0.114 * d[3 * i + 2]);
  }
  return p;
}

std::array<double, 7> gaussian_taps() {
  std::array<double, 7> w{};
  const double sigma = 7.0 / 6.0;
  double s = 0.0;
  for (int k = -3; k <= 3; ++k) {
    w[k + 3] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    s += w[k + 3];
  }
  for (double& x : w) x /= s;
  return w;
}

// Separable 7x7 Gaussian filter with replicated borders.
Plane blur(const Plane& in) {
  static const auto w = gaussian_taps();
  Plane tmp = in, out = in;
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int k = -3; k <= 3; ++k) s += w[k + 3] * in.at(y, std::clamp(x + k, 0, in.width - 1));
      tmp.v[static_cast<std::size_t>(y) * in.width + x] = s;
    }
  }
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int k = -3; k <= 3; ++k) s += w[k + 3] * tmp.at(std::clamp(y + k, 0, in.height - 1), x);
      out.v[static_cast<std::size_t>(y) * in.width + x] = s;
    }
  }
  return out;
}

struct Mscn {
  Plane coeffs;
  Plane sigma;
};

Mscn mscn(const Plane& lum) {
  const Plane mu = blur(lum);
  Plane sq = lum;
  for (double& x : sq.v) x *= x;
  const Plane mu_sq = blur(sq);
  Mscn out{lum, lum};
  for (std::size_t i = 0; i < lum.v.size(); ++i) {
    const double var = std::fabs(mu_sq.v[i] - mu.v[i] * mu.v[i]);
    out.sigma.v[i] = std::sqrt(var);
    out.coeffs.v[i] = (lum.v[i] - mu.v[i]) / (out.sigma.v[i] + 1.0);
  }
  return out;
}

void scale_features(const Plane& c, int y0, int x0, int size, double* out) {
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(size) * size);
  for (int y = y0; y < y0 + size; ++y) {
    for (int x = x0; x < x0 + size; ++x) samples.push_back(c.at(y, x));
  }
  const AggdParams base = aggd_fit(samples);
  out[0] = base.shape;
  out[1] = (base.left_scale + base.right_scale) / 2.0;

  constexpr int kShifts[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
  int k = 2;
  for (const auto& s : kShifts) {
    samples.clear();
    for (int y = y0; y < y0 + size; ++y) {
      for (int x = x0; x < x0 + size; ++x) {
        const int ny = y + s[0];
        const int nx = x + s[1];
        if (ny >= y0 + size || nx < x0 || nx >= x0 + size) continue;
        samples.push_back(c.at(y, x) * c.at(ny, nx));
      }
    }
    const AggdParams p = aggd_fit(samples);
    out[k++] = p.shape;
    out[k++] = p.mean;
    out[k++] = p.left_scale;
    out[k++] = p.right_scale;
  }
}

void mean_and_cov(const std::vector<NiqeFeature>& feats, std::vector<double>& mean,
                  std::vector<double>& cov) {
  constexpr int d = kNiqeFeatureDim;
  const double n = static_cast<double>(feats.size());
  mean.assign(d, 0.0);
  for (const auto& f : feats) {
    for (int i = 0; i < d; ++i) mean[i] += f[i];
  }
  for (double& m : mean) m /= n;
  cov.assign(static_cast<std::size_t>(d) * d, 0.0);
  for (const auto& f : feats) {
    for (int i = 0; i < d; ++i) {
      const double di = f[i] - mean[i];
      for (int j = i; j < d; ++j) cov[i * d + j] += di * (f[j] - mean[j]);
    }
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      cov[i * d + j] /= (n - 1.0);
      cov[j * d + i] = cov[i * d + j];
    }
  }
}

}  // namespace

AggdParams aggd_fit(std::span<const double> samples) {
  if (samples.size() < kMinAggdSamples) {
    throw_invalid("aggd_fit: need at least 16 samples, got " +
                  std::to_string(samples.size()));
  }
  double left_sq = 0.0, right_sq = 0.0, abs_sum = 0.0, sq_sum = 0.0;
  std::size_t left_n = 0, right_n = 0;
  for (double x : samples) {
    if (!std::isfinite(x)) throw_invalid("aggd_fit: non-finite sample");
    if (x < 0.0) {
      left_sq += x * x;
      ++left_n;
    } else if (x > 0.0) {
      right_sq += x * x;
      ++right_n;
    }
    abs_sum += std::fabs(x);
    sq_sum += x * x;
  }
  if (sq_sum == 0.0) {
    throw Error(ErrorCode::kDegenerateDistribution, "aggd_fit: all samples are zero");
  }
  if (left_n == 0 || right_n == 0) {
    throw Error(ErrorCode::kDegenerateDistribution,
                "aggd_fit: samples lie on one side of zero");
  }
  const double n = static_cast<double>(samples.size());
  const double left_std = std::sqrt(left_sq / static_cast<double>(left_n));
  const double right_std = std::sqrt(right_sq / static_cast<double>(right_n));
  const double g = left_std / right_std;
  const double r_hat = (abs_sum / n) * (abs_sum / n) / (sq_sum / n);
  const double r_norm = r_hat * (g * g * g + 1.0) * (g + 1.0) / ((g * g + 1.0) * (g * g + 1.0));

  const auto& table = shape_table();
  std::size_t best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < table.ratio.size(); ++i) {
    const double e = (table.ratio[i] - r_norm) * (table.ratio[i] - r_norm);
    if (e < best_err) {
      best_err = e;
      best = i;
    }
  }
  const double a = table.shape[best];
  const double scale = std::sqrt(std::tgamma(1.0 / a) / std::tgamma(3.0 / a));
  AggdParams p;
  p.shape = a;
  p.left_scale = left_std * scale;
  p.right_scale = right_std * scale;
  p.mean = (p.right_scale - p.left_scale) * std::tgamma(2.0 / a) / std::tgamma(1.0 / a);
  return p;
}

std::vector<NiqeFeature> niqe_features(const Image& img, PatchSelection selection,
                                       const NiqeOptions& options) {
  const int ps = options.patch_size;
  if (ps < 8 || ps % 2 != 0) throw_invalid("niqe: patch size must be even and >= 8");
  if (img.height() < ps || img.width() < ps) {
    throw_invalid("niqe: image " + std::to_string(img.height()) + "x" +
                  std::to_string(img.width()) + " is smaller than one " +
                  std::to_string(ps) + "px patch");
  }
  const int rows = img.height() / ps;
  const int cols = img.width() / ps;

  const Mscn fine = mscn(luminance(img));
  const Image half_img = resize_bilinear(img, img.height() / 2, img.width() / 2);
  const Mscn coarse = mscn(luminance(half_img));

  std::vector<double> sharpness;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int y = r * ps; y < (r + 1) * ps; ++y) {
        for (int x = c * ps; x < (c + 1) * ps; ++x) s += fine.sigma.at(y, x);
      }
      sharpness.push_back(s / (static_cast<double>(ps) * ps));
    }
  }
  const double peak = *std::max_element(sharpness.begin(), sharpness.end());

  std::vector<NiqeFeature> out;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (selection == PatchSelection::kSharp &&
          sharpness[static_cast<std::size_t>(r) * cols + c] <
              options.sharpness_threshold * peak) {
        continue;
      }
      NiqeFeature f{};
      scale_features(fine.coeffs, r * ps, c * ps, ps, f.data());
      scale_features(coarse.coeffs, r * ps / 2, c * ps / 2, ps / 2,
                     f.data() + kNiqeFeaturesPerScale);
      out.push_back(f);
    }
  }
  return out;
}

bool NiqeModel::valid() const {
  constexpr int d = kNiqeFeatureDim;
  if (mean.size() != d || cov.size() != static_cast<std::size_t>(d) * d) return false;
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (std::fabs(cov[i * d + j] - cov[j * d + i]) > 1e-9) return false;
      m(i, j) = cov[i * d + j];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -1e-9;
}

NiqeModel niqe_fit(std::span<const Image> pristine, const NiqeOptions& options) {
  if (pristine.size() < kMinFitImages) {
    throw Error(ErrorCode::kInsufficientData,
                "niqe_fit: need at least 10 images, got " + std::to_string(pristine.size()));
  }
  std::vector<NiqeFeature> all;
  std::size_t contributing = 0;
  for (const auto& img : pristine) {
    auto f = niqe_features(img, PatchSelection::kSharp, options);
    if (!f.empty()) ++contributing;
    all.insert(all.end(), f.begin(), f.end());
  }
  if (contributing < kMinFitImages || all.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "niqe_fit: too few sharp patches");
  }
  NiqeModel model;
  mean_and_cov(all, model.mean, model.cov);
  model.meta = {pristine.size(), all.size(), options.patch_size,
                options.sharpness_threshold, 2};
  return model;
}

double niqe_distance(const NiqeModel& model, std::span<const double> mean,
                     std::span<const double> cov) {
  constexpr int d = kNiqeFeatureDim;
  if (model.mean.size() != d || model.cov.size() != static_cast<std::size_t>(d) * d ||
      mean.size() != d || cov.size() != static_cast<std::size_t>(d) * d) {
    throw_invalid("niqe_distance: expected 36-dim mean and 36x36 covariance");
  }
  Eigen::VectorXd diff(d);
  Eigen::MatrixXd pooled(d, d);
  for (int i = 0; i < d; ++i) {
    diff(i) = model.mean[i] - mean[i];
    for (int j = 0; j < d; ++j) pooled(i, j) = (model.cov[i * d + j] + cov[i * d + j]) / 2.0;
  }
  if (diff.isZero(0.0)) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pooled);
  const Eigen::VectorXd proj = es.eigenvectors().transpose() * diff;
  double q = 0.0;
  for (int i = 0; i < d; ++i) {
    const double lambda = es.eigenvalues()(i);
    if (lambda > kEigenFloor) q += proj(i) * proj(i) / lambda;
  }
  return std::sqrt(std::max(q, 0.0));
}

double niqe_score(const NiqeModel& model, const Image& img) {
  const auto feats = niqe_features(img, PatchSelection::kAll,
                                   {model.meta.patch_size, model.meta.sharpness_threshold});
  if (feats.size() < 2) {
    throw Error(ErrorCode::kInsufficientData,
                "niqe_score: need at least 2 patches, image has " +
                    std::to_string(feats.size()));
  }
  std::vector<double> mean, cov;
  mean_and_cov(feats, mean, cov);
  return niqe_distance(model, mean, cov);
}

void save_niqe_model(const std::filesystem::path& path, const NiqeModel& model) {
  nlohmann::json j = {
      {"mean", model.mean},
      {"cov", model.cov},
      {"meta",
       {{"corpus_size", model.meta.corpus_size},
        {"patch_count", model.meta.patch_count},
        {"patch_size", model.meta.patch_size},
        {"sharpness_threshold", model.meta.sharpness_threshold},
        {"scales", model.meta.scales},
        {"feature_dim", kNiqeFeatureDim}}}};
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

NiqeModel load_niqe_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::kParseError, path.string() + ": not a JSON object");
  }
  NiqeModel m;
  try {
    m.mean = j.at("mean").get<std::vector<double>>();
    const auto& cov = j.at("cov");
    if (!cov.empty() && cov.front().is_array()) {
      for (const auto& row : cov) {
        for (double v : row.get<std::vector<double>>()) m.cov.push_back(v);
      }
    } else {
      m.cov = cov.get<std::vector<double>>();
    }
    if (j.contains("meta")) {
      const auto& meta = j["meta"];
      m.meta.corpus_size = meta.value("corpus_size", std::size_t{0});
      m.meta.patch_count = meta.value("patch_count", std::size_t{0});
      m.meta.patch_size = meta.value("patch_size", 96);
      m.meta.sharpness_threshold = meta.value("sharpness_threshold", 0.75);
      m.meta.scales = meta.value("scales", 2);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  if (!m.valid()) {
    throw Error(ErrorCode::kParseError,
                path.string() + ": model must hold a 36-dim mean and a symmetric PSD "
                                "36x36 covariance");
  }
  return m;
}

}  // namespace lightd::metrics
