#include "lightd/victim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <random>

#include "http_client.hpp"
#include "lightd/error.hpp"
#include "wire.hpp"

namespace lightd {
namespace {

std::vector<double> gaussian_matrix(std::uint64_t seed, std::size_t rows,
                                    std::size_t cols) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> m(rows * cols);
  for (double& v : m) v = normal(rng);
  return m;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> normalized(std::vector<double> z, const char* what) {
  const double n = norm2(z);
  if (n == 0.0) {
    throw Error(ErrorCode::kDegenerateEmbedding,
                std::string(what) + ": zero vector before normalization");
  }
  for (double& v : z) v /= n;
  return z;
}

}  // namespace

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(u)));
  }
  return out;
}

std::vector<double> trigram_features(std::string_view normalized, int buckets) {
  if (buckets < 1) throw_invalid("trigram_features: buckets must be positive");
  std::vector<double> counts(static_cast<std::size_t>(buckets), 0.0);
  const std::string padded = " " + std::string(normalized) + " ";
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t k = i; k < i + 3; ++k) {
      h ^= static_cast<unsigned char>(padded[k]);
      h *= 1099511628211ULL;
    }
    counts[h % static_cast<std::uint64_t>(buckets)] += 1.0;
  }
  return counts;
}

SurrogateEmbedder::SurrogateEmbedder(EmbedderConfig config) : config_(config) {
  if (config_.patch_size < 1 || config_.embed_dim < 1) {
    throw_invalid("embedder: patch_size and embed_dim must be positive");
  }
  const auto rows = static_cast<std::size_t>(config_.embed_dim);
  const auto cols = static_cast<std::size_t>(input_dim());
  image_proj_ = gaussian_matrix(config_.image_seed, rows, cols);
  text_proj_ = gaussian_matrix(config_.text_seed, rows, cols);
}

std::vector<double> SurrogateEmbedder::project(const std::vector<double>& matrix,
                                               std::span<const double> x) const {
  const std::size_t cols = x.size();
  std::vector<double> z(static_cast<std::size_t>(config_.embed_dim), 0.0);
  for (std::size_t r = 0; r < z.size(); ++r) {
    const double* row = matrix.data() + r * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += row[c] * x[c];
    z[r] = s;
  }
  return z;
}

std::vector<double> SurrogateEmbedder::embed_image(const Image& img) const {
  const auto x = resize_bilinear_values(img, config_.patch_size, config_.patch_size);
  return normalized(project(image_proj_, x), "embed_image");
}

std::vector<double> SurrogateEmbedder::embed_text(std::string_view text) const {
  const std::string norm = normalize_text(text);
  if (norm.empty()) throw_invalid("embed_text: empty text");
  const auto features = trigram_features(norm, input_dim());
  return normalized(project(text_proj_, features), "embed_text");
}

double SurrogateEmbedder::cosine_to(const Image& img, std::span<const double> target,
                                    GradientTensor* grad) const {
  if (target.size() != static_cast<std::size_t>(config_.embed_dim)) {
    throw_invalid("cosine_to: target dimension mismatch");
  }
  const int p = config_.patch_size;
  const std::vector<double> x = resize_bilinear_values(img, p, p);
  const std::vector<double> z = project(image_proj_, x);
  const double n = norm2(z);
  if (n == 0.0) {
    throw Error(ErrorCode::kDegenerateEmbedding,
                "embed_image: zero vector before normalization");
  }
  // Cosine of the normalized embedding; written as a.b / sqrt(a.a * b.b) so
  // identical vectors give exactly 1.
  double zz = 0.0, tt = 0.0, zt = 0.0;
  std::vector<double> zh(z.size());
  for (std::size_t r = 0; r < z.size(); ++r) {
    zh[r] = z[r] / n;
    zz += zh[r] * zh[r];
    tt += target[r] * target[r];
    zt += zh[r] * target[r];
  }
  if (tt == 0.0) throw_invalid("cosine_to: zero target vector");
  const double c = std::clamp(zt / std::sqrt(zz * tt), -1.0, 1.0);
  if (grad == nullptr) return c;

  // d cos / dz = (t / |t| - c * z_hat) / |z|, then back through W^T and the resize.
  const double tn = std::sqrt(tt);
  std::vector<double> gz(z.size());
  for (std::size_t r = 0; r < z.size(); ++r) gz[r] = (target[r] / tn - c * zh[r]) / n;
  std::vector<double> gx(x.size(), 0.0);
  for (std::size_t r = 0; r < gz.size(); ++r) {
    const double* row = image_proj_.data() + r * x.size();
    for (std::size_t k = 0; k < x.size(); ++k) gx[k] += row[k] * gz[r];
  }
  GradientTensor g_small = GradientTensor::from_values(
      p, p, std::vector<float>(gx.begin(), gx.end()));
  *grad = resize_adjoint(g_small, img.height(), img.width());
  return c;
}

SurrogateVictim::SurrogateVictim(SurrogateVictimConfig config)
    : config_(config), match_(config.match), nat_(config.naturalness) {
  if (!std::isfinite(config_.nat_weight)) throw_invalid("victim: nat_weight must be finite");
}

std::string SurrogateVictim::id() const {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "surrogate-victim(P=%d,D=%d,seeds=%llu/%llu/%llu,lambda=%g)",
                config_.match.patch_size, config_.match.embed_dim,
                static_cast<unsigned long long>(config_.match.image_seed),
                static_cast<unsigned long long>(config_.match.text_seed),
                static_cast<unsigned long long>(config_.naturalness.image_seed),
                config_.nat_weight);
  return buf;
}

double SurrogateVictim::match_term(const Image& relit, std::string_view text,
                                   GradientTensor* grad) const {
  const auto t = match_.embed_text(text);
  const double c = match_.cosine_to(relit, t, grad);
  if (grad != nullptr) {
    for (float& v : grad->data()) v = -v;
  }
  return 1.0 - c;
}

double SurrogateVictim::nat_term(const Image& relit, const Image& clean,
                                 GradientTensor* grad) const {
  const auto target = nat_.embed_image(clean);
  const double c = nat_.cosine_to(relit, target, grad);
  if (grad != nullptr && config_.nat_weight != 1.0) {
    for (float& v : grad->data()) v = static_cast<float>(v * config_.nat_weight);
  }
  return config_.nat_weight * c;
}

LossBreakdown SurrogateVictim::loss(const Image& relit, const Image& clean,
                                    std::string_view text) const {
  if (relit.shape() != clean.shape()) throw_invalid("loss_J: image shapes differ");
  LossBreakdown b;
  b.match_term = match_term(relit, text, nullptr);
  b.nat_term = nat_term(relit, clean, nullptr);
  b.total = b.match_term + b.nat_term;
  return b;
}

LossAndGrad SurrogateVictim::loss_grad(const Image& relit, const Image& clean,
                                       std::string_view text) const {
  if (relit.shape() != clean.shape()) throw_invalid("loss_J: image shapes differ");
  LossAndGrad out;
  GradientTensor g_nat;
  out.loss.match_term = match_term(relit, text, &out.grad);
  out.loss.nat_term = nat_term(relit, clean, &g_nat);
  out.loss.total = out.loss.match_term + out.loss.nat_term;
  out.grad += g_nat;
  return out;
}

RemoteVictim::RemoteVictim(RemoteEndpointConfig config)
    : config_(std::move(config)),
      client_(std::make_unique<detail::JsonHttpClient>(detail::HttpClientOptions{
          config_.url, config_.timeout, config_.max_in_flight})) {}

RemoteVictim::~RemoteVictim() = default;

std::string RemoteVictim::id() const { return "remote-victim(" + config_.url + ")"; }

LossAndGrad RemoteVictim::loss_grad(const Image& relit, const Image& clean,
                                    std::string_view text) const {
  const nlohmann::json req = {{"image", wire::encode_tensor(relit)},
                              {"clean_image", wire::encode_tensor(clean)},
                              {"text", std::string(text)}};
  const auto res = client_->post("/loss_grad", req);
  for (const char* key : {"loss", "match_term", "nat_term"}) {
    if (!res.contains(key) || !res[key].is_number()) {
      throw Error(ErrorCode::kBackendError,
                  std::string("/loss_grad: missing numeric field \"") + key + "\"");
    }
  }
  if (!res.contains("grad")) {
    throw Error(ErrorCode::kBackendError, "/loss_grad: response lacks \"grad\"");
  }
  LossAndGrad out;
  out.loss.total = res["loss"].get<double>();
  out.loss.match_term = res["match_term"].get<double>();
  out.loss.nat_term = res["nat_term"].get<double>();
  out.grad = wire::decode_gradient(res["grad"]);
  if (out.grad.shape() != relit.shape()) {
    throw Error(ErrorCode::kBackendError, "/loss_grad: gradient shape differs from image");
  }
  return out;
}

LossBreakdown RemoteVictim::loss(const Image& relit, const Image& clean,
                                 std::string_view text) const {
  return loss_grad(relit, clean, text).loss;
}

}  // namespace lightd
