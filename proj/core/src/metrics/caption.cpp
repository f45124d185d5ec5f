#include "lightd/metrics/caption.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>

#include "lightd/error.hpp"

namespace lightd::metrics {
namespace {

constexpr int kMaxOrder = 4;

using NgramCounts = std::map<std::string, int>;

NgramCounts ngram_counts(const TokenSeq& tokens, int n) {
  NgramCounts counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int k = 1; k < n; ++k) {
      key.push_back('\x1f');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

void check_parallel(std::size_t candidates, std::size_t references, const char* what) {
  if (candidates == 0) throw_invalid(std::string(what) + ": empty candidate list");
  if (candidates != references) {
    throw_invalid(std::string(what) + ": candidate/reference count mismatch");
  }
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u) || std::ispunct(u)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double bleu(std::span<const TokenSeq> candidates,
            std::span<const std::vector<TokenSeq>> references) {
  check_parallel(candidates.size(), references.size(), "bleu");
  std::array<double, kMaxOrder> matches{};
  std::array<double, kMaxOrder> totals{};
  double cand_len = 0.0;
  double ref_len = 0.0;

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const TokenSeq& cand = candidates[i];
    const auto& refs = references[i];
    if (refs.empty()) throw_invalid("bleu: candidate without references");

    for (int n = 1; n <= kMaxOrder; ++n) {
      NgramCounts max_ref;
      for (const auto& ref : refs) {
        for (const auto& [g, c] : ngram_counts(ref, n)) {
          int& slot = max_ref[g];
          slot = std::max(slot, c);
        }
      }
      for (const auto& [g, c] : ngram_counts(cand, n)) {
        const auto it = max_ref.find(g);
        if (it != max_ref.end()) matches[n - 1] += std::min(c, it->second);
      }
      if (cand.size() >= static_cast<std::size_t>(n)) {
        totals[n - 1] += static_cast<double>(cand.size() - n + 1);
      }
    }

    const auto c = static_cast<long>(cand.size());
    long best = static_cast<long>(refs.front().size());
    for (const auto& ref : refs) {
      const auto r = static_cast<long>(ref.size());
      const long d = std::labs(r - c);
      const long bd = std::labs(best - c);
      if (d < bd || (d == bd && r < best)) best = r;
    }
    cand_len += static_cast<double>(c);
    ref_len += static_cast<double>(best);
  }

  if (cand_len == 0.0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    const double num = matches[n] > 0.0 ? matches[n] : kBleuEpsilon;
    log_sum += std::log(num / std::max(totals[n], 1.0));
  }
  const double bp = std::exp(std::min(0.0, 1.0 - ref_len / cand_len));
  return bp * std::exp(log_sum / kMaxOrder);
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const TokenSeq& candidate, std::span<const TokenSeq> references) {
  if (references.empty()) throw_invalid("rouge_l: at least one reference required");
  if (candidate.empty()) return 0.0;
  constexpr double beta2 = kRougeBeta * kRougeBeta;
  double best = 0.0;
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    const auto l = static_cast<double>(lcs_length(candidate, ref));
    if (l == 0.0) continue;
    const double p = l / static_cast<double>(candidate.size());
    const double r = l / static_cast<double>(ref.size());
    best = std::max(best, (1.0 + beta2) * p * r / (r + beta2 * p));
  }
  return best;
}

std::vector<double> cider_scores(std::span<const TokenSeq> candidates,
                                 std::span<const std::vector<TokenSeq>> references,
                                 std::span<const std::vector<TokenSeq>> corpus) {
  check_parallel(candidates.size(), references.size(), "cider");
  if (corpus.empty()) throw_invalid("cider: empty corpus");
  const double n_docs = static_cast<double>(corpus.size());

  std::array<std::map<std::string, int>, kMaxOrder> df;
  for (const auto& refs : corpus) {
    for (int n = 1; n <= kMaxOrder; ++n) {
      NgramCounts seen;
      for (const auto& ref : refs) {
        for (const auto& entry : ngram_counts(ref, n)) seen[entry.first] = 1;
      }
      for (const auto& entry : seen) ++df[n - 1][entry.first];
    }
  }

  auto weighted = [&](const TokenSeq& tokens, int n) {
    std::map<std::string, double> vec;
    for (const auto& [g, c] : ngram_counts(tokens, n)) {
      const auto it = df[n - 1].find(g);
      const double d = it == df[n - 1].end() ? 0.0 : it->second;
      vec[g] = c * std::log(n_docs / std::min(1.0 + d, n_docs));
    }
    return vec;
  };
  auto norm = [](const std::map<std::string, double>& v) {
    double s = 0.0;
    for (const auto& e : v) s += e.second * e.second;
    return std::sqrt(s);
  };

  std::vector<double> scores(candidates.size(), 0.0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& refs = references[i];
    if (refs.empty()) throw_invalid("cider: candidate without references");
    double sum_n = 0.0;
    for (int n = 1; n <= kMaxOrder; ++n) {
      const auto vc = weighted(candidates[i], n);
      const double nc = norm(vc);
      double sum_refs = 0.0;
      for (const auto& ref : refs) {
        const auto vr = weighted(ref, n);
        const double nr = norm(vr);
        if (nc == 0.0 || nr == 0.0) continue;
        double d = 0.0;
        for (const auto& [g, w] : vc) {
          const auto it = vr.find(g);
          if (it != vr.end()) d += w * it->second;
        }
        sum_refs += d / (nc * nr);
      }
      sum_n += sum_refs / static_cast<double>(refs.size());
    }
    scores[i] = 10.0 * sum_n / kMaxOrder;
  }
  return scores;
}

double cider(std::span<const TokenSeq> candidates,
             std::span<const std::vector<TokenSeq>> references,
             std::span<const std::vector<TokenSeq>> corpus) {
  const auto scores = cider_scores(candidates, references, corpus);
  double s = 0.0;
  for (double v : scores) s += v;
  return s / static_cast<double>(scores.size());
}

std::string normalize_answer(std::string_view answer) {
  std::string out;
  for (const auto& tok : tokenize(answer)) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

double apa(std::span<const std::string> predictions, std::span<const std::string> answers) {
  if (predictions.size() != answers.size()) throw_invalid("apa: length mismatch");
  if (predictions.empty()) throw_invalid("apa: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (normalize_answer(predictions[i]) == normalize_answer(answers[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw_invalid("cosine_similarity: dimension mismatch");
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw_invalid("cosine_similarity: zero vector");
  return std::clamp(uv / std::sqrt(uu * vv), -1.0, 1.0);
}

}  // namespace lightd::metrics
