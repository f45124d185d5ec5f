#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lightd::metrics {

/// Lowercased tokens; ASCII punctuation is treated as whitespace.
using TokenSeq = std::vector<std::string>;

TokenSeq tokenize(std::string_view text);

/// Corpus BLEU-4. Clipped n-gram precisions for n = 1..4 are combined as a
/// geometric mean; an order with zero matches contributes epsilon / total
/// (total floored at 1). Brevity penalty uses the closest reference length
/// (ties resolved toward the shorter reference).
double bleu(std::span<const TokenSeq> candidates,
            std::span<const std::vector<TokenSeq>> references);

inline constexpr double kBleuEpsilon = 1e-9;
inline constexpr double kRougeBeta = 1.2;

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);

/// Max over references of the LCS F-measure with beta = 1.2. An empty
/// candidate scores 0.
double rouge_l(const TokenSeq& candidate, std::span<const TokenSeq> references);

/// CIDEr with n = 1..4, raw term counts weighted by
/// idf = log(N / min(1 + df, N)), where df counts the reference sets in
/// `corpus` containing the n-gram. Per-candidate score is 10 x the mean over
/// n of the reference-averaged cosine; the result is the mean over
/// candidates.
double cider(std::span<const TokenSeq> candidates,
             std::span<const std::vector<TokenSeq>> references,
             std::span<const std::vector<TokenSeq>> corpus);

/// Per-candidate CIDEr scores (same definition, no final averaging).
std::vector<double> cider_scores(std::span<const TokenSeq> candidates,
                                 std::span<const std::vector<TokenSeq>> references,
                                 std::span<const std::vector<TokenSeq>> corpus);

/// Lowercase, punctuation stripped, articles (a, an, the) removed,
/// whitespace collapsed.
std::string normalize_answer(std::string_view answer);

/// Fraction of exact matches after normalize_answer.
double apa(std::span<const std::string> predictions, std::span<const std::string> answers);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

}  // namespace lightd::metrics
