#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>

#include "caption_oracle.hpp"
#include "doctest.h"
#include "json.hpp"
#include "lightd/error.hpp"
#include "lightd/metrics/caption.hpp"

using namespace lightd;
using namespace lightd::metrics;

namespace {

struct Fixture {
  std::string id;
  TokenSeq candidate;
  std::vector<TokenSeq> references;
};

// independent tokenizer: lowercase, ASCII punctuation becomes a space
TokenSeq split(std::string_view s) {
  TokenSeq out;
  std::string cur;
  for (char ch : s) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u) || std::ispunct(u)) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<Fixture> load_fixtures() {
  std::ifstream in(std::string(LIGHTD_FIXTURES_DIR) + "/captions.jsonl");
  REQUIRE(in);
  std::vector<Fixture> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    Fixture f{j["id"], split(j["candidate"].get<std::string>()), {}};
    for (const auto& r : j["references"]) f.references.push_back(split(r.get<std::string>()));
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

TEST_SUITE("caption") {

TEST_CASE("tokenizer") {
  CHECK(tokenize("  The Cat,  sat.") == TokenSeq{"the", "cat", "sat"});
  CHECK(tokenize("") == TokenSeq{});
  CHECK(tokenize("a\tb\nc") == TokenSeq{"a", "b", "c"});
  std::ifstream in(std::string(LIGHTD_FIXTURES_DIR) + "/captions.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = nlohmann::json::parse(line)["candidate"].get<std::string>();
    CHECK(tokenize(c) == split(c));
  }
}

TEST_CASE("fixture corpus matches the brute-force oracles") {
  const auto fx = load_fixtures();
  REQUIRE(fx.size() == 10);
  std::vector<TokenSeq> cands;
  std::vector<std::vector<TokenSeq>> refs;
  for (const auto& f : fx) {
    cands.push_back(f.candidate);
    refs.push_back(f.references);
  }
  CHECK(std::abs(bleu(cands, refs) - oracle::bleu4(cands, refs)) <= 1e-6);
  for (const auto& f : fx) {
    CAPTURE(f.id);
    CHECK(std::abs(rouge_l(f.candidate, f.references) - oracle::rouge_l(f.candidate, f.references)) <= 1e-6);
    for (const auto& r : f.references) CHECK(lcs_length(f.candidate, r) == oracle::lcs_brute(f.candidate, r));
    // single-sentence BLEU too
    const std::vector<TokenSeq> c1{f.candidate};
    const std::vector<std::vector<TokenSeq>> r1{f.references};
    CHECK(std::abs(bleu(c1, r1) - oracle::bleu4(c1, r1)) <= 1e-6);
  }
  CHECK(std::abs(cider(cands, refs, refs) - oracle::cider(cands, refs, refs)) <= 1e-6);
  const auto per = cider_scores(cands, refs, refs);
  for (std::size_t i = 0; i < per.size(); ++i) {
    CHECK(std::abs(per[i] - oracle::cider_one(cands[i], refs[i], refs)) <= 1e-6);
  }
  // 3-image toy corpus
  const std::vector<std::vector<TokenSeq>> toy(refs.begin(), refs.begin() + 3);
  const std::vector<TokenSeq> toyc(cands.begin(), cands.begin() + 3);
  CHECK(std::abs(cider(toyc, toy, toy) - oracle::cider(toyc, toy, toy)) <= 1e-6);
}

TEST_CASE("ROUGE-L worked example") {
  const std::vector<TokenSeq> ref{split("the cat")};
  CHECK(lcs_length(split("the cat sat"), ref[0]) == 2);
  CHECK(std::abs(rouge_l(split("the cat sat"), ref) - 0.8299) <= 1e-4);
  CHECK(rouge_l(split("dog"), ref) == 0.0);
  CHECK(rouge_l(TokenSeq{}, ref) == 0.0);
  CHECK_THROWS_AS(rouge_l(split("x"), std::vector<TokenSeq>{}), Error);
}

TEST_CASE("rouge_l(x, [x]) is 1") {
  std::mt19937_64 rng(9);
  const std::vector<std::string> vocab{"a", "the", "cat", "dog", "sat", "on", "mat", "red"};
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::uniform_int_distribution<int> len(1, 15);
  for (int t = 0; t < 200; ++t) {
    TokenSeq x(static_cast<std::size_t>(len(rng)));
    for (auto& w : x) w = vocab[pick(rng)];
    CHECK(rouge_l(x, std::vector<TokenSeq>{x}) == 1.0);
  }
}

TEST_CASE("BLEU edge cases") {
  const std::vector<TokenSeq> c{split("a man riding a horse")};
  CHECK(bleu(c, std::vector<std::vector<TokenSeq>>{{split("a man riding a horse")}}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bleu(std::vector<TokenSeq>{split("zebra xylophone quartz")},
             std::vector<std::vector<TokenSeq>>{{split("a man riding a horse")}}) <= 1e-2);
  const std::vector<TokenSeq> tc{split("the cat")};
  const std::vector<std::vector<TokenSeq>> tr{{split("the cat sat")}};
  CHECK(std::abs(bleu(tc, tr) - oracle::bleu4(tc, tr)) <= 1e-6);
  CHECK_THROWS_AS(bleu(std::vector<TokenSeq>{}, std::vector<std::vector<TokenSeq>>{}), Error);
  CHECK_THROWS_AS(bleu(c, std::vector<std::vector<TokenSeq>>{{}}), Error);
  CHECK_THROWS_AS(bleu(c, std::vector<std::vector<TokenSeq>>{}), Error);
}

TEST_CASE("CIDEr zero overlap and reference permutation") {
  const auto fx = load_fixtures();
  std::vector<std::vector<TokenSeq>> corpus;
  for (const auto& f : fx) corpus.push_back(f.references);
  const std::vector<TokenSeq> odd{split("quantum zebra xylophone")};
  CHECK(cider(odd, std::vector<std::vector<TokenSeq>>{fx[0].references}, corpus) == 0.0);

  std::mt19937_64 rng(3);
  for (const auto& f : fx) {
    auto perm = f.references;
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::vector<TokenSeq> c{f.candidate};
    const double a = cider(c, std::vector<std::vector<TokenSeq>>{f.references}, corpus);
    const double b = cider(c, std::vector<std::vector<TokenSeq>>{perm}, corpus);
    CHECK(std::abs(a - b) <= 1e-12);
    CHECK(a >= 0.0);
  }
  CHECK_THROWS_AS(cider(odd, std::vector<std::vector<TokenSeq>>{fx[0].references},
                        std::vector<std::vector<TokenSeq>>{}),
                  Error);
}

TEST_CASE("whitespace changes do not move any metric") {
  const std::string cand = "a man riding a horse on a beach";
  const std::string ref = "a man rides a horse along the beach";
  const std::string cand2 = "  a   man\triding a horse\n on a  beach ";
  const std::vector<std::vector<TokenSeq>> r{{tokenize(ref)}};
  CHECK(bleu(std::vector<TokenSeq>{tokenize(cand)}, r) ==
        bleu(std::vector<TokenSeq>{tokenize(cand2)}, r));
  CHECK(rouge_l(tokenize(cand), r[0]) == rouge_l(tokenize(cand2), r[0]));
  CHECK(cider(std::vector<TokenSeq>{tokenize(cand)}, r, r) ==
        cider(std::vector<TokenSeq>{tokenize(cand2)}, r, r));
}

TEST_CASE("APA") {
  CHECK(normalize_answer("The dog.") == "dog");
  CHECK(normalize_answer("  An  Apple!! ") == "apple");
  const std::vector<std::string> p{"The dog.", "red", "two", "blue"};
  const std::vector<std::string> a{"dog", "Red", "2", "blue"};
  CHECK(apa(p, a) == 0.75);
  CHECK(apa(a, a) == 1.0);
  CHECK_THROWS_AS(apa(p, std::vector<std::string>{"x"}), Error);
}

TEST_CASE("cosine similarity") {
  const std::vector<double> u{1, 2, 3}, nu{-1, -2, -3}, e1{1, 0, 0}, e2{0, 1, 0};
  CHECK(cosine_similarity(u, u) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(u, nu) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(cosine_similarity(e1, e2) == 0.0);
  CHECK_THROWS_AS(cosine_similarity(u, std::vector<double>{0, 0, 0}), Error);
  CHECK_THROWS_AS(cosine_similarity(u, std::vector<double>{1, 0}), Error);
}

}  // TEST_SUITE
