#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "deskmt/errors.hpp"
#include "deskmt/eval.hpp"
#include "deskmt/rng.hpp"
#include "oracles/bleu_oracle.hpp"
#include "oracles/ter_oracle.hpp"

using namespace deskmt;

namespace {

Sentence words(const std::string& text) { return tokenize(text); }

Sentence chars(const std::string& s) {
  Sentence out;
  for (char c : s) out.emplace_back(1, c);
  return out;
}

std::vector<Sentence> random_side(Rng& rng, std::size_t n, int vocab, int max_len, int min_len) {
  std::vector<Sentence> out(n);
  for (auto& s : out) {
    const int len = min_len + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_len - min_len + 1)));
    for (int i = 0; i < len; ++i) s.push_back("w" + std::to_string(rng.below(static_cast<std::uint64_t>(vocab))));
  }
  return out;
}

// Every string over {a, b, c} with length at most n.
std::vector<std::string> all_strings(std::size_t n) {
  std::vector<std::string> out{""};
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].size() == n) continue;
    for (char c : {'a', 'b', 'c'}) out.push_back(out[i] + c);
  }
  return out;
}

}  // namespace

TEST_CASE("BLEU examples") {
  const std::vector<Sentence> refs{words("the cat sat on the mat"), words("a b c d e")};
  const auto same = bleu(refs, refs);
  CHECK(same.bleu == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(same.brevity_penalty == 1.0);

  const auto disjoint = bleu({words("x y z"), words("q r s t")}, refs);
  CHECK(disjoint.bleu == 0.0);

  const auto clip = bleu({words("the the the the")}, {words("the cat")});
  CHECK(clip.matches[0] == 1);
  CHECK(clip.totals[0] == 4);
  CHECK(clip.precisions[0] == 0.25);
  CHECK(clip.bleu == 0.0);
}

TEST_CASE("BLEU matches the brute-force oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    const int vocab = 2 + static_cast<int>(rng.below(9));
    const auto refs = random_side(rng, n, vocab, 12, 1);
    auto hyps = random_side(rng, n, vocab, 12, 0);
    // Mix in near-copies so that non-zero scores are common.
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.bernoulli(0.5)) hyps[i] = refs[i];
      if (rng.bernoulli(0.3) && !hyps[i].empty()) hyps[i].pop_back();
    }
    const double expected = oracle::corpus_bleu(hyps, refs);
    const double got = bleu(hyps, refs).bleu;
    INFO("trial " << trial);
    CHECK(std::abs(got - expected) <= 1e-9);
    CHECK(got >= 0.0);
    CHECK(got <= 100.0 + 1e-9);
  }
}

TEST_CASE("BLEU is 100 only for exact copies") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto refs = random_side(rng, 1 + rng.below(5), 4, 8, 4);
    auto hyps = refs;
    CHECK(bleu(hyps, refs).bleu == doctest::Approx(100.0).epsilon(1e-12));
    hyps[0][rng.below(hyps[0].size())] = "zz";
    CHECK(bleu(hyps, refs).bleu < 100.0 - 1e-9);
  }
}

TEST_CASE("input errors") {
  const std::vector<Sentence> one{words("a b")};
  CHECK_THROWS_AS(bleu({}, {}), RangeError);
  CHECK_THROWS_AS(bleu(one, {}), RangeError);
  CHECK_THROWS_AS(ter({words("a")}, {Sentence{}}), RangeError);
  CHECK_NOTHROW(score({Sentence{}}, one));
  CHECK(score({Sentence{}}, one).bleu == 0.0);
}

TEST_CASE("TER examples") {
  CHECK(ter({words("a b c")}, {words("a b c")}).ter == 0.0);
  const auto sub = ter({words("a x c")}, {words("a b c")});
  CHECK(sub.ter == doctest::Approx(100.0 / 3.0).epsilon(1e-12));
  CHECK(sub.ter_sentences[0].shifts == 0);

  const auto shift = ter({words("a b d c")}, {words("a b c d")});
  CHECK(shift.ter == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(shift.ter_sentences[0].shifts == 1);
  CHECK(shift.ter_sentences[0].edits == 1);

  const auto over = ter({words("a b c d")}, {words("x")});
  CHECK(over.ter == doctest::Approx(400.0).epsilon(1e-12));

  const auto corpus = ter({words("a x c"), words("a b d c")}, {words("a b c"), words("a b c d")});
  CHECK(corpus.ter == doctest::Approx(100.0 * 2.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("levenshtein") {
  CHECK(levenshtein(words("a b c"), words("a b c")) == 0);
  CHECK(levenshtein({}, words("a b")) == 2);
  CHECK(levenshtein(words("k i t t e n"), words("s i t t i n g")) == 3);
}

TEST_CASE("greedy TER lies between the optimum and plain edit distance") {
  const auto strings = all_strings(6);
  std::size_t checked = 0;
  for (const auto& h : strings) {
    for (const auto& r : strings) {
      if (r.empty() || h.size() + r.size() > 6) continue;
      const auto t = ter_sentence(chars(h), chars(r));
      CHECK(t.ref_length == r.size());
      CHECK(t.edits <= oracle::edit_distance(h, r));
      CHECK(t.edits >= oracle::optimal_ter_edits(h, r, true));
      CHECK((t.edits == 0) == (h == r));
      ++checked;
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("scores are pure") {
  Rng rng(9);
  const auto refs = random_side(rng, 15, 6, 10, 1);
  const auto hyps = random_side(rng, 15, 6, 10, 0);
  const auto a = score(hyps, refs);
  const auto b = score(hyps, refs);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.bleu == b.bleu);
  CHECK(a.ter == b.ter);
  CHECK(a.to_table().find("BLEU") != std::string::npos);
}
