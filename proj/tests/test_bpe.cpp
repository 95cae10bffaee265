#include <doctest.h>

#include <map>
#include <set>
#include <string>

#include "deskmt/bpe.hpp"
#include "deskmt/errors.hpp"
#include "deskmt/rng.hpp"
#include "oracles/bpe_oracle.hpp"

using namespace deskmt;

namespace {

ParallelCorpus random_corpus(Rng& rng, int alphabet) {
  ParallelCorpus c;
  const int lines = 3 + static_cast<int>(rng.below(10));
  auto sentence = [&] {
    Sentence s;
    const int words = 1 + static_cast<int>(rng.below(6));
    for (int i = 0; i < words; ++i) {
      std::string w;
      const int len = 1 + static_cast<int>(rng.below(7));
      for (int k = 0; k < len; ++k) w += static_cast<char>('a' + rng.below(alphabet));
      s.push_back(w);
    }
    return s;
  };
  for (int i = 0; i < lines; ++i) c.pairs.push_back({sentence(), sentence()});
  return c;
}

std::map<std::string, std::size_t> pooled_counts(const ParallelCorpus& c) {
  std::map<std::string, std::size_t> counts;
  for (const auto& p : c.pairs) {
    for (const auto& w : p.source) ++counts[w];
    for (const auto& w : p.target) ++counts[w];
  }
  return counts;
}

}  // namespace

TEST_CASE("zero merges give an empty list and character fallback") {
  const auto codes = learn_bpe(std::map<std::string, std::size_t>{{"ab", 4}}, 0);
  CHECK(codes.merges.empty());
  CHECK(apply_bpe(codes, {"ab"}) == Sentence{"a", "b</w>"});
}

TEST_CASE("first merge on aaab x3 is (a, a)") {
  const std::map<std::string, std::size_t> counts{{"aaab", 3}};
  const auto codes = learn_bpe(counts, 10);
  REQUIRE(!codes.merges.empty());
  CHECK(codes.merges[0] == BpeCodes::Merge{"a", "a"});

  const auto ref = oracle::learn(counts, 10, "</w>");
  CHECK(codes.merges == ref.merges);
  CHECK(apply_bpe(codes, {"aaab"}) == ref.segmentation.at("aaab"));
}

TEST_CASE("decode_bpe glues at end-of-word markers") {
  BpeCodes codes;
  CHECK(decode_bpe(codes, {"a", "b</w>"}) == Sentence{"ab"});
  CHECK(decode_bpe(codes, {}).empty());
  CHECK(decode_bpe(codes, {"x</w>", "y", "z</w>"}) == Sentence{"x", "yz"});
}

TEST_CASE("learner and applier agree with the recount oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const auto corpus = random_corpus(rng, 2 + trial % 3);
    const auto counts = pooled_counts(corpus);
    const std::size_t merges = 1 + rng.below(25);
    const auto codes = learn_bpe(corpus, merges);
    const auto ref = oracle::learn(counts, merges, "</w>");
    REQUIRE(codes.merges == ref.merges);

    BpeApplier applier(codes);
    for (const auto& [word, count] : counts) {
      CHECK(applier.segment_word(word) == ref.segmentation.at(word));
      CHECK(applier.segment_word(word) == oracle::apply(ref.merges, word, "</w>"));
    }
    // Words never seen during learning.
    for (const char* w : {"abcabc", "cab", "aaaaaaa", "d"}) {
      CHECK(applier.segment_word(w) == oracle::apply(ref.merges, w, "</w>"));
    }
  }
}

TEST_CASE("decode inverts apply on every sentence") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto corpus = random_corpus(rng, 4);
    const auto codes = learn_bpe(corpus, 30);
    for (const auto& p : corpus.pairs) {
      CHECK(decode_bpe(codes, apply_bpe(codes, p.source)) == p.source);
      CHECK(decode_bpe(codes, apply_bpe(codes, p.target)) == p.target);
    }
  }
  const auto codes = learn_bpe(std::map<std::string, std::size_t>{{"héllo", 3}, {"wörld", 2}}, 20);
  const Sentence s{"héllo", "wörld", "ünseen"};
  CHECK(decode_bpe(codes, apply_bpe(codes, s)) == s);
}

TEST_CASE("applying codes to their own corpus stays inside the learned symbol set") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto corpus = random_corpus(rng, 3);
    const auto counts = pooled_counts(corpus);
    const auto ref = oracle::learn(counts, 12, "</w>");
    std::set<std::string> learned;
    for (const auto& [w, s] : ref.segmentation) learned.insert(s.begin(), s.end());

    const auto codes = learn_bpe(corpus, 12);
    std::set<std::string> produced;
    for (const auto& p : corpus.pairs) {
      for (const auto& s : apply_bpe(codes, p.source)) produced.insert(s);
      for (const auto& s : apply_bpe(codes, p.target)) produced.insert(s);
    }
    CHECK(produced == learned);
  }
}

TEST_CASE("codes serialize and parse") {
  Rng rng(9);
  const auto codes = learn_bpe(random_corpus(rng, 3), 15);
  const auto text = codes.serialize();
  CHECK(text.rfind("version 1; merges=" + std::to_string(codes.num_merges()) + "; eow=</w>\n", 0) == 0);
  CHECK(BpeCodes::parse(text) == codes);
  CHECK(BpeCodes::parse(text).serialize() == text);

  Rng again(9);
  CHECK(learn_bpe(random_corpus(again, 3), 15).serialize() == text);
}

TEST_CASE("malformed codes files and inputs are rejected") {
  CHECK_THROWS_AS(BpeCodes::parse(""), FormatError);
  CHECK_THROWS_AS(BpeCodes::parse("hello\n"), FormatError);
  CHECK_THROWS_AS(BpeCodes::parse("version 1; merges=2; eow=</w>\na b\n"), FormatError);
  CHECK_THROWS_AS(BpeCodes::parse("version 1; merges=2; eow=</w>\na b\na b\n"), FormatError);
  CHECK_THROWS_AS(learn_bpe(ParallelCorpus{}, 5), FormatError);
  CHECK_THROWS_AS(learn_bpe(std::map<std::string, std::size_t>{{"a</w>b", 2}}, 5), FormatError);
}
