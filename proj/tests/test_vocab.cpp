#include <doctest.h>

#include <map>
#include <vector>

#include "deskmt/bpe.hpp"
#include "deskmt/errors.hpp"
#include "deskmt/synth.hpp"
#include "deskmt/vocab.hpp"

using namespace deskmt;

TEST_CASE("three symbols under capacity give size 7") {
  const std::vector<Sentence> s{{"a", "b"}, {"c", "a"}};
  const auto v = Vocabulary::build(s, 32000);
  CHECK(v.size() == 7);
  CHECK(v.symbol_of(kPad) == "<pad>");
  CHECK(v.symbol_of(kBos) == "<s>");
  CHECK(v.symbol_of(kEos) == "</s>");
  CHECK(v.symbol_of(kUnk) == "<unk>");
  CHECK(v.symbol_of(4) == "a");
}

TEST_CASE("frequency cutoff keeps the most frequent symbols, ties by symbol order") {
  std::vector<Sentence> s;
  for (int i = 0; i < 5; ++i) s.push_back({"b", "a"});
  s.push_back({"c"});
  const auto v = Vocabulary::build(s, 2);
  CHECK(v.size() == 6);
  CHECK(v.id_of("a") == 4);
  CHECK(v.id_of("b") == 5);
  CHECK(v.id_of("c") == kUnk);
  CHECK(v.frequency(4) == 5);
}

TEST_CASE("frequency ranking matches a counting oracle") {
  const auto synth = synth_two_domain(4, 300, 100);
  std::vector<Sentence> sides;
  std::map<std::string, std::size_t> counts;
  for (const auto& p : synth.generic_train.pairs) {
    sides.push_back(p.source);
    for (const auto& w : p.source) ++counts[w];
  }
  const auto v = Vocabulary::build(sides, 25);
  REQUIRE(v.size() == 29);
  for (TokenId id = 5; id < static_cast<TokenId>(v.size()); ++id) {
    const auto& prev = v.symbol_of(id - 1);
    const auto& cur = v.symbol_of(id);
    CHECK(counts[prev] >= counts[cur]);
    if (counts[prev] == counts[cur]) CHECK(prev < cur);
    CHECK(v.frequency(id) == counts[cur]);
  }
  std::size_t kept_min = counts[v.symbol_of(static_cast<TokenId>(v.size() - 1))];
  for (const auto& [w, c] : counts) {
    if (!v.contains(w)) CHECK(c <= kept_min);
  }
}

TEST_CASE("encode and decode") {
  const std::vector<Sentence> s{{"x", "y", "z"}};
  const auto v = Vocabulary::build(s, 10);
  const Sentence in{"z", "x", "y"};
  CHECK(v.decode(v.encode(in)) == in);
  CHECK(v.encode({"nope"}) == IdSequence{kUnk});
  const IdSequence specials{kBos, kEos};
  CHECK(v.decode(specials) == Sentence{"<s>", "</s>"});
  const IdSequence padded{kPad, 4, kPad};
  CHECK(v.decode(padded) == Sentence{v.symbol_of(4)});
  const IdSequence bad{7};
  CHECK_THROWS_AS(v.decode(bad), RangeError);
  const IdSequence negative{-1};
  CHECK_THROWS_AS(v.decode(negative), RangeError);
}

TEST_CASE("empty input gives the specials only; max_size 0 is rejected") {
  CHECK(Vocabulary::build({}, 5).size() == kNumSpecials);
  CHECK_THROWS_AS(Vocabulary::build({}, 0), RangeError);
}

TEST_CASE("no UNK on the training corpus once BPE is applied") {
  const auto synth = synth_two_domain(8, 500, 200);
  const auto codes = learn_bpe(synth.generic_train, 200);
  BpeApplier bpe(codes);
  std::vector<Sentence> src;
  for (const auto& p : synth.generic_train.pairs) src.push_back(bpe.apply(p.source));
  const auto v = Vocabulary::build(src, 50000);
  for (const auto& s : src) {
    for (auto id : v.encode(s)) CHECK(id != kUnk);
  }
}

TEST_CASE("serialize, parse and deterministic ids") {
  const auto synth = synth_two_domain(2, 200, 100);
  std::vector<Sentence> tgt;
  for (const auto& p : synth.generic_train.pairs) tgt.push_back(p.target);
  const auto v = Vocabulary::build(tgt, 40);
  const auto text = v.serialize();
  CHECK(text.rfind("version 1; size=" + std::to_string(v.size()) +
                       "; specials=<pad>,<s>,</s>,<unk>\n",
                   0) == 0);
  CHECK(Vocabulary::parse(text) == v);
  CHECK(Vocabulary::build(tgt, 40).hash() == v.hash());
  CHECK_THROWS_AS(Vocabulary::parse(""), FormatError);
  CHECK_THROWS_AS(Vocabulary::parse("version 1; size=5; specials=<pad>,<s>,</s>,<unk>\nbad\n"),
                  FormatError);
}
