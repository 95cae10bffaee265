#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <string>

#include "deskmt/corpus.hpp"
#include "deskmt/errors.hpp"
#include "deskmt/synth.hpp"
#include "test_util.hpp"

using namespace deskmt;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& p, const std::string& text) { test::write_file(p, text); }

ParallelCorpus numbered(std::size_t n) {
  ParallelCorpus c;
  for (std::size_t i = 0; i < n; ++i) {
    c.pairs.push_back({{"s" + std::to_string(i)}, {"t" + std::to_string(i)}});
  }
  return c;
}

bool is_prefix(const ParallelCorpus& a, const ParallelCorpus& b) {
  if (a.size() > b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a.pairs[i] == b.pairs[i])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("load_parallel reads aligned lines") {
  test::TempDir dir;
  write(dir.path / "a.src", "a b\nc\n");
  write(dir.path / "a.tgt", "x\ny z\n");
  const auto c = load_parallel(dir.path / "a.src", dir.path / "a.tgt");
  REQUIRE(c.size() == 2);
  CHECK(c.pairs[0] == SentencePair{{"a", "b"}, {"x"}});
  CHECK(c.pairs[1] == SentencePair{{"c"}, {"y", "z"}});
}

TEST_CASE("load_parallel of empty files is an empty corpus") {
  test::TempDir dir;
  write(dir.path / "e.src", "");
  write(dir.path / "e.tgt", "");
  CHECK(load_parallel(dir.path / "e.src", dir.path / "e.tgt").empty());
}

TEST_CASE("load_parallel rejects misaligned files with both counts") {
  test::TempDir dir;
  write(dir.path / "m.src", "a\nb\nc\n");
  write(dir.path / "m.tgt", "x\ny\n");
  try {
    load_parallel(dir.path / "m.src", dir.path / "m.tgt");
    FAIL("expected AlignmentError");
  } catch (const AlignmentError& e) {
    CHECK(std::string(e.what()).find("3 vs 2") != std::string::npos);
  }
}

TEST_CASE("load_parallel rejects an empty line with its number") {
  test::TempDir dir;
  write(dir.path / "b.src", "a\n\nc\n");
  write(dir.path / "b.tgt", "x\ny\nz\n");
  try {
    load_parallel(dir.path / "b.src", dir.path / "b.tgt");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("save then load reproduces the corpus") {
  test::TempDir dir;
  const auto synth = synth_two_domain(3, 100, 100);
  save_parallel(synth.indomain_test, dir.path / "r.src", dir.path / "r.tgt");
  const auto back = load_parallel(dir.path / "r.src", dir.path / "r.tgt");
  CHECK(back.pairs == synth.indomain_test.pairs);
}

TEST_CASE("slice returns nested prefixes") {
  const auto c = numbered(5);
  const auto s = slice(c, {{2, 4}});
  REQUIRE(s.size() == 2);
  CHECK(s[0].size() == 2);
  CHECK(s[1].size() == 4);
  CHECK(is_prefix(s[0], s[1]));
  CHECK(is_prefix(s[1], c));

  const auto whole = slice(numbered(10), {{10}});
  CHECK(whole[0].pairs == numbered(10).pairs);
}

TEST_CASE("slice nesting holds for every increasing size list") {
  const auto c = numbered(30);
  for (std::size_t a = 1; a <= 30; a += 3) {
    for (std::size_t b = a + 1; b <= 30; b += 4) {
      const auto s = slice(c, {{a, b}});
      CHECK(is_prefix(s[0], s[1]));
      CHECK(is_prefix(s[1], c));
    }
  }
}

TEST_CASE("slice rejects oversized and non-increasing sizes") {
  const auto c = numbered(5);
  CHECK_THROWS_AS(slice(c, {{6}}), RangeError);
  CHECK_THROWS_AS(slice(c, {{3, 3}}), RangeError);
  CHECK_THROWS_AS(slice(c, {{4, 2}}), RangeError);
}

TEST_CASE("split_heldout takes the last n pairs") {
  const auto c = numbered(10);
  const auto [train, test] = split_heldout(c, 2);
  CHECK(train.size() == 8);
  CHECK(test.size() == 2);
  CHECK(test.pairs[0] == c.pairs[8]);
  CHECK(concat(train, test, "").pairs == c.pairs);

  const auto [all, none] = split_heldout(c, 0);
  CHECK(all.size() == 10);
  CHECK(none.empty());

  CHECK_THROWS_AS(split_heldout(c, 10), RangeError);
}

TEST_CASE("synthetic corpora are deterministic per seed") {
  const auto a = synth_two_domain(11, 300, 200);
  const auto b = synth_two_domain(11, 300, 200);
  const auto c = synth_two_domain(12, 300, 200);
  CHECK(corpus_hash(a.generic_train) == corpus_hash(b.generic_train));
  CHECK(corpus_hash(a.indomain_test) == corpus_hash(b.indomain_test));
  CHECK(corpus_hash(a.generic_train) != corpus_hash(c.generic_train));
  CHECK_THROWS_AS(synth_two_domain(1, 99, 200), RangeError);
}

TEST_CASE("generic text never uses domain-only terms") {
  const auto s = synth_two_domain(5, 2000, 2000);
  REQUIRE(!s.domain_source_terms.empty());
  for (const auto* corpus : {&s.generic_train, &s.generic_test}) {
    for (const auto& p : corpus->pairs) {
      for (const auto& w : p.source) CHECK(s.domain_source_terms.count(w) == 0);
      for (const auto& w : p.target) CHECK(s.domain_target_terms.count(w) == 0);
    }
  }
}

TEST_CASE("about 30% of in-domain test tokens are unseen in generic training") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto s = synth_two_domain(seed, 20000, 5000);
    std::set<std::string> seen;
    for (const auto& p : s.generic_train.pairs) seen.insert(p.source.begin(), p.source.end());
    std::size_t total = 0;
    std::size_t unseen = 0;
    for (const auto& p : s.indomain_test.pairs) {
      for (const auto& w : p.source) {
        ++total;
        unseen += seen.count(w) == 0;
      }
    }
    const double frac = static_cast<double>(unseen) / static_cast<double>(total);
    INFO("seed " << seed << " unseen fraction " << frac);
    CHECK(std::abs(frac - 0.3) <= 0.05);
  }
}
