#include "deskmt/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string_view>
#include <vector>

#include "deskmt/errors.hpp"
#include "deskmt/rng.hpp"

namespace deskmt {

namespace {

enum WordClass { kDet, kNoun, kAdj, kVerb, kAdv, kPrep, kNumClasses };

constexpr std::array<std::size_t, kNumClasses> kClassSizes = {6, 48, 24, 30, 12, 8};

using Template = std::vector<WordClass>;

const std::vector<Template>& generic_templates() {
  static const std::vector<Template> t = {
      {kDet, kNoun, kVerb},
      {kDet, kAdj, kNoun, kVerb},
      {kDet, kNoun, kVerb, kDet, kNoun},
      {kDet, kAdj, kNoun, kVerb, kDet, kNoun},
      {kDet, kNoun, kVerb, kAdv},
      {kDet, kNoun, kVerb, kPrep, kDet, kNoun},
      {kDet, kNoun, kVerb, kDet, kAdj, kNoun, kAdv},
      {kAdv, kDet, kNoun, kVerb},
  };
  return t;
}

const std::vector<Template>& domain_templates() {
  static const std::vector<Template> t = {
      {kVerb, kDet, kNoun, kAdv},
      {kVerb, kDet, kAdj, kNoun, kPrep, kDet, kNoun},
      {kDet, kNoun, kPrep, kDet, kNoun, kVerb, kAdv},
  };
  return t;
}

struct Entry {
  std::string source;
  std::string target;
};

using Lexicon = std::array<std::vector<Entry>, kNumClasses>;

class WordMaker {
 public:
  explicit WordMaker(Rng& rng) : rng_(rng) {}

  // Source words are CV syllables, target words CVC-ish; both share letters
  // so character-level BPE fallback always has a known symbol.
  std::string make(bool target_side, std::size_t syllables) {
    static constexpr std::string_view kCons = "bdfgklmnprstvz";
    static constexpr std::string_view kVowels = "aeiou";
    while (true) {
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) {
        w.push_back(kCons[rng_.below(kCons.size())]);
        w.push_back(kVowels[rng_.below(kVowels.size())]);
      }
      if (target_side) w.push_back(kCons[rng_.below(kCons.size())]);
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

Sentence target_order(const Template& tmpl, const std::vector<const Entry*>& words) {
  std::vector<std::size_t> order(tmpl.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i + 1 < tmpl.size(); ++i) {
    const bool adj_noun = tmpl[order[i]] == kAdj && tmpl[order[i + 1]] == kNoun;
    const bool verb_adv = tmpl[order[i]] == kVerb && tmpl[order[i + 1]] == kAdv;
    if (adj_noun || verb_adv) {
      std::swap(order[i], order[i + 1]);
      ++i;
    }
  }
  Sentence out;
  for (auto k : order) out.push_back(words[k]->target);
  return out;
}

ParallelCorpus render(std::string name, Domain domain, std::size_t lines, const Lexicon& lexicon,
                      double domain_template_rate, Rng& rng) {
  ParallelCorpus corpus{std::move(name), domain, {}};
  corpus.pairs.reserve(lines);
  const auto& generic = generic_templates();
  const auto& special = domain_templates();
  for (std::size_t n = 0; n < lines; ++n) {
    const bool use_domain = domain == Domain::in_domain && rng.bernoulli(domain_template_rate);
    const Template& tmpl =
        use_domain ? special[rng.below(special.size())] : generic[rng.below(generic.size())];
    std::vector<const Entry*> words;
    Sentence source;
    for (auto cls : tmpl) {
      const auto& pool = lexicon[cls];
      words.push_back(&pool[rng.below(pool.size())]);
      source.push_back(words.back()->source);
    }
    corpus.pairs.push_back({std::move(source), target_order(tmpl, words)});
  }
  return corpus;
}

}  // namespace

std::size_t synth_test_lines(std::size_t train_lines) {
  return std::clamp<std::size_t>(train_lines / 10, 10, 1000);
}

SynthCorpora synth_two_domain(std::uint64_t seed, std::size_t generic_lines,
                              std::size_t indomain_lines, const SynthOptions& options) {
  if (generic_lines < 100 || indomain_lines < 100) {
    throw RangeError("synthetic corpora need at least 100 lines per domain");
  }
  Rng lex_rng = Rng::derive(seed, 0);
  WordMaker maker(lex_rng);
  Lexicon generic_lex;
  for (int cls = 0; cls < kNumClasses; ++cls) {
    // Function words short, content words longer.
    const std::size_t syl = (cls == kDet || cls == kPrep) ? 1 : 2;
    for (std::size_t i = 0; i < kClassSizes[cls]; ++i) {
      generic_lex[cls].push_back({maker.make(false, syl), maker.make(true, syl)});
    }
  }

  SynthCorpora out;
  Lexicon domain_lex = generic_lex;
  for (int cls = 0; cls < kNumClasses; ++cls) {
    auto& pool = domain_lex[cls];
    const auto replaced = static_cast<std::size_t>(
        std::lround(options.domain_replacement * static_cast<double>(pool.size())));
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    shuffle(idx, lex_rng);
    for (std::size_t r = 0; r < replaced; ++r) {
      // Domain terms are one syllable longer, like technical vocabulary.
      const std::size_t syl = (cls == kDet || cls == kPrep) ? 2 : 3;
      Entry term{maker.make(false, syl), maker.make(true, syl)};
      out.domain_source_terms.insert(term.source);
      out.domain_target_terms.insert(term.target);
      pool[idx[r]] = std::move(term);
    }
  }

  Rng generic_rng = Rng::derive(seed, 1);
  Rng domain_rng = Rng::derive(seed, 2);
  const std::size_t generic_test = synth_test_lines(generic_lines);
  const std::size_t domain_test = synth_test_lines(indomain_lines);
  auto generic = render("generic", Domain::generic, generic_lines + generic_test, generic_lex,
                        0.0, generic_rng);
  auto indomain = render("indomain", Domain::in_domain, indomain_lines + domain_test, domain_lex,
                         options.domain_template_rate, domain_rng);
  std::tie(out.generic_train, out.generic_test) = split_heldout(generic, generic_test);
  std::tie(out.indomain_train, out.indomain_test) = split_heldout(indomain, domain_test);
  return out;
}

}  // namespace deskmt
