#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "deskmt/corpus.hpp"

namespace deskmt {

struct TerSentence {
  std::size_t edits = 0;   // shifts + final edit distance
  std::size_t shifts = 0;
  std::size_t ref_length = 0;
};

/// Corpus-level scores. BLEU is on a 0-100 scale and TER is multiplied by 100.
struct EvalReport {
  double bleu = 0.0;
  std::array<double, 4> precisions{};
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  double brevity_penalty = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;

  double ter = 0.0;
  std::vector<TerSentence> ter_sentences;

  double decode_seconds = 0.0;

  std::string to_json() const;
  /// Two-line human-readable summary.
  std::string to_table() const;
};

/// Unsmoothed corpus BLEU over orders 1-4: any zero precision gives 0.
/// Throws RangeError on length mismatch, an empty corpus, or an empty reference.
EvalReport bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references);

/// Corpus TER: sum of per-sentence edits over sum of reference lengths.
EvalReport ter(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references);

/// BLEU and TER fields together.
EvalReport score(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references);

/// Word-level edit distance with unit costs.
std::size_t levenshtein(const Sentence& a, const Sentence& b);

/// Greedy shift search: repeatedly moves the hypothesis block that lowers the
/// total (edit distance + 1 per shift) the most. Candidate blocks must occur
/// verbatim in the reference and must not already be aligned as matches;
/// ties prefer the shorter block, then the leftmost origin, then the leftmost
/// destination.
TerSentence ter_sentence(const Sentence& hypothesis, const Sentence& reference);

}  // namespace deskmt
