#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "deskmt/corpus.hpp"

namespace deskmt {

/// Ordered byte-pair-encoding merges. The end-of-word marker is appended to
/// the last symbol of every word ("low</w>").
struct BpeCodes {
  using Merge = std::pair<std::string, std::string>;

  std::vector<Merge> merges;
  std::string eow = "</w>";

  std::size_t num_merges() const { return merges.size(); }

  /// Codes file text: header line, then one "left right" line per merge.
  std::string serialize() const;
  static BpeCodes parse(std::string_view text);

  std::string hash() const;

  bool operator==(const BpeCodes&) const = default;
};

/// Splits a word into UTF-8 characters and marks the last one.
std::vector<std::string> initial_symbols(std::string_view word, std::string_view eow);

/// Greedy merge learning over word frequencies. Ties between equally frequent
/// pairs go to the lexicographically smallest (left, right). Learning stops
/// after `num_merges` merges or when no pair occurs at least twice.
BpeCodes learn_bpe(const std::map<std::string, std::size_t>& word_counts, std::size_t num_merges,
                   std::string eow = "</w>");

/// Pools source and target sides of every pair.
BpeCodes learn_bpe(const ParallelCorpus& corpus, std::size_t num_merges, std::string eow = "</w>");

/// Applies codes with merge ranks precomputed. Not thread-safe: keeps a
/// per-word segmentation cache.
class BpeApplier {
 public:
  explicit BpeApplier(BpeCodes codes);

  const BpeCodes& codes() const { return codes_; }

  Sentence apply(const Sentence& sentence) const;
  std::vector<std::string> segment_word(std::string_view word) const;

 private:
  struct PairHash {
    std::size_t operator()(const BpeCodes::Merge& m) const {
      return std::hash<std::string>()(m.first) * 31 + std::hash<std::string>()(m.second);
    }
  };

  BpeCodes codes_;
  std::unordered_map<BpeCodes::Merge, std::size_t, PairHash> rank_;
  mutable std::unordered_map<std::string, std::vector<std::string>> cache_;
};

Sentence apply_bpe(const BpeCodes& codes, const Sentence& sentence);

/// Glues subwords back into words, closing a word at each end-of-word marker.
Sentence decode_bpe(const BpeCodes& codes, const Sentence& subwords);

}  // namespace deskmt
