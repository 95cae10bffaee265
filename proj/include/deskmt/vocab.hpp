#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "deskmt/corpus.hpp"

namespace deskmt {

using TokenId = std::int32_t;
using IdSequence = std::vector<TokenId>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumSpecials = 4;

/// Symbol <-> id table for one language side. Ids 0..3 are PAD, BOS, EOS, UNK;
/// the remaining ids follow descending frequency, ties by symbol order.
class Vocabulary {
 public:
  Vocabulary();

  static Vocabulary build(std::span<const Sentence> sentences, std::size_t max_size);

  std::size_t size() const { return symbols_.size(); }
  TokenId id_of(std::string_view symbol) const;
  const std::string& symbol_of(TokenId id) const;
  std::size_t frequency(TokenId id) const { return freqs_.at(static_cast<std::size_t>(id)); }
  bool contains(std::string_view symbol) const;

  IdSequence encode(const Sentence& subwords) const;
  /// Throws RangeError for ids outside the table; PAD ids are skipped.
  Sentence decode(std::span<const TokenId> ids) const;

  /// Header line "version 1; size=N; specials=<pad>,<s>,</s>,<unk>" then one
  /// "symbol<TAB>frequency" line per id.
  std::string serialize() const;
  static Vocabulary parse(std::string_view text);
  std::string hash() const;

  bool operator==(const Vocabulary& other) const {
    return symbols_ == other.symbols_ && freqs_ == other.freqs_;
  }

 private:
  void add(std::string symbol, std::size_t freq);

  std::vector<std::string> symbols_;
  std::vector<std::size_t> freqs_;
  std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace deskmt
