#include "deskmt/vocab.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "deskmt/errors.hpp"
#include "deskmt/hash.hpp"

namespace deskmt {

namespace {
constexpr const char* kSpecialSymbols[kNumSpecials] = {"<pad>", "<s>", "</s>", "<unk>"};
}

Vocabulary::Vocabulary() {
  for (auto* s : kSpecialSymbols) add(s, 0);
}

void Vocabulary::add(std::string symbol, std::size_t freq) {
  ids_.emplace(symbol, static_cast<TokenId>(symbols_.size()));
  symbols_.push_back(std::move(symbol));
  freqs_.push_back(freq);
}

Vocabulary Vocabulary::build(std::span<const Sentence> sentences, std::size_t max_size) {
  if (max_size < 1) throw RangeError("vocabulary max_size must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences) {
    for (const auto& sym : s) ++counts[sym];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is already in symbol order, so a stable sort on frequency breaks
  // ties lexicographically.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (auto& [sym, freq] : ranked) {
    if (v.size() - kNumSpecials >= max_size) break;
    if (v.contains(sym)) continue;  // a corpus token spelled like a special
    v.add(sym, freq);
  }
  return v;
}

TokenId Vocabulary::id_of(std::string_view symbol) const {
  auto it = ids_.find(std::string(symbol));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view symbol) const {
  return ids_.count(std::string(symbol)) > 0;
}

const std::string& Vocabulary::symbol_of(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size()) {
    throw RangeError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(symbols_.size()));
  }
  return symbols_[static_cast<std::size_t>(id)];
}

IdSequence Vocabulary::encode(const Sentence& subwords) const {
  IdSequence out;
  out.reserve(subwords.size());
  for (const auto& s : subwords) out.push_back(id_of(s));
  return out;
}

Sentence Vocabulary::decode(std::span<const TokenId> ids) const {
  Sentence out;
  for (auto id : ids) {
    const auto& sym = symbol_of(id);
    if (id != kPad) out.push_back(sym);
  }
  return out;
}

std::string Vocabulary::serialize() const {
  std::ostringstream out;
  out << "version 1; size=" << size() << "; specials=";
  for (std::size_t i = 0; i < kNumSpecials; ++i) out << (i ? "," : "") << kSpecialSymbols[i];
  out << '\n';
  for (std::size_t i = 0; i < size(); ++i) out << symbols_[i] << '\t' << freqs_[i] << '\n';
  return out.str();
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string header;
  if (!std::getline(in, header)) throw FormatError("vocabulary file is empty");
  static constexpr std::string_view kPrefix = "version 1; size=";
  const auto semi = header.find("; specials=");
  if (header.rfind(kPrefix, 0) != 0 || semi == std::string::npos) {
    throw FormatError("unsupported vocabulary header: " + header);
  }
  const std::size_t declared = std::stoul(header.substr(kPrefix.size(), semi - kPrefix.size()));
  Vocabulary v;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw FormatError("bad vocabulary line: " + line);
    std::string sym = line.substr(0, tab);
    const std::size_t freq = std::stoul(line.substr(tab + 1));
    if (row < kNumSpecials) {
      if (sym != kSpecialSymbols[row]) throw FormatError("special symbol mismatch at id " + std::to_string(row));
      v.freqs_[row] = freq;
    } else {
      if (v.contains(sym)) throw FormatError("duplicate vocabulary symbol: " + sym);
      v.add(std::move(sym), freq);
    }
    ++row;
  }
  if (row != declared) {
    throw FormatError("vocabulary header declares " + std::to_string(declared) + " entries, file has " +
                      std::to_string(row));
  }
  return v;
}

std::string Vocabulary::hash() const { return sha256_hex(serialize()); }

}  // namespace deskmt
