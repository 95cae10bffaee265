#include "deskmt/bpe.hpp"

#include <set>
#include <sstream>
#include <tuple>

#include "deskmt/errors.hpp"
#include "deskmt/hash.hpp"

namespace deskmt {

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;  // stray continuation byte: keep it as its own symbol
}

// Merges every non-overlapping occurrence of (left, right), scanning left to right.
bool merge_pair(std::vector<std::string>& symbols, const BpeCodes::Merge& pair) {
  bool changed = false;
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == pair.first && symbols[i + 1] == pair.second) {
      out.push_back(symbols[i] + symbols[i + 1]);
      ++i;
      changed = true;
    } else {
      out.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(out);
  return changed;
}

}  // namespace

std::string BpeCodes::serialize() const {
  std::ostringstream out;
  out << "version 1; merges=" << merges.size() << "; eow=" << eow << '\n';
  for (const auto& [l, r] : merges) out << l << ' ' << r << '\n';
  return out.str();
}

BpeCodes BpeCodes::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string header;
  if (!std::getline(in, header)) throw FormatError("codes file is empty");
  static constexpr std::string_view kPrefix = "version 1; merges=";
  if (header.rfind(kPrefix, 0) != 0) throw FormatError("unsupported codes header: " + header);
  const auto eow_at = header.find("; eow=");
  if (eow_at == std::string::npos) throw FormatError("codes header lacks eow marker");
  BpeCodes codes;
  std::size_t declared = 0;
  try {
    declared = std::stoul(header.substr(kPrefix.size(), eow_at - kPrefix.size()));
  } catch (const std::exception&) {
    throw FormatError("bad merge count in codes header: " + header);
  }
  codes.eow = header.substr(eow_at + 6);
  if (codes.eow.empty()) throw FormatError("empty eow marker");
  std::string line;
  std::set<Merge> seen;
  while (std::getline(in, line)) {
    const auto space = line.find(' ');
    if (space == std::string::npos || space == 0 || space + 1 == line.size() ||
        line.find(' ', space + 1) != std::string::npos) {
      throw FormatError("bad merge line " + std::to_string(codes.merges.size() + 2) + ": " + line);
    }
    Merge m{line.substr(0, space), line.substr(space + 1)};
    if (!seen.insert(m).second) throw FormatError("duplicate merge: " + line);
    codes.merges.push_back(std::move(m));
  }
  if (codes.merges.size() != declared) {
    throw FormatError("codes header declares " + std::to_string(declared) + " merges, file has " +
                      std::to_string(codes.merges.size()));
  }
  return codes;
}

std::string BpeCodes::hash() const { return sha256_hex(serialize()); }

std::vector<std::string> initial_symbols(std::string_view word, std::string_view eow) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const std::size_t n = std::min(utf8_length(static_cast<unsigned char>(word[i])), word.size() - i);
    out.emplace_back(word.substr(i, n));
    i += n;
  }
  if (!out.empty()) out.back() += eow;
  return out;
}

BpeCodes learn_bpe(const std::map<std::string, std::size_t>& word_counts, std::size_t num_merges,
                   std::string eow) {
  if (word_counts.empty()) throw FormatError("cannot learn BPE codes from an empty corpus");
  if (eow.empty()) throw FormatError("empty eow marker");

  using Pair = BpeCodes::Merge;
  struct Word {
    std::vector<std::string> symbols;
    long long freq;
  };
  std::vector<Word> words;
  words.reserve(word_counts.size());
  for (const auto& [w, c] : word_counts) {
    if (w.find(eow) != std::string::npos) {
      throw FormatError("word '" + w + "' contains the end-of-word marker");
    }
    words.push_back({initial_symbols(w, eow), static_cast<long long>(c)});
  }

  std::map<Pair, long long> counts;
  std::map<Pair, std::set<std::size_t>> where;
  // Ordered by (-count, left, right): begin() is the next merge.
  std::set<std::tuple<long long, std::string, std::string>> ranking;

  auto bump = [&](const Pair& p, long long delta) {
    auto& c = counts[p];
    if (c > 0) ranking.erase({-c, p.first, p.second});
    c += delta;
    if (c > 0) ranking.insert({-c, p.first, p.second});
  };
  auto account = [&](std::size_t wi, long long sign) {
    const auto& s = words[wi].symbols;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      Pair p{s[i], s[i + 1]};
      bump(p, sign * words[wi].freq);
      if (sign > 0) where[p].insert(wi);
    }
  };
  for (std::size_t wi = 0; wi < words.size(); ++wi) account(wi, +1);

  BpeCodes codes;
  codes.eow = std::move(eow);
  while (codes.merges.size() < num_merges && !ranking.empty()) {
    const auto& [neg, left, right] = *ranking.begin();
    if (-neg < 2) break;
    Pair best{left, right};
    codes.merges.push_back(best);
    const std::set<std::size_t> touched = where[best];
    for (auto wi : touched) {
      auto& s = words[wi].symbols;
      bool present = false;
      for (std::size_t i = 0; i + 1 < s.size() && !present; ++i) {
        present = s[i] == best.first && s[i + 1] == best.second;
      }
      if (!present) continue;
      account(wi, -1);
      merge_pair(s, best);
      account(wi, +1);
    }
    where.erase(best);
  }
  return codes;
}

BpeCodes learn_bpe(const ParallelCorpus& corpus, std::size_t num_merges, std::string eow) {
  std::map<std::string, std::size_t> counts;
  for (const auto& p : corpus.pairs) {
    for (const auto& w : p.source) ++counts[w];
    for (const auto& w : p.target) ++counts[w];
  }
  return learn_bpe(counts, num_merges, std::move(eow));
}

BpeApplier::BpeApplier(BpeCodes codes) : codes_(std::move(codes)) {
  for (std::size_t i = 0; i < codes_.merges.size(); ++i) rank_.emplace(codes_.merges[i], i);
}

std::vector<std::string> BpeApplier::segment_word(std::string_view word) const {
  if (auto it = cache_.find(std::string(word)); it != cache_.end()) return it->second;
  auto symbols = initial_symbols(word, codes_.eow);
  while (symbols.size() > 1) {
    std::size_t best_rank = SIZE_MAX;
    const BpeCodes::Merge* best = nullptr;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = rank_.find({symbols[i], symbols[i + 1]});
      if (it != rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = &it->first;
      }
    }
    if (!best) break;
    merge_pair(symbols, *best);
  }
  cache_.emplace(std::string(word), symbols);
  return symbols;
}

Sentence BpeApplier::apply(const Sentence& sentence) const {
  Sentence out;
  for (const auto& w : sentence) {
    auto pieces = segment_word(w);
    out.insert(out.end(), std::make_move_iterator(pieces.begin()),
               std::make_move_iterator(pieces.end()));
  }
  return out;
}

Sentence apply_bpe(const BpeCodes& codes, const Sentence& sentence) {
  return BpeApplier(codes).apply(sentence);
}

Sentence decode_bpe(const BpeCodes& codes, const Sentence& subwords) {
  Sentence out;
  std::string word;
  const std::string& eow = codes.eow;
  for (const auto& s : subwords) {
    if (s.size() >= eow.size() && s.compare(s.size() - eow.size(), eow.size(), eow) == 0) {
      word.append(s, 0, s.size() - eow.size());
      out.push_back(std::move(word));
      word.clear();
    } else {
      word += s;
    }
  }
  if (!word.empty()) out.push_back(std::move(word));
  return out;
}

}  // namespace deskmt
