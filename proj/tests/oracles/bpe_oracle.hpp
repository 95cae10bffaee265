#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

// Straightforward byte-pair encoding: recount every adjacent pair after each
// merge, apply merges one after another in learned order. ASCII words only.
namespace oracle {

using Symbols = std::vector<std::string>;
using Merge = std::pair<std::string, std::string>;

inline Symbols chars_with_eow(const std::string& word, const std::string& eow) {
  Symbols s;
  for (char ch : word) s.emplace_back(1, ch);
  if (!s.empty()) s.back() += eow;
  return s;
}

inline Symbols merge_everywhere(const Symbols& s, const Merge& m) {
  Symbols out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i + 1 < s.size() && s[i] == m.first && s[i + 1] == m.second) {
      out.push_back(s[i] + s[i + 1]);
      ++i;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

struct LearnResult {
  std::vector<Merge> merges;
  std::map<std::string, Symbols> segmentation;  // word -> final symbols
};

inline LearnResult learn(const std::map<std::string, std::size_t>& word_counts,
                         std::size_t num_merges, const std::string& eow) {
  LearnResult r;
  for (const auto& [w, c] : word_counts) r.segmentation[w] = chars_with_eow(w, eow);
  while (r.merges.size() < num_merges) {
    std::map<Merge, std::size_t> counts;
    for (const auto& [w, c] : word_counts) {
      const auto& s = r.segmentation[w];
      for (std::size_t i = 0; i + 1 < s.size(); ++i) counts[{s[i], s[i + 1]}] += c;
    }
    const Merge* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [pair, c] : counts) {
      if (c > best_count) {  // map order makes the first maximum the smallest pair
        best_count = c;
        best = &pair;
      }
    }
    if (!best || best_count < 2) break;
    const Merge m = *best;
    r.merges.push_back(m);
    for (auto& [w, s] : r.segmentation) s = merge_everywhere(s, m);
  }
  return r;
}

inline Symbols apply(const std::vector<Merge>& merges, const std::string& word,
                     const std::string& eow) {
  Symbols s = chars_with_eow(word, eow);
  for (const auto& m : merges) s = merge_everywhere(s, m);
  return s;
}

}  // namespace oracle
