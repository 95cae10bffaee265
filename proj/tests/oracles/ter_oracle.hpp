#pragma once

// Exhaustive TER on short sequences of single-character tokens. Breadth-first
// search over every sequence of block moves minimizes moves + edit distance of
// the rearranged hypothesis. With `reference_blocks_only`, a move is allowed
// only for a block that occurs verbatim in the reference (the shift rule of
// the metric); without it, any block may move.

#include <algorithm>
#include <cstddef>
#include <string>
#include <unordered_set>
#include <vector>

namespace oracle {

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1), prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::size_t optimal_ter_edits(const std::string& hyp, const std::string& ref, bool reference_blocks_only) {
  std::unordered_set<std::string> seen{hyp};
  std::vector<std::string> frontier{hyp};
  std::size_t best = edit_distance(hyp, ref);
  for (std::size_t moves = 1; !frontier.empty() && moves < best; ++moves) {
    std::vector<std::string> next;
    for (const auto& s : frontier) {
      for (std::size_t start = 0; start < s.size(); ++start) {
        for (std::size_t len = 1; start + len <= s.size(); ++len) {
          const std::string block = s.substr(start, len);
          if (reference_blocks_only && ref.find(block) == std::string::npos) break;
          const std::string rest = s.substr(0, start) + s.substr(start + len);
          for (std::size_t dest = 0; dest <= rest.size(); ++dest) {
            std::string moved = rest.substr(0, dest) + block + rest.substr(dest);
            if (seen.insert(moved).second) {
              best = std::min(best, moves + edit_distance(moved, ref));
              next.push_back(std::move(moved));
            }
          }
        }
      }
    }
    frontier = std::move(next);
  }
  return best;
}

}  // namespace oracle
