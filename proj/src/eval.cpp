#include "deskmt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "deskmt/errors.hpp"

namespace deskmt {

namespace {

void check_inputs(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  if (hyps.size() != refs.size()) {
    throw RangeError("hypothesis and reference counts differ: " + std::to_string(hyps.size()) + " vs " +
                     std::to_string(refs.size()));
  }
  if (hyps.empty()) throw RangeError("cannot score an empty hypothesis corpus");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (refs[i].empty()) throw RangeError("reference " + std::to_string(i + 1) + " is empty");
  }
}

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const Sentence& s, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[Ngram(s.begin() + i, s.begin() + i + n)];
  return counts;
}

constexpr std::size_t kMaxShiftSize = 10;
constexpr std::size_t kMaxShiftDistance = 50;

// Edit distance plus, for every hypothesis and reference position, whether
// the backtrace aligns it as an exact match.
struct Alignment {
  std::size_t distance = 0;
  std::vector<bool> hyp_matched;
  std::vector<bool> ref_matched;
};

Alignment align(const Sentence& hyp, const Sentence& ref) {
  const std::size_t n = hyp.size(), m = ref.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      at(i, j) = std::min({at(i - 1, j - 1) + (hyp[i - 1] == ref[j - 1] ? 0 : 1), at(i - 1, j) + 1,
                           at(i, j - 1) + 1});
    }
  }
  Alignment a{at(n, m), std::vector<bool>(n, false), std::vector<bool>(m, false)};
  std::size_t i = n, j = m;
  while (i > 0 && j > 0) {
    const bool same = hyp[i - 1] == ref[j - 1];
    if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
      if (same) a.hyp_matched[i - 1] = a.ref_matched[j - 1] = true;
      --i;
      --j;
    } else if (at(i, j) == at(i - 1, j) + 1) {
      --i;
    } else {
      --j;
    }
  }
  return a;
}

Sentence move_block(const Sentence& s, std::size_t start, std::size_t len, std::size_t dest) {
  Sentence rest;
  rest.reserve(s.size());
  rest.insert(rest.end(), s.begin(), s.begin() + start);
  rest.insert(rest.end(), s.begin() + start + len, s.end());
  Sentence out(rest.begin(), rest.begin() + dest);
  out.insert(out.end(), s.begin() + start, s.begin() + start + len);
  out.insert(out.end(), rest.begin() + dest, rest.end());
  return out;
}

}  // namespace

std::size_t levenshtein(const Sentence& a, const Sentence& b) {
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

TerSentence ter_sentence(const Sentence& hypothesis, const Sentence& reference) {
  Sentence cur = hypothesis;
  TerSentence out;
  out.ref_length = reference.size();
  while (true) {
    const Alignment a = align(cur, reference);
    struct Best {
      std::size_t gain = 0;
      std::size_t len = 0, start = 0, dest = 0;
    } best;
    bool found = false;
    for (std::size_t start = 0; start < cur.size(); ++start) {
      for (std::size_t len = 1; len <= kMaxShiftSize && start + len <= cur.size(); ++len) {
        bool all_matched = true;
        for (std::size_t k = start; k < start + len; ++k) all_matched = all_matched && a.hyp_matched[k];
        bool occurs = false;
        bool useful_target = false;
        for (std::size_t j = 0; j + len <= reference.size(); ++j) {
          if (std::equal(cur.begin() + start, cur.begin() + start + len, reference.begin() + j)) {
            occurs = true;
            for (std::size_t k = j; k < j + len; ++k) useful_target = useful_target || !a.ref_matched[k];
          }
        }
        if (!occurs) break;  // longer blocks from this start cannot occur either
        if (all_matched || !useful_target) continue;
        const std::size_t rest = cur.size() - len;
        for (std::size_t dest = 0; dest <= rest; ++dest) {
          if (dest == start) continue;
          const std::size_t distance = dest > start ? dest - start : start - dest;
          if (distance > kMaxShiftDistance) continue;
          const std::size_t d = levenshtein(move_block(cur, start, len, dest), reference);
          if (d >= a.distance) continue;
          const std::size_t gain = a.distance - d;
          if (gain < 1) continue;
          if (!found || gain > best.gain ||
              (gain == best.gain && std::tie(len, start, dest) < std::tie(best.len, best.start, best.dest))) {
            best = {gain, len, start, dest};
            found = true;
          }
        }
      }
    }
    if (!found) {
      out.edits = out.shifts + a.distance;
      return out;
    }
    cur = move_block(cur, best.start, best.len, best.dest);
    ++out.shifts;
  }
}

EvalReport bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  check_inputs(hyps, refs);
  EvalReport r;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    r.hyp_length += hyps[s].size();
    r.ref_length += refs[s].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto h = ngram_counts(hyps[s], n);
      const auto ref = ngram_counts(refs[s], n);
      for (const auto& [gram, count] : h) {
        r.totals[n - 1] += count;
        if (auto it = ref.find(gram); it != ref.end()) r.matches[n - 1] += std::min(count, it->second);
      }
    }
  }
  double log_sum = 0.0;
  bool any_zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    r.precisions[n] = r.totals[n] ? static_cast<double>(r.matches[n]) / static_cast<double>(r.totals[n]) : 0.0;
    if (r.precisions[n] == 0.0) {
      any_zero = true;
    } else {
      log_sum += std::log(r.precisions[n]);
    }
  }
  const double c = static_cast<double>(r.hyp_length), ref_len = static_cast<double>(r.ref_length);
  r.brevity_penalty = c > ref_len ? 1.0 : (c == 0.0 ? 0.0 : std::exp(1.0 - ref_len / c));
  r.bleu = any_zero ? 0.0 : 100.0 * r.brevity_penalty * std::exp(log_sum / 4.0);
  return r;
}

EvalReport ter(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  check_inputs(hyps, refs);
  EvalReport r;
  std::size_t edits = 0, ref_words = 0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    r.ter_sentences.push_back(ter_sentence(hyps[s], refs[s]));
    edits += r.ter_sentences.back().edits;
    ref_words += refs[s].size();
  }
  r.ter = 100.0 * static_cast<double>(edits) / static_cast<double>(ref_words);
  return r;
}

EvalReport score(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  EvalReport r = bleu(hyps, refs);
  EvalReport t = ter(hyps, refs);
  r.ter = t.ter;
  r.ter_sentences = std::move(t.ter_sentences);
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["bleu"] = bleu;
  j["ter"] = ter;
  j["precisions"] = precisions;
  j["matches"] = matches;
  j["totals"] = totals;
  j["brevity_penalty"] = brevity_penalty;
  j["hyp_length"] = hyp_length;
  j["ref_length"] = ref_length;
  j["decode_seconds"] = decode_seconds;
  auto& sent = j["ter_sentences"] = nlohmann::json::array();
  for (const auto& s : ter_sentences) {
    sent.push_back({{"edits", s.edits}, {"shifts", s.shifts}, {"ref_length", s.ref_length}});
  }
  return j.dump();
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "BLEU " << bleu << "  TER " << ter << '\n';
  out << "p1-4 ";
  for (std::size_t n = 0; n < 4; ++n) out << (n ? "/" : "") << 100.0 * precisions[n];
  out << "  BP " << brevity_penalty << "  hyp_len " << hyp_length << "  ref_len " << ref_length << '\n';
  return out.str();
}

}  // namespace deskmt
