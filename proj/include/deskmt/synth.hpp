#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>

#include "deskmt/corpus.hpp"

namespace deskmt {

/// Toy two-domain translation task.
///
/// A seeded bilingual lexicon (six word classes) is rendered through sentence
/// templates; the target side swaps adjective/noun order and moves adverbs in
/// front of their verb. The in-domain variant swaps 30% of every word class
/// for domain-only terms and adds templates that never occur in generic text.
struct SynthCorpora {
  ParallelCorpus generic_train;
  ParallelCorpus generic_test;
  ParallelCorpus indomain_train;
  ParallelCorpus indomain_test;
  std::set<std::string> domain_source_terms;
  std::set<std::string> domain_target_terms;
};

struct SynthOptions {
  double domain_replacement = 0.3;
  /// Probability that an in-domain sentence uses a domain-only template.
  double domain_template_rate = 0.5;
};

/// Held-out test size used for a training size of `train_lines`.
std::size_t synth_test_lines(std::size_t train_lines);

/// Requires both counts >= 100. Same arguments give identical corpora.
SynthCorpora synth_two_domain(std::uint64_t seed, std::size_t generic_lines,
                              std::size_t indomain_lines, const SynthOptions& options = {});

}  // namespace deskmt
