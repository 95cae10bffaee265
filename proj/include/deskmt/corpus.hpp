#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace deskmt {

using Sentence = std::vector<std::string>;

struct SentencePair {
  Sentence source;
  Sentence target;

  bool operator==(const SentencePair&) const = default;
};

enum class Domain { generic, in_domain };

std::string_view to_string(Domain d);

/// Aligned sentence pairs in load order.
struct ParallelCorpus {
  std::string name;
  Domain domain = Domain::generic;
  std::vector<SentencePair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  bool operator==(const ParallelCorpus&) const = default;
};

/// Prefix slicing plan. `seedless` is kept for file compatibility; only
/// prefix slicing is implemented.
struct SliceSpec {
  std::vector<std::size_t> sizes;
  bool seedless = true;
};

/// Whitespace tokenization.
Sentence tokenize(std::string_view line);
std::string join(const Sentence& tokens);

/// Pair i is (line i of source, line i of target). Throws AlignmentError on a
/// line-count mismatch and FormatError on an empty line.
ParallelCorpus load_parallel(const std::filesystem::path& source_path,
                             const std::filesystem::path& target_path,
                             std::string name = {}, Domain domain = Domain::generic);

void save_parallel(const ParallelCorpus& corpus, const std::filesystem::path& source_path,
                   const std::filesystem::path& target_path);

/// Nested prefixes of `corpus`, one per entry of spec.sizes.
std::vector<ParallelCorpus> slice(const ParallelCorpus& corpus, const SliceSpec& spec);

/// (all but the last n pairs, last n pairs).
std::pair<ParallelCorpus, ParallelCorpus> split_heldout(const ParallelCorpus& corpus,
                                                        std::size_t n);

/// Pairs of `first` followed by pairs of `second`.
ParallelCorpus concat(const ParallelCorpus& first, const ParallelCorpus& second,
                      std::string name);

/// SHA-256 over the canonical two-column text rendering.
std::string corpus_hash(const ParallelCorpus& corpus);

}  // namespace deskmt
