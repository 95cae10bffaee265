#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <vector>

#include "deskmt/bpe.hpp"
#include "deskmt/eval.hpp"
#include "deskmt/train.hpp"
#include "deskmt/vocab.hpp"

namespace deskmt {

/// BPE codes plus source and target vocabularies, learned once and frozen.
struct Preprocessing {
  BpeCodes codes;
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;

  /// Codes learned on both sides of `corpus`; vocabularies on its segmented sides.
  static Preprocessing learn(const ParallelCorpus& corpus, std::size_t num_merges,
                             std::size_t max_vocab = 50000);

  std::string codes_hash() const { return codes.hash(); }
  std::string src_vocab_hash() const { return src_vocab.hash(); }
  std::string tgt_vocab_hash() const { return tgt_vocab.hash(); }

  /// Writes codes.bpe, src.vocab and tgt.vocab into `dir`.
  void save(const std::filesystem::path& dir) const;
  static Preprocessing load(const std::filesystem::path& dir);

  PreprocessedCorpus encode(const ParallelCorpus& corpus) const;

  /// Throws IncompatibleError if `ckpt` was trained with other artifacts.
  void check_compatible(const Checkpoint& ckpt) const;
};

struct DecodeOptions {
  int beam_size = 1;  // 1 means greedy
  double length_norm_alpha = 0.0;
};

/// Word-level translation: BPE, ids, decode, back to words. Safe to share
/// between threads.
class Translator {
 public:
  Translator(std::shared_ptr<const Checkpoint> ckpt, const Preprocessing& prep);

  Sentence translate(const Sentence& source, const DecodeOptions& options = {}) const;
  std::vector<Sentence> translate_all(const std::vector<Sentence>& sources,
                                      const DecodeOptions& options = {}) const;

  const Checkpoint& checkpoint() const { return *ckpt_; }

 private:
  std::shared_ptr<const Checkpoint> ckpt_;
  const Preprocessing* prep_;
  mutable std::mutex bpe_mutex_;
  BpeApplier bpe_;
};

/// Translates every source sentence of `test` and scores against its targets.
/// decode_seconds covers translation only.
EvalReport evaluate_model(const Checkpoint& ckpt, const Preprocessing& prep,
                          const ParallelCorpus& test, const DecodeOptions& options = {});

}  // namespace deskmt
