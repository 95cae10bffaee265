#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "deskmt/model.hpp"

namespace deskmt {

/// Precision of trained models and checkpoints.
using Real = float;

/// Plain SGD with a step-decayed learning rate.
struct TrainSchedule {
  double base_lr = 1.0;
  double decay_factor = 0.5;
  int decay_start_epoch = 10;
  int total_epochs = 18;
  int batch_size = 64;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;

  /// lr 1, decay 0.5 after epoch 10, 18 epochs, batches of 64.
  static TrainSchedule large();
  /// Toy-corpus preset: same decay rule, fewer epochs, smaller batches.
  static TrainSchedule desk();

  void validate() const;
  bool operator==(const TrainSchedule&) const = default;
};

/// base_lr up to and including decay_start_epoch, then
/// base_lr * decay_factor^(epoch - decay_start_epoch). Epochs count from 1.
double lr_schedule(const TrainSchedule& schedule, int epoch);

struct SgdStats {
  double grad_norm = 0.0;
  bool clipped = false;
};

/// Clips gradients to a global norm of clip_norm (if exceeded), then
/// p -= lr * grad. Throws NumericError, leaving params untouched, on a
/// non-finite gradient.
template <typename T>
SgdStats sgd_step(ModelParams<T>& params, const ModelParams<T>& grads, double lr, double clip_norm);

struct ProvenanceRecord {
  std::string corpus;
  int epochs = 0;
  std::string timestamp;

  bool operator==(const ProvenanceRecord&) const = default;
};

/// Everything needed to resume training.
struct Checkpoint {
  ModelConfig config;
  TrainSchedule schedule;
  ModelParams<Real> params;
  int epochs_completed = 0;
  double current_lr = 0.0;
  std::string codes_hash;
  std::string src_vocab_hash;
  std::string tgt_vocab_hash;
  std::vector<ProvenanceRecord> provenance;
};

/// Corpus after BPE and vocabulary lookup, tagged with the hashes of the
/// artifacts that produced it.
struct PreprocessedCorpus {
  std::string name;
  std::vector<EncodedPair> pairs;
  std::string codes_hash;
  std::string src_vocab_hash;
  std::string tgt_vocab_hash;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> dev_loss;
  double seconds = 0.0;
  std::size_t steps = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;

  /// "epoch,lr,train_loss,dev_loss,seconds" rows.
  std::string to_csv() const;
};

struct TrainOptions {
  const PreprocessedCorpus* dev = nullptr;
  std::function<void(const EpochStats&)> on_epoch;
};

/// Learning-rate choice when training resumes from a checkpoint.
struct LrPolicy {
  enum class Kind { resume, override_lr };
  Kind kind = Kind::resume;
  double value = 0.0;

  static LrPolicy resume() { return {}; }
  static LrPolicy fixed(double lr) { return {Kind::override_lr, lr}; }
};

/// Raised when the loss or a gradient becomes non-finite. Carries the state
/// as of the last fully completed epoch.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, Checkpoint last_good, TrainReport report)
      : NumericError(what), last_good_(std::move(last_good)), report_(std::move(report)) {}
  const Checkpoint& last_good() const { return last_good_; }
  const TrainReport& report() const { return report_; }

 private:
  Checkpoint last_good_;
  TrainReport report_;
};

/// Fresh parameters, then schedule.total_epochs epochs over `corpus`.
std::pair<Checkpoint, TrainReport> train_model(const PreprocessedCorpus& corpus,
                                               const ModelConfig& config,
                                               const TrainSchedule& schedule,
                                               const TrainOptions& options = {});

/// Runs `epochs` more epochs from `base` on `corpus`, numbering them after
/// base.epochs_completed. Under LrPolicy::resume epoch e uses
/// lr_schedule(schedule, e), so resuming equals uninterrupted training.
std::pair<Checkpoint, TrainReport> continue_training(const Checkpoint& base,
                                                     const PreprocessedCorpus& corpus, int epochs,
                                                     LrPolicy policy = LrPolicy::resume(),
                                                     const TrainOptions& options = {});

/// Specialization: continues training `base` on in-domain data only, without
/// touching the preprocessing. Throws IncompatibleError when the corpus was
/// preprocessed with different codes or vocabularies.
std::pair<Checkpoint, TrainReport> specialize(const Checkpoint& base,
                                              const PreprocessedCorpus& indomain, int extra_epochs,
                                              LrPolicy policy = LrPolicy::resume(),
                                              const TrainOptions& options = {});

/// Length-bucketed batches for one epoch, in training order.
std::vector<std::vector<std::size_t>> epoch_batches(const std::vector<EncodedPair>& pairs,
                                                    int batch_size, Rng& rng);

/// Eval-mode mean per-pair loss.
double corpus_loss(const Checkpoint& ckpt, const std::vector<EncodedPair>& pairs,
                   int batch_size = 64);

}  // namespace deskmt
