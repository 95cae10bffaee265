#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "deskmt/pipeline.hpp"

namespace deskmt {

/// Inputs of the adaptation studies. Corpora come from `data_dir` when set
/// (generic.train.{src,tgt}, generic.test.*, indomain.train.*, indomain.test.*)
/// and from the synthetic generator otherwise.
struct ExperimentPlan {
  std::uint64_t seed = 1;
  std::filesystem::path data_dir;
  std::size_t generic_lines = 20000;
  std::size_t indomain_lines = 50000;

  /// Ascending in-domain slice sizes; empty means 1%/10%/100% of the
  /// in-domain training set.
  std::vector<std::size_t> slice_sizes;
  int curve_epochs = 5;

  std::size_t bpe_merges = 500;
  std::size_t max_vocab = 50000;
  int emb_dim = 32;
  int hidden_dim = 64;
  int num_layers = 2;
  double dropout_p = 0.3;
  TrainSchedule schedule = TrainSchedule::desk();
  DecodeOptions decode;

  std::filesystem::path output_dir = "experiment-out";

  static ExperimentPlan desk();
  void validate() const;

  std::string to_json() const;
  /// Missing keys keep their desk defaults; unknown keys are rejected.
  static ExperimentPlan from_json(const std::string& text);
};

struct ExperimentData {
  ParallelCorpus generic_train;
  ParallelCorpus generic_test;
  ParallelCorpus indomain_train;
  ParallelCorpus indomain_test;
  std::vector<ParallelCorpus> slices;
  Preprocessing prep;
};

/// Loads or synthesizes the corpora, cuts the slices and learns the frozen
/// preprocessing on generic + in-domain training text.
ExperimentData prepare_data(const ExperimentPlan& plan);

/// One trained or specialized system evaluated on the in-domain test.
struct ResultRow {
  std::string training_corpus;
  std::string specialization_corpus;  // "-" when not specialized
  std::size_t pairs = 0;              // pairs seen by the last training stage
  double bleu = 0.0;
  double ter = 0.0;
  double train_seconds = 0.0;
  double specialize_seconds = 0.0;
  std::string params_hash;
};

struct CurvePoint {
  int epoch = 0;
  double bleu = 0.0;
  double ter = 0.0;
  double seconds = 0.0;
};

/// Specialization curve with the two reference lines: the generic model and
/// the model retrained on generic + full in-domain data.
struct EpochCurve {
  std::vector<CurvePoint> points;
  double baseline_low = 0.0;
  double baseline_high = 0.0;
};

struct TimingRow {
  std::string process;  // "train" or "specialize"
  std::string corpus;
  std::size_t pairs = 0;
  double seconds = 0.0;
  double ratio_to_full_retrain = 0.0;
};

/// Progress sink; receives one line per finished stage.
using ExperimentLog = std::function<void(const std::string&)>;

/// Trains the generic model on the generic training set.
Checkpoint train_generic(const ExperimentPlan& plan, const ExperimentData& data, double* seconds = nullptr);

/// Generic row, then one row per slice for a model trained from scratch on
/// generic + slice. `generic` (if non-null) receives the generic model.
std::vector<ResultRow> run_baselines(const ExperimentPlan& plan, const ExperimentData& data,
                                     Checkpoint* generic = nullptr, const ExperimentLog& log = {});

/// Cumulative specialization epochs 1..plan.curve_epochs on the full in-domain set.
EpochCurve run_epoch_curve(const ExperimentPlan& plan, const ExperimentData& data, const Checkpoint& base,
                           double baseline_low, double baseline_high, const ExperimentLog& log = {});

/// Generic row, then one specialization epoch per slice.
std::vector<ResultRow> run_data_size_matrix(const ExperimentPlan& plan, const ExperimentData& data,
                                            const Checkpoint& base, const ExperimentLog& log = {});

/// Training and specialization times; ratios are against the slowest
/// from-scratch training (generic + full in-domain).
std::vector<TimingRow> timing_report(const std::vector<ResultRow>& baselines,
                                     const std::vector<ResultRow>& specializations);

/// CSV renderings. Only table4 carries wall-clock times.
std::string table2_csv(const std::vector<ResultRow>& rows);
std::string table3_csv(const std::vector<ResultRow>& rows);
std::string fig2_csv(const EpochCurve& curve);
std::string table4_csv(const std::vector<TimingRow>& rows);

struct ExperimentResults {
  std::vector<ResultRow> baselines;
  EpochCurve curve;
  std::vector<ResultRow> specializations;
  std::vector<TimingRow> timing;
};

enum class Study { baselines, epoch_curve, data_size, timing, all };

/// Runs the requested study (with whatever it depends on) and writes the
/// CSVs, the preprocessing artifacts, generic.ckpt and manifest.json into
/// plan.output_dir.
ExperimentResults run_experiment(const ExperimentPlan& plan, Study study, const ExperimentLog& log = {});

}  // namespace deskmt
