#include "deskmt/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <sstream>
#include <tuple>

namespace deskmt {

TrainSchedule TrainSchedule::large() { return {1.0, 0.5, 10, 18, 64, 5.0, 1}; }

TrainSchedule TrainSchedule::desk() { return {1.0, 0.5, 12, 16, 32, 5.0, 1}; }

void TrainSchedule::validate() const {
  if (!(base_lr > 0.0)) throw RangeError("base_lr must be positive");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw RangeError("decay_factor must lie in (0, 1]");
  if (batch_size < 1) throw RangeError("batch_size must be at least 1");
  if (total_epochs < 0 || decay_start_epoch < 0) throw RangeError("epoch counts must be non-negative");
  if (!(clip_norm > 0.0)) throw RangeError("clip_norm must be positive");
}

double lr_schedule(const TrainSchedule& schedule, int epoch) {
  if (epoch <= schedule.decay_start_epoch) return schedule.base_lr;
  return schedule.base_lr * std::pow(schedule.decay_factor, epoch - schedule.decay_start_epoch);
}

template <typename T>
SgdStats sgd_step(ModelParams<T>& params, const ModelParams<T>& grads, double lr, double clip_norm) {
  double sq = 0.0;
  bool finite = true;
  grads.visit([&](const std::string&, const nn::Matrix<T>& g) {
    finite = finite && g.allFinite();
    sq += g.template cast<double>().squaredNorm();
  });
  if (!finite || !std::isfinite(sq)) throw NumericError("non-finite gradient; SGD step not applied");
  SgdStats stats{std::sqrt(sq), false};
  double scale = lr;
  if (stats.grad_norm > clip_norm) {
    stats.clipped = true;
    scale = lr * clip_norm / stats.grad_norm;
  }
  if (scale == 0.0) return stats;
  // Parallel walk over params and grads; both visit tensors in the same order.
  std::vector<const nn::Matrix<T>*> flat;
  grads.visit([&](const std::string&, const nn::Matrix<T>& g) { flat.push_back(&g); });
  std::size_t k = 0;
  const T s = static_cast<T>(scale);
  params.visit([&](const std::string&, nn::Matrix<T>& p) { p.noalias() -= s * *flat[k++]; });
  return stats;
}

template SgdStats sgd_step(ModelParams<float>&, const ModelParams<float>&, double, double);
template SgdStats sgd_step(ModelParams<double>&, const ModelParams<double>&, double, double);

std::string TrainReport::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,lr,train_loss,dev_loss,seconds\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.lr << ',' << e.train_loss << ',';
    if (e.dev_loss) out << *e.dev_loss;
    out << ',' << e.seconds << '\n';
  }
  return out.str();
}

std::vector<std::vector<std::size_t>> epoch_batches(const std::vector<EncodedPair>& pairs,
                                                    int batch_size, Rng& rng) {
  // Length-sorted bucketing with a random tiebreak, then a shuffled batch order.
  std::vector<std::tuple<std::size_t, std::size_t, std::uint64_t, std::size_t>> keys;
  keys.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    keys.emplace_back(pairs[i].source.size(), pairs[i].target.size(), rng.next(), i);
  }
  std::sort(keys.begin(), keys.end());
  std::vector<std::vector<std::size_t>> batches;
  const auto bs = static_cast<std::size_t>(batch_size);
  for (std::size_t i = 0; i < keys.size(); i += bs) {
    std::vector<std::size_t> b;
    for (std::size_t j = i; j < std::min(keys.size(), i + bs); ++j) b.push_back(std::get<3>(keys[j]));
    batches.push_back(std::move(b));
  }
  shuffle(batches, rng);
  return batches;
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double mean_loss(const ModelParams<Real>& params, const ModelConfig& config,
                 const std::vector<EncodedPair>& pairs, int batch_size) {
  if (pairs.empty()) return 0.0;
  Rng unused(0);
  auto batches = epoch_batches(pairs, batch_size, unused);
  double total = 0.0;
  std::vector<EncodedPair> batch;
  for (const auto& idx : batches) {
    batch.clear();
    for (auto i : idx) batch.push_back(pairs[i]);
    total += static_cast<double>(training_loss<Real>(params, config, batch, nn::Mode::eval, nullptr, nullptr)) *
             static_cast<double>(batch.size());
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace

double corpus_loss(const Checkpoint& ckpt, const std::vector<EncodedPair>& pairs, int batch_size) {
  return mean_loss(ckpt.params, ckpt.config, pairs, batch_size);
}

std::pair<Checkpoint, TrainReport> continue_training(const Checkpoint& base,
                                                     const PreprocessedCorpus& corpus, int epochs,
                                                     LrPolicy policy, const TrainOptions& options) {
  if (corpus.pairs.empty()) throw RangeError("training corpus '" + corpus.name + "' is empty");
  if (epochs < 0) throw RangeError("epoch count must be non-negative");
  base.schedule.validate();
  Checkpoint ckpt = base;
  TrainReport report;
  const auto& sched = ckpt.schedule;
  ModelParams<Real> grads;
  std::vector<EncodedPair> batch;
  for (int k = 0; k < epochs; ++k) {
    const int epoch = ckpt.epochs_completed + 1;
    const double lr = policy.kind == LrPolicy::Kind::resume ? lr_schedule(sched, epoch) : policy.value;
    const auto start = std::chrono::steady_clock::now();
    Rng rng = Rng::derive(sched.seed, 1000 + static_cast<std::uint64_t>(epoch));
    const Checkpoint last_good = ckpt;
    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    double loss_sum = 0.0;
    try {
      for (const auto& idx : epoch_batches(corpus.pairs, sched.batch_size, rng)) {
        batch.clear();
        for (auto i : idx) batch.push_back(corpus.pairs[i]);
        const Real loss = training_loss<Real>(ckpt.params, ckpt.config, batch, nn::Mode::train, &rng, &grads);
        sgd_step(ckpt.params, grads, lr, sched.clip_norm);
        loss_sum += static_cast<double>(loss) * static_cast<double>(batch.size());
        ++stats.steps;
      }
    } catch (const NumericError& e) {
      throw DivergenceError(std::string("training diverged in epoch ") + std::to_string(epoch) + ": " + e.what(),
                            last_good, report);
    }
    stats.train_loss = loss_sum / static_cast<double>(corpus.pairs.size());
    ckpt.epochs_completed = epoch;
    ckpt.current_lr = lr;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (options.dev) stats.dev_loss = mean_loss(ckpt.params, ckpt.config, options.dev->pairs, sched.batch_size);
    report.epochs.push_back(stats);
    if (options.on_epoch) options.on_epoch(stats);
  }
  if (epochs > 0) ckpt.provenance.push_back({corpus.name, epochs, utc_timestamp()});
  return {std::move(ckpt), std::move(report)};
}

std::pair<Checkpoint, TrainReport> train_model(const PreprocessedCorpus& corpus,
                                               const ModelConfig& config,
                                               const TrainSchedule& schedule,
                                               const TrainOptions& options) {
  config.validate();
  schedule.validate();
  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.schedule = schedule;
  Rng init_rng = Rng::derive(schedule.seed, 0);
  ckpt.params = ModelParams<Real>::init(config, init_rng);
  ckpt.current_lr = schedule.base_lr;
  ckpt.codes_hash = corpus.codes_hash;
  ckpt.src_vocab_hash = corpus.src_vocab_hash;
  ckpt.tgt_vocab_hash = corpus.tgt_vocab_hash;
  return continue_training(ckpt, corpus, schedule.total_epochs, LrPolicy::resume(), options);
}

std::pair<Checkpoint, TrainReport> specialize(const Checkpoint& base,
                                              const PreprocessedCorpus& indomain, int extra_epochs,
                                              LrPolicy policy, const TrainOptions& options) {
  if (extra_epochs < 1) throw RangeError("specialization needs at least one extra epoch");
  if (indomain.codes_hash != base.codes_hash || indomain.src_vocab_hash != base.src_vocab_hash ||
      indomain.tgt_vocab_hash != base.tgt_vocab_hash) {
    throw IncompatibleError("corpus '" + indomain.name +
                            "' was preprocessed with different BPE codes or vocabularies than the checkpoint");
  }
  if (indomain.pairs.empty()) throw RangeError("in-domain corpus '" + indomain.name + "' is empty");
  return continue_training(base, indomain, extra_epochs, policy, options);
}

}  // namespace deskmt
