#include "deskmt/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "deskmt/checkpoint.hpp"
#include "deskmt/errors.hpp"
#include "deskmt/synth.hpp"

namespace deskmt {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

void emit(const ExperimentLog& log, const std::string& line) {
  if (log) log(line);
}

ModelConfig model_config(const ExperimentPlan& plan, const Preprocessing& prep) {
  ModelConfig c = ModelConfig::desk(static_cast<int>(prep.src_vocab.size()), static_cast<int>(prep.tgt_vocab.size()));
  c.emb_dim = plan.emb_dim;
  c.hidden_dim = plan.hidden_dim;
  c.num_layers = plan.num_layers;
  c.dropout_p = plan.dropout_p;
  return c;
}

ParallelCorpus load_split(const std::filesystem::path& dir, const std::string& stem, Domain domain) {
  return load_parallel(dir / (stem + ".src"), dir / (stem + ".tgt"), stem, domain);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string row_label(const ParallelCorpus& slice) { return "generic+" + slice.name; }

}  // namespace

ExperimentPlan ExperimentPlan::desk() { return {}; }

void ExperimentPlan::validate() const {
  for (std::size_t i = 1; i < slice_sizes.size(); ++i) {
    if (slice_sizes[i] <= slice_sizes[i - 1]) throw RangeError("slice sizes must be strictly ascending");
  }
  if (curve_epochs < 1) throw RangeError("the epoch sweep needs at least one epoch");
  if (bpe_merges == 0) throw RangeError("bpe_merges must be positive");
  schedule.validate();
  ModelConfig probe;
  probe.emb_dim = emb_dim;
  probe.hidden_dim = hidden_dim;
  probe.num_layers = num_layers;
  probe.dropout_p = dropout_p;
  probe.src_vocab_size = probe.tgt_vocab_size = 1;
  probe.validate();
}

std::string ExperimentPlan::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["data_dir"] = data_dir.string();
  j["generic_lines"] = generic_lines;
  j["indomain_lines"] = indomain_lines;
  j["slice_sizes"] = slice_sizes;
  j["curve_epochs"] = curve_epochs;
  j["bpe_merges"] = bpe_merges;
  j["max_vocab"] = max_vocab;
  j["emb_dim"] = emb_dim;
  j["hidden_dim"] = hidden_dim;
  j["num_layers"] = num_layers;
  j["dropout_p"] = dropout_p;
  j["schedule"] = {{"base_lr", schedule.base_lr},
                   {"decay_factor", schedule.decay_factor},
                   {"decay_start_epoch", schedule.decay_start_epoch},
                   {"total_epochs", schedule.total_epochs},
                   {"batch_size", schedule.batch_size},
                   {"clip_norm", schedule.clip_norm},
                   {"seed", schedule.seed}};
  j["beam_size"] = decode.beam_size;
  j["length_norm_alpha"] = decode.length_norm_alpha;
  j["output_dir"] = output_dir.string();
  return j.dump(2);
}

ExperimentPlan ExperimentPlan::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("plan is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("plan must be a JSON object");
  ExperimentPlan p = desk();
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "seed") p.seed = v.get<std::uint64_t>();
      else if (key == "data_dir") p.data_dir = v.get<std::string>();
      else if (key == "generic_lines") p.generic_lines = v.get<std::size_t>();
      else if (key == "indomain_lines") p.indomain_lines = v.get<std::size_t>();
      else if (key == "slice_sizes") p.slice_sizes = v.get<std::vector<std::size_t>>();
      else if (key == "curve_epochs") p.curve_epochs = v.get<int>();
      else if (key == "bpe_merges") p.bpe_merges = v.get<std::size_t>();
      else if (key == "max_vocab") p.max_vocab = v.get<std::size_t>();
      else if (key == "emb_dim") p.emb_dim = v.get<int>();
      else if (key == "hidden_dim") p.hidden_dim = v.get<int>();
      else if (key == "num_layers") p.num_layers = v.get<int>();
      else if (key == "dropout_p") p.dropout_p = v.get<double>();
      else if (key == "beam_size") p.decode.beam_size = v.get<int>();
      else if (key == "length_norm_alpha") p.decode.length_norm_alpha = v.get<double>();
      else if (key == "output_dir") p.output_dir = v.get<std::string>();
      else if (key == "schedule") {
        for (const auto& [sk, sv] : v.items()) {
          auto& s = p.schedule;
          if (sk == "base_lr") s.base_lr = sv.get<double>();
          else if (sk == "decay_factor") s.decay_factor = sv.get<double>();
          else if (sk == "decay_start_epoch") s.decay_start_epoch = sv.get<int>();
          else if (sk == "total_epochs") s.total_epochs = sv.get<int>();
          else if (sk == "batch_size") s.batch_size = sv.get<int>();
          else if (sk == "clip_norm") s.clip_norm = sv.get<double>();
          else if (sk == "seed") s.seed = sv.get<std::uint64_t>();
          else throw FormatError("unknown schedule key '" + sk + "'");
        }
      } else {
        throw FormatError("unknown plan key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad plan value: ") + e.what());
  }
  p.validate();
  return p;
}

ExperimentData prepare_data(const ExperimentPlan& plan) {
  plan.validate();
  ExperimentData d;
  if (!plan.data_dir.empty()) {
    d.generic_train = load_split(plan.data_dir, "generic.train", Domain::generic);
    d.generic_test = load_split(plan.data_dir, "generic.test", Domain::generic);
    d.indomain_train = load_split(plan.data_dir, "indomain.train", Domain::in_domain);
    d.indomain_test = load_split(plan.data_dir, "indomain.test", Domain::in_domain);
  } else {
    auto s = synth_two_domain(plan.seed, plan.generic_lines, plan.indomain_lines);
    d.generic_train = std::move(s.generic_train);
    d.generic_test = std::move(s.generic_test);
    d.indomain_train = std::move(s.indomain_train);
    d.indomain_test = std::move(s.indomain_test);
  }
  if (d.generic_train.empty() || d.indomain_train.empty()) throw RangeError("training corpora must not be empty");
  if (d.indomain_test.empty()) throw RangeError("the in-domain test set must not be empty");

  SliceSpec spec;
  spec.sizes = plan.slice_sizes;
  if (spec.sizes.empty()) {
    const std::size_t n = d.indomain_train.size();
    for (std::size_t size : {n / 100, n / 10, n}) {
      if (size > 0 && (spec.sizes.empty() || size > spec.sizes.back())) spec.sizes.push_back(size);
    }
  }
  d.slices = slice(d.indomain_train, spec);
  for (auto& s : d.slices) s.name = "indomain-" + std::to_string(s.size());

  d.prep = Preprocessing::learn(concat(d.generic_train, d.indomain_train, "pooled"), plan.bpe_merges,
                                plan.max_vocab);
  return d;
}

Checkpoint train_generic(const ExperimentPlan& plan, const ExperimentData& data, double* seconds) {
  const auto start = Clock::now();
  auto result = train_model(data.prep.encode(data.generic_train), model_config(plan, data.prep), plan.schedule);
  if (seconds) *seconds = since(start);
  return std::move(result.first);
}

std::vector<ResultRow> run_baselines(const ExperimentPlan& plan, const ExperimentData& data, Checkpoint* generic,
                                     const ExperimentLog& log) {
  std::vector<ResultRow> rows;
  double seconds = 0.0;
  Checkpoint base = train_generic(plan, data, &seconds);
  auto report = evaluate_model(base, data.prep, data.indomain_test, plan.decode);
  rows.push_back({"generic", "-", data.generic_train.size(), report.bleu, report.ter, seconds, 0.0, params_hash(base)});
  emit(log, "baseline generic: BLEU " + fixed(report.bleu, 2) + " TER " + fixed(report.ter, 2));
  if (generic) *generic = std::move(base);

  for (const auto& s : data.slices) {
    const auto corpus = concat(data.generic_train, s, row_label(s));
    const auto start = Clock::now();
    auto [ckpt, unused] = train_model(data.prep.encode(corpus), model_config(plan, data.prep), plan.schedule);
    const double t = since(start);
    report = evaluate_model(ckpt, data.prep, data.indomain_test, plan.decode);
    rows.push_back({corpus.name, "-", corpus.size(), report.bleu, report.ter, t, 0.0, params_hash(ckpt)});
    emit(log, "baseline " + corpus.name + ": BLEU " + fixed(report.bleu, 2) + " TER " + fixed(report.ter, 2));
  }
  return rows;
}

EpochCurve run_epoch_curve(const ExperimentPlan& plan, const ExperimentData& data, const Checkpoint& base,
                           double baseline_low, double baseline_high, const ExperimentLog& log) {
  EpochCurve curve{{}, baseline_low, baseline_high};
  const auto indomain = data.prep.encode(data.indomain_train);
  Checkpoint current = base;
  for (int e = 1; e <= plan.curve_epochs; ++e) {
    const auto start = Clock::now();
    current = specialize(current, indomain, 1).first;
    const double t = since(start);
    const auto report = evaluate_model(current, data.prep, data.indomain_test, plan.decode);
    curve.points.push_back({e, report.bleu, report.ter, t});
    emit(log, "curve epoch " + std::to_string(e) + ": BLEU " + fixed(report.bleu, 2) + " TER " + fixed(report.ter, 2));
  }
  return curve;
}

std::vector<ResultRow> run_data_size_matrix(const ExperimentPlan& plan, const ExperimentData& data,
                                            const Checkpoint& base, const ExperimentLog& log) {
  std::vector<ResultRow> rows;
  auto report = evaluate_model(base, data.prep, data.indomain_test, plan.decode);
  rows.push_back({"generic", "-", data.generic_train.size(), report.bleu, report.ter, 0.0, 0.0, params_hash(base)});
  for (const auto& s : data.slices) {
    const auto encoded = data.prep.encode(s);
    const auto start = Clock::now();
    auto [ckpt, unused] = specialize(base, encoded, 1);
    const double t = since(start);
    report = evaluate_model(ckpt, data.prep, data.indomain_test, plan.decode);
    rows.push_back({"generic", s.name, s.size(), report.bleu, report.ter, 0.0, t, params_hash(ckpt)});
    emit(log, "specialized on " + s.name + ": BLEU " + fixed(report.bleu, 2) + " TER " + fixed(report.ter, 2));
  }
  return rows;
}

std::vector<TimingRow> timing_report(const std::vector<ResultRow>& baselines,
                                     const std::vector<ResultRow>& specializations) {
  double full = 0.0;
  for (const auto& r : baselines) full = std::max(full, r.train_seconds);
  auto ratio = [&](double s) { return full > 0.0 ? s / full : 0.0; };
  std::vector<TimingRow> rows;
  for (const auto& r : baselines) {
    rows.push_back({"train", r.training_corpus, r.pairs, r.train_seconds, ratio(r.train_seconds)});
  }
  for (const auto& r : specializations) {
    if (r.specialization_corpus == "-") continue;
    rows.push_back({"specialize", r.specialization_corpus, r.pairs, r.specialize_seconds,
                    ratio(r.specialize_seconds)});
  }
  return rows;
}

std::string table2_csv(const std::vector<ResultRow>& rows) {
  std::string out = "training_corpus,pairs,bleu,ter\n";
  for (const auto& r : rows) {
    out += r.training_corpus + "," + std::to_string(r.pairs) + "," + fixed(r.bleu, 4) + "," + fixed(r.ter, 4) + "\n";
  }
  return out;
}

std::string table3_csv(const std::vector<ResultRow>& rows) {
  std::string out = "training_corpus,specialization_corpus,pairs,bleu,ter\n";
  for (const auto& r : rows) {
    out += r.training_corpus + "," + r.specialization_corpus + "," + std::to_string(r.pairs) + "," +
           fixed(r.bleu, 4) + "," + fixed(r.ter, 4) + "\n";
  }
  return out;
}

std::string fig2_csv(const EpochCurve& curve) {
  std::string out = "epoch,bleu,ter,baseline_low,baseline_high\n";
  for (const auto& p : curve.points) {
    out += std::to_string(p.epoch) + "," + fixed(p.bleu, 4) + "," + fixed(p.ter, 4) + "," +
           fixed(curve.baseline_low, 4) + "," + fixed(curve.baseline_high, 4) + "\n";
  }
  return out;
}

std::string table4_csv(const std::vector<TimingRow>& rows) {
  std::string out = "process,corpus,pairs,seconds,ratio_to_full_retrain\n";
  for (const auto& r : rows) {
    out += r.process + "," + r.corpus + "," + std::to_string(r.pairs) + "," + fixed(r.seconds, 3) + "," +
           fixed(r.ratio_to_full_retrain, 6) + "\n";
  }
  return out;
}

ExperimentResults run_experiment(const ExperimentPlan& plan, Study study, const ExperimentLog& log) {
  const ExperimentData data = prepare_data(plan);
  std::filesystem::create_directories(plan.output_dir);
  data.prep.save(plan.output_dir / "prep");
  emit(log, "data: generic " + std::to_string(data.generic_train.size()) + " pairs, in-domain " +
                std::to_string(data.indomain_train.size()) + " pairs, vocab " +
                std::to_string(data.prep.src_vocab.size()) + "/" + std::to_string(data.prep.tgt_vocab.size()));

  ExperimentResults res;
  Checkpoint generic;
  const bool want_baselines = study == Study::baselines || study == Study::timing || study == Study::all;
  if (want_baselines) {
    res.baselines = run_baselines(plan, data, &generic, log);
  } else if (study == Study::epoch_curve) {
    // The curve only needs the generic row and the generic + full retrain.
    ExperimentData reduced = data;
    reduced.slices = {data.slices.back()};
    res.baselines = run_baselines(plan, reduced, &generic, log);
  } else {
    double seconds = 0.0;
    generic = train_generic(plan, data, &seconds);
    emit(log, "trained generic model in " + fixed(seconds, 1) + " s");
  }
  save_checkpoint(generic, plan.output_dir / "generic.ckpt");

  if (study == Study::epoch_curve || study == Study::all) {
    res.curve = run_epoch_curve(plan, data, generic, res.baselines.front().bleu, res.baselines.back().bleu, log);
  }
  if (study == Study::data_size || study == Study::timing || study == Study::all) {
    res.specializations = run_data_size_matrix(plan, data, generic, log);
  }
  if (study == Study::timing || study == Study::all) res.timing = timing_report(res.baselines, res.specializations);

  nlohmann::json manifest;
  manifest["seed"] = plan.seed;
  manifest["plan"] = nlohmann::json::parse(plan.to_json());
  manifest["corpora"] = nlohmann::json::object();
  for (const auto* c : {&data.generic_train, &data.generic_test, &data.indomain_train, &data.indomain_test}) {
    manifest["corpora"][c->name] = {{"pairs", c->size()}, {"sha256", corpus_hash(*c)}};
  }
  for (const auto& s : data.slices) manifest["corpora"][s.name] = {{"pairs", s.size()}, {"sha256", corpus_hash(s)}};
  manifest["preprocessing"] = {{"codes", data.prep.codes_hash()},
                               {"src_vocab", data.prep.src_vocab_hash()},
                               {"tgt_vocab", data.prep.tgt_vocab_hash()}};
  manifest["generic_checkpoint"] = {{"file", "generic.ckpt"}, {"params_sha256", params_hash(generic)}};
  auto models = nlohmann::json::array();
  for (const auto* rows : {&res.baselines, &res.specializations}) {
    for (const auto& r : *rows) {
      models.push_back({{"training_corpus", r.training_corpus},
                        {"specialization_corpus", r.specialization_corpus},
                        {"params_sha256", r.params_hash}});
    }
  }
  manifest["models"] = models;
  auto files = nlohmann::json::array();
  if (!res.baselines.empty() && study != Study::epoch_curve) {
    write_text(plan.output_dir / "table2.csv", table2_csv(res.baselines));
    files.push_back("table2.csv");
  }
  if (!res.specializations.empty()) {
    write_text(plan.output_dir / "table3.csv", table3_csv(res.specializations));
    files.push_back("table3.csv");
  }
  if (!res.curve.points.empty()) {
    write_text(plan.output_dir / "fig2.csv", fig2_csv(res.curve));
    files.push_back("fig2.csv");
  }
  if (!res.timing.empty()) {
    write_text(plan.output_dir / "table4.csv", table4_csv(res.timing));
    files.push_back("table4.csv");
  }
  manifest["files"] = files;
  write_text(plan.output_dir / "manifest.json", manifest.dump(2) + "\n");
  return res;
}

}  // namespace deskmt
