// Acceptance run: one PASS/FAIL line per criterion P1..P8.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "deskmt/bpe.hpp"
#include "deskmt/checkpoint.hpp"
#include "deskmt/eval.hpp"
#include "deskmt/experiment.hpp"
#include "deskmt/model.hpp"
#include "deskmt/pipeline.hpp"
#include "deskmt/rng.hpp"
#include "deskmt/synth.hpp"
#include "deskmt/train.hpp"
#include "oracles/bleu_oracle.hpp"
#include "oracles/bpe_oracle.hpp"
#include "oracles/ter_oracle.hpp"
#include "test_util.hpp"

using namespace deskmt;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const std::string& id, const Outcome& o, double secs) {
  if (!o.pass) ++failures;
  std::printf("%s %s (%.1fs) %s\n", id.c_str(), o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
  std::fflush(stdout);
}

template <class F>
void run(const std::string& id, const std::set<std::string>& only, F f) {
  if (!only.empty() && !only.count(id)) return;
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  report(id, o, seconds_since(t0));
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// ---- P1 ----

std::vector<Sentence> random_side(Rng& rng, std::size_t n, int vocab, int min_len) {
  std::vector<Sentence> out(n);
  for (auto& s : out) {
    const int len = min_len + static_cast<int>(rng.below(static_cast<std::uint64_t>(13 - min_len)));
    for (int i = 0; i < len; ++i) s.push_back("w" + std::to_string(rng.below(static_cast<std::uint64_t>(vocab))));
  }
  return out;
}

Sentence chars(const std::string& s) {
  Sentence out;
  for (char c : s) out.emplace_back(1, c);
  return out;
}

Outcome p1_metrics() {
  Rng rng(2024);
  double worst_bleu = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    const int vocab = 2 + static_cast<int>(rng.below(9));
    const auto refs = random_side(rng, n, vocab, 1);
    auto hyps = random_side(rng, n, vocab, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.bernoulli(0.5)) hyps[i] = refs[i];
      if (rng.bernoulli(0.3) && !hyps[i].empty()) hyps[i].pop_back();
    }
    worst_bleu = std::max(worst_bleu, std::abs(bleu(hyps, refs).bleu - oracle::corpus_bleu(hyps, refs)));
  }

  // Every ordered pair over {a, b, c} with |h| + |r| <= 8 and a non-empty reference.
  std::vector<std::string> strings{""};
  for (std::size_t i = 0; i < strings.size(); ++i) {
    if (strings[i].size() == 8) continue;
    for (char c : {'a', 'b', 'c'}) strings.push_back(strings[i] + c);
  }
  std::size_t pairs = 0, mismatches = 0, bound_violations = 0;
  std::string example;
  for (const auto& h : strings) {
    for (const auto& r : strings) {
      if (r.empty() || h.size() + r.size() > 8) continue;
      ++pairs;
      const std::size_t got = ter_sentence(chars(h), chars(r)).edits;
      const std::size_t best = oracle::optimal_ter_edits(h, r, true);
      if (got > oracle::edit_distance(h, r) || got < best) ++bound_violations;
      if (got != best) {
        if (mismatches == 0) example = "'" + h + "' vs '" + r + "': " + std::to_string(got) + " vs " + std::to_string(best);
        ++mismatches;
      }
    }
  }
  Outcome o;
  o.pass = worst_bleu <= 1e-9 && mismatches == 0 && bound_violations == 0;
  o.detail = fmt("bleu max|diff| %.2e over 50 corpora; ter %zu/%zu pairs differ from the exhaustive optimum, "
                 "%zu outside [optimum, levenshtein]",
                 worst_bleu, mismatches, pairs, bound_violations);
  if (mismatches) o.detail += "; first: " + example;
  return o;
}

// ---- P2 ----

Outcome p2_bpe() {
  Rng rng(77);
  std::size_t words_checked = 0, bad_words = 0, bad_merges = 0, bad_roundtrips = 0, sentences = 0;
  for (int trial = 0; trial < 20; ++trial) {
    ParallelCorpus c;
    const int alphabet = 2 + trial % 3;
    const int lines = 3 + static_cast<int>(rng.below(10));
    auto sentence = [&] {
      Sentence s;
      const int words = 1 + static_cast<int>(rng.below(6));
      for (int i = 0; i < words; ++i) {
        std::string w;
        const int len = 1 + static_cast<int>(rng.below(7));
        for (int k = 0; k < len; ++k) w += static_cast<char>('a' + rng.below(static_cast<std::uint64_t>(alphabet)));
        s.push_back(w);
      }
      return s;
    };
    for (int i = 0; i < lines; ++i) c.pairs.push_back({sentence(), sentence()});
    std::map<std::string, std::size_t> counts;
    for (const auto& p : c.pairs) {
      for (const auto& w : p.source) ++counts[w];
      for (const auto& w : p.target) ++counts[w];
    }
    const std::size_t merges = 1 + rng.below(25);
    const auto codes = learn_bpe(c, merges);
    const auto ref = oracle::learn(counts, merges, "</w>");
    if (codes.merges != ref.merges) ++bad_merges;
    BpeApplier applier(codes);
    for (const auto& [word, n] : counts) {
      ++words_checked;
      if (applier.segment_word(word) != oracle::apply(ref.merges, word, "</w>")) ++bad_words;
    }
    for (const auto& p : c.pairs) {
      for (const auto* s : {&p.source, &p.target}) {
        ++sentences;
        if (decode_bpe(codes, apply_bpe(codes, *s)) != *s) ++bad_roundtrips;
      }
    }
  }
  return {bad_merges == 0 && bad_words == 0 && bad_roundtrips == 0,
          fmt("merge lists differing %zu/20, segmentations differing %zu/%zu, round-trip failures %zu/%zu",
              bad_merges, bad_words, words_checked, bad_roundtrips, sentences)};
}

// ---- P3 ----

Outcome p3_gradients() {
  ModelConfig cfg = ModelConfig::desk(20, 20);
  cfg.emb_dim = 8;
  cfg.hidden_dim = 8;
  cfg.num_layers = 2;
  Rng init(3);
  auto params = ModelParams<double>::init(cfg, init);
  params.visit([](const std::string&, nn::Matrix<double>& m) { m *= 3.0; });
  Rng data(4);
  std::vector<EncodedPair> batch;
  for (int i = 0; i < 4; ++i) {
    EncodedPair p;
    for (int k = 0, n = 1 + static_cast<int>(data.below(5)); k < n; ++k) p.source.push_back(4 + static_cast<int>(data.below(16)));
    for (int k = 0, n = 1 + static_cast<int>(data.below(5)); k < n; ++k) p.target.push_back(4 + static_cast<int>(data.below(16)));
    batch.push_back(p);
  }
  auto loss = [&] {
    Rng rng(5);
    return training_loss<double>(params, cfg, batch, nn::Mode::train, &rng, nullptr);
  };
  auto grads = ModelParams<double>::zeros(cfg);
  Rng rng(5);
  training_loss<double>(params, cfg, batch, nn::Mode::train, &rng, &grads);
  std::vector<nn::ParamGroup> groups;
  params.visit([&](const std::string& name, nn::Matrix<double>& m) { groups.push_back({name, &m, nullptr}); });
  std::size_t i = 0;
  grads.visit([&](const std::string&, const nn::Matrix<double>& g) { groups[i++].analytic = &g; });
  nn::GradCheckOptions opts;
  opts.tolerance = 1e-4;
  const auto r = nn::grad_check(loss, groups, opts);
  std::string worst_group;
  double worst = 0.0;
  std::size_t entries = 0;
  for (const auto& g : r.groups) {
    entries += g.checked;
    if (g.max_rel_error >= worst) {
      worst = g.max_rel_error;
      worst_group = g.group;
    }
  }
  return {r.passed(), fmt("%zu groups, %zu entries, dropout %.1f, worst relative error %.2e (%s)", r.groups.size(),
                          entries, cfg.dropout_p, worst, worst_group.c_str())};
}

// ---- P4 ----

bool same_params(const ModelParams<Real>& a, const ModelParams<Real>& b) {
  std::vector<const nn::Matrix<Real>*> left;
  a.visit([&](const std::string&, const nn::Matrix<Real>& m) { left.push_back(&m); });
  std::size_t i = 0;
  bool same = true;
  b.visit([&](const std::string&, const nn::Matrix<Real>& m) {
    same = same && i < left.size() && *left[i] == m;
    ++i;
  });
  return same && i == left.size();
}

std::vector<double> losses(const TrainReport& r) {
  std::vector<double> out;
  for (const auto& e : r.epochs) out.push_back(e.train_loss);
  return out;
}

struct SmallTask {
  SynthCorpora synth = synth_two_domain(11, 1000, 600);
  Preprocessing prep = Preprocessing::learn(concat(synth.generic_train, synth.indomain_train, "pooled"), 100);
  PreprocessedCorpus generic = prep.encode(synth.generic_train);
  PreprocessedCorpus indomain = prep.encode(synth.indomain_train);

  ModelConfig config() const {
    ModelConfig c = ModelConfig::desk(static_cast<int>(prep.src_vocab.size()), static_cast<int>(prep.tgt_vocab.size()));
    c.emb_dim = 16;
    c.hidden_dim = 16;
    return c;
  }
  static TrainSchedule schedule(int epochs) {
    TrainSchedule s = TrainSchedule::desk();
    s.total_epochs = epochs;
    s.decay_start_epoch = 2;
    return s;
  }
};

Outcome p4_continuity() {
  const SmallTask t;
  const int k = 2, k2 = 3;
  const auto [full, full_report] = train_model(t.generic, t.config(), SmallTask::schedule(k + k2));
  const auto [part, part_report] = train_model(t.generic, t.config(), SmallTask::schedule(k));
  // Resume from a saved and reloaded checkpoint.
  const auto reloaded = parse_checkpoint(serialize_checkpoint(part));
  const auto [resumed, resumed_report] = continue_training(reloaded, t.generic, k2);
  auto joined = losses(part_report);
  for (double l : losses(resumed_report)) joined.push_back(l);
  const bool same_losses = joined == losses(full_report);
  const bool same_weights = same_params(full.params, resumed.params);

  const auto [frozen, frozen_report] = specialize(full, t.indomain, 2, LrPolicy::fixed(0.0));
  const bool noop = same_params(frozen.params, full.params) && params_hash(frozen) == params_hash(full);
  return {same_losses && same_weights && noop,
          fmt("%d+%d epochs: losses %s, parameters %s; lr 0 specialization %s", k, k2,
              same_losses ? "bit-identical" : "differ", same_weights ? "bit-identical" : "differ",
              noop ? "is a no-op" : "changed the parameters")};
}

// ---- P5, P6, P7 ----

struct DeskRun {
  ExperimentPlan plan;
  ExperimentResults results;
  double seconds = 0.0;
  double generic_test_bleu = 0.0;
};

std::unique_ptr<DeskRun> desk_run(const fs::path& out) {
  auto r = std::make_unique<DeskRun>();
  r->plan = ExperimentPlan::desk();
  r->plan.output_dir = out;
  const auto t0 = Clock::now();
  r->results = run_experiment(r->plan, Study::all, [](const std::string& line) {
    std::fprintf(stderr, "  %s\n", line.c_str());
  });
  r->seconds = seconds_since(t0);
  const auto data = prepare_data(r->plan);
  r->generic_test_bleu = evaluate_model(load_checkpoint(out / "generic.ckpt"), data.prep, data.generic_test, r->plan.decode).bleu;
  return r;
}

Outcome p5_specialization(const DeskRun& r) {
  const auto& base = r.results.baselines.front();
  const auto& pts = r.results.curve.points;
  if (pts.size() < 5) return {false, "epoch curve has fewer than 5 points"};
  const double gap = r.generic_test_bleu - base.bleu;
  const double gain1 = pts[0].bleu - base.bleu;
  double later = 0.0;
  for (std::size_t e = 1; e < 5; ++e) later += pts[e].bleu - pts[e - 1].bleu;
  later /= 4.0;
  const bool a = r.generic_test_bleu >= 90.0;
  const bool b = gap >= 25.0;
  const bool c = gain1 >= 15.0 && pts[0].ter < base.ter;
  const bool d = gain1 >= 3.0 * later;
  const bool fast = r.seconds <= 45 * 60;
  return {a && b && c && d && fast,
          fmt("(a) generic test BLEU %.2f %s; (b) in-domain BLEU %.2f, gap %.2f %s; (c) epoch 1 BLEU %.2f (+%.2f), "
              "TER %.2f -> %.2f %s; (d) mean gain epochs 2-5 %.2f %s; full study %.0fs %s",
              r.generic_test_bleu, a ? "ok" : "low", base.bleu, gap, b ? "ok" : "small", pts[0].bleu, gain1, base.ter,
              pts[0].ter, c ? "ok" : "insufficient", later, d ? "ok" : "too large", r.seconds,
              fast ? "ok" : "over 45 min")};
}

Outcome p6_data_size(const DeskRun& r) {
  const auto& rows = r.results.specializations;
  if (rows.size() < 2) return {false, "no slices"};
  std::string scores;
  bool monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    scores += fmt("%s%s %.2f", i > 1 ? ", " : "", rows[i].specialization_corpus.c_str(), rows[i].bleu);
    if (i > 1 && rows[i].bleu < rows[i - 1].bleu - 1.0) monotone = false;
  }
  const bool beats = rows[1].bleu > rows[0].bleu;
  return {monotone && beats, fmt("generic %.2f; %s; %s, smallest slice %s the baseline", rows[0].bleu, scores.c_str(),
                                 monotone ? "non-decreasing" : "decreasing", beats ? "beats" : "does not beat")};
}

Outcome p7_timing(const DeskRun& r) {
  const TimingRow* full = nullptr;
  const TimingRow* small = nullptr;
  for (const auto& t : r.results.timing) {
    if (t.process == "train" && (!full || t.seconds > full->seconds)) full = &t;
    if (t.process == "specialize" && (!small || t.pairs < small->pairs)) small = &t;
  }
  if (!full || !small) return {false, "timing rows missing"};
  const double ratio = small->seconds / full->seconds;
  return {ratio <= 0.05, fmt("specialize %s %.2fs vs train %s %.1fs: ratio %.4f", small->corpus.c_str(), small->seconds,
                             full->corpus.c_str(), full->seconds, ratio)};
}

// ---- P8 ----

ExperimentPlan reduced_plan(const fs::path& out) {
  ExperimentPlan p = ExperimentPlan::desk();
  p.generic_lines = 2000;
  p.indomain_lines = 2000;
  p.curve_epochs = 2;
  p.bpe_merges = 200;
  p.emb_dim = 16;
  p.hidden_dim = 16;
  p.schedule.total_epochs = 2;
  p.schedule.decay_start_epoch = 1;
  p.output_dir = out;
  return p;
}

Outcome p8_determinism(const fs::path& root) {
  std::vector<std::string> differing;
  run_experiment(reduced_plan(root / "a"), Study::all);
  run_experiment(reduced_plan(root / "b"), Study::all);
  for (const char* f : {"table2.csv", "table3.csv", "fig2.csv"}) {
    if (test::read_file(root / "a" / f) != test::read_file(root / "b" / f)) differing.emplace_back(f);
  }
  const auto ta = test::read_file(root / "a" / "table4.csv");
  const auto tb = test::read_file(root / "b" / "table4.csv");
  auto strip_times = [](const std::string& csv) {
    std::istringstream in(csv);
    std::string out;
    for (std::string line; std::getline(in, line);) {
      std::vector<std::string> cells;
      std::stringstream ls(line);
      for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
      if (cells.size() >= 3) out += cells[0] + "," + cells[1] + "," + cells[2] + "\n";
    }
    return out;
  };
  if (strip_times(ta) != strip_times(tb)) differing.emplace_back("table4.csv (non-timing columns)");

  const SmallTask t;
  const auto [m1, r1] = train_model(t.generic, t.config(), SmallTask::schedule(3));
  const auto [m2, r2] = train_model(t.generic, t.config(), SmallTask::schedule(3));
  const bool same_losses = losses(r1) == losses(r2);

  const auto path = root / "m.ckpt";
  save_checkpoint(m1, path);
  const auto loaded = load_checkpoint(path);
  const bool bit_exact = serialize_checkpoint(loaded) == serialize_checkpoint(m1) &&
                         test::read_file(path) == serialize_checkpoint(m1);
  Translator a(std::make_shared<const Checkpoint>(m1), t.prep);
  Translator b(std::make_shared<const Checkpoint>(loaded), t.prep);
  std::size_t same = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto& src = t.synth.indomain_test.pairs[i % t.synth.indomain_test.size()].source;
    same += a.translate(src) == b.translate(src);
  }
  std::string diff;
  for (const auto& d : differing) diff += (diff.empty() ? "" : ", ") + d;
  return {differing.empty() && same_losses && bit_exact && same == 100,
          fmt("experiment CSVs %s; per-epoch losses %s; checkpoint round trip %s; %zu/100 identical translations",
              differing.empty() ? "identical" : ("differ: " + diff).c_str(), same_losses ? "identical" : "differ",
              bit_exact ? "bit-exact" : "differs", same)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deskmt acceptance run"};
  std::vector<std::string> only_list;
  std::string work_dir;
  app.add_option("--only", only_list, "Run only these criteria (P1..P8)")->delimiter(',');
  app.add_option("--work-dir", work_dir, "Keep experiment outputs here instead of a temporary directory");
  CLI11_PARSE(app, argc, argv);
  const std::set<std::string> only(only_list.begin(), only_list.end());

  test::TempDir tmp;
  const fs::path root = work_dir.empty() ? tmp.path : fs::path(work_dir);
  fs::create_directories(root);

  run("P1", only, p1_metrics);
  run("P2", only, p2_bpe);
  run("P3", only, p3_gradients);
  run("P4", only, p4_continuity);

  const bool need_desk = only.empty() || only.count("P5") || only.count("P6") || only.count("P7");
  if (need_desk) {
    std::unique_ptr<DeskRun> desk;
    std::string error;
    const auto t0 = Clock::now();
    try {
      desk = desk_run(root / "desk");
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs = seconds_since(t0);
    auto with_desk = [&](const std::string& id, Outcome (*f)(const DeskRun&)) {
      if (!only.empty() && !only.count(id)) return;
      report(id, desk ? f(*desk) : Outcome{false, "desk study threw: " + error}, id == "P5" ? secs : 0.0);
    };
    with_desk("P5", p5_specialization);
    with_desk("P6", p6_data_size);
    with_desk("P7", p7_timing);
  }

  run("P8", only, [&] { return p8_determinism(root / "p8"); });

  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "PASSED", failures);
  return failures ? 1 : 0;
}
