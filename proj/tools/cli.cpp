#include "cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "deskmt/bpe.hpp"
#include "deskmt/checkpoint.hpp"
#include "deskmt/errors.hpp"
#include "deskmt/experiment.hpp"
#include "deskmt/synth.hpp"
#include "deskmt/workbench.hpp"

namespace deskmt::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string> read_stream(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<Sentence> tokenize_all(const std::vector<std::string>& lines) {
  std::vector<Sentence> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(tokenize(l));
  return out;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

/// Writes to `path`, or to `out` when the path is empty.
void emit(const std::string& path, std::ostream& out, const std::string& text) {
  if (path.empty()) {
    out << text;
  } else {
    write_text(path, text);
  }
}

fs::path prep_dir_for(const std::string& explicit_dir, const fs::path& checkpoint) {
  if (!explicit_dir.empty()) return explicit_dir;
  const auto dir = checkpoint.has_parent_path() ? checkpoint.parent_path() : fs::path(".");
  if (fs::exists(dir / "codes.bpe")) return dir;
  if (fs::exists(dir / "prep" / "codes.bpe")) return dir / "prep";
  return dir;
}

/// Finds <stem>.src/.tgt (or train.src/.tgt) inside a data directory.
ParallelCorpus load_data_dir(const fs::path& dir, const std::string& stem, Domain domain) {
  for (const std::string& s : {stem, std::string("train")}) {
    if (fs::exists(dir / (s + ".src")) && fs::exists(dir / (s + ".tgt"))) {
      return load_parallel(dir / (s + ".src"), dir / (s + ".tgt"), s, domain);
    }
  }
  throw Error("no " + stem + ".src/.tgt or train.src/.tgt in " + dir.string());
}

ParallelCorpus load_pair(const std::string& src, const std::string& tgt, const std::string& data,
                         const std::string& stem, Domain domain) {
  if (!src.empty() || !tgt.empty()) {
    if (src.empty() || tgt.empty()) throw CLI::ValidationError("--src and --tgt must be given together");
    return load_parallel(src, tgt, fs::path(src).stem().string(), domain);
  }
  if (data.empty()) throw CLI::ValidationError("give --data DIR or --src/--tgt");
  return load_data_dir(data, stem, domain);
}

volatile std::sig_atomic_t g_stop = 0;
WorkbenchServer* g_server = nullptr;

void on_signal(int) {
  g_stop = 1;
  if (g_server) g_server->stop();
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"deskmt: desk-scale NMT with specialization", "deskmt"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.set_config("--config", "", "key=value configuration file (flags override it)");
  std::uint64_t seed = 1;
  bool as_json = false;
  int verbosity = 0;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();
  app.add_flag("--json", as_json, "Machine-readable output where supported");
  app.add_flag("-v,--verbose", verbosity, "More progress output");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the seeded two-domain toy corpora");
  std::size_t generic_lines = 20000, indomain_lines = 50000;
  std::string synth_out;
  synth->add_option("--generic", generic_lines, "Generic training pairs")->capture_default_str();
  synth->add_option("--indomain", indomain_lines, "In-domain training pairs")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();

  // learn-bpe
  auto* learn = app.add_subcommand("learn-bpe", "Learn BPE merges on one or more text files");
  std::vector<std::string> learn_inputs;
  std::size_t merges = 500;
  std::string learn_out;
  learn->add_option("--input", learn_inputs, "Tokenized text files, pooled")->required()->check(CLI::ExistingFile);
  learn->add_option("--merges", merges, "Number of merges")->capture_default_str();
  learn->add_option("--out", learn_out, "Codes file")->required();

  // apply-bpe
  auto* apply = app.add_subcommand("apply-bpe", "Segment text with learned codes");
  std::string apply_codes, apply_input, apply_out;
  apply->add_option("--codes", apply_codes, "Codes file")->required()->check(CLI::ExistingFile);
  apply->add_option("--input", apply_input, "Input text (default stdin)")->check(CLI::ExistingFile);
  apply->add_option("--out", apply_out, "Output file (default stdout)");
  bool apply_decode = false;
  apply->add_flag("--decode", apply_decode, "Join subwords back into words instead");

  // build-vocab
  auto* vocab = app.add_subcommand("build-vocab", "Build a vocabulary from segmented text");
  std::vector<std::string> vocab_inputs;
  std::size_t max_vocab = 50000;
  std::string vocab_out;
  vocab->add_option("--input", vocab_inputs, "Segmented text files")->required()->check(CLI::ExistingFile);
  vocab->add_option("--max-size", max_vocab, "Maximum non-special symbols")->capture_default_str();
  vocab->add_option("--out", vocab_out, "Vocabulary file")->required();

  // train
  auto* train = app.add_subcommand("train", "Train a model from scratch");
  std::string train_src, train_tgt, train_data, train_prep, train_out, dev_src, dev_tgt;
  std::string preset = "desk";
  std::optional<int> epochs, batch_size, decay_start;
  std::optional<double> base_lr;
  train->add_option("--src", train_src, "Source training file");
  train->add_option("--tgt", train_tgt, "Target training file");
  train->add_option("--data", train_data, "Directory with generic.train.src/.tgt");
  train->add_option("--prep", train_prep, "Directory of codes.bpe, src.vocab, tgt.vocab (default: next to --out)");
  train->add_option("--merges", merges, "Merges when the preprocessing has to be learned")->capture_default_str();
  train->add_option("--dev-src", dev_src, "Source dev file");
  train->add_option("--dev-tgt", dev_tgt, "Target dev file");
  train->add_option("--preset", preset, "Model and schedule preset")->check(CLI::IsMember({"desk", "large"}))->capture_default_str();
  train->add_option("--epochs", epochs, "Total epochs");
  train->add_option("--lr", base_lr, "Base learning rate");
  train->add_option("--batch-size", batch_size, "Batch size");
  train->add_option("--decay-start", decay_start, "Last epoch before the learning rate decays");
  train->add_option("--out", train_out, "Checkpoint path")->required();

  // specialize
  auto* spec = app.add_subcommand("specialize", "Continue training a checkpoint on in-domain data");
  std::string spec_base, spec_data, spec_src, spec_tgt, spec_prep, spec_out;
  int spec_epochs = 1;
  std::optional<double> lr_override;
  spec->add_option("--base", spec_base, "Generic checkpoint")->required()->check(CLI::ExistingFile);
  spec->add_option("--data", spec_data, "Directory with indomain.train.src/.tgt (or train.src/.tgt)");
  spec->add_option("--src", spec_src, "Source in-domain file");
  spec->add_option("--tgt", spec_tgt, "Target in-domain file");
  spec->add_option("--prep", spec_prep, "Preprocessing directory (default: next to --base)");
  spec->add_option("--epochs", spec_epochs, "Extra epochs")->capture_default_str();
  spec->add_option("--lr-override", lr_override, "Constant learning rate instead of resuming the schedule");
  spec->add_option("--out", spec_out, "Output checkpoint (default: <base>-specialized.ckpt)");

  // translate
  auto* translate = app.add_subcommand("translate", "Translate tokenized text");
  std::string tr_model, tr_prep, tr_input, tr_out;
  int beam = 1;
  double alpha = 0.0;
  translate->add_option("--model", tr_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  translate->add_option("--prep", tr_prep, "Preprocessing directory (default: next to --model)");
  translate->add_option("--input", tr_input, "Source text (default stdin)")->check(CLI::ExistingFile);
  translate->add_option("--out", tr_out, "Output file (default stdout)");
  translate->add_option("--beam", beam, "Beam size; 1 is greedy")->check(CLI::PositiveNumber)->capture_default_str();
  translate->add_option("--alpha", alpha, "Length normalization exponent")->capture_default_str();

  // score
  auto* score_cmd = app.add_subcommand("score", "BLEU and TER of a hypothesis file");
  std::string hyp_path, ref_path;
  score_cmd->add_option("--hyp", hyp_path, "Hypotheses, one per line")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--ref", ref_path, "References, one per line")->required()->check(CLI::ExistingFile);

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run the adaptation studies and write the report tables");
  std::string study = "all", plan_path, exp_out, exp_data;
  std::optional<std::size_t> exp_generic, exp_indomain;
  std::optional<int> exp_epochs;
  exp->add_option("study", study, "baselines|epoch-curve|data-size|timing|all")
      ->check(CLI::IsMember({"baselines", "epoch-curve", "data-size", "timing", "all"}))
      ->capture_default_str();
  exp->add_option("--plan", plan_path, "JSON plan file")->check(CLI::ExistingFile);
  exp->add_option("--out", exp_out, "Output directory");
  exp->add_option("--data", exp_data, "Real corpora directory instead of synthetic data");
  exp->add_option("--generic", exp_generic, "Synthetic generic pairs");
  exp->add_option("--indomain", exp_indomain, "Synthetic in-domain pairs");
  exp->add_option("--epochs", exp_epochs, "Generic training epochs");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the post-editing workbench service");
  std::string sv_model, sv_prep, sv_state = "workbench-state", sv_host = "127.0.0.1", sv_static, probe_src, probe_tgt;
  int port = 8080;
  std::size_t min_pairs = 50;
  int extra_epochs = 1;
  serve->add_option("--model", sv_model, "Initial serving checkpoint")->required()->check(CLI::ExistingFile);
  serve->add_option("--prep", sv_prep, "Preprocessing directory (default: next to --model)");
  serve->add_option("--state", sv_state, "State directory")->capture_default_str();
  serve->add_option("--host", sv_host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
  serve->add_option("--static", sv_static, "UI bundle directory served at /");
  serve->add_option("--probe-src", probe_src, "Probe set source file");
  serve->add_option("--probe-tgt", probe_tgt, "Probe set target file");
  serve->add_option("--min-pairs", min_pairs, "Default minimum post-edits per job")->capture_default_str();
  serve->add_option("--extra-epochs", extra_epochs, "Default epochs per job")->capture_default_str();

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 1;
  }

  auto log = [&](const std::string& line) {
    if (verbosity >= 0) err << line << "\n" << std::flush;
  };

  try {
    if (synth->parsed()) {
      const auto c = synth_two_domain(seed, generic_lines, indomain_lines);
      const fs::path dir = synth_out;
      fs::create_directories(dir);
      save_parallel(c.generic_train, dir / "generic.train.src", dir / "generic.train.tgt");
      save_parallel(c.generic_test, dir / "generic.test.src", dir / "generic.test.tgt");
      save_parallel(c.indomain_train, dir / "indomain.train.src", dir / "indomain.train.tgt");
      save_parallel(c.indomain_test, dir / "indomain.test.src", dir / "indomain.test.tgt");
      out << "wrote " << c.generic_train.size() << "+" << c.generic_test.size() << " generic and "
          << c.indomain_train.size() << "+" << c.indomain_test.size() << " in-domain pairs to " << dir.string()
          << "\n";
    } else if (learn->parsed()) {
      std::map<std::string, std::size_t> counts;
      for (const auto& f : learn_inputs) {
        for (const auto& l : read_lines(f)) {
          for (const auto& w : tokenize(l)) ++counts[w];
        }
      }
      const auto codes = learn_bpe(counts, merges);
      write_text(learn_out, codes.serialize());
      out << "learned " << codes.num_merges() << " merges\n";
    } else if (apply->parsed()) {
      const auto codes = BpeCodes::parse(slurp(apply_codes));
      const auto lines = apply_input.empty() ? read_stream(in) : read_lines(apply_input);
      BpeApplier bpe(codes);
      std::string text;
      for (const auto& l : lines) text += join(apply_decode ? decode_bpe(codes, tokenize(l)) : bpe.apply(tokenize(l))) + "\n";
      emit(apply_out, out, text);
    } else if (vocab->parsed()) {
      std::vector<Sentence> sentences;
      for (const auto& f : vocab_inputs) {
        auto s = tokenize_all(read_lines(f));
        sentences.insert(sentences.end(), s.begin(), s.end());
      }
      const auto v = Vocabulary::build(sentences, max_vocab);
      write_text(vocab_out, v.serialize());
      out << "vocabulary of " << v.size() << " symbols\n";
    } else if (train->parsed()) {
      const auto corpus = load_pair(train_src, train_tgt, train_data, "generic.train", Domain::generic);
      const fs::path out_path = train_out;
      const fs::path prep_dir =
          !train_prep.empty() ? fs::path(train_prep) : (out_path.has_parent_path() ? out_path.parent_path() : ".");
      Preprocessing prep;
      if (fs::exists(prep_dir / "codes.bpe")) {
        prep = Preprocessing::load(prep_dir);
      } else {
        // Learn on generic + in-domain text when the data directory has both.
        ParallelCorpus pooled = corpus;
        if (!train_data.empty() && fs::exists(fs::path(train_data) / "indomain.train.src")) {
          pooled = concat(corpus, load_data_dir(train_data, "indomain.train", Domain::in_domain), "pooled");
        }
        prep = Preprocessing::learn(pooled, merges);
        prep.save(prep_dir);
        log("learned preprocessing into " + prep_dir.string());
      }
      const int vs = static_cast<int>(prep.src_vocab.size()), vt = static_cast<int>(prep.tgt_vocab.size());
      ModelConfig config = preset == "large" ? ModelConfig::large(vs, vt) : ModelConfig::desk(vs, vt);
      TrainSchedule sched = preset == "large" ? TrainSchedule::large() : TrainSchedule::desk();
      sched.seed = seed;
      if (epochs) sched.total_epochs = *epochs;
      if (base_lr) sched.base_lr = *base_lr;
      if (batch_size) sched.batch_size = *batch_size;
      if (decay_start) sched.decay_start_epoch = *decay_start;
      std::optional<PreprocessedCorpus> dev;
      if (!dev_src.empty() || !dev_tgt.empty()) dev = prep.encode(load_pair(dev_src, dev_tgt, "", "", Domain::generic));
      TrainOptions opts;
      if (dev) opts.dev = &*dev;
      opts.on_epoch = [&](const EpochStats& e) {
        log("epoch " + std::to_string(e.epoch) + " lr " + std::to_string(e.lr) + " loss " + std::to_string(e.train_loss) +
            (e.dev_loss ? " dev " + std::to_string(*e.dev_loss) : ""));
      };
      auto [ckpt, report] = train_model(prep.encode(corpus), config, sched, opts);
      save_checkpoint(ckpt, out_path);
      write_text(out_path.string() + ".report.csv", report.to_csv());
      out << "checkpoint " << out_path.string() << " " << checkpoint_hash(ckpt) << "\n";
    } else if (spec->parsed()) {
      const fs::path base_path = spec_base;
      const auto prep = Preprocessing::load(prep_dir_for(spec_prep, base_path));
      const auto base = load_checkpoint(base_path);
      const auto corpus = load_pair(spec_src, spec_tgt, spec_data, "indomain.train", Domain::in_domain);
      const auto policy = lr_override ? LrPolicy::fixed(*lr_override) : LrPolicy::resume();
      TrainOptions opts;
      opts.on_epoch = [&](const EpochStats& e) {
        log("epoch " + std::to_string(e.epoch) + " lr " + std::to_string(e.lr) + " loss " + std::to_string(e.train_loss));
      };
      auto [ckpt, report] = specialize(base, prep.encode(corpus), spec_epochs, policy, opts);
      const fs::path out_path = !spec_out.empty()
                                    ? fs::path(spec_out)
                                    : base_path.parent_path() / (base_path.stem().string() + "-specialized.ckpt");
      save_checkpoint(ckpt, out_path);
      write_text(out_path.string() + ".report.csv", report.to_csv());
      out << "checkpoint " << out_path.string() << " " << checkpoint_hash(ckpt) << "\n";
    } else if (translate->parsed()) {
      const fs::path model = tr_model;
      const auto prep = Preprocessing::load(prep_dir_for(tr_prep, model));
      Translator translator(std::make_shared<const Checkpoint>(load_checkpoint(model)), prep);
      const auto lines = tr_input.empty() ? read_stream(in) : read_lines(tr_input);
      std::string text;
      for (const auto& l : lines) text += join(translator.translate(tokenize(l), {beam, alpha})) + "\n";
      emit(tr_out, out, text);
    } else if (score_cmd->parsed()) {
      const auto report = score(tokenize_all(read_lines(hyp_path)), tokenize_all(read_lines(ref_path)));
      out << (as_json ? report.to_json() + "\n" : report.to_table());
    } else if (exp->parsed()) {
      ExperimentPlan plan = plan_path.empty() ? ExperimentPlan::desk() : ExperimentPlan::from_json(slurp(plan_path));
      if (app.get_option("--seed")->count() > 0 || plan_path.empty()) {
        plan.seed = seed;
        plan.schedule.seed = seed;
      }
      if (!exp_out.empty()) plan.output_dir = exp_out;
      if (!exp_data.empty()) plan.data_dir = exp_data;
      if (exp_generic) plan.generic_lines = *exp_generic;
      if (exp_indomain) plan.indomain_lines = *exp_indomain;
      if (exp_epochs) plan.schedule.total_epochs = *exp_epochs;
      const Study s = study == "baselines"     ? Study::baselines
                      : study == "epoch-curve" ? Study::epoch_curve
                      : study == "data-size"   ? Study::data_size
                      : study == "timing"      ? Study::timing
                                               : Study::all;
      run_experiment(plan, s, log);
      out << "results in " << plan.output_dir.string() << "\n";
    } else if (serve->parsed()) {
      WorkbenchConfig cfg;
      cfg.state_dir = sv_state;
      cfg.base_checkpoint = sv_model;
      cfg.prep_dir = prep_dir_for(sv_prep, sv_model);
      cfg.static_dir = sv_static;
      cfg.default_min_pairs = min_pairs;
      cfg.default_extra_epochs = extra_epochs;
      if (!probe_src.empty() || !probe_tgt.empty()) {
        cfg.probe = load_pair(probe_src, probe_tgt, "", "", Domain::in_domain);
      }
      Workbench bench(cfg);
      WorkbenchServer server(bench);
      const int bound = server.bind(sv_host, port);
      out << "serving on http://" << sv_host << ":" << bound << "/\n" << std::flush;
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.run();
      g_server = nullptr;
    }
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace deskmt::cli
