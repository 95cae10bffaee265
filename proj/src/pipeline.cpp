#include "deskmt/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "deskmt/errors.hpp"

namespace deskmt {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

Preprocessing Preprocessing::learn(const ParallelCorpus& corpus, std::size_t num_merges,
                                   std::size_t max_vocab) {
  Preprocessing p;
  p.codes = learn_bpe(corpus, num_merges);
  BpeApplier bpe(p.codes);
  std::vector<Sentence> src, tgt;
  src.reserve(corpus.size());
  tgt.reserve(corpus.size());
  for (const auto& pair : corpus.pairs) {
    src.push_back(bpe.apply(pair.source));
    tgt.push_back(bpe.apply(pair.target));
  }
  p.src_vocab = Vocabulary::build(src, max_vocab);
  p.tgt_vocab = Vocabulary::build(tgt, max_vocab);
  return p;
}

void Preprocessing::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_file(dir / "codes.bpe", codes.serialize());
  write_file(dir / "src.vocab", src_vocab.serialize());
  write_file(dir / "tgt.vocab", tgt_vocab.serialize());
}

Preprocessing Preprocessing::load(const std::filesystem::path& dir) {
  Preprocessing p;
  p.codes = BpeCodes::parse(read_file(dir / "codes.bpe"));
  p.src_vocab = Vocabulary::parse(read_file(dir / "src.vocab"));
  p.tgt_vocab = Vocabulary::parse(read_file(dir / "tgt.vocab"));
  return p;
}

PreprocessedCorpus Preprocessing::encode(const ParallelCorpus& corpus) const {
  BpeApplier bpe(codes);
  PreprocessedCorpus out{corpus.name, {}, codes_hash(), src_vocab_hash(), tgt_vocab_hash()};
  out.pairs.reserve(corpus.size());
  for (const auto& pair : corpus.pairs) {
    out.pairs.push_back({src_vocab.encode(bpe.apply(pair.source)), tgt_vocab.encode(bpe.apply(pair.target))});
  }
  return out;
}

void Preprocessing::check_compatible(const Checkpoint& ckpt) const {
  if (ckpt.codes_hash != codes_hash()) throw IncompatibleError("checkpoint was trained with different BPE codes");
  if (ckpt.src_vocab_hash != src_vocab_hash()) {
    throw IncompatibleError("checkpoint was trained with a different source vocabulary");
  }
  if (ckpt.tgt_vocab_hash != tgt_vocab_hash()) {
    throw IncompatibleError("checkpoint was trained with a different target vocabulary");
  }
  if (ckpt.config.src_vocab_size != static_cast<int>(src_vocab.size()) ||
      ckpt.config.tgt_vocab_size != static_cast<int>(tgt_vocab.size())) {
    throw IncompatibleError("checkpoint vocabulary sizes do not match");
  }
}

Translator::Translator(std::shared_ptr<const Checkpoint> ckpt, const Preprocessing& prep)
    : ckpt_(std::move(ckpt)), prep_(&prep), bpe_(prep.codes) {
  if (!ckpt_) throw Error("translator needs a checkpoint");
  prep.check_compatible(*ckpt_);
}

Sentence Translator::translate(const Sentence& source, const DecodeOptions& options) const {
  if (source.empty()) return {};
  if (options.beam_size < 1) throw RangeError("beam size must be at least 1");
  IdSequence src;
  {
    std::lock_guard lock(bpe_mutex_);
    src = prep_->src_vocab.encode(bpe_.apply(source));
  }
  const auto& ck = *ckpt_;
  const IdSequence out = options.beam_size == 1
                             ? greedy_decode(ck.params, ck.config, src)
                             : beam_decode(ck.params, ck.config, src, options.beam_size,
                                           options.length_norm_alpha);
  Sentence subwords;
  subwords.reserve(out.size());
  for (TokenId id : out) {
    subwords.push_back(id == kUnk ? prep_->tgt_vocab.symbol_of(kUnk) + prep_->codes.eow
                                  : prep_->tgt_vocab.symbol_of(id));
  }
  return decode_bpe(prep_->codes, subwords);
}

std::vector<Sentence> Translator::translate_all(const std::vector<Sentence>& sources,
                                                const DecodeOptions& options) const {
  std::vector<Sentence> out;
  out.reserve(sources.size());
  for (const auto& s : sources) out.push_back(translate(s, options));
  return out;
}

EvalReport evaluate_model(const Checkpoint& ckpt, const Preprocessing& prep, const ParallelCorpus& test,
                          const DecodeOptions& options) {
  Translator translator(std::make_shared<const Checkpoint>(ckpt), prep);
  std::vector<Sentence> sources, refs;
  for (const auto& p : test.pairs) {
    sources.push_back(p.source);
    refs.push_back(p.target);
  }
  const auto start = std::chrono::steady_clock::now();
  const auto hyps = translator.translate_all(sources, options);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EvalReport r = score(hyps, refs);
  r.decode_seconds = seconds;
  return r;
}

}  // namespace deskmt
