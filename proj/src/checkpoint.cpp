#include "deskmt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "deskmt/hash.hpp"

namespace deskmt {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

namespace {

constexpr char kMagic[8] = {'D', 'S', 'K', 'M', 'T', 'C', 'K', 'P'};

class Writer {
 public:
  template <typename V>
  void pod(V v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void u32(std::uint32_t v) { pod(v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename V>
  V pod() {
    V v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw CorruptionError("checkpoint is truncated");
  }
  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.u32(sizeof(Real));
  const auto& m = c.config;
  for (int v : {m.emb_dim, m.hidden_dim, m.num_layers, m.src_vocab_size, m.tgt_vocab_size, m.max_decode_len}) {
    w.pod<std::int32_t>(v);
  }
  w.pod(m.dropout_p);
  const auto& s = c.schedule;
  w.pod(s.base_lr);
  w.pod(s.decay_factor);
  w.pod<std::int32_t>(s.decay_start_epoch);
  w.pod<std::int32_t>(s.total_epochs);
  w.pod<std::int32_t>(s.batch_size);
  w.pod(s.clip_norm);
  w.pod(s.seed);
  w.pod<std::int32_t>(c.epochs_completed);
  w.pod(c.current_lr);
  w.str(c.codes_hash);
  w.str(c.src_vocab_hash);
  w.str(c.tgt_vocab_hash);
  std::uint32_t tensors = 0;
  c.params.visit([&](const std::string&, const nn::Matrix<Real>&) { ++tensors; });
  w.u32(tensors);
  c.params.visit([&](const std::string& name, const nn::Matrix<Real>& t) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rows()));
    w.u32(static_cast<std::uint32_t>(t.cols()));
    w.raw(t.data(), static_cast<std::size_t>(t.size()) * sizeof(Real));
  });
  w.u32(static_cast<std::uint32_t>(c.provenance.size()));
  for (const auto& p : c.provenance) {
    w.str(p.corpus);
    w.pod<std::int32_t>(p.epochs);
    w.str(p.timestamp);
  }
  const Digest d = sha256(w.bytes());
  w.raw(d.data(), d.size());
  return std::move(w.bytes());
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic + 32) throw CorruptionError("checkpoint is truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw FormatError("not a checkpoint file");
  const std::size_t body = bytes.size() - 32;
  const Digest expect = sha256(std::string_view(bytes.data(), body));
  if (std::memcmp(expect.data(), bytes.data() + body, 32) != 0) {
    throw CorruptionError("checkpoint checksum mismatch (file truncated or corrupted)");
  }
  Reader r(bytes, body);
  char magic[8];
  r.raw(magic, sizeof magic);
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  if (r.u32() != sizeof(Real)) throw FormatError("checkpoint scalar width mismatch");
  Checkpoint c;
  auto& m = c.config;
  for (int* v : {&m.emb_dim, &m.hidden_dim, &m.num_layers, &m.src_vocab_size, &m.tgt_vocab_size, &m.max_decode_len}) {
    *v = r.pod<std::int32_t>();
  }
  m.dropout_p = r.pod<double>();
  m.validate();
  auto& s = c.schedule;
  s.base_lr = r.pod<double>();
  s.decay_factor = r.pod<double>();
  s.decay_start_epoch = r.pod<std::int32_t>();
  s.total_epochs = r.pod<std::int32_t>();
  s.batch_size = r.pod<std::int32_t>();
  s.clip_norm = r.pod<double>();
  s.seed = r.pod<std::uint64_t>();
  c.epochs_completed = r.pod<std::int32_t>();
  c.current_lr = r.pod<double>();
  c.codes_hash = r.str();
  c.src_vocab_hash = r.str();
  c.tgt_vocab_hash = r.str();
  c.params = ModelParams<Real>::zeros(m);
  const auto tensors = r.u32();
  std::uint32_t seen = 0;
  c.params.visit([&](const std::string& name, nn::Matrix<Real>& t) {
    if (seen++ >= tensors) throw FormatError("checkpoint has too few tensors");
    const auto stored = r.str();
    const auto rows = r.u32(), cols = r.u32();
    if (stored != name || rows != t.rows() || cols != t.cols()) {
      throw FormatError("checkpoint tensor " + stored + " does not match the model layout");
    }
    r.raw(t.data(), static_cast<std::size_t>(t.size()) * sizeof(Real));
  });
  if (seen != tensors) throw FormatError("checkpoint has extra tensors");
  const auto records = r.u32();
  for (std::uint32_t i = 0; i < records; ++i) {
    ProvenanceRecord p;
    p.corpus = r.str();
    p.epochs = r.pod<std::int32_t>();
    p.timestamp = r.str();
    c.provenance.push_back(std::move(p));
  }
  if (!r.done()) throw FormatError("trailing bytes in checkpoint");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw FormatError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

std::string checkpoint_hash(const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  return to_hex(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()) + bytes.size() - 32, 32));
}

std::string params_hash(const Checkpoint& ckpt) {
  Writer w;
  const auto& c = ckpt.config;
  for (int v : {c.emb_dim, c.hidden_dim, c.num_layers, c.src_vocab_size, c.tgt_vocab_size, c.max_decode_len}) {
    w.pod(static_cast<std::int32_t>(v));
  }
  w.pod(c.dropout_p);
  ckpt.params.visit([&](const std::string& name, const nn::Matrix<Real>& m) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    w.raw(m.data(), sizeof(Real) * static_cast<std::size_t>(m.size()));
  });
  return sha256_hex(w.bytes());
}

std::string checkpoint_file_hash(const std::filesystem::path& path) {
  return checkpoint_hash(load_checkpoint(path));
}

}  // namespace deskmt
