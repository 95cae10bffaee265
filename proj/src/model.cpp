#include "deskmt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace deskmt {

using nn::Matrix;
using nn::Vector;
using Index = Eigen::Index;

ModelConfig ModelConfig::desk(int src_vocab, int tgt_vocab) {
  return {32, 64, 2, src_vocab, tgt_vocab, 0.3, 64};
}

ModelConfig ModelConfig::large(int src_vocab, int tgt_vocab) {
  return {500, 800, 4, src_vocab, tgt_vocab, 0.3, 100};
}

void ModelConfig::validate() const {
  if (emb_dim <= 0 || hidden_dim <= 0 || num_layers <= 0 || src_vocab_size <= 0 ||
      tgt_vocab_size <= 0 || max_decode_len <= 0) {
    throw RangeError("model dimensions must be positive");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw RangeError("dropout_p must lie in [0, 1)");
}

// ---------------------------------------------------------------------------
// Parameters

template <typename T>
ModelParams<T> ModelParams<T>::zeros(const ModelConfig& config) {
  config.validate();
  const int e = config.emb_dim, h = config.hidden_dim;
  ModelParams p;
  p.src_embedding = Mat::Zero(e, config.src_vocab_size);
  p.tgt_embedding = Mat::Zero(e, config.tgt_vocab_size);
  for (int l = 0; l < config.num_layers; ++l) {
    p.encoder_fwd.push_back(nn::LstmParams<T>::zeros(l == 0 ? e : h, h));
    p.encoder_bwd.push_back(nn::LstmParams<T>::zeros(l == 0 ? e : h, h));
    p.decoder.push_back(nn::LstmParams<T>::zeros(l == 0 ? e + h : h, h));
    p.bridge_h.push_back(Mat::Zero(h, 2 * h));
    p.bridge_c.push_back(Mat::Zero(h, 2 * h));
  }
  p.annotation_proj = Mat::Zero(h, 2 * h);
  p.attn_score = Mat::Zero(h, h);
  p.attn_combine = Mat::Zero(h, 2 * h);
  p.output_proj = Mat::Zero(config.tgt_vocab_size, h);
  return p;
}

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& config, Rng& rng) {
  auto p = zeros(config);
  p.visit([&](const std::string&, Mat& m) { nn::fill_uniform(m, 0.1, rng); });
  const int h = config.hidden_dim;
  for (auto* stack : {&p.encoder_fwd, &p.encoder_bwd, &p.decoder}) {
    for (auto& layer : *stack) layer.bias.middleRows(h, h).setOnes();
  }
  return p;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Mat& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename T>
bool ModelParams<T>::all_finite() const {
  bool ok = true;
  visit([&](const std::string&, const Mat& m) { ok = ok && m.allFinite(); });
  return ok;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  auto lstm = [](const auto& layers) {
    std::vector<nn::LstmParams<U>> r;
    for (const auto& l : layers) {
      r.push_back({l.w_input.template cast<U>(), l.w_recurrent.template cast<U>(),
                   l.bias.template cast<U>()});
    }
    return r;
  };
  auto mats = [](const std::vector<Mat>& v) {
    std::vector<nn::Matrix<U>> r;
    for (const auto& m : v) r.push_back(m.template cast<U>());
    return r;
  };
  out.src_embedding = src_embedding.template cast<U>();
  out.tgt_embedding = tgt_embedding.template cast<U>();
  out.encoder_fwd = lstm(encoder_fwd);
  out.encoder_bwd = lstm(encoder_bwd);
  out.decoder = lstm(decoder);
  out.annotation_proj = annotation_proj.template cast<U>();
  out.bridge_h = mats(bridge_h);
  out.bridge_c = mats(bridge_c);
  out.attn_score = attn_score.template cast<U>();
  out.attn_combine = attn_combine.template cast<U>();
  out.output_proj = output_proj.template cast<U>();
  return out;
}

template <typename T>
DecoderState<T> DecoderState<T>::select(std::span<const int> columns) const {
  DecoderState out;
  auto pick = [&](const Matrix<T>& m) {
    Matrix<T> r(m.rows(), static_cast<Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) r.col(static_cast<Index>(k)) = m.col(columns[k]);
    return r;
  };
  for (const auto& m : h) out.h.push_back(pick(m));
  for (const auto& m : c) out.c.push_back(pick(m));
  out.feed = pick(feed);
  return out;
}

namespace {

void check_ids(std::span<const TokenId> ids, int vocab, const char* side) {
  for (auto id : ids) {
    if (id < 0 || id >= vocab) {
      throw RangeError(std::string(side) + " token id " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(vocab));
    }
  }
}

// Per-layer activations of an LSTM run over `steps` time steps of `batch`
// columns each; column (t, b) lives at index t * batch + b.
template <typename T>
struct SeqCache {
  Matrix<T> input;   // post-dropout layer input
  Matrix<T> gates;   // activated gates
  Matrix<T> c_new;   // cell state before padding blend
  Matrix<T> tanh_c;
  Matrix<T> h_prev;
  Matrix<T> c_prev;
  Matrix<T> h;       // after padding blend
  Matrix<T> c;

  void resize(Index in, Index hidden, Index cols) {
    input.resize(in, cols);
    gates.resize(4 * hidden, cols);
    c_new.resize(hidden, cols);
    tanh_c.resize(hidden, cols);
    h_prev.resize(hidden, cols);
    c_prev.resize(hidden, cols);
    h.resize(hidden, cols);
    c.resize(hidden, cols);
  }
};

// One step over columns [col, col + batch). On entry the gates block holds
// W x + b. Masked-out columns (mask[b] == 0) carry the previous state through.
template <typename T>
void step_forward(const nn::LstmParams<T>& p, SeqCache<T>& s, Index col, Index batch,
                  const Matrix<T>& h_prev, const Matrix<T>& c_prev, const unsigned char* mask) {
  s.h_prev.middleCols(col, batch) = h_prev;
  s.c_prev.middleCols(col, batch) = c_prev;
  auto gates = s.gates.middleCols(col, batch);
  gates.noalias() += p.w_recurrent * h_prev;
  nn::lstm_pointwise<T>(gates, s.c_prev.middleCols(col, batch), s.c_new.middleCols(col, batch),
                        s.tanh_c.middleCols(col, batch), s.h.middleCols(col, batch));
  s.c.middleCols(col, batch) = s.c_new.middleCols(col, batch);
  if (mask) {
    for (Index b = 0; b < batch; ++b) {
      if (!mask[b]) {
        s.h.col(col + b) = h_prev.col(b);
        s.c.col(col + b) = c_prev.col(b);
      }
    }
  }
}

// Backward of step_forward. dh and dc hold the gradient on this step's (h, c)
// on entry and on the previous step's state on exit.
template <typename T>
void step_backward(const nn::LstmParams<T>& p, const SeqCache<T>& s, Index col, Index batch,
                   const unsigned char* mask, Matrix<T>& dh, Matrix<T>& dc, Matrix<T>& dgates,
                   Matrix<T>& scratch) {
  Matrix<T> pass_h, pass_c;
  if (mask) {
    pass_h = Matrix<T>::Zero(dh.rows(), batch);
    pass_c = Matrix<T>::Zero(dc.rows(), batch);
    for (Index b = 0; b < batch; ++b) {
      if (!mask[b]) {
        pass_h.col(b) = dh.col(b);
        pass_c.col(b) = dc.col(b);
        dh.col(b).setZero();
        dc.col(b).setZero();
      }
    }
  }
  auto dpre = dgates.middleCols(col, batch);
  scratch.resize(dc.rows(), batch);
  nn::lstm_pointwise_backward<T>(s.gates.middleCols(col, batch), s.c_prev.middleCols(col, batch),
                                 s.tanh_c.middleCols(col, batch), dh, dc, dpre, scratch);
  dh.noalias() = p.w_recurrent.transpose() * dpre;
  dc = scratch;
  if (mask) {
    dh += pass_h;
    dc += pass_c;
  }
}

template <typename T>
void accumulate_weight_grads(const SeqCache<T>& s, const Matrix<T>& dgates,
                             nn::LstmParams<T>& g) {
  g.w_input.noalias() += dgates * s.input.transpose();
  g.w_recurrent.noalias() += dgates * s.h_prev.transpose();
  g.bias.col(0) += dgates.rowwise().sum();
}

// Runs one encoder layer over its (already filled) input.
template <typename T>
void encoder_layer_forward(const nn::LstmParams<T>& p, SeqCache<T>& s, Index steps, Index batch,
                           bool reverse, const std::vector<unsigned char>& mask) {
  s.gates.noalias() = p.w_input * s.input;
  s.gates.colwise() += p.bias.col(0);
  const Index hidden = p.hidden();
  const Matrix<T> zero = Matrix<T>::Zero(hidden, batch);
  for (Index k = 0; k < steps; ++k) {
    const Index t = reverse ? steps - 1 - k : k;
    const Index prev = reverse ? t + 1 : t - 1;
    if (k == 0) {
      step_forward(p, s, t * batch, batch, zero, zero, mask.data() + t * batch);
    } else {
      // Copies: the previous block is read while this block is written.
      const Matrix<T> hp = s.h.middleCols(prev * batch, batch);
      const Matrix<T> cp = s.c.middleCols(prev * batch, batch);
      step_forward(p, s, t * batch, batch, hp, cp, mask.data() + t * batch);
    }
  }
}

// Backward of one encoder layer. dh_final/dc_final are gradients on the state
// after the last processed step. Returns the gradient on the layer input.
template <typename T>
Matrix<T> encoder_layer_backward(const nn::LstmParams<T>& p, const SeqCache<T>& s, Index steps,
                                 Index batch, bool reverse, const std::vector<unsigned char>& mask,
                                 const Matrix<T>& d_out, Matrix<T> dh_final, Matrix<T> dc_final,
                                 nn::LstmParams<T>& g) {
  Matrix<T> dgates = Matrix<T>::Zero(s.gates.rows(), s.gates.cols());
  Matrix<T> dh = std::move(dh_final), dc = std::move(dc_final), scratch;
  for (Index k = steps - 1; k >= 0; --k) {
    const Index t = reverse ? steps - 1 - k : k;
    dh += d_out.middleCols(t * batch, batch);
    step_backward(p, s, t * batch, batch, mask.data() + t * batch, dh, dc, dgates, scratch);
  }
  accumulate_weight_grads(s, dgates, g);
  return p.w_input.transpose() * dgates;
}

template <typename T>
using ColMap = Eigen::Map<const Matrix<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using MutColMap = Eigen::Map<Matrix<T>, 0, Eigen::OuterStride<>>;

// Columns of batch entry b inside a time-major H x (steps * batch) matrix.
template <typename T>
ColMap<T> entry_view(const Matrix<T>& m, Index b, Index batch, Index len) {
  return ColMap<T>(m.data() + b * m.rows(), m.rows(), len, Eigen::OuterStride<>(batch * m.rows()));
}
template <typename T>
MutColMap<T> entry_view(Matrix<T>& m, Index b, Index batch, Index len) {
  return MutColMap<T>(m.data() + b * m.rows(), m.rows(), len, Eigen::OuterStride<>(batch * m.rows()));
}

template <typename T>
void softmax_inplace(Eigen::Ref<Vector<T>> v) {
  v.array() = (v.array() - v.maxCoeff()).exp();
  v /= v.sum();
}

}  // namespace

// ---------------------------------------------------------------------------
// Training graph

template <typename T>
T training_loss(const ModelParams<T>& params, const ModelConfig& config,
                std::span<const EncodedPair> batch_pairs, nn::Mode mode, Rng* rng,
                ModelParams<T>* grads) {
  config.validate();
  const Index batch = static_cast<Index>(batch_pairs.size());
  if (batch == 0) throw RangeError("training batch is empty");
  const Index E = config.emb_dim, H = config.hidden_dim;
  const int L = config.num_layers;
  const bool drop = mode == nn::Mode::train && config.dropout_p > 0.0;
  if (drop && !rng) throw Error("train-mode dropout requires a random stream");

  Index S = 0, Tt = 0;
  std::vector<Index> src_len(batch), tgt_len(batch);
  for (Index b = 0; b < batch; ++b) {
    const auto& pair = batch_pairs[b];
    if (pair.source.empty()) throw RangeError("empty source sentence");
    if (pair.target.empty()) throw RangeError("empty target sentence");
    check_ids(pair.source, config.src_vocab_size, "source");
    check_ids(pair.target, config.tgt_vocab_size, "target");
    src_len[b] = static_cast<Index>(pair.source.size());
    tgt_len[b] = static_cast<Index>(pair.target.size()) + 1;  // + EOS
    S = std::max(S, src_len[b]);
    Tt = std::max(Tt, tgt_len[b]);
  }
  const Index SB = S * batch, TB = Tt * batch;

  std::vector<unsigned char> src_mask(SB);
  for (Index t = 0; t < S; ++t)
    for (Index b = 0; b < batch; ++b) src_mask[t * batch + b] = t < src_len[b];

  auto draw_mask = [&](Index rows, Index cols) { return nn::dropout_mask<T>(rows, cols, config.dropout_p, *rng); };

  // Encoder.
  std::vector<SeqCache<T>> fwd(L), bwd(L);
  std::vector<Matrix<T>> fwd_drop(L), bwd_drop(L);
  Matrix<T> x0 = Matrix<T>::Zero(E, SB);
  for (Index t = 0; t < S; ++t)
    for (Index b = 0; b < batch; ++b)
      if (t < src_len[b]) x0.col(t * batch + b) = params.src_embedding.col(batch_pairs[b].source[t]);
  for (int l = 0; l < L; ++l) {
    for (int dir = 0; dir < 2; ++dir) {
      auto& cache = dir == 0 ? fwd : bwd;
      auto& drops = dir == 0 ? fwd_drop : bwd_drop;
      const auto& layer = dir == 0 ? params.encoder_fwd[l] : params.encoder_bwd[l];
      cache[l].resize(l == 0 ? E : H, H, SB);
      if (l == 0) {
        cache[l].input = x0;
      } else if (drop) {
        drops[l] = draw_mask(H, SB);
        cache[l].input = cache[l - 1].h.cwiseProduct(drops[l]);
      } else {
        cache[l].input = cache[l - 1].h;
      }
      encoder_layer_forward(layer, cache[l], S, batch, dir == 1, src_mask);
    }
  }
  Matrix<T> annotations(2 * H, SB);
  annotations.topRows(H) = fwd[L - 1].h;
  annotations.bottomRows(H) = bwd[L - 1].h;
  const Matrix<T> keys = params.annotation_proj * annotations;

  // Bridge.
  std::vector<Matrix<T>> cat_h(L), cat_c(L), init_h(L), init_c(L);
  for (int l = 0; l < L; ++l) {
    cat_h[l].resize(2 * H, batch);
    cat_c[l].resize(2 * H, batch);
    cat_h[l].topRows(H) = fwd[l].h.middleCols((S - 1) * batch, batch);
    cat_h[l].bottomRows(H) = bwd[l].h.middleCols(0, batch);
    cat_c[l].topRows(H) = fwd[l].c.middleCols((S - 1) * batch, batch);
    cat_c[l].bottomRows(H) = bwd[l].c.middleCols(0, batch);
    init_h[l] = (params.bridge_h[l] * cat_h[l]).array().tanh().matrix();
    init_c[l] = params.bridge_c[l] * cat_c[l];
  }

  // Decoder with input feeding and global attention.
  std::vector<TokenId> y_in(TB, kPad), y_out(TB, kPad);
  for (Index b = 0; b < batch; ++b) {
    const auto& y = batch_pairs[b].target;
    for (Index t = 0; t < tgt_len[b]; ++t) {
      y_in[t * batch + b] = t == 0 ? kBos : y[t - 1];
      y_out[t * batch + b] = t < static_cast<Index>(y.size()) ? y[t] : kEos;
    }
  }
  std::vector<SeqCache<T>> dec(L);
  std::vector<Matrix<T>> dec_drop(L);
  for (int l = 0; l < L; ++l) {
    dec[l].resize(l == 0 ? E + H : H, H, TB);
    if (l > 0 && drop) dec_drop[l] = draw_mask(H, TB);
  }
  Matrix<T> out_drop;
  if (drop) out_drop = draw_mask(H, TB);
  Matrix<T> query(H, TB), combined(2 * H, TB), attentional(H, TB);
  Matrix<T> attention = Matrix<T>::Zero(S, TB);
  for (Index t = 0; t < Tt; ++t) {
    const Index col = t * batch;
    auto in0 = dec[0].input.middleCols(col, batch);
    for (Index b = 0; b < batch; ++b) {
      const TokenId id = y_in[col + b];
      if (id == kPad && t > 0) {
        in0.col(b).head(E).setZero();
      } else {
        in0.col(b).head(E) = params.tgt_embedding.col(id);
      }
    }
    if (t == 0) {
      in0.bottomRows(H).setZero();
    } else {
      in0.bottomRows(H) = attentional.middleCols(col - batch, batch);
    }
    for (int l = 0; l < L; ++l) {
      auto& s = dec[l];
      if (l > 0) {
        if (drop) {
          s.input.middleCols(col, batch) =
              dec[l - 1].h.middleCols(col, batch).cwiseProduct(dec_drop[l].middleCols(col, batch));
        } else {
          s.input.middleCols(col, batch) = dec[l - 1].h.middleCols(col, batch);
        }
      }
      s.gates.middleCols(col, batch).noalias() = params.decoder[l].w_input * s.input.middleCols(col, batch);
      s.gates.middleCols(col, batch).colwise() += params.decoder[l].bias.col(0);
      if (t == 0) {
        step_forward(params.decoder[l], s, col, batch, init_h[l], init_c[l], nullptr);
      } else {
        const Matrix<T> hp = s.h.middleCols(col - batch, batch);
        const Matrix<T> cp = s.c.middleCols(col - batch, batch);
        step_forward(params.decoder[l], s, col, batch, hp, cp, nullptr);
      }
    }
    const auto top = dec[L - 1].h.middleCols(col, batch);
    query.middleCols(col, batch).noalias() = params.attn_score.transpose() * top;
    for (Index b = 0; b < batch; ++b) {
      const auto k = entry_view(keys, b, batch, src_len[b]);
      auto a = attention.col(col + b).head(src_len[b]);
      a.noalias() = k.transpose() * query.col(col + b);
      softmax_inplace<T>(a);
      combined.col(col + b).head(H).noalias() = k * a;
    }
    combined.middleCols(col, batch).bottomRows(H) = top;
    attentional.middleCols(col, batch) =
        (params.attn_combine * combined.middleCols(col, batch)).array().tanh().matrix();
  }
  const Matrix<T> output = drop ? Matrix<T>(attentional.cwiseProduct(out_drop)) : attentional;
  Matrix<T> logits = params.output_proj * output;

  // Loss; logits are turned into weighted (softmax - one_hot) in place.
  double total = 0.0;
  for (Index t = 0; t < Tt; ++t) {
    for (Index b = 0; b < batch; ++b) {
      const Index col = t * batch + b;
      auto z = logits.col(col);
      if (t >= tgt_len[b]) {
        z.setZero();
        continue;
      }
      const T w = T(1) / static_cast<T>(tgt_len[b] * batch);
      const TokenId y = y_out[col];
      const T mx = z.maxCoeff();
      const T shifted = z(y) - mx;
      z.array() = (z.array() - mx).exp();
      const T sum = z.sum();
      total += static_cast<double>(w) * (std::log(static_cast<double>(sum)) - static_cast<double>(shifted));
      z *= w / sum;
      z(y) -= w;
    }
  }
  const T loss = static_cast<T>(total);
  if (!std::isfinite(total)) throw NumericError("non-finite training loss");
  if (!grads) return loss;

  // Backward.
  auto& g = *grads;
  g = ModelParams<T>::zeros(config);
  const Matrix<T>& dlogits = logits;
  g.output_proj.noalias() = dlogits * output.transpose();
  Matrix<T> d_attentional = params.output_proj.transpose() * dlogits;
  if (drop) d_attentional.array() *= out_drop.array();

  Matrix<T> d_keys = Matrix<T>::Zero(H, SB);
  Matrix<T> d_pre_combine(H, TB), d_query(H, TB);
  std::vector<Matrix<T>> dgates(L), dh_carry(L), dc_carry(L);
  for (int l = 0; l < L; ++l) {
    dgates[l] = Matrix<T>::Zero(4 * H, TB);
    dh_carry[l] = Matrix<T>::Zero(H, batch);
    dc_carry[l] = Matrix<T>::Zero(H, batch);
  }
  Matrix<T> d_feed = Matrix<T>::Zero(H, batch), scratch, d_combined, d_top, d_below;
  Vector<T> da(S);
  for (Index t = Tt - 1; t >= 0; --t) {
    const Index col = t * batch;
    auto dpre = d_pre_combine.middleCols(col, batch);
    dpre = d_attentional.middleCols(col, batch) + d_feed;
    dpre.array() *= T(1) - attentional.middleCols(col, batch).array().square();
    d_combined.noalias() = params.attn_combine.transpose() * dpre;
    d_top = d_combined.bottomRows(H);
    for (Index b = 0; b < batch; ++b) {
      const Index n = src_len[b];
      const auto k = entry_view(keys, b, batch, n);
      auto dk = entry_view(d_keys, b, batch, n);
      const auto a = attention.col(col + b).head(n);
      const auto dctx = d_combined.col(b).head(H);
      auto dd = da.head(n);
      dd.noalias() = k.transpose() * dctx;
      const T dot = a.dot(dd);
      dd.array() = a.array() * (dd.array() - dot);
      dk.noalias() += dctx * a.transpose();
      dk.noalias() += query.col(col + b) * dd.transpose();
      d_query.col(col + b).noalias() = k * dd;
    }
    d_top.noalias() += params.attn_score * d_query.middleCols(col, batch);
    for (int l = L - 1; l >= 0; --l) {
      Matrix<T> dh = (l == L - 1 ? d_top : d_below) + dh_carry[l];
      Matrix<T>& dc = dc_carry[l];
      step_backward(params.decoder[l], dec[l], col, batch, nullptr, dh, dc, dgates[l], scratch);
      dh_carry[l] = std::move(dh);
      Matrix<T> dx = params.decoder[l].w_input.transpose() * dgates[l].middleCols(col, batch);
      if (l > 0) {
        d_below = drop ? Matrix<T>(dx.cwiseProduct(dec_drop[l].middleCols(col, batch))) : dx;
      } else {
        for (Index b = 0; b < batch; ++b) {
          if (t < tgt_len[b]) g.tgt_embedding.col(y_in[col + b]) += dx.col(b).head(E);
        }
        d_feed = dx.bottomRows(H);
      }
    }
  }
  for (int l = 0; l < L; ++l) accumulate_weight_grads(dec[l], dgates[l], g.decoder[l]);
  g.attn_combine.noalias() = d_pre_combine * combined.transpose();
  g.attn_score.noalias() = dec[L - 1].h * d_query.transpose();

  // Bridge backward: gradients on the encoder final states.
  std::vector<Matrix<T>> dh_final_fwd(L), dc_final_fwd(L), dh_final_bwd(L), dc_final_bwd(L);
  for (int l = 0; l < L; ++l) {
    Matrix<T> dpre = dh_carry[l].cwiseProduct((T(1) - init_h[l].array().square()).matrix());
    g.bridge_h[l].noalias() = dpre * cat_h[l].transpose();
    g.bridge_c[l].noalias() = dc_carry[l] * cat_c[l].transpose();
    const Matrix<T> dcat_h = params.bridge_h[l].transpose() * dpre;
    const Matrix<T> dcat_c = params.bridge_c[l].transpose() * dc_carry[l];
    dh_final_fwd[l] = dcat_h.topRows(H);
    dh_final_bwd[l] = dcat_h.bottomRows(H);
    dc_final_fwd[l] = dcat_c.topRows(H);
    dc_final_bwd[l] = dcat_c.bottomRows(H);
  }

  g.annotation_proj.noalias() = d_keys * annotations.transpose();
  const Matrix<T> d_annotations = params.annotation_proj.transpose() * d_keys;
  for (int dir = 0; dir < 2; ++dir) {
    auto& cache = dir == 0 ? fwd : bwd;
    auto& drops = dir == 0 ? fwd_drop : bwd_drop;
    const auto& layers = dir == 0 ? params.encoder_fwd : params.encoder_bwd;
    auto& glayers = dir == 0 ? g.encoder_fwd : g.encoder_bwd;
    Matrix<T> d_out = dir == 0 ? d_annotations.topRows(H) : d_annotations.bottomRows(H);
    for (int l = L - 1; l >= 0; --l) {
      Matrix<T> d_in = encoder_layer_backward(
          layers[l], cache[l], S, batch, dir == 1, src_mask, d_out,
          dir == 0 ? dh_final_fwd[l] : dh_final_bwd[l], dir == 0 ? dc_final_fwd[l] : dc_final_bwd[l],
          glayers[l]);
      if (l > 0) {
        d_out = drop ? Matrix<T>(d_in.cwiseProduct(drops[l])) : d_in;
      } else {
        for (Index t = 0; t < S; ++t)
          for (Index b = 0; b < batch; ++b)
            if (t < src_len[b]) g.src_embedding.col(batch_pairs[b].source[t]) += d_in.col(t * batch + b);
      }
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Inference

template <typename T>
EncodedSource<T> encode(const ModelParams<T>& params, const ModelConfig& config,
                        std::span<const TokenId> src) {
  config.validate();
  if (src.empty()) throw RangeError("cannot encode an empty source sentence");
  check_ids(src, config.src_vocab_size, "source");
  const Index n = static_cast<Index>(src.size()), H = config.hidden_dim;
  const int L = config.num_layers;
  const std::vector<unsigned char> mask(static_cast<std::size_t>(n), 1);
  std::vector<SeqCache<T>> fwd(L), bwd(L);
  for (int l = 0; l < L; ++l) {
    for (int dir = 0; dir < 2; ++dir) {
      auto& cache = dir == 0 ? fwd : bwd;
      cache[l].resize(l == 0 ? config.emb_dim : H, H, n);
      if (l == 0) {
        for (Index t = 0; t < n; ++t) cache[l].input.col(t) = params.src_embedding.col(src[t]);
      } else {
        cache[l].input = cache[l - 1].h;
      }
      encoder_layer_forward(dir == 0 ? params.encoder_fwd[l] : params.encoder_bwd[l], cache[l], n, 1,
                            dir == 1, mask);
    }
  }
  EncodedSource<T> enc;
  enc.forward_top = fwd[L - 1].h;
  enc.backward_top = bwd[L - 1].h;
  enc.annotations.resize(2 * H, n);
  enc.annotations.topRows(H) = enc.forward_top;
  enc.annotations.bottomRows(H) = enc.backward_top;
  enc.keys = params.annotation_proj * enc.annotations;
  for (int l = 0; l < L; ++l) {
    Matrix<T> fh(2 * H, 1), fc(2 * H, 1);
    fh.topRows(H) = fwd[l].h.col(n - 1);
    fh.bottomRows(H) = bwd[l].h.col(0);
    fc.topRows(H) = fwd[l].c.col(n - 1);
    fc.bottomRows(H) = bwd[l].c.col(0);
    enc.final_h.push_back(std::move(fh));
    enc.final_c.push_back(std::move(fc));
  }
  nn::require_finite(enc.annotations, "encoder annotations");
  return enc;
}

template <typename T>
DecoderState<T> initial_state(const ModelParams<T>& params, const ModelConfig& config,
                              const EncodedSource<T>& enc) {
  DecoderState<T> s;
  for (int l = 0; l < config.num_layers; ++l) {
    s.h.push_back((params.bridge_h[l] * enc.final_h[l]).array().tanh().matrix());
    s.c.push_back(params.bridge_c[l] * enc.final_c[l]);
  }
  s.feed = Matrix<T>::Zero(config.hidden_dim, 1);
  return s;
}

template <typename T>
StepOutput<T> decode_step(const ModelParams<T>& params, const ModelConfig& config,
                          const EncodedSource<T>& enc, std::span<const TokenId> prev,
                          const DecoderState<T>& state) {
  const Index k = static_cast<Index>(prev.size());
  const Index E = config.emb_dim, H = config.hidden_dim;
  if (state.width() != k) throw RangeError("decoder state width does not match token count");
  check_ids(prev, config.tgt_vocab_size, "target");
  Matrix<T> x(E + H, k);
  for (Index j = 0; j < k; ++j) x.col(j).head(E) = params.tgt_embedding.col(prev[j]);
  x.bottomRows(H) = state.feed;
  StepOutput<T> out;
  for (int l = 0; l < config.num_layers; ++l) {
    auto cell = nn::lstm_cell<T>(params.decoder[l], x, state.h[l], state.c[l]);
    out.state.h.push_back(cell.h);
    out.state.c.push_back(std::move(cell.c));
    x = std::move(cell.h);
  }
  const Matrix<T> query = params.attn_score.transpose() * x;
  out.attention = enc.keys.transpose() * query;
  for (Index j = 0; j < k; ++j) {
    Eigen::Ref<Vector<T>> col = out.attention.col(j);
    softmax_inplace<T>(col);
  }
  nn::require_finite(out.attention, "attention weights");
  Matrix<T> combined(2 * H, k);
  combined.topRows(H) = enc.keys * out.attention;
  combined.bottomRows(H) = x;
  out.state.feed = (params.attn_combine * combined).array().tanh().matrix();
  nn::require_finite(out.state.feed, "attentional combination");
  out.logits = params.output_proj * out.state.feed;
  nn::require_finite(out.logits, "output projection");
  return out;
}

namespace {

template <typename T>
Vector<double> log_softmax(const Eigen::Ref<const Matrix<T>>& logits, Index col) {
  Vector<double> z = logits.col(col).template cast<double>();
  const double mx = z.maxCoeff();
  const double lse = mx + std::log((z.array() - mx).exp().sum());
  return z.array() - lse;
}

bool emittable(Index id) { return id != kPad && id != kBos; }

double normalized(double logprob, std::size_t length, double alpha) {
  return length == 0 ? logprob : logprob / std::pow(static_cast<double>(length), alpha);
}

}  // namespace

template <typename T>
IdSequence greedy_decode(const ModelParams<T>& params, const ModelConfig& config,
                         std::span<const TokenId> src) {
  const auto enc = encode(params, config, src);
  auto state = initial_state(params, config, enc);
  IdSequence out;
  TokenId prev = kBos;
  for (int step = 0; step < config.max_decode_len; ++step) {
    auto r = decode_step(params, config, enc, std::span<const TokenId>(&prev, 1), state);
    Index best = -1;
    for (Index v = 0; v < r.logits.rows(); ++v) {
      if (emittable(v) && (best < 0 || r.logits(v, 0) > r.logits(best, 0))) best = v;
    }
    if (best == kEos) break;
    out.push_back(static_cast<TokenId>(best));
    prev = static_cast<TokenId>(best);
    state = std::move(r.state);
  }
  return out;
}

template <typename T>
double hypothesis_score(const ModelParams<T>& params, const ModelConfig& config,
                        std::span<const TokenId> src, std::span<const TokenId> output,
                        bool finished, double length_norm_alpha) {
  const auto enc = encode(params, config, src);
  auto state = initial_state(params, config, enc);
  IdSequence seq(output.begin(), output.end());
  if (finished) seq.push_back(kEos);
  double logprob = 0.0;
  TokenId prev = kBos;
  for (auto y : seq) {
    auto r = decode_step(params, config, enc, std::span<const TokenId>(&prev, 1), state);
    logprob += log_softmax<T>(r.logits, 0)(y);
    prev = y;
    state = std::move(r.state);
  }
  return normalized(logprob, seq.size(), length_norm_alpha);
}

template <typename T>
IdSequence beam_decode(const ModelParams<T>& params, const ModelConfig& config,
                       std::span<const TokenId> src, int beam_size, double length_norm_alpha) {
  if (beam_size < 1) throw RangeError("beam size must be at least 1");
  const auto enc = encode(params, config, src);
  struct Hyp {
    IdSequence tokens;
    double logprob;
  };
  struct Done {
    IdSequence tokens;
    double score;
  };
  std::vector<Hyp> alive{{{}, 0.0}};
  std::vector<TokenId> prev{kBos};
  DecoderState<T> state = initial_state(params, config, enc);
  std::vector<Done> finished;
  const auto width = static_cast<std::size_t>(beam_size);

  for (int step = 0; step < config.max_decode_len && !alive.empty(); ++step) {
    auto r = decode_step(params, config, enc, std::span<const TokenId>(prev), state);
    struct Cand {
      double logprob;
      int hyp;
      TokenId token;
    };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < alive.size(); ++i) {
      const auto lp = log_softmax<T>(r.logits, static_cast<Index>(i));
      for (Index v = 0; v < lp.size(); ++v) {
        if (emittable(v)) {
          cands.push_back({alive[i].logprob + lp(v), static_cast<int>(i), static_cast<TokenId>(v)});
        }
      }
    }
    const auto keep = std::min(width, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Cand& a, const Cand& b) {
                        if (a.logprob != b.logprob) return a.logprob > b.logprob;
                        if (a.hyp != b.hyp) return a.hyp < b.hyp;
                        return a.token < b.token;
                      });
    std::vector<Hyp> next;
    std::vector<int> parents;
    prev.clear();
    for (std::size_t j = 0; j < keep; ++j) {
      const auto& c = cands[j];
      IdSequence tokens = alive[c.hyp].tokens;
      if (c.token == kEos) {
        finished.push_back({tokens, normalized(c.logprob, tokens.size() + 1, length_norm_alpha)});
      } else {
        tokens.push_back(c.token);
        next.push_back({std::move(tokens), c.logprob});
        parents.push_back(c.hyp);
        prev.push_back(c.token);
      }
    }
    alive = std::move(next);
    if (!alive.empty()) state = r.state.select(parents);
    if (finished.size() >= width) break;
  }
  if (finished.size() < width) {
    for (auto& h : alive) finished.push_back({h.tokens, normalized(h.logprob, h.tokens.size(), length_norm_alpha)});
  }
  const Done* best = nullptr;
  for (const auto& d : finished) {
    if (!best || d.score > best->score) best = &d;
  }
  auto greedy = greedy_decode(params, config, src);
  const bool greedy_finished = static_cast<int>(greedy.size()) < config.max_decode_len;
  const double greedy_score =
      hypothesis_score(params, config, src, greedy, greedy_finished, length_norm_alpha);
  if (!best || greedy_score > best->score) return greedy;
  return best->tokens;
}

#define DESKMT_INSTANTIATE(T)                                                                    \
  template struct ModelParams<T>;                                                                \
  template struct DecoderState<T>;                                                               \
  template ModelParams<float> ModelParams<T>::cast<float>() const;                               \
  template ModelParams<double> ModelParams<T>::cast<double>() const;                             \
  template EncodedSource<T> encode(const ModelParams<T>&, const ModelConfig&,                    \
                                   std::span<const TokenId>);                                    \
  template DecoderState<T> initial_state(const ModelParams<T>&, const ModelConfig&,              \
                                         const EncodedSource<T>&);                               \
  template StepOutput<T> decode_step(const ModelParams<T>&, const ModelConfig&,                  \
                                     const EncodedSource<T>&, std::span<const TokenId>,          \
                                     const DecoderState<T>&);                                    \
  template T training_loss(const ModelParams<T>&, const ModelConfig&,                            \
                           std::span<const EncodedPair>, nn::Mode, Rng*, ModelParams<T>*);       \
  template IdSequence greedy_decode(const ModelParams<T>&, const ModelConfig&,                   \
                                    std::span<const TokenId>);                                   \
  template IdSequence beam_decode(const ModelParams<T>&, const ModelConfig&,                     \
                                  std::span<const TokenId>, int, double);                        \
  template double hypothesis_score(const ModelParams<T>&, const ModelConfig&,                    \
                                   std::span<const TokenId>, std::span<const TokenId>, bool,     \
                                   double);

DESKMT_INSTANTIATE(float)
DESKMT_INSTANTIATE(double)

}  // namespace deskmt
