#pragma once

#include <span>
#include <string>
#include <vector>

#include "deskmt/nnet.hpp"
#include "deskmt/vocab.hpp"

namespace deskmt {

/// Network dimensions. Encoder and decoder both use `num_layers` LSTM layers;
/// the encoder has one forward and one backward stack of that depth.
struct ModelConfig {
  int emb_dim = 32;
  int hidden_dim = 64;
  int num_layers = 2;
  int src_vocab_size = 0;
  int tgt_vocab_size = 0;
  double dropout_p = 0.3;
  int max_decode_len = 64;

  /// emb 32, hidden 64, 2 layers, dropout 0.3.
  static ModelConfig desk(int src_vocab, int tgt_vocab);
  /// emb 500, hidden 800, 4 layers, dropout 0.3.
  static ModelConfig large(int src_vocab, int tgt_vocab);

  /// Throws RangeError if any dimension is non-positive or dropout is outside [0, 1).
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// A training example after BPE and vocabulary lookup. The target carries no
/// BOS/EOS; the model adds them.
struct EncodedPair {
  IdSequence source;
  IdSequence target;
};

/// All trainable tensors. Embeddings store one column per token.
template <typename T>
struct ModelParams {
  using Mat = nn::Matrix<T>;

  Mat src_embedding;   // emb x Vs
  Mat tgt_embedding;   // emb x Vt
  std::vector<nn::LstmParams<T>> encoder_fwd;
  std::vector<nn::LstmParams<T>> encoder_bwd;
  std::vector<nn::LstmParams<T>> decoder;
  Mat annotation_proj;       // H x 2H, bidirectional annotation -> attention key
  std::vector<Mat> bridge_h; // per layer H x 2H, encoder final h -> decoder initial h
  std::vector<Mat> bridge_c; // per layer H x 2H
  Mat attn_score;            // H x H, general bilinear score
  Mat attn_combine;          // H x 2H, [context; h] -> attentional vector
  Mat output_proj;           // Vt x H

  static ModelParams zeros(const ModelConfig& config);
  /// Uniform in [-0.1, 0.1], forget-gate biases 1.
  static ModelParams init(const ModelConfig& config, Rng& rng);

  /// Calls f(name, matrix) on every tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  std::size_t parameter_count() const;
  bool all_finite() const;

  template <typename U>
  ModelParams<U> cast() const;

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    f("src_embedding", self.src_embedding);
    f("tgt_embedding", self.tgt_embedding);
    auto lstm = [&](const std::string& prefix, auto& layers) {
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto p = prefix + "." + std::to_string(l);
        f(p + ".w_input", layers[l].w_input);
        f(p + ".w_recurrent", layers[l].w_recurrent);
        f(p + ".bias", layers[l].bias);
      }
    };
    lstm("encoder_fwd", self.encoder_fwd);
    lstm("encoder_bwd", self.encoder_bwd);
    lstm("decoder", self.decoder);
    f("annotation_proj", self.annotation_proj);
    for (std::size_t l = 0; l < self.bridge_h.size(); ++l) {
      f("bridge_h." + std::to_string(l), self.bridge_h[l]);
      f("bridge_c." + std::to_string(l), self.bridge_c[l]);
    }
    f("attn_score", self.attn_score);
    f("attn_combine", self.attn_combine);
    f("output_proj", self.output_proj);
  }
};

/// Encoder output for one source sentence.
template <typename T>
struct EncodedSource {
  nn::Matrix<T> forward_top;   // H x n, top forward layer per position
  nn::Matrix<T> backward_top;  // H x n, top backward layer per position
  nn::Matrix<T> annotations;   // 2H x n, [forward; backward]
  nn::Matrix<T> keys;          // H x n, annotation_proj * annotations
  std::vector<nn::Matrix<T>> final_h;  // per layer 2H x 1, [forward end; backward end]
  std::vector<nn::Matrix<T>> final_c;

  int length() const { return static_cast<int>(annotations.cols()); }
};

/// Decoder recurrent state for k hypotheses (one column each).
template <typename T>
struct DecoderState {
  std::vector<nn::Matrix<T>> h;
  std::vector<nn::Matrix<T>> c;
  nn::Matrix<T> feed;  // previous attentional vector

  int width() const { return static_cast<int>(feed.cols()); }
  /// Columns picked by index, in order.
  DecoderState select(std::span<const int> columns) const;
};

template <typename T>
struct StepOutput {
  nn::Matrix<T> logits;     // Vt x k
  nn::Matrix<T> attention;  // n x k
  DecoderState<T> state;
};

template <typename T>
EncodedSource<T> encode(const ModelParams<T>& params, const ModelConfig& config,
                        std::span<const TokenId> src);

template <typename T>
DecoderState<T> initial_state(const ModelParams<T>& params, const ModelConfig& config,
                              const EncodedSource<T>& enc);

/// One decoder step for `prev.size()` hypotheses sharing `enc`.
template <typename T>
StepOutput<T> decode_step(const ModelParams<T>& params, const ModelConfig& config,
                          const EncodedSource<T>& enc, std::span<const TokenId> prev,
                          const DecoderState<T>& state);

/// Mean over the batch of each pair's mean per-token negative log-likelihood
/// (target wrapped in BOS ... EOS, teacher forcing). When `grads` is non-null
/// it receives the gradient of the returned value. `rng` is needed in train
/// mode when dropout is active.
template <typename T>
T training_loss(const ModelParams<T>& params, const ModelConfig& config,
                std::span<const EncodedPair> batch, nn::Mode mode, Rng* rng,
                ModelParams<T>* grads);

/// Argmax decoding (ties to the lowest id, PAD and BOS never emitted); stops
/// at EOS or max_decode_len. EOS is not included in the result.
template <typename T>
IdSequence greedy_decode(const ModelParams<T>& params, const ModelConfig& config,
                         std::span<const TokenId> src);

/// Beam search over summed log-probabilities; finished hypotheses are ranked
/// by logprob / length^alpha where length counts EOS. The greedy hypothesis
/// always competes, so the result never scores below it.
template <typename T>
IdSequence beam_decode(const ModelParams<T>& params, const ModelConfig& config,
                       std::span<const TokenId> src, int beam_size, double length_norm_alpha);

/// Score used by beam_decode for a complete output. `finished` says whether
/// the hypothesis ended with EOS (which is then counted in the log-probability
/// and the length).
template <typename T>
double hypothesis_score(const ModelParams<T>& params, const ModelConfig& config,
                        std::span<const TokenId> src, std::span<const TokenId> output,
                        bool finished, double length_norm_alpha);

}  // namespace deskmt
