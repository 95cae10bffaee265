#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "deskmt/errors.hpp"
#include "deskmt/rng.hpp"

namespace deskmt::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using MatRef = Eigen::Ref<Matrix<T>>;
template <typename T>
using ConstMatRef = const Eigen::Ref<const Matrix<T>>&;

enum class Mode { train, eval };

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, std::string_view stage) {
  if (!m.allFinite()) throw NumericError("non-finite values in " + std::string(stage));
}

/// Uniform fill in [-range, range].
template <typename T>
void fill_uniform(Matrix<T>& m, double range, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.uniform(-range, range));
}

// ---------------------------------------------------------------------------
// LSTM cell. Gate rows are stacked as [input; forget; cell; output].

template <typename T>
struct LstmParams {
  Matrix<T> w_input;      // 4H x in
  Matrix<T> w_recurrent;  // 4H x H
  Matrix<T> bias;         // 4H x 1

  int hidden() const { return static_cast<int>(w_recurrent.cols()); }
  int input() const { return static_cast<int>(w_input.cols()); }

  static LstmParams zeros(int input, int hidden) {
    return {Matrix<T>::Zero(4 * hidden, input), Matrix<T>::Zero(4 * hidden, hidden),
            Matrix<T>::Zero(4 * hidden, 1)};
  }
  /// Uniform weights and biases, forget-gate bias set to 1.
  static LstmParams init(int input, int hidden, double range, Rng& rng) {
    auto p = zeros(input, hidden);
    fill_uniform(p.w_input, range, rng);
    fill_uniform(p.w_recurrent, range, rng);
    fill_uniform(p.bias, range, rng);
    p.bias.middleRows(hidden, hidden).setOnes();
    return p;
  }
};

/// Turns gate pre-activations into activations in place and computes the new
/// cell and hidden states. All arguments have one column per batch entry.
template <typename T>
void lstm_pointwise(MatRef<T> gates, ConstMatRef<T> c_prev, MatRef<T> c_new, MatRef<T> tanh_c,
                    MatRef<T> h_new) {
  const Eigen::Index h = c_prev.rows();
  auto sig = [](auto x) { return (T(1) + (-x).exp()).inverse(); };
  gates.topRows(2 * h).array() = sig(gates.topRows(2 * h).array());
  gates.middleRows(2 * h, h).array() = gates.middleRows(2 * h, h).array().tanh();
  gates.bottomRows(h).array() = sig(gates.bottomRows(h).array());
  c_new.array() = gates.middleRows(h, h).array() * c_prev.array() +
                  gates.topRows(h).array() * gates.middleRows(2 * h, h).array();
  tanh_c.array() = c_new.array().tanh();
  h_new.array() = gates.bottomRows(h).array() * tanh_c.array();
}

/// Backward of lstm_pointwise: from dh, dc on the new state to gate
/// pre-activation gradients and the gradient on the previous cell state.
template <typename T>
void lstm_pointwise_backward(ConstMatRef<T> gates, ConstMatRef<T> c_prev, ConstMatRef<T> tanh_c,
                             ConstMatRef<T> dh, ConstMatRef<T> dc, MatRef<T> dpre,
                             MatRef<T> dc_prev) {
  const Eigen::Index h = c_prev.rows();
  const auto i = gates.topRows(h).array();
  const auto f = gates.middleRows(h, h).array();
  const auto g = gates.middleRows(2 * h, h).array();
  const auto o = gates.bottomRows(h).array();
  const auto tc = tanh_c.array();
  const auto dct = (dc.array() + dh.array() * o * (T(1) - tc * tc)).eval();
  dpre.topRows(h).array() = dct * g * i * (T(1) - i);
  dpre.middleRows(h, h).array() = dct * c_prev.array() * f * (T(1) - f);
  dpre.middleRows(2 * h, h).array() = dct * i * (T(1) - g * g);
  dpre.bottomRows(h).array() = dh.array() * tc * o * (T(1) - o);
  dc_prev.array() = dct * f;
}

template <typename T>
struct LstmCellOutput {
  Matrix<T> h;
  Matrix<T> c;
  Matrix<T> gates;   // activated
  Matrix<T> tanh_c;
};

/// One LSTM step; x, h_prev and c_prev hold one column per batch entry.
/// Throws NumericError naming the gate when an activation is non-finite.
template <typename T>
LstmCellOutput<T> lstm_cell(const LstmParams<T>& p, ConstMatRef<T> x, ConstMatRef<T> h_prev,
                            ConstMatRef<T> c_prev) {
  const int h = p.hidden();
  LstmCellOutput<T> out;
  out.gates = p.w_input * x + p.w_recurrent * h_prev;
  out.gates.colwise() += p.bias.col(0);
  out.c.resize(h, x.cols());
  out.tanh_c.resize(h, x.cols());
  out.h.resize(h, x.cols());
  lstm_pointwise<T>(out.gates, c_prev, out.c, out.tanh_c, out.h);
  static constexpr const char* kGate[] = {"input gate", "forget gate", "cell gate", "output gate"};
  for (int k = 0; k < 4; ++k) {
    if (!out.gates.middleRows(k * h, h).allFinite()) {
      throw NumericError(std::string("non-finite activation in LSTM ") + kGate[k]);
    }
  }
  require_finite(out.c, "LSTM cell state");
  return out;
}

template <typename T>
struct LstmCellGrads {
  Matrix<T> dx;
  Matrix<T> dh_prev;
  Matrix<T> dc_prev;
};

/// Backward of lstm_cell; parameter gradients are accumulated into `grads`.
template <typename T>
LstmCellGrads<T> lstm_cell_backward(const LstmParams<T>& p, ConstMatRef<T> x,
                                    ConstMatRef<T> h_prev, ConstMatRef<T> c_prev,
                                    const LstmCellOutput<T>& fwd, ConstMatRef<T> dh,
                                    ConstMatRef<T> dc, LstmParams<T>& grads) {
  Matrix<T> dpre(fwd.gates.rows(), fwd.gates.cols());
  LstmCellGrads<T> out;
  out.dc_prev.resize(c_prev.rows(), c_prev.cols());
  lstm_pointwise_backward<T>(fwd.gates, c_prev, fwd.tanh_c, dh, dc, dpre, out.dc_prev);
  grads.w_input.noalias() += dpre * x.transpose();
  grads.w_recurrent.noalias() += dpre * h_prev.transpose();
  grads.bias.col(0) += dpre.rowwise().sum();
  out.dx.noalias() = p.w_input.transpose() * dpre;
  out.dh_prev.noalias() = p.w_recurrent.transpose() * dpre;
  return out;
}

// ---------------------------------------------------------------------------
// Softmax and cross-entropy.

/// Max-subtracted softmax of a column vector.
template <typename T>
Vector<T> softmax(const Vector<T>& logits) {
  Vector<T> p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

template <typename T>
struct XentResult {
  T loss;
  Vector<T> grad;
};

/// loss = -log softmax(logits)[target]; grad = softmax - one_hot(target).
template <typename T>
XentResult<T> softmax_xent(const Vector<T>& logits, Eigen::Index target) {
  if (target < 0 || target >= logits.size()) {
    throw RangeError("target " + std::to_string(target) + " outside " +
                     std::to_string(logits.size()) + " classes");
  }
  require_finite(logits, "softmax logits");
  const T mx = logits.maxCoeff();
  Vector<T> e = (logits.array() - mx).exp();
  const T z = e.sum();
  XentResult<T> r{std::log(z) + mx - logits(target), e / z};
  r.grad(target) -= T(1);
  return r;
}

// ---------------------------------------------------------------------------
// Inverted dropout.

/// Mask with entries 0 or 1/(1-p). Throws RangeError unless 0 <= p < 1.
template <typename T>
Matrix<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw RangeError("dropout probability must lie in [0, 1)");
  Matrix<T> m(rows, cols);
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < p ? T(0) : keep;
  return m;
}

/// Train mode zeroes each element with probability p and rescales the rest;
/// eval mode returns x unchanged.
template <typename T>
Matrix<T> dropout(const Matrix<T>& x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw RangeError("dropout probability must lie in [0, 1)");
  if (mode == Mode::eval || p == 0.0) return x;
  return x.cwiseProduct(dropout_mask<T>(x.rows(), x.cols(), p, rng));
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking (64-bit only).

struct ParamGroup {
  std::string name;
  Matrix<double>* value;
  const Matrix<double>* analytic;
};

struct GradCheckEntry {
  std::string group;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> groups;
  double tolerance = 0.0;

  bool passed() const;
  double worst() const;
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Checks at most this many evenly spaced entries per group; 0 checks all.
  std::size_t max_entries = 0;
};

/// Central differences of `loss` against the analytic gradients of every
/// group. Parameter values are restored before returning.
GradCheckReport grad_check(const std::function<double()>& loss, std::span<const ParamGroup> groups,
                           const GradCheckOptions& options = {});

}  // namespace deskmt::nn
