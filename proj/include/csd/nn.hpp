#pragma once

// Trainable-parameter containers, initializers, recurrent/linear building
// blocks on the autodiff tape, and the Adam optimizer.

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "csd/autodiff.hpp"
#include "csd/common.hpp"

namespace csd {

struct ParamTensor {
  std::string name;
  Mat value;
  Mat grad;

  void zero_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = Mat::Zero(value.rows(), value.cols());
    else
      grad.setZero();
  }
};

// One named parameter group (the unit Table-style training freezes/updates).
struct ParamGroup {
  std::string name;
  std::vector<ParamTensor> tensors;

  ParamTensor& tensor(const std::string& tname) {
    for (auto& t : tensors)
      if (t.name == tname) return t;
    throw validation_error("ParamGroup " + name + ": no tensor " + tname);
  }
  const ParamTensor& tensor(const std::string& tname) const {
    for (const auto& t : tensors)
      if (t.name == tname) return t;
    throw validation_error("ParamGroup " + name + ": no tensor " + tname);
  }

  void zero_grads() {
    for (auto& t : tensors) t.zero_grad();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += static_cast<std::size_t>(t.value.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& t : tensors)
      if (!t.value.allFinite()) return false;
    return true;
  }

  // Bytes of all tensor values in declaration order; used by bitwise
  // frozen-group assertions.
  std::vector<unsigned char> value_bytes() const {
    std::vector<unsigned char> out;
    for (const auto& t : tensors) {
      const auto* p = reinterpret_cast<const unsigned char*>(t.value.data());
      out.insert(out.end(), p,
                 p + static_cast<std::size_t>(t.value.size()) * sizeof(double));
    }
    return out;
  }
};

struct ModelParams {
  std::map<std::string, ParamGroup> groups;

  ParamGroup& group(const std::string& name) {
    auto it = groups.find(name);
    if (it == groups.end())
      throw validation_error("ModelParams: no group " + name);
    return it->second;
  }
  const ParamGroup& group(const std::string& name) const {
    auto it = groups.find(name);
    if (it == groups.end())
      throw validation_error("ModelParams: no group " + name);
    return it->second;
  }
  bool has_group(const std::string& name) const {
    return groups.count(name) != 0;
  }
};

// ---- initializers ----

inline Mat init_uniform_fan_in(long rows, long cols, long fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(std::max<long>(fan_in, 1)));
  Mat m(rows, cols);
  for (long j = 0; j < cols; ++j)
    for (long i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

// Orthogonal init via Householder QR of a Gaussian matrix, sign-fixed by the
// diagonal of R so the result is deterministic.
inline Mat init_orthogonal(long rows, long cols, Rng& rng) {
  long n = std::max(rows, cols);
  Mat g(n, n);
  for (long j = 0; j < n; ++j)
    for (long i = 0; i < n; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (long j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q.topLeftCorner(rows, cols);
}

// ---- tape binding ----

// Binds ParamTensors onto a tape as leaves and scatters gradients back after
// the reverse sweep. Binding with trainable=false makes the parameter a
// constant for this pass, which is how "Fix X, train Y" losses cut gradient
// flow into frozen groups.
class Binder {
 public:
  explicit Binder(Tape& tape) : tape_(&tape) {}

  Var bind(ParamTensor& t, bool trainable) {
    Var v = tape_->leaf(t.value, trainable);
    if (trainable && tape_->recording()) bound_.push_back({&t, v});
    return v;
  }

  // Bind every tensor of a group; returns vars in tensor order.
  std::vector<Var> bind_group(ParamGroup& g, bool trainable) {
    std::vector<Var> vars;
    vars.reserve(g.tensors.size());
    for (auto& t : g.tensors) vars.push_back(bind(t, trainable));
    return vars;
  }

  // Accumulate tape gradients into ParamTensor::grad.
  void scatter_grads() {
    for (auto& [tensor, var] : bound_) {
      if (tape_->has_grad(var)) tensor->grad += tape_->grad(var);
    }
  }

 private:
  Tape* tape_;
  std::vector<std::pair<ParamTensor*, Var>> bound_;
};

// ---- layers ----

struct LinearVars {
  Var w;
  Var b;
};

inline ParamGroup& add_linear(ParamGroup& g, const std::string& prefix,
                              long out_dim, long in_dim, Rng& rng,
                              bool zero_weights = false) {
  ParamTensor w{prefix + ".w",
                zero_weights ? Mat::Zero(out_dim, in_dim)
                             : init_uniform_fan_in(out_dim, in_dim, in_dim, rng),
                {}};
  ParamTensor b{prefix + ".b", Mat::Zero(out_dim, 1), {}};
  g.tensors.push_back(std::move(w));
  g.tensors.push_back(std::move(b));
  return g;
}

inline LinearVars bind_linear(Binder& binder, ParamGroup& g,
                              const std::string& prefix, bool trainable) {
  return LinearVars{binder.bind(g.tensor(prefix + ".w"), trainable),
                    binder.bind(g.tensor(prefix + ".b"), trainable)};
}

inline Var linear(const LinearVars& l, Var x) {
  return ad::add_colvec(ad::matmul(l.w, x), l.b);
}

// LSTM with gate order [i, f, g, o] stacked along rows of the 4h x * weight
// matrices. Input weights use fan-in init, recurrent weights orthogonal init,
// biases zero.
struct LstmVars {
  Var wx;  // 4h x in
  Var wh;  // 4h x h
  Var b;   // 4h x 1
  long hidden = 0;
};

inline void add_lstm(ParamGroup& g, const std::string& prefix, long hidden,
                     long in_dim, Rng& rng) {
  g.tensors.push_back(
      {prefix + ".wx", init_uniform_fan_in(4 * hidden, in_dim, in_dim, rng), {}});
  g.tensors.push_back(
      {prefix + ".wh", init_orthogonal(4 * hidden, hidden, rng), {}});
  g.tensors.push_back({prefix + ".b", Mat::Zero(4 * hidden, 1), {}});
}

inline LstmVars bind_lstm(Binder& binder, ParamGroup& g,
                          const std::string& prefix, bool trainable) {
  LstmVars v;
  v.wx = binder.bind(g.tensor(prefix + ".wx"), trainable);
  v.wh = binder.bind(g.tensor(prefix + ".wh"), trainable);
  v.b = binder.bind(g.tensor(prefix + ".b"), trainable);
  v.hidden = v.wh.tape->value(v.wh).cols();
  return v;
}

struct LstmState {
  Var h;
  Var c;
};

inline LstmState lstm_init_state(Tape& tape, long hidden, long batch) {
  return LstmState{tape.constant(Mat::Zero(hidden, batch)),
                   tape.constant(Mat::Zero(hidden, batch))};
}

inline LstmState lstm_step(const LstmVars& p, Var x, const LstmState& s) {
  using namespace ad;
  long h = p.hidden;
  Var pre = add_colvec(add(matmul(p.wx, x), matmul(p.wh, s.h)), p.b);
  Var gi = sigmoid(slice_rows(pre, 0, h));
  Var gf = sigmoid(slice_rows(pre, h, h));
  Var gg = tanh_(slice_rows(pre, 2 * h, h));
  Var go = sigmoid(slice_rows(pre, 3 * h, h));
  Var c = add(mul(gf, s.c), mul(gi, gg));
  Var hh = mul(go, tanh_(c));
  return LstmState{hh, c};
}

// Runs an LSTM over a sequence of (in x batch) inputs; returns all hidden
// states plus the final state.
inline std::pair<std::vector<Var>, LstmState> lstm_run(
    const LstmVars& p, const std::vector<Var>& inputs, long batch) {
  Tape& tape = *p.wx.tape;
  LstmState s = lstm_init_state(tape, p.hidden, batch);
  std::vector<Var> hs;
  hs.reserve(inputs.size());
  for (const Var& x : inputs) {
    s = lstm_step(p, x, s);
    hs.push_back(s.h);
  }
  return {hs, s};
}

// Layer norm over the rows of each column, with learnable gain/bias.
// Composed from primitive ops so the gradient comes from the tape.
inline Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5) {
  using namespace ad;
  Tape& t = *x.tape;
  long d = t.value(x).rows();
  long c = t.value(x).cols();
  Var ones_d1 = t.constant(Mat::Ones(d, 1));
  Var ones_1c = t.constant(Mat::Ones(1, c));
  Var mu = mean_rows(x);                                   // 1 x c
  Var centered = sub(x, matmul(ones_d1, mu));              // d x c
  Var var = mean_rows(square(centered));                   // 1 x c
  Var denom = sqrt_(add_scalar(var, eps));                 // 1 x c
  Var inv = div(ones_1c, denom);                           // 1 x c
  Var normalized = mul(centered, matmul(ones_d1, inv));    // d x c
  Var scaled = mul(normalized, matmul(gamma, ones_1c));
  return add_colvec(scaled, beta);
}

// ---- optimizer ----

// Adam with bias correction. One instance per (sub-step, group set) so moment
// estimates never mix gradients from different objectives.
class Adam {
 public:
  Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  double learning_rate() const { return lr_; }

  void step(std::vector<ParamTensor*> tensors) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    if (state_.size() < tensors.size()) state_.resize(tensors.size());
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      ParamTensor& p = *tensors[i];
      Moments& m = state_[i];
      if (m.m.size() == 0) {
        m.m = Mat::Zero(p.value.rows(), p.value.cols());
        m.v = Mat::Zero(p.value.rows(), p.value.cols());
      }
      m.m = beta1_ * m.m + (1.0 - beta1_) * p.grad;
      m.v = beta2_ * m.v.array().matrix() +
            (1.0 - beta2_) * p.grad.array().square().matrix();
      Mat mhat = m.m / bc1;
      Mat vhat = m.v / bc2;
      p.value -=
          (lr_ * mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
    }
  }

 private:
  struct Moments {
    Mat m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Moments> state_;
};

inline std::vector<ParamTensor*> tensors_of(ParamGroup& g) {
  std::vector<ParamTensor*> out;
  out.reserve(g.tensors.size());
  for (auto& t : g.tensors) out.push_back(&t);
  return out;
}

inline std::vector<ParamTensor*> tensors_of(ModelParams& params,
                                            const std::vector<std::string>& names) {
  std::vector<ParamTensor*> out;
  for (const auto& n : names)
    for (auto& t : params.group(n).tensors) out.push_back(&t);
  return out;
}

inline double grad_norm(const std::vector<ParamTensor*>& tensors) {
  double acc = 0.0;
  for (const auto* t : tensors) acc += t->grad.squaredNorm();
  return std::sqrt(acc);
}

}  // namespace csd
