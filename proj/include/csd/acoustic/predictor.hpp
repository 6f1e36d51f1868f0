#pragma once

// Style predictor: maps a text embedding sequence to a style embedding
// sequence. A stack of blocks, each a single-head self-attention layer and a
// two-layer 1D convolution, with residual connections and layer norm.
// Targets are standardized per dimension with training-set statistics kept in
// a side group and stored with the checkpoint.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "csd/acoustic/model.hpp"
#include "csd/autodiff.hpp"
#include "csd/common.hpp"
#include "csd/nn.hpp"

namespace csd {

struct PredictorConfig {
  long d_t = 64;
  long d_s = 64;
  long blocks = 3;
  long model_dim = 64;
  long ff_dim = 128;
  long conv_kernel = 3;  // odd
  double lr = 1e-3;
  long max_epochs = 60;
  std::uint64_t seed = 0;

  void validate() const {
    if (d_t <= 0 || d_s <= 0 || blocks <= 0 || model_dim <= 0 || ff_dim <= 0)
      throw validation_error("PredictorConfig: sizes must be positive");
    if (conv_kernel < 1 || conv_kernel % 2 == 0)
      throw validation_error("PredictorConfig: conv_kernel must be odd");
    if (lr <= 0 || max_epochs <= 0)
      throw validation_error("PredictorConfig: bad training parameters");
  }
};

inline ParamGroup make_predictor_group(const PredictorConfig& cfg, Rng rng) {
  cfg.validate();
  ParamGroup g{acoustic_groups::style_predictor, {}};
  add_linear(g, "in", cfg.model_dim, cfg.d_t, rng);
  for (long b = 0; b < cfg.blocks; ++b) {
    std::string p = "blk" + std::to_string(b);
    add_linear(g, p + ".q", cfg.model_dim, cfg.model_dim, rng);
    add_linear(g, p + ".k", cfg.model_dim, cfg.model_dim, rng);
    add_linear(g, p + ".v", cfg.model_dim, cfg.model_dim, rng);
    g.tensors.push_back({p + ".ln1.gamma", Mat::Ones(cfg.model_dim, 1), {}});
    g.tensors.push_back({p + ".ln1.beta", Mat::Zero(cfg.model_dim, 1), {}});
    // conv weights: (out_dim x in_dim) per kernel tap
    for (long tap = 0; tap < cfg.conv_kernel; ++tap) {
      g.tensors.push_back(
          {p + ".conv1.w" + std::to_string(tap),
           init_uniform_fan_in(cfg.ff_dim, cfg.model_dim,
                               cfg.model_dim * cfg.conv_kernel, rng),
           {}});
      g.tensors.push_back(
          {p + ".conv2.w" + std::to_string(tap),
           init_uniform_fan_in(cfg.model_dim, cfg.ff_dim,
                               cfg.ff_dim * cfg.conv_kernel, rng),
           {}});
    }
    g.tensors.push_back({p + ".conv1.b", Mat::Zero(cfg.ff_dim, 1), {}});
    g.tensors.push_back({p + ".conv2.b", Mat::Zero(cfg.model_dim, 1), {}});
    g.tensors.push_back({p + ".ln2.gamma", Mat::Ones(cfg.model_dim, 1), {}});
    g.tensors.push_back({p + ".ln2.beta", Mat::Zero(cfg.model_dim, 1), {}});
  }
  add_linear(g, "out", cfg.d_s, cfg.model_dim, rng);
  return g;
}

inline ParamGroup make_predictor_stats_group(long d_s) {
  ParamGroup g{acoustic_groups::predictor_stats, {}};
  g.tensors.push_back({"mean", Mat::Zero(d_s, 1), {}});
  g.tensors.push_back({"sd", Mat::Ones(d_s, 1), {}});
  return g;
}

namespace predictordetail {

// 1D convolution over the time axis (columns) built from shifted matmuls.
inline Var conv1d(Binder& binder, ParamGroup& g, const std::string& prefix,
                  long kernel, Var x, bool trainable) {
  long half = kernel / 2;
  Var acc{};
  bool first = true;
  for (long tap = 0; tap < kernel; ++tap) {
    Var w = binder.bind(g.tensor(prefix + ".w" + std::to_string(tap)), trainable);
    Var shifted = ad::shift_cols(x, tap - half);
    Var term = ad::matmul(w, shifted);
    acc = first ? term : ad::add(acc, term);
    first = false;
  }
  Var b = binder.bind(g.tensor(prefix + ".b"), trainable);
  return ad::add_colvec(acc, b);
}

}  // namespace predictordetail

// Full predictor forward on the tape: input (d_t x m) -> output (d_s x m).
inline Var predictor_forward(Tape& tape, Binder& binder, ParamGroup& g,
                             const PredictorConfig& cfg, Var text_seq,
                             bool trainable) {
  using namespace ad;
  Var h = linear(bind_linear(binder, g, "in", trainable), text_seq);
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.model_dim));
  for (long blk = 0; blk < cfg.blocks; ++blk) {
    std::string p = "blk" + std::to_string(blk);
    // self-attention over positions
    Var q = linear(bind_linear(binder, g, p + ".q", trainable), h);
    Var k = linear(bind_linear(binder, g, p + ".k", trainable), h);
    Var v = linear(bind_linear(binder, g, p + ".v", trainable), h);
    Var scores = scale(matmul(transpose(k), q), inv_sqrt_d);  // m x m
    Var attn = softmax_cols(scores);   // column j attends over positions
    Var ctx = matmul(v, attn);         // model_dim x m
    Var g1 = binder.bind(g.tensor(p + ".ln1.gamma"), trainable);
    Var b1 = binder.bind(g.tensor(p + ".ln1.beta"), trainable);
    h = layer_norm(add(h, ctx), g1, b1);
    // position-wise convolutional feed-forward
    Var ff = predictordetail::conv1d(binder, g, p + ".conv1", cfg.conv_kernel,
                                     h, trainable);
    ff = relu(ff);
    ff = predictordetail::conv1d(binder, g, p + ".conv2", cfg.conv_kernel, ff,
                                 trainable);
    Var g2 = binder.bind(g.tensor(p + ".ln2.gamma"), trainable);
    Var b2 = binder.bind(g.tensor(p + ".ln2.beta"), trainable);
    h = layer_norm(add(h, ff), g2, b2);
  }
  return linear(bind_linear(binder, g, "out", trainable), h);
}

// Value-mode prediction of the standardized style sequence.
inline StyleEmbeddingSequence predictor_apply(ParamGroup& sp,
                                              const ParamGroup& stats,
                                              const PredictorConfig& cfg,
                                              const TextSequence& text) {
  if (text.empty()) throw validation_error("predictor_apply: empty input");
  Tape tape(false);
  Binder binder(tape);
  Mat x(cfg.d_t, static_cast<long>(text.size()));
  for (std::size_t k = 0; k < text.size(); ++k)
    x.col(static_cast<long>(k)) = text[k];
  Var out = predictor_forward(tape, binder, sp, cfg, tape.constant(x), false);
  const Mat& y = tape.value(out);
  const Mat& mean = stats.tensor("mean").value;
  const Mat& sd = stats.tensor("sd").value;
  StyleEmbeddingSequence seq;
  seq.reserve(text.size());
  for (long k = 0; k < y.cols(); ++k)
    seq.push_back((y.col(k).array() * sd.col(0).array() + mean.col(0).array())
                      .matrix());
  return seq;
}

}  // namespace csd
