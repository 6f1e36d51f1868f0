// Finite-difference checks for the tape ops and the layer building blocks.
// Every analytic gradient is compared against central differences on random
// small matrices.

#include <catch2/catch_amalgamated.hpp>

#include <functional>
#include <vector>

#include "csd/autodiff.hpp"
#include "csd/nn.hpp"

using namespace csd;

namespace {

// Builds a scalar from a single input leaf, returns analytic input gradient
// and compares against central differences with step h.
void check_input_gradient(const Mat& x0,
                          const std::function<Var(Tape&, Var)>& build,
                          double h = 1e-5, double tol = 1e-6) {
  Tape tape;
  Var x = tape.leaf(x0, true);
  Var y = build(tape, x);
  tape.backward(y);
  Mat analytic = tape.grad(x);

  Mat fd(x0.rows(), x0.cols());
  for (long j = 0; j < x0.cols(); ++j) {
    for (long i = 0; i < x0.rows(); ++i) {
      Mat xp = x0, xm = x0;
      xp(i, j) += h;
      xm(i, j) -= h;
      Tape tp(false), tm(false);
      double vp = tp.scalar_value(build(tp, tp.leaf(xp, false)));
      double vm = tm.scalar_value(build(tm, tm.leaf(xm, false)));
      fd(i, j) = (vp - vm) / (2.0 * h);
    }
  }
  double denom = std::max(1.0, std::max(analytic.norm(), fd.norm()));
  REQUIRE((analytic - fd).norm() / denom < tol);
}

Mat random_mat(long r, long c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (long j = 0; j < c; ++j)
    for (long i = 0; i < r; ++i) m(i, j) = scale * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("elementwise op gradients") {
  Rng rng(7);
  Mat x = random_mat(3, 4, rng);

  check_input_gradient(x, [](Tape& t, Var v) {
    return ad::sum_all(ad::sigmoid(v));
  });
  check_input_gradient(x, [](Tape& t, Var v) {
    return ad::sum_all(ad::tanh_(v));
  });
  check_input_gradient(x, [](Tape& t, Var v) {
    return ad::sum_all(ad::square(v));
  });
  check_input_gradient(x, [](Tape& t, Var v) {
    return ad::mean_all(ad::exp_(v));
  });
  check_input_gradient(x, [](Tape& t, Var v) {
    return ad::sum_all(ad::log_(ad::add_scalar(ad::square(v), 1.0)));
  });
  // keep arguments away from the relu/abs kinks
  Mat far = x.array().abs().matrix() + Mat::Constant(3, 4, 0.5);
  check_input_gradient(far, [](Tape& t, Var v) {
    return ad::sum_all(ad::relu(v));
  });
  check_input_gradient(far, [](Tape& t, Var v) {
    return ad::sum_all(ad::abs_(ad::add_scalar(v, -2.0)));
  });
  check_input_gradient(far, [](Tape& t, Var v) {
    return ad::sum_all(ad::sqrt_(v));
  });
}

TEST_CASE("matmul and structural op gradients") {
  Rng rng(13);
  Mat a = random_mat(3, 5, rng);
  Mat b = random_mat(5, 2, rng);

  check_input_gradient(a, [&](Tape& t, Var v) {
    Var bc = t.constant(b);
    return ad::sum_all(ad::square(ad::matmul(v, bc)));
  });
  check_input_gradient(b, [&](Tape& t, Var v) {
    Var ac = t.constant(a);
    return ad::sum_all(ad::square(ad::matmul(ac, v)));
  });
  check_input_gradient(a, [](Tape& t, Var v) {
    return ad::sum_all(ad::square(ad::transpose(v)));
  });
  check_input_gradient(a, [](Tape& t, Var v) {
    Var top = ad::slice_rows(v, 0, 2);
    Var rest = ad::slice_rows(v, 2, 1);
    return ad::sum_all(ad::square(ad::concat_vert(top, ad::concat_vert(rest, rest))));
  });
  check_input_gradient(a, [](Tape& t, Var v) {
    return ad::sum_all(ad::square(ad::gather_cols(v, {0, 2, 2, 4})));
  });
  check_input_gradient(a, [](Tape& t, Var v) {
    return ad::sum_all(ad::square(ad::shift_cols(v, 1)));
  });
  check_input_gradient(a, [](Tape& t, Var v) {
    return ad::sum_all(ad::square(ad::shift_cols(v, -2)));
  });
  check_input_gradient(a, [](Tape& t, Var v) {
    std::vector<long> rows = {0, 2, 1, 0, 2};
    return ad::sum_all(ad::square(ad::gather_rows_per_col(v, rows)));
  });
  check_input_gradient(a, [](Tape& t, Var v) {
    Var bias = t.constant(Mat::Ones(3, 1));
    return ad::sum_all(ad::square(ad::add_colvec(v, bias)));
  });
  check_input_gradient(b, [](Tape& t, Var v) {
    return ad::sum_all(ad::square(ad::mean_rows(v)));
  });
}

TEST_CASE("softmax and division gradients") {
  Rng rng(29);
  Mat logits = random_mat(4, 3, rng);
  check_input_gradient(logits, [](Tape& t, Var v) {
    Var p = ad::softmax_cols(v);
    // a non-symmetric functional so off-diagonal jacobian terms matter
    Var w = t.constant((Mat(4, 3) << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12)
                           .finished());
    return ad::sum_all(ad::mul(p, w));
  });

  Mat pos = logits.array().abs().matrix() + Mat::Constant(4, 3, 0.5);
  check_input_gradient(pos, [](Tape& t, Var v) {
    Var ones = t.constant(Mat::Ones(4, 3));
    return ad::sum_all(ad::div(ones, v));
  });
  check_input_gradient(pos, [](Tape& t, Var v) {
    return ad::scale(ad::l2norm(v), 2.5);
  });
}

TEST_CASE("softmax columns sum to one") {
  Rng rng(31);
  Tape tape(false);
  Var p = ad::softmax_cols(tape.leaf(random_mat(6, 5, rng), false));
  for (long j = 0; j < 5; ++j) {
    REQUIRE(tape.value(p).col(j).sum() == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(tape.value(p).col(j).minCoeff() > 0.0);
  }
}

TEST_CASE("lstm step gradient") {
  Rng rng(41);
  long hidden = 3, in_dim = 4, batch = 2, steps = 3;

  ParamGroup g{"test", {}};
  add_lstm(g, "lstm", hidden, in_dim, rng);
  add_linear(g, "proj", 2, hidden, rng);

  std::vector<Mat> inputs;
  for (long s = 0; s < steps; ++s) inputs.push_back(random_mat(in_dim, batch, rng));

  auto loss_value = [&](bool record, ParamGroup& group, Mat* grad_out,
                        const std::string& tname) -> double {
    Tape tape(record);
    Binder binder(tape);
    LstmVars lstm = bind_lstm(binder, group, "lstm", true);
    LinearVars proj = bind_linear(binder, group, "proj", true);
    std::vector<Var> xs;
    for (const auto& m : inputs) xs.push_back(tape.constant(m));
    auto [hs, fin] = lstm_run(lstm, xs, batch);
    Var out = linear(proj, fin.c);
    Var loss = ad::sum_all(ad::square(out));
    if (record) {
      group.zero_grads();
      tape.backward(loss);
      binder.scatter_grads();
      if (grad_out != nullptr) *grad_out = group.tensor(tname).grad;
    }
    return tape.scalar_value(loss);
  };

  for (const std::string tname :
       {"lstm.wx", "lstm.wh", "lstm.b", "proj.w", "proj.b"}) {
    Mat analytic;
    loss_value(true, g, &analytic, tname);
    ParamTensor& t = g.tensor(tname);
    double h = 1e-5;
    Mat fd(t.value.rows(), t.value.cols());
    for (long j = 0; j < t.value.cols(); ++j) {
      for (long i = 0; i < t.value.rows(); ++i) {
        double orig = t.value(i, j);
        t.value(i, j) = orig + h;
        double vp = loss_value(false, g, nullptr, tname);
        t.value(i, j) = orig - h;
        double vm = loss_value(false, g, nullptr, tname);
        t.value(i, j) = orig;
        fd(i, j) = (vp - vm) / (2.0 * h);
      }
    }
    double denom = std::max(1.0, std::max(analytic.norm(), fd.norm()));
    REQUIRE((analytic - fd).norm() / denom < 1e-6);
  }
}

TEST_CASE("layer norm gradient") {
  Rng rng(43);
  Mat x = random_mat(5, 3, rng);
  Mat gamma = random_mat(5, 1, rng, 0.5);
  Mat beta = random_mat(5, 1, rng, 0.5);
  check_input_gradient(x, [&](Tape& t, Var v) {
    Var g = t.constant(gamma);
    Var b = t.constant(beta);
    Var w = t.constant((Mat::Ones(5, 3) * 0.3).eval());
    return ad::sum_all(ad::mul(layer_norm(v, g, b), w));
  });
}

TEST_CASE("frozen leaves receive no gradient") {
  Rng rng(47);
  Tape tape;
  Var frozen = tape.leaf(random_mat(3, 3, rng), false);
  Var live = tape.leaf(random_mat(3, 3, rng), true);
  Var loss = ad::sum_all(ad::square(ad::matmul(frozen, live)));
  tape.backward(loss);
  REQUIRE(tape.requires_grad(live));
  REQUIRE_FALSE(tape.requires_grad(frozen));
  REQUIRE(tape.grad(live).norm() > 0.0);
  REQUIRE_FALSE(tape.has_grad(frozen));
}

TEST_CASE("adam moves parameters against the gradient") {
  ParamGroup g{"g", {}};
  g.tensors.push_back({"w", Mat::Ones(2, 2), {}});
  g.zero_grads();
  g.tensor("w").grad = Mat::Ones(2, 2);
  Adam opt(0.1);
  opt.step(tensors_of(g));
  REQUIRE(g.tensor("w").value(0, 0) < 1.0);
}
