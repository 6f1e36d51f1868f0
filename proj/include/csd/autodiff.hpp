#pragma once

// Tape-based reverse-mode differentiation over Eigen double matrices.
//
// A Tape owns the computation graph for one forward pass. Ops are free
// functions taking Var handles and returning new Vars. backward() walks the
// node list in reverse creation order, which is a valid topological order by
// construction. All math is double precision; gradients of every loss in this
// project are checked against central finite differences in the test suite.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "csd/common.hpp"

namespace csd {

using Mat = Eigen::MatrixXd;

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
 public:
  // backward(tape, self): propagate self's grad into parent grads.
  using BackFn = std::function<void(Tape&, Var)>;

  struct Node {
    Mat value;
    Mat grad;  // lazily sized
    BackFn backward;
    bool requires_grad = false;
  };

  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  Var leaf(Mat value, bool requires_grad = false) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad && recording_;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  Var constant(Mat value) { return leaf(std::move(value), false); }

  Var scalar(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }

  const Mat& value(Var v) const {
    return nodes_[static_cast<std::size_t>(v.id)].value;
  }

  double scalar_value(Var v) const { return value(v)(0, 0); }

  Mat& grad(Var v) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  bool has_grad(Var v) const {
    return nodes_[static_cast<std::size_t>(v.id)].grad.size() != 0;
  }

  bool requires_grad(Var v) const {
    return nodes_[static_cast<std::size_t>(v.id)].requires_grad;
  }

  Var op(Mat value, std::initializer_list<Var> parents, BackFn backward) {
    Node n;
    n.value = std::move(value);
    if (recording_) {
      for (const Var& p : parents) {
        if (p.valid() && nodes_[static_cast<std::size_t>(p.id)].requires_grad) {
          n.requires_grad = true;
          break;
        }
      }
      if (n.requires_grad) n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  // Reverse sweep from a scalar root.
  void backward(Var root) {
    Node& r = nodes_[static_cast<std::size_t>(root.id)];
    if (r.value.rows() != 1 || r.value.cols() != 1)
      throw numeric_error("Tape::backward: root must be a 1x1 scalar");
    if (!recording_)
      throw numeric_error("Tape::backward: tape is not recording");
    grad(root)(0, 0) += 1.0;
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.requires_grad && n.backward && n.grad.size() != 0)
        n.backward(*this, Var{this, i});
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
  bool recording_;
};

namespace ad {

inline Tape& tape_of(Var a, Var b, const char* op) {
  if (a.tape != b.tape || a.tape == nullptr)
    throw numeric_error(std::string(op) + ": operands from different tapes");
  return *a.tape;
}

inline void shape_check(const Mat& x, const Mat& y, const char* op) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw numeric_error(std::string(op) + ": shape mismatch (" +
                        std::to_string(x.rows()) + "x" +
                        std::to_string(x.cols()) + " vs " +
                        std::to_string(y.rows()) + "x" +
                        std::to_string(y.cols()) + ")");
}

// ---- arithmetic ----

inline Var add(Var a, Var b) {
  Tape& t = tape_of(a, b, "add");
  shape_check(t.value(a), t.value(b), "add");
  return t.op(t.value(a) + t.value(b), {a, b}, [a, b](Tape& tp, Var self) {
    const Mat& g = tp.grad(self);
    if (tp.requires_grad(a)) tp.grad(a) += g;
    if (tp.requires_grad(b)) tp.grad(b) += g;
  });
}

inline Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b, "sub");
  shape_check(t.value(a), t.value(b), "sub");
  return t.op(t.value(a) - t.value(b), {a, b}, [a, b](Tape& tp, Var self) {
    const Mat& g = tp.grad(self);
    if (tp.requires_grad(a)) tp.grad(a) += g;
    if (tp.requires_grad(b)) tp.grad(b) -= g;
  });
}

// Hadamard product.
inline Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b, "mul");
  shape_check(t.value(a), t.value(b), "mul");
  return t.op(t.value(a).cwiseProduct(t.value(b)), {a, b},
              [a, b](Tape& tp, Var self) {
                const Mat& g = tp.grad(self);
                if (tp.requires_grad(a))
                  tp.grad(a) += g.cwiseProduct(tp.value(b));
                if (tp.requires_grad(b))
                  tp.grad(b) += g.cwiseProduct(tp.value(a));
              });
}

inline Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b, "matmul");
  if (t.value(a).cols() != t.value(b).rows())
    throw numeric_error("matmul: inner dimension mismatch");
  return t.op(t.value(a) * t.value(b), {a, b}, [a, b](Tape& tp, Var self) {
    const Mat& g = tp.grad(self);
    if (tp.requires_grad(a)) tp.grad(a) += g * tp.value(b).transpose();
    if (tp.requires_grad(b)) tp.grad(b) += tp.value(a).transpose() * g;
  });
}

inline Var scale(Var a, double s) {
  Tape& t = *a.tape;
  return t.op(t.value(a) * s, {a}, [a, s](Tape& tp, Var self) {
    if (tp.requires_grad(a)) tp.grad(a) += tp.grad(self) * s;
  });
}

inline Var add_scalar(Var a, double s) {
  Tape& t = *a.tape;
  return t.op(t.value(a).array() + s, {a}, [a](Tape& tp, Var self) {
    if (tp.requires_grad(a)) tp.grad(a) += tp.grad(self);
  });
}

// Broadcast a column vector over every column of a.
inline Var add_colvec(Var a, Var v) {
  Tape& t = tape_of(a, v, "add_colvec");
  if (t.value(v).cols() != 1 || t.value(v).rows() != t.value(a).rows())
    throw numeric_error("add_colvec: v must be a column vector matching rows");
  Mat out = t.value(a);
  out.colwise() += Eigen::VectorXd(t.value(v).col(0));
  return t.op(std::move(out), {a, v}, [a, v](Tape& tp, Var self) {
    const Mat& g = tp.grad(self);
    if (tp.requires_grad(a)) tp.grad(a) += g;
    if (tp.requires_grad(v)) tp.grad(v) += g.rowwise().sum();
  });
}

// ---- elementwise nonlinearities ----

inline Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Mat y = (1.0 / (1.0 + (-t.value(a).array()).exp())).matrix();
  return t.op(std::move(y), {a}, [a](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    const Mat& y = tp.value(self);
    tp.grad(a) +=
        tp.grad(self).cwiseProduct((y.array() * (1.0 - y.array())).matrix());
  });
}

inline Var tanh_(Var a) {
  Tape& t = *a.tape;
  Mat y = t.value(a).array().tanh().matrix();
  return t.op(std::move(y), {a}, [a](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    const Mat& y = tp.value(self);
    tp.grad(a) +=
        tp.grad(self).cwiseProduct((1.0 - y.array().square()).matrix());
  });
}

inline Var relu(Var a) {
  Tape& t = *a.tape;
  Mat y = t.value(a).cwiseMax(0.0);
  return t.op(std::move(y), {a}, [a](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    const Mat& x = tp.value(a);
    tp.grad(a) += tp.grad(self).cwiseProduct(
        (x.array() > 0.0).cast<double>().matrix());
  });
}

inline Var exp_(Var a) {
  Tape& t = *a.tape;
  Mat y = t.value(a).array().exp().matrix();
  return t.op(std::move(y), {a}, [a](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    tp.grad(a) += tp.grad(self).cwiseProduct(tp.value(self));
  });
}

inline Var log_(Var a) {
  Tape& t = *a.tape;
  Mat y = t.value(a).array().log().matrix();
  return t.op(std::move(y), {a}, [a](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    tp.grad(a) += tp.grad(self).cwiseQuotient(tp.value(a));
  });
}

inline Var square(Var a) {
  Tape& t = *a.tape;
  Mat y = t.value(a).array().square().matrix();
  return t.op(std::move(y), {a}, [a](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    tp.grad(a) += tp.grad(self).cwiseProduct(2.0 * tp.value(a));
  });
}

inline Var abs_(Var a) {
  Tape& t = *a.tape;
  Mat y = t.value(a).cwiseAbs();
  return t.op(std::move(y), {a}, [a](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    const Mat& x = tp.value(a);
    Mat sign = (x.array() > 0.0).cast<double>() -
               (x.array() < 0.0).cast<double>();
    tp.grad(a) += tp.grad(self).cwiseProduct(sign);
  });
}

inline Var sqrt_(Var a) {
  Tape& t = *a.tape;
  Mat y = t.value(a).array().sqrt().matrix();
  return t.op(std::move(y), {a}, [a](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    tp.grad(a) += tp.grad(self).cwiseQuotient(2.0 * tp.value(self));
  });
}

inline Var div(Var a, Var b) {
  Tape& t = tape_of(a, b, "div");
  shape_check(t.value(a), t.value(b), "div");
  return t.op(t.value(a).cwiseQuotient(t.value(b)), {a, b},
              [a, b](Tape& tp, Var self) {
                const Mat& g = tp.grad(self);
                const Mat& bv = tp.value(b);
                if (tp.requires_grad(a)) tp.grad(a) += g.cwiseQuotient(bv);
                if (tp.requires_grad(b))
                  tp.grad(b) -= g.cwiseProduct(tp.value(self)).cwiseQuotient(bv);
              });
}

// Clamp with a piecewise-constant gradient: zero outside (lo, hi).
inline Var clip(Var a, double lo, double hi) {
  Tape& t = *a.tape;
  Mat y = t.value(a).cwiseMax(lo).cwiseMin(hi);
  return t.op(std::move(y), {a}, [a, lo, hi](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    const Mat& x = tp.value(a);
    Mat mask = ((x.array() > lo) && (x.array() < hi)).cast<double>();
    tp.grad(a) += tp.grad(self).cwiseProduct(mask);
  });
}

// ---- reductions ----

inline Var sum_all(Var a) {
  Tape& t = *a.tape;
  Mat y(1, 1);
  y(0, 0) = t.value(a).sum();
  return t.op(std::move(y), {a}, [a](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    tp.grad(a).array() += tp.grad(self)(0, 0);
  });
}

inline Var mean_all(Var a) {
  Tape& t = *a.tape;
  double n = static_cast<double>(t.value(a).size());
  Mat y(1, 1);
  y(0, 0) = t.value(a).sum() / n;
  return t.op(std::move(y), {a}, [a, n](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    tp.grad(a).array() += tp.grad(self)(0, 0) / n;
  });
}

// Frobenius norm as a scalar; guarded gradient at zero.
inline Var l2norm(Var a) {
  Tape& t = *a.tape;
  double nv = t.value(a).norm();
  Mat y(1, 1);
  y(0, 0) = nv;
  return t.op(std::move(y), {a}, [a](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    double nv = tp.value(self)(0, 0);
    if (nv < 1e-12) return;  // subgradient 0 at the kink
    tp.grad(a) += (tp.grad(self)(0, 0) / nv) * tp.value(a);
  });
}

// ---- structural ops ----

inline Var concat_vert(Var a, Var b) {
  Tape& t = tape_of(a, b, "concat_vert");
  if (t.value(a).cols() != t.value(b).cols())
    throw numeric_error("concat_vert: column count mismatch");
  Mat out(t.value(a).rows() + t.value(b).rows(), t.value(a).cols());
  out.topRows(t.value(a).rows()) = t.value(a);
  out.bottomRows(t.value(b).rows()) = t.value(b);
  long ar = t.value(a).rows();
  return t.op(std::move(out), {a, b}, [a, b, ar](Tape& tp, Var self) {
    const Mat& g = tp.grad(self);
    if (tp.requires_grad(a)) tp.grad(a) += g.topRows(ar);
    if (tp.requires_grad(b)) tp.grad(b) += g.bottomRows(g.rows() - ar);
  });
}

inline Var concat_horz(Var a, Var b) {
  Tape& t = tape_of(a, b, "concat_horz");
  if (t.value(a).rows() != t.value(b).rows())
    throw numeric_error("concat_horz: row count mismatch");
  Mat out(t.value(a).rows(), t.value(a).cols() + t.value(b).cols());
  out.leftCols(t.value(a).cols()) = t.value(a);
  out.rightCols(t.value(b).cols()) = t.value(b);
  long ac = t.value(a).cols();
  return t.op(std::move(out), {a, b}, [a, b, ac](Tape& tp, Var self) {
    const Mat& g = tp.grad(self);
    if (tp.requires_grad(a)) tp.grad(a) += g.leftCols(ac);
    if (tp.requires_grad(b)) tp.grad(b) += g.rightCols(g.cols() - ac);
  });
}

inline Var slice_rows(Var a, long r0, long n) {
  Tape& t = *a.tape;
  Mat out = t.value(a).middleRows(r0, n);
  return t.op(std::move(out), {a}, [a, r0, n](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    tp.grad(a).middleRows(r0, n) += tp.grad(self);
  });
}

inline Var select_col(Var a, long j) {
  Tape& t = *a.tape;
  Mat out = t.value(a).col(j);
  return t.op(std::move(out), {a}, [a, j](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    tp.grad(a).col(j) += tp.grad(self);
  });
}

inline Var transpose(Var a) {
  Tape& t = *a.tape;
  Mat out = t.value(a).transpose();
  return t.op(std::move(out), {a}, [a](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    tp.grad(a) += tp.grad(self).transpose();
  });
}

// Gather columns by index (duplicates allowed); backward scatter-adds.
inline Var gather_cols(Var a, std::vector<long> idx) {
  Tape& t = *a.tape;
  Mat out(t.value(a).rows(), static_cast<long>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j)
    out.col(static_cast<long>(j)) = t.value(a).col(idx[j]);
  return t.op(std::move(out), {a},
              [a, idx = std::move(idx)](Tape& tp, Var self) {
                if (!tp.requires_grad(a)) return;
                const Mat& g = tp.grad(self);
                Mat& ga = tp.grad(a);
                for (std::size_t j = 0; j < idx.size(); ++j)
                  ga.col(idx[j]) += g.col(static_cast<long>(j));
              });
}

// out(0, j) = a(rows[j], j). Used to pick the true-class posterior per batch
// column.
inline Var gather_rows_per_col(Var a, std::vector<long> rows) {
  Tape& t = *a.tape;
  if (static_cast<long>(rows.size()) != t.value(a).cols())
    throw numeric_error("gather_rows_per_col: index count != columns");
  Mat out(1, t.value(a).cols());
  for (long j = 0; j < t.value(a).cols(); ++j)
    out(0, j) = t.value(a)(rows[static_cast<std::size_t>(j)], j);
  return t.op(std::move(out), {a},
              [a, rows = std::move(rows)](Tape& tp, Var self) {
                if (!tp.requires_grad(a)) return;
                const Mat& g = tp.grad(self);
                Mat& ga = tp.grad(a);
                for (long j = 0; j < g.cols(); ++j)
                  ga(rows[static_cast<std::size_t>(j)], j) += g(0, j);
              });
}

// Shift columns by k (positive k moves content toward higher column indices);
// vacated columns are zero.
inline Var shift_cols(Var a, long k) {
  Tape& t = *a.tape;
  const Mat& x = t.value(a);
  Mat out = Mat::Zero(x.rows(), x.cols());
  long c = x.cols();
  for (long j = 0; j < c; ++j) {
    long src = j - k;
    if (src >= 0 && src < c) out.col(j) = x.col(src);
  }
  return t.op(std::move(out), {a}, [a, k](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    const Mat& g = tp.grad(self);
    Mat& ga = tp.grad(a);
    long c = g.cols();
    for (long j = 0; j < c; ++j) {
      long src = j - k;
      if (src >= 0 && src < c) ga.col(src) += g.col(j);
    }
  });
}

// Column-wise softmax: each column is mapped through a stable softmax.
inline Var softmax_cols(Var a) {
  Tape& t = *a.tape;
  const Mat& x = t.value(a);
  Mat y(x.rows(), x.cols());
  for (long j = 0; j < x.cols(); ++j) {
    Eigen::VectorXd col = x.col(j);
    double m = col.maxCoeff();
    Eigen::VectorXd e = (col.array() - m).exp();
    y.col(j) = e / e.sum();
  }
  return t.op(std::move(y), {a}, [a](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    const Mat& y = tp.value(self);
    const Mat& g = tp.grad(self);
    Mat& ga = tp.grad(a);
    for (long j = 0; j < y.cols(); ++j) {
      double dot = y.col(j).dot(g.col(j));
      ga.col(j) += y.col(j).cwiseProduct(g.col(j)) - dot * y.col(j);
    }
  });
}

// Column-wise mean over rows: (r x c) -> (1 x c).
inline Var mean_rows(Var a) {
  Tape& t = *a.tape;
  double r = static_cast<double>(t.value(a).rows());
  Mat out = t.value(a).colwise().mean();
  return t.op(std::move(out), {a}, [a, r](Tape& tp, Var self) {
    if (!tp.requires_grad(a)) return;
    const Mat& g = tp.grad(self);
    tp.grad(a) += (Mat::Ones(tp.value(a).rows(), 1) * g) / r;
  });
}

}  // namespace ad
}  // namespace csd
