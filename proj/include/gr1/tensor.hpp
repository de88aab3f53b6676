#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gr1/rng.hpp"

namespace gr1 {

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A named parameter array. Gradients accumulate here across samples until the
// optimizer consumes them.
template <class S>
struct Param {
  std::string name;
  MatX<S> value;
  MatX<S> grad;
  bool trainable = true;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Reverse-mode tape over Eigen matrices. Nodes are created strictly after
// their inputs, so the backward sweep is reverse creation order. One tape is
// built per sample; clear() recycles storage between samples.
template <class S>
class Graph {
 public:
  struct Tensor {
    int idx = -1;
  };

  explicit Graph(bool training = false, Rng* rng = nullptr)
      : training_(training), rng_(rng) {}

  bool training() const { return training_; }
  Rng* rng() { return rng_; }

  void clear() {
    nodes_.clear();
    param_leaves_.clear();
    param_cache_.clear();
  }

  const MatX<S>& value(Tensor t) const { return nodes_[size_t(t.idx)].value; }
  const MatX<S>& grad(Tensor t) const { return nodes_[size_t(t.idx)].grad; }

  // ---- leaves ----

  Tensor input(MatX<S> v) {
    return make(std::move(v), {}, nullptr);
  }

  // Binding the same parameter twice in one tape reuses the leaf, so fan-out
  // gradients accumulate on a single node.
  Tensor param(Param<S>& p) {
    auto it = param_cache_.find(&p);
    if (it != param_cache_.end()) return Tensor{it->second};
    Tensor t = make(p.value, {}, nullptr);
    if (p.trainable) param_leaves_.push_back({t.idx, &p});
    param_cache_[&p] = t.idx;
    return t;
  }

  // ---- arithmetic ----

  Tensor add(Tensor a, Tensor b) {
    check_same_shape(a, b, "add");
    Tensor out = make(value(a) + value(b), {a, b}, [](Graph& g, Node& n) {
      g.accum(n.parents[0], n.grad);
      g.accum(n.parents[1], n.grad);
    });
    return out;
  }

  Tensor sub(Tensor a, Tensor b) {
    check_same_shape(a, b, "sub");
    return make(value(a) - value(b), {a, b}, [](Graph& g, Node& n) {
      g.accum(n.parents[0], n.grad);
      g.accum(n.parents[1], -n.grad);
    });
  }

  Tensor hadamard(Tensor a, Tensor b) {
    check_same_shape(a, b, "hadamard");
    return make(value(a).cwiseProduct(value(b)), {a, b},
                [](Graph& g, Node& n) {
                  g.accum(n.parents[0],
                          n.grad.cwiseProduct(g.value(n.parents[1])));
                  g.accum(n.parents[1],
                          n.grad.cwiseProduct(g.value(n.parents[0])));
                });
  }

  Tensor scale(Tensor a, S c) {
    return make(value(a) * c, {a},
                [c](Graph& g, Node& n) { g.accum(n.parents[0], n.grad * c); });
  }

  // broadcast a 1 x C row over every row of a
  Tensor add_row(Tensor a, Tensor row) {
    if (value(row).rows() != 1 || value(row).cols() != value(a).cols())
      throw std::invalid_argument("add_row: shape mismatch");
    MatX<S> v = value(a);
    v.rowwise() += value(row).row(0);
    return make(std::move(v), {a, row}, [](Graph& g, Node& n) {
      g.accum(n.parents[0], n.grad);
      g.accum(n.parents[1], n.grad.colwise().sum());
    });
  }

  Tensor matmul(Tensor a, Tensor b) {
    if (value(a).cols() != value(b).rows())
      throw std::invalid_argument("matmul: inner dims differ");
    return make(value(a) * value(b), {a, b}, [](Graph& g, Node& n) {
      g.accum(n.parents[0], n.grad * g.value(n.parents[1]).transpose());
      g.accum(n.parents[1], g.value(n.parents[0]).transpose() * n.grad);
    });
  }

  // a * b^T
  Tensor matmul_nt(Tensor a, Tensor b) {
    if (value(a).cols() != value(b).cols())
      throw std::invalid_argument("matmul_nt: inner dims differ");
    return make(value(a) * value(b).transpose(), {a, b},
                [](Graph& g, Node& n) {
                  g.accum(n.parents[0], n.grad * g.value(n.parents[1]));
                  g.accum(n.parents[1], n.grad.transpose() * g.value(n.parents[0]));
                });
  }

  // ---- shape ----

  Tensor slice_rows(Tensor a, int r0, int nrows) {
    if (r0 < 0 || r0 + nrows > value(a).rows())
      throw std::invalid_argument("slice_rows: out of range");
    return make(value(a).middleRows(r0, nrows), {a},
                [r0, nrows](Graph& g, Node& n) {
                  g.accum_rows(n.parents[0], r0, nrows, n.grad);
                });
  }

  Tensor slice_cols(Tensor a, int c0, int ncols) {
    if (c0 < 0 || c0 + ncols > value(a).cols())
      throw std::invalid_argument("slice_cols: out of range");
    return make(value(a).middleCols(c0, ncols), {a},
                [c0, ncols](Graph& g, Node& n) {
                  g.accum_cols(n.parents[0], c0, ncols, n.grad);
                });
  }

  Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    int cols = int(value(parts[0]).cols());
    int rows = 0;
    for (Tensor p : parts) {
      if (value(p).cols() != cols)
        throw std::invalid_argument("concat_rows: column mismatch");
      rows += int(value(p).rows());
    }
    MatX<S> v(rows, cols);
    int r = 0;
    for (Tensor p : parts) {
      v.middleRows(r, int(value(p).rows())) = value(p);
      r += int(value(p).rows());
    }
    return make(std::move(v), parts, [](Graph& g, Node& n) {
      int r = 0;
      for (Tensor p : n.parents) {
        int pr = int(g.value(p).rows());
        g.accum(p, n.grad.middleRows(r, pr));
        r += pr;
      }
    });
  }

  Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    int rows = int(value(parts[0]).rows());
    int cols = 0;
    for (Tensor p : parts) {
      if (value(p).rows() != rows)
        throw std::invalid_argument("concat_cols: row mismatch");
      cols += int(value(p).cols());
    }
    MatX<S> v(rows, cols);
    int c = 0;
    for (Tensor p : parts) {
      v.middleCols(c, int(value(p).cols())) = value(p);
      c += int(value(p).cols());
    }
    return make(std::move(v), parts, [](Graph& g, Node& n) {
      int c = 0;
      for (Tensor p : n.parents) {
        int pc = int(g.value(p).cols());
        g.accum(p, n.grad.middleCols(c, pc));
        c += pc;
      }
    });
  }

  Tensor repeat_row(Tensor row, int n) {
    if (value(row).rows() != 1)
      throw std::invalid_argument("repeat_row: expects a single row");
    MatX<S> v = value(row).replicate(n, 1);
    return make(std::move(v), {row}, [](Graph& g, Node& n_) {
      g.accum(n_.parents[0], n_.grad.colwise().sum());
    });
  }

  // ---- nonlinearities ----

  Tensor relu(Tensor a) {
    MatX<S> v = value(a).cwiseMax(S(0));
    return make(std::move(v), {a}, [](Graph& g, Node& n) {
      const MatX<S>& x = g.value(n.parents[0]);
      g.accum(n.parents[0],
              n.grad.cwiseProduct((x.array() > S(0)).template cast<S>().matrix()));
    });
  }

  Tensor gelu(Tensor a) {
    // tanh approximation
    const S c = S(std::sqrt(2.0 / M_PI));
    const S k = S(0.044715);
    MatX<S> x = value(a);
    MatX<S> inner = (c * (x.array() + k * x.array().cube())).matrix();
    MatX<S> th = inner.array().tanh().matrix();
    MatX<S> v = (S(0.5) * x.array() * (S(1) + th.array())).matrix();
    return make(std::move(v), {a}, [c, k, th](Graph& g, Node& n) {
      const MatX<S>& x = g.value(n.parents[0]);
      auto sech2 = (S(1) - th.array().square());
      auto dinner = c * (S(1) + S(3) * k * x.array().square());
      auto dv = S(0.5) * (S(1) + th.array()) +
                S(0.5) * x.array() * sech2 * dinner;
      g.accum(n.parents[0], n.grad.cwiseProduct(dv.matrix()));
    });
  }

  Tensor tanh_op(Tensor a) {
    MatX<S> v = value(a).array().tanh().matrix();
    MatX<S> vc = v;
    return make(std::move(v), {a}, [vc](Graph& g, Node& n) {
      g.accum(n.parents[0],
              n.grad.cwiseProduct((S(1) - vc.array().square()).matrix()));
    });
  }

  // inverted dropout; identity when the graph is not in training mode
  Tensor dropout(Tensor a, double p) {
    if (!training_ || p <= 0.0) return a;
    if (!rng_) throw std::logic_error("dropout: training graph requires rng");
    MatX<S> mask(value(a).rows(), value(a).cols());
    const S keep_inv = S(1.0 / (1.0 - p));
    for (int r = 0; r < mask.rows(); ++r)
      for (int c = 0; c < mask.cols(); ++c)
        mask(r, c) = rng_->uniform() < p ? S(0) : keep_inv;
    return make(value(a).cwiseProduct(mask), {a}, [mask](Graph& g, Node& n) {
      g.accum(n.parents[0], n.grad.cwiseProduct(mask));
    });
  }

  // ---- normalization / attention ----

  Tensor layernorm(Tensor a, Tensor gamma, Tensor beta, S eps = S(1e-5)) {
    const MatX<S>& x = value(a);
    const int R = int(x.rows()), C = int(x.cols());
    if (value(gamma).rows() != 1 || value(gamma).cols() != C ||
        value(beta).rows() != 1 || value(beta).cols() != C)
      throw std::invalid_argument("layernorm: gamma/beta must be 1 x C");
    MatX<S> xhat(R, C);
    Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(R);
    for (int r = 0; r < R; ++r) {
      S mean = x.row(r).mean();
      auto centered = (x.row(r).array() - mean);
      S var = centered.square().mean();
      S is = S(1) / std::sqrt(var + eps);
      inv_std(r) = is;
      xhat.row(r) = (centered * is).matrix();
    }
    MatX<S> v = (xhat.array().rowwise() * value(gamma).row(0).array())
                    .matrix();
    v.rowwise() += value(beta).row(0);
    return make(std::move(v), {a, gamma, beta},
                [xhat, inv_std](Graph& g, Node& n) {
                  const MatX<S>& gam = g.value(n.parents[1]);
                  const int R = int(xhat.rows()), C = int(xhat.cols());
                  MatX<S> dx(R, C);
                  for (int r = 0; r < R; ++r) {
                    auto dy = n.grad.row(r).array() * gam.row(0).array();
                    S m1 = dy.mean();
                    S m2 = (dy * xhat.row(r).array()).mean();
                    dx.row(r) =
                        ((dy - m1 - xhat.row(r).array() * m2) * inv_std(r))
                            .matrix();
                  }
                  g.accum(n.parents[0], dx);
                  g.accum(n.parents[1],
                          (n.grad.array() * xhat.array()).colwise().sum().matrix());
                  g.accum(n.parents[2], n.grad.colwise().sum());
                });
  }

  // Row-wise softmax over the entries enabled in `mask` (row-major R x C,
  // nonzero = allowed). Disallowed entries get exactly zero probability; rows
  // with no allowed entry come out all-zero.
  Tensor masked_softmax(Tensor a, const std::vector<uint8_t>& mask) {
    const MatX<S>& x = value(a);
    const int R = int(x.rows()), C = int(x.cols());
    if (int(mask.size()) != R * C)
      throw std::invalid_argument("masked_softmax: mask size mismatch");
    MatX<S> p(R, C);
    for (int r = 0; r < R; ++r) {
      S mx = std::numeric_limits<S>::lowest();
      bool any = false;
      for (int c = 0; c < C; ++c)
        if (mask[size_t(r) * C + c]) {
          any = true;
          mx = std::max(mx, x(r, c));
        }
      if (!any) {
        p.row(r).setZero();
        continue;
      }
      S denom = S(0);
      for (int c = 0; c < C; ++c) {
        if (mask[size_t(r) * C + c]) {
          S e = std::exp(x(r, c) - mx);
          p(r, c) = e;
          denom += e;
        } else {
          p(r, c) = S(0);
        }
      }
      p.row(r) /= denom;
    }
    MatX<S> pc = p;
    return make(std::move(p), {a}, [pc](Graph& g, Node& n) {
      const int R = int(pc.rows()), C = int(pc.cols());
      MatX<S> dx(R, C);
      for (int r = 0; r < R; ++r) {
        S dot = n.grad.row(r).dot(pc.row(r));
        dx.row(r) =
            (pc.row(r).array() * (n.grad.row(r).array() - dot)).matrix();
      }
      g.accum(n.parents[0], dx);
    });
  }

  // ---- reductions / losses (targets are constants) ----

  Tensor mean_all(Tensor a) {
    const int R = int(value(a).rows()), C = int(value(a).cols());
    MatX<S> v(1, 1);
    v(0, 0) = value(a).mean();
    return make(std::move(v), {a}, [R, C](Graph& g, Node& n) {
      S s = n.grad(0, 0) / S(R * C);
      g.accum(n.parents[0], MatX<S>::Constant(R, C, s));
    });
  }

  Tensor mse_loss(Tensor pred, const MatX<S>& target) {
    check_shape(pred, target, "mse_loss");
    MatX<S> diff = value(pred) - target;
    MatX<S> v(1, 1);
    v(0, 0) = diff.array().square().mean();
    return make(std::move(v), {pred}, [diff](Graph& g, Node& n) {
      S s = S(2) * n.grad(0, 0) / S(diff.size());
      g.accum(n.parents[0], diff * s);
    });
  }

  Tensor smooth_l1_loss(Tensor pred, const MatX<S>& target, S beta = S(1)) {
    check_shape(pred, target, "smooth_l1_loss");
    MatX<S> diff = value(pred) - target;
    MatX<S> v(1, 1);
    S acc = S(0);
    for (int r = 0; r < diff.rows(); ++r)
      for (int c = 0; c < diff.cols(); ++c) {
        S d = std::abs(diff(r, c));
        acc += d < beta ? S(0.5) * d * d / beta : d - S(0.5) * beta;
      }
    v(0, 0) = acc / S(diff.size());
    return make(std::move(v), {pred}, [diff, beta](Graph& g, Node& n) {
      MatX<S> dx(diff.rows(), diff.cols());
      for (int r = 0; r < diff.rows(); ++r)
        for (int c = 0; c < diff.cols(); ++c) {
          S d = diff(r, c);
          dx(r, c) = std::abs(d) < beta ? d / beta : (d > S(0) ? S(1) : S(-1));
        }
      g.accum(n.parents[0], dx * (n.grad(0, 0) / S(diff.size())));
    });
  }

  // numerically stable binary cross-entropy on logits
  Tensor bce_with_logits(Tensor logits, const MatX<S>& labels) {
    check_shape(logits, labels, "bce_with_logits");
    const MatX<S>& z = value(logits);
    MatX<S> v(1, 1);
    S acc = S(0);
    for (int r = 0; r < z.rows(); ++r)
      for (int c = 0; c < z.cols(); ++c) {
        S zz = z(r, c), y = labels(r, c);
        acc += std::max(zz, S(0)) - zz * y + std::log1p(std::exp(-std::abs(zz)));
      }
    v(0, 0) = acc / S(z.size());
    MatX<S> zc = z;
    return make(std::move(v), {logits}, [zc, labels](Graph& g, Node& n) {
      MatX<S> dx(zc.rows(), zc.cols());
      for (int r = 0; r < zc.rows(); ++r)
        for (int c = 0; c < zc.cols(); ++c) {
          S sig = S(1) / (S(1) + std::exp(-zc(r, c)));
          dx(r, c) = sig - labels(r, c);
        }
      g.accum(n.parents[0], dx * (n.grad(0, 0) / S(zc.size())));
    });
  }

  // ---- backward ----

  // Seeds d(loss)/d(loss) = 1, sweeps the tape in reverse creation order,
  // then flushes accumulated gradients into the bound parameters.
  void backward(Tensor loss) {
    Node& ln = nodes_[size_t(loss.idx)];
    if (ln.value.rows() != 1 || ln.value.cols() != 1)
      throw std::invalid_argument("backward: loss must be 1 x 1");
    for (auto& n : nodes_)
      if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
    ln.grad(0, 0) = S(1);
    for (size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward_fn && n.grad.cwiseAbs().sum() != S(0))
        n.backward_fn(*this, n);
    }
    for (auto& [idx, p] : param_leaves_) {
      if (p->grad.size() == 0) p->zero_grad();
      p->grad += nodes_[size_t(idx)].grad;
    }
  }

 private:
  struct Node {
    MatX<S> value;
    MatX<S> grad;
    std::vector<Tensor> parents;
    std::function<void(Graph&, Node&)> backward_fn;
  };

  Tensor make(MatX<S> v, std::vector<Tensor> parents,
              std::function<void(Graph&, Node&)> fn) {
    Node n;
    n.value = std::move(v);
    n.parents = std::move(parents);
    n.backward_fn = std::move(fn);
    nodes_.push_back(std::move(n));
    return Tensor{int(nodes_.size() - 1)};
  }

  void accum(Tensor t, const MatX<S>& g) {
    Node& n = nodes_[size_t(t.idx)];
    if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
    n.grad += g;
  }
  template <class Expr>
  void accum(Tensor t, const Expr& g) {
    accum(t, MatX<S>(g));
  }
  void accum_rows(Tensor t, int r0, int nrows, const MatX<S>& g) {
    Node& n = nodes_[size_t(t.idx)];
    if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
    n.grad.middleRows(r0, nrows) += g;
  }
  void accum_cols(Tensor t, int c0, int ncols, const MatX<S>& g) {
    Node& n = nodes_[size_t(t.idx)];
    if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
    n.grad.middleCols(c0, ncols) += g;
  }

  void check_same_shape(Tensor a, Tensor b, const char* op) const {
    if (value(a).rows() != value(b).rows() ||
        value(a).cols() != value(b).cols())
      throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
  void check_shape(Tensor a, const MatX<S>& m, const char* op) const {
    if (value(a).rows() != m.rows() || value(a).cols() != m.cols())
      throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<int, Param<S>*>> param_leaves_;
  std::map<const void*, int> param_cache_;
  bool training_ = false;
  Rng* rng_ = nullptr;
};

}  // namespace gr1
