#pragma once

#include <deque>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gr1/sha256.hpp"
#include "gr1/tensor.hpp"

namespace gr1 {

// Owns parameter arrays with stable addresses and a fixed registration order.
template <class S>
class ParamStore {
 public:
  Param<S>& add(const std::string& name, int rows, int cols, bool trainable) {
    if (index_.count(name))
      throw std::invalid_argument("ParamStore: duplicate name " + name);
    params_.push_back(Param<S>{name, MatX<S>::Zero(rows, cols),
                               MatX<S>::Zero(rows, cols), trainable});
    index_[name] = params_.size() - 1;
    return params_.back();
  }

  Param<S>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
      throw std::invalid_argument("ParamStore: unknown name " + name);
    return params_[it->second];
  }
  const Param<S>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw std::invalid_argument("ParamStore: unknown name " + name);
    return params_[it->second];
  }
  bool contains(const std::string& name) const { return index_.count(name); }

  size_t size() const { return params_.size(); }
  Param<S>& operator[](size_t i) { return params_[i]; }
  const Param<S>& operator[](size_t i) const { return params_[i]; }

  void zero_grads() {
    for (auto& p : params_)
      if (p.trainable) p.zero_grad();
  }

  size_t count_elements(bool trainable_only) const {
    size_t n = 0;
    for (const auto& p : params_)
      if (!trainable_only || p.trainable) n += size_t(p.value.size());
    return n;
  }

  // Content hash over the named subset, little-endian float32, name order as
  // registered. Used for frozen-parameter invariance checks.
  std::string hash_subset(bool frozen_only) const {
    Sha256Stream h;
    for (const auto& p : params_) {
      if (frozen_only && p.trainable) continue;
      h.update(p.name.data(), p.name.size());
      for (int r = 0; r < p.value.rows(); ++r)
        for (int c = 0; c < p.value.cols(); ++c) {
          float f = float(p.value(r, c));
          h.update(&f, 4);
        }
    }
    return h.hex();
  }

 private:
  std::deque<Param<S>> params_;
  std::map<std::string, size_t> index_;
};

template <class S>
void init_normal(Param<S>& p, Rng& rng, double stddev) {
  for (int r = 0; r < p.value.rows(); ++r)
    for (int c = 0; c < p.value.cols(); ++c)
      p.value(r, c) = S(rng.normal(0.0, stddev));
}

template <class S>
void init_constant(Param<S>& p, double v) {
  p.value.setConstant(S(v));
}

// Decoupled weight decay Adam. Moments are keyed by registration index, so
// every trainable array belongs to exactly one optimizer slot.
template <class S>
class AdamW {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.05;
  };

  AdamW(ParamStore<S>& store, Options opt) : store_(&store), opt_(opt) {
    m_.resize(store.size());
    v_.resize(store.size());
    for (size_t i = 0; i < store.size(); ++i) {
      if (!store[i].trainable) continue;
      m_[i].setZero(store[i].value.rows(), store[i].value.cols());
      v_[i].setZero(store[i].value.rows(), store[i].value.cols());
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, double(t_));
    for (size_t i = 0; i < store_->size(); ++i) {
      Param<S>& p = (*store_)[i];
      if (!p.trainable) continue;
      m_[i] = S(opt_.beta1) * m_[i] + S(1.0 - opt_.beta1) * p.grad;
      v_[i] = (S(opt_.beta2) * v_[i].array() +
               S(1.0 - opt_.beta2) * p.grad.array().square())
                  .matrix();
      auto mhat = m_[i].array() / S(bc1);
      auto vhat = v_[i].array() / S(bc2);
      p.value = (p.value.array() -
                 S(lr) * (mhat / (vhat.sqrt() + S(opt_.eps)) +
                          S(opt_.weight_decay) * p.value.array()))
                    .matrix();
    }
  }

  int64_t steps_taken() const { return t_; }

 private:
  ParamStore<S>* store_;
  Options opt_;
  std::vector<MatX<S>> m_, v_;
  int64_t t_ = 0;
};

// ---- reusable blocks (functions over a Graph) ----

template <class S>
struct LinearParams {
  Param<S>* w = nullptr;
  Param<S>* b = nullptr;  // optional

  static LinearParams create(ParamStore<S>& store, const std::string& name,
                             int in, int out, bool bias, Rng& rng,
                             bool trainable = true, double init_scale = -1.0) {
    LinearParams lp;
    lp.w = &store.add(name + ".w", in, out, trainable);
    double stddev = init_scale > 0 ? init_scale : 1.0 / std::sqrt(double(in));
    init_normal(*lp.w, rng, stddev);
    if (bias) lp.b = &store.add(name + ".b", 1, out, trainable);
    return lp;
  }

  typename Graph<S>::Tensor apply(Graph<S>& g,
                                  typename Graph<S>::Tensor x) const {
    auto y = g.matmul(x, g.param(*w));
    if (b) y = g.add_row(y, g.param(*b));
    return y;
  }
};

template <class S>
struct LayerNormParams {
  Param<S>* gamma = nullptr;
  Param<S>* beta = nullptr;

  static LayerNormParams create(ParamStore<S>& store, const std::string& name,
                                int dim, bool trainable = true) {
    LayerNormParams ln;
    ln.gamma = &store.add(name + ".gamma", 1, dim, trainable);
    ln.beta = &store.add(name + ".beta", 1, dim, trainable);
    init_constant(*ln.gamma, 1.0);
    return ln;
  }

  typename Graph<S>::Tensor apply(Graph<S>& g,
                                  typename Graph<S>::Tensor x) const {
    return g.layernorm(x, g.param(*gamma), g.param(*beta));
  }
};

// Multi-head attention with an optional key/query mask (R x C row-major over
// query x key). Queries and keys/values may come from different sequences
// (cross attention).
template <class S>
struct AttentionParams {
  LinearParams<S> wq, wk, wv, wo;
  int n_heads = 1;

  static AttentionParams create(ParamStore<S>& store, const std::string& name,
                                int dim, int n_heads, Rng& rng,
                                bool trainable = true) {
    AttentionParams a;
    a.n_heads = n_heads;
    a.wq = LinearParams<S>::create(store, name + ".wq", dim, dim, true, rng,
                                   trainable);
    a.wk = LinearParams<S>::create(store, name + ".wk", dim, dim, true, rng,
                                   trainable);
    a.wv = LinearParams<S>::create(store, name + ".wv", dim, dim, true, rng,
                                   trainable);
    a.wo = LinearParams<S>::create(store, name + ".wo", dim, dim, true, rng,
                                   trainable);
    return a;
  }

  typename Graph<S>::Tensor apply(Graph<S>& g, typename Graph<S>::Tensor q_in,
                                  typename Graph<S>::Tensor kv_in,
                                  const std::vector<uint8_t>* mask,
                                  double attn_dropout) const {
    const int dim = int(g.value(q_in).cols());
    const int dh = dim / n_heads;
    const int nq = int(g.value(q_in).rows());
    const int nk = int(g.value(kv_in).rows());

    auto q = wq.apply(g, q_in);
    auto k = wk.apply(g, kv_in);
    auto v = wv.apply(g, kv_in);

    std::vector<uint8_t> full(size_t(nq) * nk, 1);
    const std::vector<uint8_t>& m = mask ? *mask : full;

    std::vector<typename Graph<S>::Tensor> heads;
    const S scale = S(1.0 / std::sqrt(double(dh)));
    for (int h = 0; h < n_heads; ++h) {
      auto qh = g.slice_cols(q, h * dh, dh);
      auto kh = g.slice_cols(k, h * dh, dh);
      auto vh = g.slice_cols(v, h * dh, dh);
      auto scores = g.scale(g.matmul_nt(qh, kh), scale);
      auto probs = g.masked_softmax(scores, m);
      probs = g.dropout(probs, attn_dropout);
      heads.push_back(g.matmul(probs, vh));
    }
    auto cat = n_heads == 1 ? heads[0] : g.concat_cols(heads);
    return wo.apply(g, cat);
  }
};

// Pre-norm transformer block: x += attn(ln1(x)); x += mlp(ln2(x)).
template <class S>
struct TransformerBlock {
  LayerNormParams<S> ln1, ln2;
  AttentionParams<S> attn;
  LinearParams<S> fc1, fc2;

  static TransformerBlock create(ParamStore<S>& store, const std::string& name,
                                 int dim, int n_heads, int mlp_mult, Rng& rng,
                                 bool trainable = true) {
    TransformerBlock b;
    b.ln1 = LayerNormParams<S>::create(store, name + ".ln1", dim, trainable);
    b.ln2 = LayerNormParams<S>::create(store, name + ".ln2", dim, trainable);
    b.attn = AttentionParams<S>::create(store, name + ".attn", dim, n_heads,
                                        rng, trainable);
    b.fc1 = LinearParams<S>::create(store, name + ".fc1", dim, dim * mlp_mult,
                                    true, rng, trainable);
    b.fc2 = LinearParams<S>::create(store, name + ".fc2", dim * mlp_mult, dim,
                                    true, rng, trainable);
    return b;
  }

  typename Graph<S>::Tensor apply(Graph<S>& g, typename Graph<S>::Tensor x,
                                  const std::vector<uint8_t>* mask,
                                  double dropout) const {
    auto normed = ln1.apply(g, x);
    auto a = attn.apply(g, normed, normed, mask, dropout);
    a = g.dropout(a, dropout);
    x = g.add(x, a);
    auto h = fc1.apply(g, ln2.apply(g, x));
    h = g.gelu(h);
    h = fc2.apply(g, h);
    h = g.dropout(h, dropout);
    return g.add(x, h);
  }
};

}  // namespace gr1
