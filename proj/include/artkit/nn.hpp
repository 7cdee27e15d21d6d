#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "artkit/rng.hpp"
#include "artkit/tensor.hpp"

namespace artkit::nn {

using ad::Tensor;

// Named parameter set. Registration order is fixed by construction, and each
// parameter's init stream is keyed by name, so values never depend on the
// order modules happen to be built in.
template <typename T>
class ParamStore {
 public:
  explicit ParamStore(uint64_t init_seed = 0) : init_rng_(init_seed) {}

  Tensor<T> add(const std::string& name, std::vector<int> shape,
                std::vector<T> data) {
    if (index_.count(name))
      throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    Tensor<T> t = Tensor<T>::param(std::move(shape), std::move(data));
    index_[name] = items_.size();
    items_.push_back({name, t});
    return t;
  }

  Tensor<T> add_zeros(const std::string& name, std::vector<int> shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return add(name, std::move(shape), std::vector<T>(size_t(n), T(0)));
  }

  Tensor<T> add_full(const std::string& name, std::vector<int> shape, T v) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return add(name, std::move(shape), std::vector<T>(size_t(n), v));
  }

  // Uniform(-bound, bound) with bound = sqrt(6 / (fan_in + fan_out)).
  Tensor<T> add_glorot(const std::string& name, int rows, int cols) {
    Rng r = init_rng_.fork(name);
    T bound = T(std::sqrt(6.0 / double(rows + cols)));
    std::vector<T> data(size_t(rows) * cols);
    for (auto& v : data) v = T(r.uniform(-double(bound), double(bound)));
    return add(name, {rows, cols}, std::move(data));
  }

  Tensor<T> add_normal(const std::string& name, std::vector<int> shape,
                       double stddev) {
    Rng r = init_rng_.fork(name);
    int64_t n = 1;
    for (int d : shape) n *= d;
    std::vector<T> data(static_cast<size_t>(n));
    for (auto& v : data) v = T(r.normal() * stddev);
    return add(name, std::move(shape), std::move(data));
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Tensor<T> get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw std::invalid_argument("ParamStore: unknown parameter " + name);
    return items_[it->second].tensor;
  }

  void zero_grad() {
    for (auto& item : items_) {
      auto& g = item.tensor.grad();
      std::fill(g.begin(), g.end(), T(0));
    }
  }

  size_t size() const { return items_.size(); }
  int64_t total_elements() const {
    int64_t n = 0;
    for (const auto& item : items_) n += item.tensor.numel();
    return n;
  }

  struct Item {
    std::string name;
    Tensor<T> tensor;
  };
  const std::vector<Item>& items() const { return items_; }

 private:
  std::vector<Item> items_;
  std::map<std::string, size_t> index_;
  Rng init_rng_;
};

// ---------------------------------------------------------------------------
// Layers. Each layer owns handles to its parameters; apply() builds graph.
// ---------------------------------------------------------------------------

template <typename T>
struct Linear {
  Tensor<T> w;  // [in, out]
  Tensor<T> b;  // [1, out]; absent when built with bias = false

  Linear() = default;
  Linear(ParamStore<T>& ps, const std::string& name, int in, int out,
         bool bias = true) {
    w = ps.add_glorot(name + ".w", in, out);
    if (bias) b = ps.add_zeros(name + ".b", {1, out});
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    Tensor<T> y = ad::matmul(x, w);
    return b.defined() ? ad::add_rowvec(y, b) : y;
  }
};

enum class Act { kNone, kRelu, kGelu, kTanh, kSigmoid };

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Act act) {
  switch (act) {
    case Act::kNone: return x;
    case Act::kRelu: return ad::relu(x);
    case Act::kGelu: return ad::gelu(x);
    case Act::kTanh: return ad::tanh_(x);
    case Act::kSigmoid: return ad::sigmoid(x);
  }
  return x;
}

template <typename T>
struct Mlp {
  std::vector<Linear<T>> layers;
  Act hidden_act = Act::kRelu;
  Act final_act = Act::kNone;

  Mlp() = default;
  Mlp(ParamStore<T>& ps, const std::string& name, std::vector<int> dims,
      Act hidden = Act::kRelu, Act final = Act::kNone)
      : hidden_act(hidden), final_act(final) {
    for (size_t i = 0; i + 1 < dims.size(); ++i)
      layers.emplace_back(ps, name + ".l" + std::to_string(i), dims[i],
                          dims[i + 1]);
  }

  Tensor<T> operator()(Tensor<T> x) const {
    for (size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](x);
      x = activate(x, i + 1 < layers.size() ? hidden_act : final_act);
    }
    return x;
  }
};

template <typename T>
struct LayerNorm {
  Tensor<T> gain;
  Tensor<T> bias;

  LayerNorm() = default;
  LayerNorm(ParamStore<T>& ps, const std::string& name, int d) {
    gain = ps.add_full(name + ".g", {1, d}, T(1));
    bias = ps.add_zeros(name + ".b", {1, d});
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    return ad::layernorm_rows(x, gain, bias);
  }
};

// ---------------------------------------------------------------------------
// GRU. Cho-style gates: z, r, candidate; h' = (1 - z) * h + z * c.
// Gate weights are packed [in, 3h] / [h, 3h] in z|r|c order.
// ---------------------------------------------------------------------------

template <typename T>
struct GruCell {
  Tensor<T> wx;  // [in, 3h]
  Tensor<T> wh;  // [h, 3h]
  Tensor<T> b;   // [1, 3h]
  int hidden = 0;

  GruCell() = default;
  GruCell(ParamStore<T>& ps, const std::string& name, int in, int h)
      : hidden(h) {
    wx = ps.add_glorot(name + ".wx", in, 3 * h);
    wh = ps.add_glorot(name + ".wh", h, 3 * h);
    b = ps.add_zeros(name + ".b", {1, 3 * h});
  }

  Tensor<T> step(const Tensor<T>& x, const Tensor<T>& h) const {
    Tensor<T> gx = ad::add_rowvec(ad::matmul(x, wx), b);
    Tensor<T> gh = ad::matmul(h, wh);
    Tensor<T> z = ad::sigmoid(ad::add(ad::slice_cols(gx, 0, hidden),
                                      ad::slice_cols(gh, 0, hidden)));
    Tensor<T> r = ad::sigmoid(ad::add(ad::slice_cols(gx, hidden, hidden),
                                      ad::slice_cols(gh, hidden, hidden)));
    Tensor<T> c = ad::tanh_(
        ad::add(ad::slice_cols(gx, 2 * hidden, hidden),
                ad::mul(r, ad::slice_cols(gh, 2 * hidden, hidden))));
    // h' = h + z * (c - h)
    return ad::add(h, ad::mul(z, ad::sub(c, h)));
  }

  Tensor<T> run(const std::vector<Tensor<T>>& seq) const {
    Tensor<T> h = Tensor<T>::zeros({1, hidden});
    for (const auto& x : seq) h = step(x, h);
    return h;
  }
};

// Bidirectional GRU summary: concat(final forward hidden, final backward
// hidden), each of size h, so the output is [1, 2h].
template <typename T>
struct BiGru {
  GruCell<T> fwd;
  GruCell<T> bwd;

  BiGru() = default;
  BiGru(ParamStore<T>& ps, const std::string& name, int in, int h)
      : fwd(ps, name + ".fwd", in, h), bwd(ps, name + ".bwd", in, h) {}

  Tensor<T> operator()(const std::vector<Tensor<T>>& seq) const {
    if (seq.empty()) throw std::invalid_argument("BiGru: empty sequence");
    std::vector<Tensor<T>> rev(seq.rbegin(), seq.rend());
    return ad::concat_cols<T>({fwd.run(seq), bwd.run(rev)});
  }
};

// ---------------------------------------------------------------------------
// Attention.
// ---------------------------------------------------------------------------

// Softmaxed scaled dot-product weights, one row per query.
template <typename T>
Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k) {
  if (q.dim(1) != k.dim(1))
    ad::shape_error("attention_weights", q.shape(), k.shape());
  T inv = T(1) / T(std::sqrt(double(q.dim(1))));
  return ad::softmax_rows(ad::scale(ad::matmul(q, ad::transpose(k)), inv));
}

// Multi-head attention from already-projected q/k/v, all [n|m, d_model].
template <typename T>
Tensor<T> multihead_attention(const Tensor<T>& q, const Tensor<T>& k,
                              const Tensor<T>& v, int heads) {
  int d = q.dim(1);
  if (d % heads != 0)
    throw std::invalid_argument("multihead_attention: d_model " +
                                std::to_string(d) + " not divisible by " +
                                std::to_string(heads) + " heads");
  int dh = d / heads;
  std::vector<Tensor<T>> outs;
  outs.reserve(size_t(heads));
  for (int h = 0; h < heads; ++h) {
    Tensor<T> qh = ad::slice_cols(q, h * dh, dh);
    Tensor<T> kh = ad::slice_cols(k, h * dh, dh);
    Tensor<T> vh = ad::slice_cols(v, h * dh, dh);
    outs.push_back(ad::matmul(attention_weights(qh, kh), vh));
  }
  return ad::concat_cols(outs);
}

// Pre-norm transformer block: self-attention, optional cross-attention over
// conditioning tokens, feed-forward; residual around each. No causal mask —
// decoding is round-based, every token may attend to every other.
template <typename T>
struct AttentionBlock {
  int heads = 1;
  LayerNorm<T> ln_self;
  Linear<T> q_self, k_self, v_self, o_self;
  bool has_cross = false;
  LayerNorm<T> ln_cross;
  Linear<T> q_cross, k_cross, v_cross, o_cross;
  LayerNorm<T> ln_ffn;
  Linear<T> ffn1, ffn2;

  AttentionBlock() = default;
  AttentionBlock(ParamStore<T>& ps, const std::string& name, int d, int heads_,
                 int ffn_dim, bool cross)
      : heads(heads_), has_cross(cross) {
    ln_self = LayerNorm<T>(ps, name + ".ln1", d);
    q_self = Linear<T>(ps, name + ".sa.q", d, d);
    k_self = Linear<T>(ps, name + ".sa.k", d, d, /*bias=*/false);
    v_self = Linear<T>(ps, name + ".sa.v", d, d);
    o_self = Linear<T>(ps, name + ".sa.o", d, d);
    if (cross) {
      ln_cross = LayerNorm<T>(ps, name + ".ln2", d);
      q_cross = Linear<T>(ps, name + ".ca.q", d, d);
      k_cross = Linear<T>(ps, name + ".ca.k", d, d, /*bias=*/false);
      v_cross = Linear<T>(ps, name + ".ca.v", d, d);
      o_cross = Linear<T>(ps, name + ".ca.o", d, d);
    }
    ln_ffn = LayerNorm<T>(ps, name + ".ln3", d);
    ffn1 = Linear<T>(ps, name + ".ffn.l0", d, ffn_dim);
    ffn2 = Linear<T>(ps, name + ".ffn.l1", ffn_dim, d);
  }

  // ctx may be undefined or have zero rows; the cross term is then zero.
  Tensor<T> operator()(Tensor<T> x, const std::optional<Tensor<T>>& ctx) const {
    {
      Tensor<T> h = ln_self(x);
      x = ad::add(x, o_self(multihead_attention(q_self(h), k_self(h),
                                                v_self(h), heads)));
    }
    if (has_cross && ctx && ctx->dim(0) > 0) {
      Tensor<T> h = ln_cross(x);
      x = ad::add(x, o_cross(multihead_attention(q_cross(h), k_cross(*ctx),
                                                 v_cross(*ctx), heads)));
    }
    {
      Tensor<T> h = ln_ffn(x);
      x = ad::add(x, ffn2(ad::gelu(ffn1(h))));
    }
    return x;
  }
};

// ---------------------------------------------------------------------------
// AdamW: Adam moments with decoupled weight decay.
// ---------------------------------------------------------------------------

template <typename T>
class AdamW {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  AdamW(ParamStore<T>& ps, Options opt) : ps_(ps), opt_(opt) {
    m_.resize(ps.size());
    v_.resize(ps.size());
    for (size_t i = 0; i < ps.size(); ++i) {
      m_[i].assign(size_t(ps.items()[i].tensor.numel()), 0.0);
      v_[i].assign(size_t(ps.items()[i].tensor.numel()), 0.0);
    }
  }

  void step() {
    ++t_;
    double bc1 = 1.0 - std::pow(opt_.beta1, double(t_));
    double bc2 = 1.0 - std::pow(opt_.beta2, double(t_));
    for (size_t i = 0; i < ps_.size(); ++i) {
      auto tensor = ps_.items()[i].tensor;
      auto& val = tensor.value();
      auto& grad = tensor.grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (size_t j = 0; j < val.size(); ++j) {
        double g = double(grad[j]);
        m[j] = opt_.beta1 * m[j] + (1.0 - opt_.beta1) * g;
        v[j] = opt_.beta2 * v[j] + (1.0 - opt_.beta2) * g * g;
        double mh = m[j] / bc1;
        double vh = v[j] / bc2;
        double upd = mh / (std::sqrt(vh) + opt_.eps);
        double x = double(val[j]);
        x -= opt_.lr * (upd + opt_.weight_decay * x);
        val[j] = T(x);
      }
    }
  }

  void set_lr(double lr) { opt_.lr = lr; }
  double lr() const { return opt_.lr; }
  int64_t steps_taken() const { return t_; }

 private:
  ParamStore<T>& ps_;
  Options opt_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace artkit::nn
