#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "artkit/rng.hpp"

namespace artkit::ad {

template <typename T>
class Tensor;

template <typename T>
struct TensorNode {
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated on demand, same length as value
  bool requires_grad = false;
  std::vector<Tensor<T>> parents;
  std::function<void(TensorNode<T>&)> backward_fn;

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

[[noreturn]] inline void shape_error(const std::string& op,
                                     const std::vector<int>& a,
                                     const std::vector<int>& b) {
  throw std::invalid_argument(op + ": shape mismatch " + shape_str(a) +
                              " vs " + shape_str(b));
}

// Handle to a node in the dynamically built computation graph. Cheap to copy;
// graphs are rebuilt every step and freed when the last handle drops.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode<T>> n) : n_(std::move(n)) {}

  static Tensor constant(std::vector<int> shape, std::vector<T> data) {
    auto n = std::make_shared<TensorNode<T>>();
    int64_t want = 1;
    for (int d : shape) want *= d;
    if (int64_t(data.size()) != want)
      throw std::invalid_argument("Tensor: data size " +
                                  std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
    n->shape = std::move(shape);
    n->value = std::move(data);
    return Tensor(std::move(n));
  }

  static Tensor zeros(std::vector<int> shape) {
    int64_t want = 1;
    for (int d : shape) want *= d;
    return constant(std::move(shape), std::vector<T>(size_t(want), T(0)));
  }

  static Tensor full(std::vector<int> shape, T v) {
    int64_t want = 1;
    for (int d : shape) want *= d;
    return constant(std::move(shape), std::vector<T>(size_t(want), v));
  }

  static Tensor scalar_of(T v) { return constant({1, 1}, {v}); }

  // Leaf with requires_grad set; used for trainable parameters.
  static Tensor param(std::vector<int> shape, std::vector<T> data) {
    Tensor t = constant(std::move(shape), std::move(data));
    t.n_->requires_grad = true;
    return t;
  }

  bool defined() const { return bool(n_); }
  const std::vector<int>& shape() const { return n_->shape; }
  int dim(int i) const { return n_->shape[size_t(i)]; }
  int rank() const { return int(n_->shape.size()); }
  int64_t numel() const { return n_->numel(); }
  bool requires_grad() const { return n_->requires_grad; }

  std::vector<T>& value() { return n_->value; }
  const std::vector<T>& value() const { return n_->value; }
  std::vector<T>& grad() {
    n_->ensure_grad();
    return n_->grad;
  }
  const std::vector<T>& grad() const { return n_->grad; }

  T item() const {
    if (n_->value.size() != 1)
      throw std::invalid_argument("item(): tensor has " +
                                  std::to_string(n_->value.size()) +
                                  " elements");
    return n_->value[0];
  }

  T operator()(int r, int c) const {
    return n_->value[size_t(r) * size_t(n_->shape[1]) + size_t(c)];
  }

  std::shared_ptr<TensorNode<T>> node() const { return n_; }

 private:
  std::shared_ptr<TensorNode<T>> n_;
};

// Builds a graph node. backward_fn receives the finished node (with .grad
// populated) and must accumulate into parents' grads.
template <typename T>
Tensor<T> make_op(std::vector<int> shape, std::vector<T> value,
                  std::vector<Tensor<T>> parents,
                  std::function<void(TensorNode<T>&)> backward_fn) {
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p.requires_grad()) n->requires_grad = true;
  if (n->requires_grad) n->backward_fn = std::move(backward_fn);
  return Tensor<T>(std::move(n));
}

namespace detail {

template <typename T>
void topo_order(TensorNode<T>* root, std::vector<TensorNode<T>*>& order) {
  std::unordered_set<TensorNode<T>*> seen;
  std::vector<std::pair<TensorNode<T>*, size_t>> stack;
  stack.push_back({root, 0});
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      TensorNode<T>* p = node->parents[idx].node().get();
      ++idx;
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

template <typename T>
using EMat =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using EMap = Eigen::Map<EMat<T>>;
template <typename T>
using ECMap = Eigen::Map<const EMat<T>>;

}  // namespace detail

// Reverse-mode sweep. `loss` must be scalar.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                shape_str(loss.shape()));
  if (!loss.requires_grad()) return;
  std::vector<TensorNode<T>*> order;
  detail::topo_order(loss.node().get(), order);
  for (auto* n : order) n->ensure_grad();
  loss.node()->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode<T>* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise and shape ops. All model tensors are rank-2 row-major;
// vectors travel as [1, d] and scalars as [1, 1].
// ---------------------------------------------------------------------------

template <typename T>
void require_rank2(const Tensor<T>& a, const char* op) {
  if (a.rank() != 2)
    throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got " +
                                shape_str(a.shape()));
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
  std::vector<T> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_op<T>(a.shape(), std::move(out), {a, b}, [](TensorNode<T>& n) {
    for (int k = 0; k < 2; ++k) {
      auto& p = *n.parents[size_t(k)].node();
      if (!p.requires_grad) continue;
      p.ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
    }
  });
}

// a: [n, d], row: [1, d]; broadcasts the row over all rows of a.
template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& a, const Tensor<T>& row) {
  require_rank2(a, "add_rowvec");
  if (row.rank() != 2 || row.dim(0) != 1 || row.dim(1) != a.dim(1))
    shape_error("add_rowvec", a.shape(), row.shape());
  int n = a.dim(0), d = a.dim(1);
  std::vector<T> out(a.value().size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      out[size_t(i) * d + j] = a.value()[size_t(i) * d + j] + row.value()[size_t(j)];
  return make_op<T>(a.shape(), std::move(out), {a, row},
                    [n, d](TensorNode<T>& g) {
                      auto& pa = *g.parents[0].node();
                      auto& pr = *g.parents[1].node();
                      if (pa.requires_grad) {
                        pa.ensure_grad();
                        for (size_t i = 0; i < g.grad.size(); ++i)
                          pa.grad[i] += g.grad[i];
                      }
                      if (pr.requires_grad) {
                        pr.ensure_grad();
                        for (int i = 0; i < n; ++i)
                          for (int j = 0; j < d; ++j)
                            pr.grad[size_t(j)] += g.grad[size_t(i) * d + j];
                      }
                    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_error("sub", a.shape(), b.shape());
  std::vector<T> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_op<T>(a.shape(), std::move(out), {a, b}, [](TensorNode<T>& n) {
    auto& pa = *n.parents[0].node();
    auto& pb = *n.parents[1].node();
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  std::vector<T> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_op<T>(a.shape(), std::move(out), {a, b}, [](TensorNode<T>& n) {
    auto& pa = *n.parents[0].node();
    auto& pb = *n.parents[1].node();
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i)
        pa.grad[i] += n.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (size_t i = 0; i < n.grad.size(); ++i)
        pb.grad[i] += n.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  std::vector<T> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * s;
  return make_op<T>(a.shape(), std::move(out), {a}, [s](TensorNode<T>& n) {
    auto& p = *n.parents[0].node();
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * s;
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  std::vector<T> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + s;
  return make_op<T>(a.shape(), std::move(out), {a}, [](TensorNode<T>& n) {
    auto& p = *n.parents[0].node();
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
  });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return scale(a, T(-1));
}

template <typename T, typename FwdFn, typename DerivFn>
Tensor<T> unary_elementwise(const Tensor<T>& a, FwdFn f, DerivFn dfdx) {
  std::vector<T> out(a.value().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = f(a.value()[i]);
  return make_op<T>(a.shape(), std::move(out), {a}, [dfdx](TensorNode<T>& n) {
    auto& p = *n.parents[0].node();
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i)
      p.grad[i] += n.grad[i] * dfdx(p.value[i], n.value[i]);
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return unary_elementwise(
      a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary_elementwise(
      a,
      [](T x) {
        return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                         : std::exp(x) / (T(1) + std::exp(x));
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh_(const Tensor<T>& a) {
  return unary_elementwise(a, [](T x) { return std::tanh(x); },
                           [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> exp_(const Tensor<T>& a) {
  return unary_elementwise(a, [](T x) { return std::exp(x); },
                           [](T, T y) { return y; });
}

template <typename T>
Tensor<T> abs_(const Tensor<T>& a) {
  return unary_elementwise(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

// Tanh-approximation GELU, built from primitives so the gradient follows.
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  const T c = T(0.7978845608028654);  // sqrt(2/pi)
  Tensor<T> x3 = mul(mul(a, a), a);
  Tensor<T> inner = scale(add(a, scale(x3, T(0.044715))), c);
  Tensor<T> t = tanh_(inner);
  return scale(mul(a, add_scalar(t, T(1))), T(0.5));
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.dim(1) != b.dim(0)) shape_error("matmul", a.shape(), b.shape());
  int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(size_t(m) * n);
  {
    detail::ECMap<T> A(a.value().data(), m, k), B(b.value().data(), k, n);
    detail::EMap<T> C(out.data(), m, n);
    C.noalias() = A * B;
  }
  return make_op<T>({m, n}, std::move(out), {a, b},
                    [m, k, n](TensorNode<T>& g) {
                      auto& pa = *g.parents[0].node();
                      auto& pb = *g.parents[1].node();
                      detail::ECMap<T> A(pa.value.data(), m, k);
                      detail::ECMap<T> B(pb.value.data(), k, n);
                      detail::ECMap<T> dC(g.grad.data(), m, n);
                      if (pa.requires_grad) {
                        pa.ensure_grad();
                        detail::EMap<T> dA(pa.grad.data(), m, k);
                        dA.noalias() += dC * B.transpose();
                      }
                      if (pb.requires_grad) {
                        pb.ensure_grad();
                        detail::EMap<T> dB(pb.grad.data(), k, n);
                        dB.noalias() += A.transpose() * dC;
                      }
                    });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank2(a, "transpose");
  int m = a.dim(0), n = a.dim(1);
  std::vector<T> out(size_t(m) * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[size_t(j) * m + i] = a.value()[size_t(i) * n + j];
  return make_op<T>({n, m}, std::move(out), {a}, [m, n](TensorNode<T>& g) {
    auto& p = *g.parents[0].node();
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        p.grad[size_t(i) * n + j] += g.grad[size_t(j) * m + i];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, std::vector<int> shape) {
  int64_t want = 1;
  for (int d : shape) want *= d;
  if (want != a.numel()) shape_error("reshape", a.shape(), shape);
  std::vector<T> out = a.value();
  return make_op<T>(std::move(shape), std::move(out), {a},
                    [](TensorNode<T>& g) {
                      auto& p = *g.parents[0].node();
                      if (!p.requires_grad) return;
                      p.ensure_grad();
                      for (size_t i = 0; i < g.grad.size(); ++i)
                        p.grad[i] += g.grad[i];
                    });
}

// Row-wise softmax over the last dimension.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a) {
  require_rank2(a, "softmax_rows");
  int n = a.dim(0), d = a.dim(1);
  std::vector<T> out(a.value().size());
  for (int i = 0; i < n; ++i) {
    const T* row = a.value().data() + size_t(i) * d;
    T mx = row[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (int j = 0; j < d; ++j) {
      out[size_t(i) * d + j] = std::exp(row[j] - mx);
      sum += out[size_t(i) * d + j];
    }
    for (int j = 0; j < d; ++j) out[size_t(i) * d + j] /= sum;
  }
  return make_op<T>(a.shape(), std::move(out), {a}, [n, d](TensorNode<T>& g) {
    auto& p = *g.parents[0].node();
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int i = 0; i < n; ++i) {
      const T* y = g.value.data() + size_t(i) * d;
      const T* dy = g.grad.data() + size_t(i) * d;
      T dot = T(0);
      for (int j = 0; j < d; ++j) dot += dy[j] * y[j];
      T* dx = p.grad.data() + size_t(i) * d;
      for (int j = 0; j < d; ++j) dx[j] += y[j] * (dy[j] - dot);
    }
  });
}

template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& a) {
  require_rank2(a, "log_softmax_rows");
  int n = a.dim(0), d = a.dim(1);
  std::vector<T> out(a.value().size());
  for (int i = 0; i < n; ++i) {
    const T* row = a.value().data() + size_t(i) * d;
    T mx = row[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (int j = 0; j < d; ++j) sum += std::exp(row[j] - mx);
    T lse = mx + std::log(sum);
    for (int j = 0; j < d; ++j) out[size_t(i) * d + j] = row[j] - lse;
  }
  return make_op<T>(a.shape(), std::move(out), {a}, [n, d](TensorNode<T>& g) {
    auto& p = *g.parents[0].node();
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int i = 0; i < n; ++i) {
      const T* ly = g.value.data() + size_t(i) * d;
      const T* dy = g.grad.data() + size_t(i) * d;
      T sum_dy = T(0);
      for (int j = 0; j < d; ++j) sum_dy += dy[j];
      T* dx = p.grad.data() + size_t(i) * d;
      for (int j = 0; j < d; ++j) dx[j] += dy[j] - std::exp(ly[j]) * sum_dy;
    }
  });
}

// Row-wise layer norm with learned gain/bias (each [1, d]).
template <typename T>
Tensor<T> layernorm_rows(const Tensor<T>& a, const Tensor<T>& gain,
                         const Tensor<T>& bias, T eps = T(1e-5)) {
  require_rank2(a, "layernorm_rows");
  int n = a.dim(0), d = a.dim(1);
  if (gain.numel() != d || bias.numel() != d)
    shape_error("layernorm_rows", a.shape(), gain.shape());
  std::vector<T> out(a.value().size());
  std::vector<T> xhat(a.value().size());
  std::vector<T> inv_std(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const T* row = a.value().data() + size_t(i) * d;
    T mean = T(0);
    for (int j = 0; j < d; ++j) mean += row[j];
    mean /= T(d);
    T var = T(0);
    for (int j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= T(d);
    T is = T(1) / std::sqrt(var + eps);
    inv_std[size_t(i)] = is;
    for (int j = 0; j < d; ++j) {
      T xh = (row[j] - mean) * is;
      xhat[size_t(i) * d + j] = xh;
      out[size_t(i) * d + j] = xh * gain.value()[size_t(j)] + bias.value()[size_t(j)];
    }
  }
  return make_op<T>(
      a.shape(), std::move(out), {a, gain, bias},
      [n, d, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](TensorNode<T>& g) {
        auto& px = *g.parents[0].node();
        auto& pg = *g.parents[1].node();
        auto& pb = *g.parents[2].node();
        if (pg.requires_grad) {
          pg.ensure_grad();
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j)
              pg.grad[size_t(j)] +=
                  g.grad[size_t(i) * d + j] * xhat[size_t(i) * d + j];
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j)
              pb.grad[size_t(j)] += g.grad[size_t(i) * d + j];
        }
        if (px.requires_grad) {
          px.ensure_grad();
          for (int i = 0; i < n; ++i) {
            const T* dy = g.grad.data() + size_t(i) * d;
            const T* xh = xhat.data() + size_t(i) * d;
            T sum_dyg = T(0), sum_dyg_xh = T(0);
            for (int j = 0; j < d; ++j) {
              T dyg = dy[j] * pg.value[size_t(j)];
              sum_dyg += dyg;
              sum_dyg_xh += dyg * xh[j];
            }
            T* dx = px.grad.data() + size_t(i) * d;
            T is = inv_std[size_t(i)];
            for (int j = 0; j < d; ++j) {
              T dyg = dy[j] * pg.value[size_t(j)];
              dx[j] += is * (dyg - sum_dyg / T(d) - xh[j] * sum_dyg_xh / T(d));
            }
          }
        }
      });
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty list");
  int d = parts[0].dim(1), total = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.dim(1) != d) shape_error("concat_rows", parts[0].shape(), p.shape());
    total += p.dim(0);
  }
  std::vector<T> out;
  out.reserve(size_t(total) * d);
  for (const auto& p : parts)
    out.insert(out.end(), p.value().begin(), p.value().end());
  return make_op<T>({total, d}, std::move(out), parts, [d](TensorNode<T>& g) {
    size_t off = 0;
    for (auto& parent : g.parents) {
      auto& p = *parent.node();
      size_t len = p.value.size();
      if (p.requires_grad) {
        p.ensure_grad();
        for (size_t i = 0; i < len; ++i) p.grad[i] += g.grad[off + i];
      }
      off += len;
    }
    (void)d;
  });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty list");
  int n = parts[0].dim(0), total = 0;
  std::vector<int> widths;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.dim(0) != n) shape_error("concat_cols", parts[0].shape(), p.shape());
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<T> out(size_t(n) * total);
  int col = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    int w = widths[k];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < w; ++j)
        out[size_t(i) * total + col + j] = parts[k].value()[size_t(i) * w + j];
    col += w;
  }
  return make_op<T>({n, total}, std::move(out), parts,
                    [n, total, widths](TensorNode<T>& g) {
                      int col = 0;
                      for (size_t k = 0; k < g.parents.size(); ++k) {
                        auto& p = *g.parents[k].node();
                        int w = widths[k];
                        if (p.requires_grad) {
                          p.ensure_grad();
                          for (int i = 0; i < n; ++i)
                            for (int j = 0; j < w; ++j)
                              p.grad[size_t(i) * w + j] +=
                                  g.grad[size_t(i) * total + col + j];
                        }
                        col += w;
                      }
                    });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, int start, int len) {
  require_rank2(a, "slice_rows");
  int n = a.dim(0), d = a.dim(1);
  if (start < 0 || len < 0 || start + len > n)
    throw std::invalid_argument("slice_rows: range [" + std::to_string(start) +
                                "," + std::to_string(start + len) +
                                ") out of " + shape_str(a.shape()));
  std::vector<T> out(a.value().begin() + size_t(start) * d,
                     a.value().begin() + size_t(start + len) * d);
  return make_op<T>({len, d}, std::move(out), {a},
                    [start, d](TensorNode<T>& g) {
                      auto& p = *g.parents[0].node();
                      if (!p.requires_grad) return;
                      p.ensure_grad();
                      for (size_t i = 0; i < g.grad.size(); ++i)
                        p.grad[size_t(start) * d + i] += g.grad[i];
                    });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, int start, int len) {
  require_rank2(a, "slice_cols");
  int n = a.dim(0), d = a.dim(1);
  if (start < 0 || len < 0 || start + len > d)
    throw std::invalid_argument("slice_cols: range [" + std::to_string(start) +
                                "," + std::to_string(start + len) +
                                ") out of " + shape_str(a.shape()));
  std::vector<T> out(size_t(n) * len);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < len; ++j)
      out[size_t(i) * len + j] = a.value()[size_t(i) * d + start + j];
  return make_op<T>({n, len}, std::move(out), {a},
                    [n, d, start, len](TensorNode<T>& g) {
                      auto& p = *g.parents[0].node();
                      if (!p.requires_grad) return;
                      p.ensure_grad();
                      for (int i = 0; i < n; ++i)
                        for (int j = 0; j < len; ++j)
                          p.grad[size_t(i) * d + start + j] +=
                              g.grad[size_t(i) * len + j];
                    });
}

// Row gather (embedding lookup). Backward scatter-adds.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, std::vector<int> indices) {
  require_rank2(a, "gather_rows");
  int n = a.dim(0), d = a.dim(1);
  for (int idx : indices)
    if (idx < 0 || idx >= n)
      throw std::invalid_argument("gather_rows: index " + std::to_string(idx) +
                                  " out of " + shape_str(a.shape()));
  const int out_rows = int(indices.size());
  std::vector<T> out(indices.size() * size_t(d));
  for (size_t i = 0; i < indices.size(); ++i)
    std::copy_n(a.value().begin() + size_t(indices[i]) * d, d,
                out.begin() + i * size_t(d));
  return make_op<T>({out_rows, d}, std::move(out), {a},
                    [d, indices = std::move(indices)](TensorNode<T>& g) {
                      auto& p = *g.parents[0].node();
                      if (!p.requires_grad) return;
                      p.ensure_grad();
                      for (size_t i = 0; i < indices.size(); ++i)
                        for (int j = 0; j < d; ++j)
                          p.grad[size_t(indices[i]) * d + j] +=
                              g.grad[i * size_t(d) + j];
                    });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  T s = T(0);
  for (T v : a.value()) s += v;
  return make_op<T>({1, 1}, {s}, {a}, [](TensorNode<T>& g) {
    auto& p = *g.parents[0].node();
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g.grad[0];
  });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  return scale(sum_all(a), T(1) / T(a.numel()));
}

template <typename T>
Tensor<T> mse(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape())
    shape_error("mse", pred.shape(), target.shape());
  Tensor<T> d = sub(pred, target);
  return mean_all(mul(d, d));
}

template <typename T>
Tensor<T> l1(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape())
    shape_error("l1", pred.shape(), target.shape());
  return mean_all(abs_(sub(pred, target)));
}

// Numerically stable binary cross-entropy on logits; labels are constants.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& labels) {
  if (logits.shape() != labels.shape())
    shape_error("bce_with_logits", logits.shape(), labels.shape());
  if (labels.requires_grad())
    throw std::invalid_argument("bce_with_logits: labels must not require grad");
  size_t n = logits.value().size();
  T total = T(0);
  for (size_t i = 0; i < n; ++i) {
    T x = logits.value()[i], y = labels.value()[i];
    total += std::max(x, T(0)) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  return make_op<T>({1, 1}, {total / T(n)}, {logits, labels},
                    [n](TensorNode<T>& g) {
                      auto& pl = *g.parents[0].node();
                      auto& py = *g.parents[1].node();
                      if (!pl.requires_grad) return;
                      pl.ensure_grad();
                      for (size_t i = 0; i < n; ++i) {
                        T x = pl.value[i], y = py.value[i];
                        T sig = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                                          : std::exp(x) / (T(1) + std::exp(x));
                        pl.grad[i] += g.grad[0] * (sig - y) / T(n);
                      }
                    });
}

// Mean over rows of KL(softmax(p_row) || softmax(q_row)).
template <typename T>
Tensor<T> kl_categorical_rows(const Tensor<T>& p_logits,
                              const Tensor<T>& q_logits) {
  if (p_logits.shape() != q_logits.shape())
    shape_error("kl_categorical_rows", p_logits.shape(), q_logits.shape());
  Tensor<T> p = softmax_rows(p_logits);
  Tensor<T> diff = sub(log_softmax_rows(p_logits), log_softmax_rows(q_logits));
  return scale(sum_all(mul(p, diff)), T(1) / T(p_logits.dim(0)));
}

// Gumbel-Softmax relaxation: softmax((logits + g) / tau) per row. The noise
// tensor carries no gradient; pass zeros to freeze the relaxation.
template <typename T>
Tensor<T> gumbel_softmax(const Tensor<T>& logits, const Tensor<T>& noise,
                         T tau) {
  if (logits.shape() != noise.shape())
    shape_error("gumbel_softmax", logits.shape(), noise.shape());
  if (!(tau > T(0)))
    throw std::invalid_argument("gumbel_softmax: tau must be positive");
  return softmax_rows(scale(add(logits, noise), T(1) / tau));
}

template <typename T>
Tensor<T> gumbel_softmax(const Tensor<T>& logits, T tau, Rng& rng) {
  std::vector<T> g(static_cast<size_t>(logits.numel()));
  for (auto& v : g) v = T(rng.gumbel());
  return gumbel_softmax(logits, Tensor<T>::constant(logits.shape(), std::move(g)),
                        tau);
}

}  // namespace artkit::ad
