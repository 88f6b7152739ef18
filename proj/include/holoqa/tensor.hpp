#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "holoqa/common.hpp"

namespace holoqa {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

template <typename T>
class Tape;

// Shared storage behind a Tensor value. Graph edges (parents, backprop)
// are populated only while a Tape is active and the result needs grad.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }

  void accumulate(const T* g, std::size_t n) {
    auto& dst = ensure_grad();
    for (std::size_t i = 0; i < n; ++i) dst[i] += g[i];
  }
};

// Dense real tensor with value semantics; copies share immutable storage.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (shape_numel(shape) != data.size())
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    node_ = std::make_shared<TensorNode<T>>();
    node_->shape = std::move(shape);
    node_->value = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<T> d(shape_numel(shape), T(0));
    return Tensor(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return Tensor(Shape{1}, std::vector<T>{v}, requires_grad);
  }

  static Tensor vector(std::vector<T> v, bool requires_grad = false) {
    Shape s{v.size()};
    return Tensor(std::move(s), std::move(v), requires_grad);
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<T> data,
                       bool requires_grad = false) {
    return Tensor(Shape{rows, cols}, std::move(data), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  const std::vector<T>& values() const { return node_->value; }

  T at(std::size_t i) const { return node_->value[i]; }

  T item() const {
    if (numel() != 1)
      throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_ && node_->requires_grad; }

  bool has_grad() const { return node_ && !node_->grad.empty(); }

  const std::vector<T>& grad() const {
    if (!has_grad())
      throw ContractError("gradient requested but none accumulated");
    return node_->grad;
  }

  void clear_grad() const {
    if (node_) node_->grad.clear();
  }

  // Raw value mutation for optimizers and finite-difference probes only;
  // tensors are otherwise immutable after construction.
  std::vector<T>& mutable_values() const { return node_->value; }

  std::shared_ptr<TensorNode<T>> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

// Ordered record of the primitive ops of one forward pass. Execution
// order is topological, so walking the record backwards visits every node
// after all of its consumers. One tape per thread; single use.
template <typename T>
class Tape {
 public:
  Tape() {
    if (active_)
      throw ContractError("a tape is already active on this thread");
    active_ = this;
  }

  ~Tape() { active_ = nullptr; }

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return active_; }

  void record(std::shared_ptr<TensorNode<T>> node) {
    records_.push_back(std::move(node));
  }

  std::size_t size() const { return records_.size(); }
  bool consumed() const { return consumed_; }

  // Seeds d(loss)/d(loss) = 1 and replays the record in reverse. A second
  // call without a fresh forward pass is rejected.
  void backward(const Tensor<T>& loss) {
    if (consumed_)
      throw ContractError("backward called twice on the same tape");
    if (!loss.defined() || loss.numel() != 1)
      throw ContractError("backward requires a scalar loss");
    if (records_.empty())
      throw ContractError("backward on an empty tape");
    consumed_ = true;
    loss.node()->ensure_grad();
    loss.node()->grad[0] += T(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      TensorNode<T>& n = **it;
      if (!n.grad.empty() && n.backprop) n.backprop(n);
    }
  }

 private:
  std::vector<std::shared_ptr<TensorNode<T>>> records_;
  bool consumed_ = false;
  inline static thread_local Tape* active_ = nullptr;
};

namespace detail {

// Wires the output into the active tape when any input wants gradients.
template <typename T>
void attach(Tensor<T>& out, std::vector<std::shared_ptr<TensorNode<T>>> parents,
            std::function<void(TensorNode<T>&)> backprop) {
  Tape<T>* tape = Tape<T>::active();
  if (!tape) return;
  bool any = false;
  for (const auto& p : parents)
    if (p->requires_grad) any = true;
  if (!any) return;
  auto n = out.node();
  n->requires_grad = true;
  n->parents = std::move(parents);
  n->backprop = std::move(backprop);
  tape->record(n);
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace detail

// ---- element-wise binary ----

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<T> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) + b.at(i);
  Tensor<T> out(a.shape(), std::move(v));
  detail::attach<T>(out, {a.node(), b.node()}, [an = a.node(), bn = b.node()](TensorNode<T>& o) {
    if (an->requires_grad) an->accumulate(o.grad.data(), o.grad.size());
    if (bn->requires_grad) bn->accumulate(o.grad.data(), o.grad.size());
  });
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<T> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) - b.at(i);
  Tensor<T> out(a.shape(), std::move(v));
  detail::attach<T>(out, {a.node(), b.node()}, [an = a.node(), bn = b.node()](TensorNode<T>& o) {
    if (an->requires_grad) an->accumulate(o.grad.data(), o.grad.size());
    if (bn->requires_grad) {
      auto& dst = bn->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) dst[i] -= o.grad[i];
    }
  });
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<T> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) * b.at(i);
  Tensor<T> out(a.shape(), std::move(v));
  detail::attach<T>(out, {a.node(), b.node()}, [an = a.node(), bn = b.node()](TensorNode<T>& o) {
    if (an->requires_grad) {
      auto& dst = an->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) dst[i] += o.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      auto& dst = bn->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) dst[i] += o.grad[i] * an->value[i];
    }
  });
  return out;
}

// Bias broadcast over the batch axis: M[m x n] + b[n]. The only
// broadcasting form the layer equations need.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& m, const Tensor<T>& b) {
  if (m.rank() != 2 || b.rank() != 1 || m.shape()[1] != b.shape()[0])
    throw DimensionError("add_bias: " + shape_str(m.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t rows = m.shape()[0], cols = m.shape()[1];
  std::vector<T> v(m.numel());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) v[i * cols + j] = m.at(i * cols + j) + b.at(j);
  Tensor<T> out(m.shape(), std::move(v));
  detail::attach<T>(out, {m.node(), b.node()},
                    [mn = m.node(), bn = b.node(), rows, cols](TensorNode<T>& o) {
                      if (mn->requires_grad) mn->accumulate(o.grad.data(), o.grad.size());
                      if (bn->requires_grad) {
                        auto& dst = bn->ensure_grad();
                        for (std::size_t i = 0; i < rows; ++i)
                          for (std::size_t j = 0; j < cols; ++j) dst[j] += o.grad[i * cols + j];
                      }
                    });
  return out;
}

// ---- element-wise unary ----

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> v(x.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = T(1) / (T(1) + std::exp(-x.at(i)));
  Tensor<T> out(x.shape(), std::move(v));
  detail::attach<T>(out, {x.node()}, [xn = x.node()](TensorNode<T>& o) {
    auto& dst = xn->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const T y = o.value[i];
      dst[i] += o.grad[i] * y * (T(1) - y);
    }
  });
  return out;
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& x) {
  std::vector<T> v(x.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(x.at(i));
  Tensor<T> out(x.shape(), std::move(v));
  detail::attach<T>(out, {x.node()}, [xn = x.node()](TensorNode<T>& o) {
    auto& dst = xn->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const T y = o.value[i];
      dst[i] += o.grad[i] * (T(1) - y * y);
    }
  });
  return out;
}

template <typename T>
Tensor<T> log_op(const Tensor<T>& x) {
  std::vector<T> v(x.numel());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(x.at(i) > T(0)))
      throw NumericError("log of non-positive value " + std::to_string(x.at(i)));
    v[i] = std::log(x.at(i));
  }
  Tensor<T> out(x.shape(), std::move(v));
  detail::attach<T>(out, {x.node()}, [xn = x.node()](TensorNode<T>& o) {
    auto& dst = xn->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) dst[i] += o.grad[i] / xn->value[i];
  });
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  std::vector<T> v(x.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = x.at(i) * c;
  Tensor<T> out(x.shape(), std::move(v));
  detail::attach<T>(out, {x.node()}, [xn = x.node(), c](TensorNode<T>& o) {
    auto& dst = xn->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) dst[i] += o.grad[i] * c;
  });
  return out;
}

// Pass-through gradient strictly inside [lo, hi], zero outside.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  std::vector<T> v(x.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::min(hi, std::max(lo, x.at(i)));
  Tensor<T> out(x.shape(), std::move(v));
  detail::attach<T>(out, {x.node()}, [xn = x.node(), lo, hi](TensorNode<T>& o) {
    auto& dst = xn->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      if (xn->value[i] > lo && xn->value[i] < hi) dst[i] += o.grad[i];
  });
  return out;
}

// ---- reductions ----

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) s += x.at(i);
  Tensor<T> out = Tensor<T>::scalar(s);
  detail::attach<T>(out, {x.node()}, [xn = x.node()](TensorNode<T>& o) {
    auto& dst = xn->ensure_grad();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += o.grad[0];
  });
  return out;
}

template <typename T>
Tensor<T> dot(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "dot");
  T s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.at(i) * b.at(i);
  Tensor<T> out = Tensor<T>::scalar(s);
  detail::attach<T>(out, {a.node(), b.node()}, [an = a.node(), bn = b.node()](TensorNode<T>& o) {
    const T g = o.grad[0];
    if (an->requires_grad) {
      auto& dst = an->ensure_grad();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g * bn->value[i];
    }
    if (bn->requires_grad) {
      auto& dst = bn->ensure_grad();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g * an->value[i];
    }
  });
  return out;
}

// ---- linear algebra ----

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<T> v(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a.at(i * k + p);
      for (std::size_t j = 0; j < n; ++j) v[i * n + j] += aip * b.at(p * n + j);
    }
  Tensor<T> out(Shape{m, n}, std::move(v));
  detail::attach<T>(out, {a.node(), b.node()},
                    [an = a.node(), bn = b.node(), m, k, n](TensorNode<T>& o) {
                      if (an->requires_grad) {
                        auto& dst = an->ensure_grad();
                        // dA = dC . B^T
                        for (std::size_t i = 0; i < m; ++i)
                          for (std::size_t p = 0; p < k; ++p) {
                            T s = 0;
                            for (std::size_t j = 0; j < n; ++j)
                              s += o.grad[i * n + j] * bn->value[p * n + j];
                            dst[i * k + p] += s;
                          }
                      }
                      if (bn->requires_grad) {
                        auto& dst = bn->ensure_grad();
                        // dB = A^T . dC
                        for (std::size_t p = 0; p < k; ++p)
                          for (std::size_t j = 0; j < n; ++j) {
                            T s = 0;
                            for (std::size_t i = 0; i < m; ++i)
                              s += an->value[i * k + p] * o.grad[i * n + j];
                            dst[p * n + j] += s;
                          }
                      }
                    });
  return out;
}

// A[m x k] . x[k] -> [m]
template <typename T>
Tensor<T> matvec(const Tensor<T>& a, const Tensor<T>& x) {
  if (a.rank() != 2 || x.rank() != 1 || a.shape()[1] != x.shape()[0])
    throw DimensionError("matvec: incompatible shapes " + shape_str(a.shape()) +
                         " vs " + shape_str(x.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  std::vector<T> v(m, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    T s = 0;
    const T* row = a.values().data() + i * k;
    for (std::size_t j = 0; j < k; ++j) s += row[j] * x.at(j);
    v[i] = s;
  }
  Tensor<T> out(Shape{m}, std::move(v));
  detail::attach<T>(out, {a.node(), x.node()},
                    [an = a.node(), xn = x.node(), m, k](TensorNode<T>& o) {
                      if (an->requires_grad) {
                        auto& dst = an->ensure_grad();
                        for (std::size_t i = 0; i < m; ++i)
                          for (std::size_t j = 0; j < k; ++j)
                            dst[i * k + j] += o.grad[i] * xn->value[j];
                      }
                      if (xn->requires_grad) {
                        auto& dst = xn->ensure_grad();
                        for (std::size_t i = 0; i < m; ++i) {
                          const T g = o.grad[i];
                          const T* row = an->value.data() + i * k;
                          for (std::size_t j = 0; j < k; ++j) dst[j] += g * row[j];
                        }
                      }
                    });
  return out;
}

// x[k] . A[k x n] -> [n]
template <typename T>
Tensor<T> vecmat(const Tensor<T>& x, const Tensor<T>& a) {
  if (a.rank() != 2 || x.rank() != 1 || a.shape()[0] != x.shape()[0])
    throw DimensionError("vecmat: incompatible shapes " + shape_str(x.shape()) +
                         " vs " + shape_str(a.shape()));
  const std::size_t k = a.shape()[0], n = a.shape()[1];
  std::vector<T> v(n, T(0));
  for (std::size_t i = 0; i < k; ++i) {
    const T xi = x.at(i);
    const T* row = a.values().data() + i * n;
    for (std::size_t j = 0; j < n; ++j) v[j] += xi * row[j];
  }
  Tensor<T> out(Shape{n}, std::move(v));
  detail::attach<T>(out, {x.node(), a.node()},
                    [xn = x.node(), an = a.node(), k, n](TensorNode<T>& o) {
                      if (xn->requires_grad) {
                        auto& dst = xn->ensure_grad();
                        for (std::size_t i = 0; i < k; ++i) {
                          T s = 0;
                          const T* row = an->value.data() + i * n;
                          for (std::size_t j = 0; j < n; ++j) s += o.grad[j] * row[j];
                          dst[i] += s;
                        }
                      }
                      if (an->requires_grad) {
                        auto& dst = an->ensure_grad();
                        for (std::size_t i = 0; i < k; ++i)
                          for (std::size_t j = 0; j < n; ++j)
                            dst[i * n + j] += xn->value[i] * o.grad[j];
                      }
                    });
  return out;
}

// ---- structure ----

template <typename T>
Tensor<T> row(const Tensor<T>& m, std::size_t i) {
  if (m.rank() != 2)
    throw DimensionError("row: expected rank-2, got " + shape_str(m.shape()));
  const std::size_t rows = m.shape()[0], cols = m.shape()[1];
  if (i >= rows)
    throw DimensionError("row: index " + std::to_string(i) + " out of range for " +
                         shape_str(m.shape()));
  std::vector<T> v(m.values().begin() + i * cols, m.values().begin() + (i + 1) * cols);
  Tensor<T> out(Shape{cols}, std::move(v));
  detail::attach<T>(out, {m.node()}, [mn = m.node(), i, cols](TensorNode<T>& o) {
    auto& dst = mn->ensure_grad();
    for (std::size_t j = 0; j < cols; ++j) dst[i * cols + j] += o.grad[j];
  });
  return out;
}

template <typename T>
Tensor<T> element(const Tensor<T>& x, std::size_t i) {
  if (i >= x.numel())
    throw DimensionError("element: index " + std::to_string(i) + " out of range for " +
                         shape_str(x.shape()));
  Tensor<T> out = Tensor<T>::scalar(x.at(i));
  detail::attach<T>(out, {x.node()}, [xn = x.node(), i](TensorNode<T>& o) {
    auto& dst = xn->ensure_grad();
    dst[i] += o.grad[0];
  });
  return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != 1)
      throw DimensionError("concat expects rank-1 parts, got " + shape_str(p.shape()));
    total += p.numel();
  }
  std::vector<T> v;
  v.reserve(total);
  std::vector<std::shared_ptr<TensorNode<T>>> nodes;
  nodes.reserve(parts.size());
  for (const auto& p : parts) {
    v.insert(v.end(), p.values().begin(), p.values().end());
    nodes.push_back(p.node());
  }
  Tensor<T> out(Shape{total}, std::move(v));
  detail::attach<T>(out, nodes, [nodes](TensorNode<T>& o) {
    std::size_t off = 0;
    for (const auto& p : nodes) {
      if (p->requires_grad) p->accumulate(o.grad.data() + off, p->value.size());
      off += p->value.size();
    }
  });
  return out;
}

template <typename T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows_in) {
  if (rows_in.empty()) throw DimensionError("stack_rows of zero tensors");
  const std::size_t cols = rows_in.front().numel();
  std::vector<T> v;
  v.reserve(rows_in.size() * cols);
  std::vector<std::shared_ptr<TensorNode<T>>> nodes;
  for (const auto& r : rows_in) {
    if (r.rank() != 1 || r.numel() != cols)
      throw DimensionError("stack_rows: inconsistent row " + shape_str(r.shape()));
    v.insert(v.end(), r.values().begin(), r.values().end());
    nodes.push_back(r.node());
  }
  Tensor<T> out(Shape{rows_in.size(), cols}, std::move(v));
  detail::attach<T>(out, nodes, [nodes, cols](TensorNode<T>& o) {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i]->requires_grad) nodes[i]->accumulate(o.grad.data() + i * cols, cols);
  });
  return out;
}

// Numerically stabilized softmax over a rank-1 tensor.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  if (x.rank() != 1) throw DimensionError("softmax expects rank-1 input");
  T mx = x.at(0);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (std::isnan(x.at(i)) || std::isinf(x.at(i)))
      throw NumericError("softmax over non-finite logits");
    mx = std::max(mx, x.at(i));
  }
  std::vector<T> v(x.numel());
  T z = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = std::exp(x.at(i) - mx);
    z += v[i];
  }
  for (auto& e : v) e /= z;
  Tensor<T> out(x.shape(), std::move(v));
  detail::attach<T>(out, {x.node()}, [xn = x.node()](TensorNode<T>& o) {
    T inner = 0;
    for (std::size_t j = 0; j < o.grad.size(); ++j) inner += o.grad[j] * o.value[j];
    auto& dst = xn->ensure_grad();
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] += o.value[i] * (o.grad[i] - inner);
  });
  return out;
}

// ---- gradient verification ----

// Max over elements of |analytic - central difference| / max(1, |analytic|)
// for d(f)/d(params). Evaluates f twice up front and rejects
// non-deterministic closures.
template <typename T>
T finite_difference_check_params(const std::function<Tensor<T>()>& f,
                                 const std::vector<Tensor<T>>& params, T step) {
  if (!(step > T(0))) throw ContractError("finite difference step must be positive");
  const T base1 = f().item();
  const T base2 = f().item();
  if (base1 != base2)
    throw ContractError("finite_difference_check: non-deterministic function");

  for (const auto& p : params) p.clear_grad();
  std::vector<std::vector<T>> analytic;
  {
    Tape<T> tape;
    Tensor<T> loss = f();
    tape.backward(loss);
    for (const auto& p : params)
      analytic.push_back(p.has_grad() ? p.grad() : std::vector<T>(p.numel(), T(0)));
  }
  for (const auto& p : params) p.clear_grad();

  T worst = 0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& vals = params[pi].mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const T keep = vals[i];
      vals[i] = keep + step;
      const T up = f().item();
      vals[i] = keep - step;
      const T dn = f().item();
      vals[i] = keep;
      const T numeric = (up - dn) / (2 * step);
      const T a = analytic[pi][i];
      const T rel = std::abs(a - numeric) / std::max(T(1), std::abs(a));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

template <typename T>
T finite_difference_check(const std::function<Tensor<T>(const Tensor<T>&)>& f,
                          const Tensor<T>& x, T step) {
  Tensor<T> probe(x.shape(), x.values(), true);
  return finite_difference_check_params<T>([&] { return f(probe); }, {probe}, step);
}

}  // namespace holoqa
