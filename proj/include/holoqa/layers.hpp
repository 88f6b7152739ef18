#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "holoqa/common.hpp"
#include "holoqa/holo.hpp"
#include "holoqa/rng.hpp"
#include "holoqa/tensor.hpp"

namespace holoqa {

// Uniform Glorot init: ±sqrt(6/(fan_in+fan_out)); biases start at zero
// except the forget gate, which starts at one.
template <typename T>
Tensor<T> glorot_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<T> v(rows * cols);
  for (auto& e : v) e = static_cast<T>(rng.uniform(-r, r));
  return Tensor<T>::matrix(rows, cols, std::move(v), true);
}

template <typename T>
Tensor<T> const_vector(std::size_t n, T fill, bool requires_grad = true) {
  return Tensor<T>(Shape{n}, std::vector<T>(n, fill), requires_grad);
}

// ---- embedding ----

// |V| x n lookup table. Row 0 is the padding vector: forced to zero and,
// like every other row, never updated (the encoder treats embeddings as
// fixed inputs).
template <typename T>
struct EmbeddingTable {
  Tensor<T> table;  // [|V| x n], never requires grad
  bool trainable = false;

  EmbeddingTable(std::size_t vocab, std::size_t dim, std::vector<T> data,
                 bool trainable_in = false) {
    if (trainable_in)
      throw ConfigError("embedding table is non-trainable in this architecture");
    table = Tensor<T>::matrix(vocab, dim, std::move(data));
    auto& vals = table.mutable_values();
    for (std::size_t j = 0; j < dim; ++j) vals[j] = T(0);
  }

  std::size_t vocab_size() const { return table.shape()[0]; }
  std::size_t dim() const { return table.shape()[1]; }
};

template <typename T>
Tensor<T> embed(const std::vector<std::size_t>& token_ids,
                const EmbeddingTable<T>& table) {
  const std::size_t n = table.dim();
  std::vector<T> out(token_ids.size() * n);
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    if (token_ids[i] >= table.vocab_size())
      throw VocabularyError("token id " + std::to_string(token_ids[i]) +
                            " out of range at position " + std::to_string(i));
    const T* src = table.table.values().data() + token_ids[i] * n;
    std::copy(src, src + n, out.begin() + i * n);
  }
  return Tensor<T>::matrix(token_ids.size(), n, std::move(out));
}

// ---- LSTM ----

template <typename T>
struct LstmLayerParams {
  Tensor<T> W_i, W_f, W_c, W_o;  // [d x input]
  Tensor<T> U_i, U_f, U_c, U_o;  // [d x d]
  Tensor<T> b_i, b_f, b_c, b_o;  // [d]

  std::size_t count() const {
    return W_i.numel() * 4 + U_i.numel() * 4 + b_i.numel() * 4;
  }

  void append_params(std::vector<Tensor<T>>& out) const {
    for (const auto* t : {&W_i, &W_f, &W_c, &W_o, &U_i, &U_f, &U_c, &U_o,
                          &b_i, &b_f, &b_c, &b_o})
      out.push_back(*t);
  }
};

template <typename T>
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<LstmLayerParams<T>> layers;

  static LstmParams init(std::size_t input_dim, std::size_t hidden_dim,
                         std::size_t num_layers, Rng& rng) {
    if (num_layers == 0 || input_dim == 0 || hidden_dim == 0)
      throw ConfigError("lstm needs input_dim, hidden_dim, layers >= 1");
    LstmParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    for (std::size_t l = 0; l < num_layers; ++l) {
      const std::size_t in = l == 0 ? input_dim : hidden_dim;
      LstmLayerParams<T> lp;
      for (auto* w : {&lp.W_i, &lp.W_f, &lp.W_c, &lp.W_o})
        *w = glorot_matrix<T>(hidden_dim, in, rng);
      for (auto* u : {&lp.U_i, &lp.U_f, &lp.U_c, &lp.U_o})
        *u = glorot_matrix<T>(hidden_dim, hidden_dim, rng);
      for (auto* b : {&lp.b_i, &lp.b_c, &lp.b_o})
        *b = const_vector<T>(hidden_dim, T(0));
      lp.b_f = const_vector<T>(hidden_dim, T(1));  // open forget gate at start
      p.layers.push_back(std::move(lp));
    }
    return p;
  }

  std::size_t count() const {
    std::size_t total = 0;
    for (const auto& l : layers) total += l.count();
    return total;
  }

  void append_params(std::vector<Tensor<T>>& out) const {
    for (const auto& l : layers) l.append_params(out);
  }
};

// Runs the gate recurrence over the rows of x, stacking layers so layer l
// consumes layer l-1's hidden sequence. h_0 = c_0 = 0. Returns the final
// layer's hidden sequence [L x d] and its last timestep [d].
template <typename T>
std::pair<Tensor<T>, Tensor<T>> lstm_forward(const Tensor<T>& x,
                                             const LstmParams<T>& params) {
  if (x.rank() != 2)
    throw DimensionError("lstm_forward expects [L x n] input, got " +
                         shape_str(x.shape()));
  const std::size_t L = x.shape()[0];
  if (L == 0) throw DimensionError("lstm_forward on zero-length sequence");
  if (x.shape()[1] != params.input_dim)
    throw DimensionError("lstm_forward input dim " + std::to_string(x.shape()[1]) +
                         " != configured " + std::to_string(params.input_dim));
  const std::size_t d = params.hidden_dim;

  std::vector<Tensor<T>> inputs;
  inputs.reserve(L);
  for (std::size_t t = 0; t < L; ++t) inputs.push_back(row(x, t));

  Tensor<T> last;
  for (const auto& lp : params.layers) {
    Tensor<T> h = Tensor<T>::zeros(Shape{d});
    Tensor<T> c = Tensor<T>::zeros(Shape{d});
    std::vector<Tensor<T>> hidden;
    hidden.reserve(L);
    for (std::size_t t = 0; t < L; ++t) {
      const Tensor<T>& xt = inputs[t];
      auto gate = [&](const Tensor<T>& W, const Tensor<T>& U, const Tensor<T>& b) {
        return add(add(matvec(W, xt), matvec(U, h)), b);
      };
      Tensor<T> i_t = sigmoid(gate(lp.W_i, lp.U_i, lp.b_i));
      Tensor<T> f_t = sigmoid(gate(lp.W_f, lp.U_f, lp.b_f));
      Tensor<T> c_hat = tanh_op(gate(lp.W_c, lp.U_c, lp.b_c));
      Tensor<T> o_t = sigmoid(gate(lp.W_o, lp.U_o, lp.b_o));
      c = add(mul(f_t, c), mul(i_t, c_hat));
      h = mul(o_t, tanh_op(c));
      hidden.push_back(h);
    }
    inputs = hidden;
    last = h;
  }
  return {stack_rows(inputs), last};
}

// ---- similarity and heads ----

// sim(q, a) = q^T M a
template <typename T>
Tensor<T> bilinear_similarity(const Tensor<T>& q, const Tensor<T>& a,
                              const Tensor<T>& M) {
  if (q.rank() != 1 || a.rank() != 1 || M.rank() != 2 ||
      M.shape()[0] != q.shape()[0] || M.shape()[1] != a.shape()[0])
    throw DimensionError("bilinear_similarity: " + shape_str(q.shape()) + " x " +
                         shape_str(M.shape()) + " x " + shape_str(a.shape()));
  return dot(q, matvec(M, a));
}

template <typename T>
struct NtnParams {
  std::vector<Tensor<T>> M;  // r slices, each [n x n]
  Tensor<T> V;               // [r x 2n]
  Tensor<T> b;               // [r]
  Tensor<T> u;               // [r x 2]
  Tensor<T> u_bias;          // [2]

  static NtnParams init(std::size_t n, std::size_t r, Rng& rng) {
    if (n == 0 || r == 0) throw ConfigError("ntn needs n, slices >= 1");
    NtnParams p;
    for (std::size_t s = 0; s < r; ++s) p.M.push_back(glorot_matrix<T>(n, n, rng));
    p.V = glorot_matrix<T>(r, 2 * n, rng);
    p.b = const_vector<T>(r, T(0));
    p.u = glorot_matrix<T>(r, 2, rng);
    p.u_bias = const_vector<T>(2, T(0));
    return p;
  }

  std::size_t slices() const { return M.size(); }

  std::size_t count() const {
    std::size_t total = V.numel() + b.numel() + u.numel() + u_bias.numel();
    for (const auto& m : M) total += m.numel();
    return total;
  }

  void append_params(std::vector<Tensor<T>>& out) const {
    for (const auto& m : M) out.push_back(m);
    out.push_back(V);
    out.push_back(b);
    out.push_back(u);
    out.push_back(u_bias);
  }
};

// s(q,a) = u^T tanh(q^T M^[1:r] a + V[q;a] + b) + u_bias, widened to 2 logits.
template <typename T>
Tensor<T> ntn_score(const Tensor<T>& q, const Tensor<T>& a,
                    const NtnParams<T>& params) {
  std::vector<Tensor<T>> slice_scores;
  slice_scores.reserve(params.slices());
  for (const auto& m : params.M)
    slice_scores.push_back(bilinear_similarity(q, a, m));
  Tensor<T> bilinear = concat(slice_scores);                 // [r]
  Tensor<T> affine = matvec(params.V, concat<T>({q, a}));    // [r]
  Tensor<T> z = tanh_op(add(add(bilinear, affine), params.b));
  return add(vecmat(z, params.u), params.u_bias);            // [2]
}

// Shared dense head: logits = W_f . tanh(W_h . x + b_h) + b_f, where x is
// the composed vector (optionally dropout-masked) with optional extras
// appended. HD-LSTM composes by circular correlation, the concatenation
// variant by [q; a]; both reuse this parameter bundle.
template <typename T>
struct HoloHeadParams {
  Tensor<T> W_h;                  // [h x input_width]
  Tensor<T> b_h;                  // [h]
  Tensor<T> W_f;                  // [2 x h]
  Tensor<T> b_f;                  // [2]
  std::optional<Tensor<T>> M_sim; // [d x d] when the bilinear extra is on
  bool use_overlap_feats = false;

  static HoloHeadParams init(std::size_t composed_dim, std::size_t h,
                             bool use_bilinear_sim, bool use_overlap_feats,
                             std::size_t sim_dim, Rng& rng) {
    if (composed_dim == 0 || h == 0) throw ConfigError("head needs d, h >= 1");
    const std::size_t width =
        composed_dim + (use_bilinear_sim ? 1 : 0) + (use_overlap_feats ? 4 : 0);
    HoloHeadParams p;
    p.W_h = glorot_matrix<T>(h, width, rng);
    p.b_h = const_vector<T>(h, T(0));
    p.W_f = glorot_matrix<T>(2, h, rng);
    p.b_f = const_vector<T>(2, T(0));
    if (use_bilinear_sim) p.M_sim = glorot_matrix<T>(sim_dim, sim_dim, rng);
    p.use_overlap_feats = use_overlap_feats;
    return p;
  }

  bool use_bilinear_sim() const { return M_sim.has_value(); }
  std::size_t input_width() const { return W_h.shape()[1]; }
  std::size_t hidden_dim() const { return W_h.shape()[0]; }

  std::size_t count() const {
    std::size_t total = W_h.numel() + b_h.numel() + W_f.numel() + b_f.numel();
    if (M_sim) total += M_sim->numel();
    return total;
  }

  void append_params(std::vector<Tensor<T>>& out) const {
    out.push_back(W_h);
    out.push_back(b_h);
    out.push_back(W_f);
    out.push_back(b_f);
    if (M_sim) out.push_back(*M_sim);
  }
};

template <typename T>
struct HeadExtras {
  std::optional<Tensor<T>> sim;     // scalar
  std::optional<Tensor<T>> x_feat;  // [4]
};

template <typename T>
Tensor<T> dense_head(const Tensor<T>& composed, const HeadExtras<T>& extras,
                     const HoloHeadParams<T>& params,
                     const std::type_identity_t<std::optional<Tensor<T>>>& dropout_mask) {
  if (params.use_bilinear_sim() != extras.sim.has_value())
    throw ConfigError(params.use_bilinear_sim()
                          ? "head expects a similarity extra but none was given"
                          : "similarity extra given but the head has none configured");
  if (params.use_overlap_feats != extras.x_feat.has_value())
    throw ConfigError(params.use_overlap_feats
                          ? "head expects overlap features but none were given"
                          : "overlap features given but the head has none configured");
  Tensor<T> x = composed;
  if (dropout_mask) {
    if (dropout_mask->shape() != composed.shape())
      throw DimensionError("dropout mask shape " + shape_str(dropout_mask->shape()) +
                           " != composed " + shape_str(composed.shape()));
    x = mul(x, *dropout_mask);
  }
  std::vector<Tensor<T>> parts{x};
  if (extras.sim) {
    if (extras.sim->numel() != 1)
      throw DimensionError("similarity extra must be scalar");
    parts.push_back(*extras.sim);
  }
  if (extras.x_feat) {
    if (extras.x_feat->numel() != 4)
      throw DimensionError("overlap features must have length 4");
    parts.push_back(*extras.x_feat);
  }
  Tensor<T> input = parts.size() == 1 ? parts[0] : concat(parts);
  if (input.numel() != params.input_width())
    throw DimensionError("head input width " + std::to_string(input.numel()) +
                         " != configured " + std::to_string(params.input_width()));
  Tensor<T> h_out = tanh_op(add(matvec(params.W_h, input), params.b_h));
  return add(matvec(params.W_f, h_out), params.b_f);
}

template <typename T>
Tensor<T> holographic_head(const Tensor<T>& q, const Tensor<T>& a,
                           const HeadExtras<T>& extras,
                           const HoloHeadParams<T>& params,
                           const std::type_identity_t<std::optional<Tensor<T>>>& dropout_mask,
                           CompositionBackend backend = CompositionBackend::FFT) {
  return dense_head(circular_correlation(q, a, backend), extras, params,
                    dropout_mask);
}

template <typename T>
Tensor<T> concat_head(const Tensor<T>& q, const Tensor<T>& a,
                      const HeadExtras<T>& extras, const HoloHeadParams<T>& params,
                      const std::type_identity_t<std::optional<Tensor<T>>>& dropout_mask) {
  return dense_head(concat<T>({q, a}), extras, params, dropout_mask);
}

// Two-class softmax with the stabilized kernel underneath.
template <typename T>
Tensor<T> softmax2(const Tensor<T>& logits) {
  if (logits.rank() != 1 || logits.numel() != 2)
    throw DimensionError("softmax2 expects exactly 2 logits, got " +
                         shape_str(logits.shape()));
  return softmax(logits);
}

}  // namespace holoqa
