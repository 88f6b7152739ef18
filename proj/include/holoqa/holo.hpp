#pragma once

#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "holoqa/common.hpp"
#include "holoqa/fft.hpp"
#include "holoqa/tensor.hpp"

namespace holoqa {

enum class CompositionBackend { DirectSum, FFT };

namespace detail {

template <typename T>
void require_equal_len(const std::vector<T>& q, const std::vector<T>& a,
                       const char* op) {
  if (q.size() != a.size())
    throw DimensionError(std::string(op) + ": length mismatch " +
                         std::to_string(q.size()) + " vs " + std::to_string(a.size()));
  if (q.empty()) throw DimensionError(std::string(op) + ": empty input");
}

// Frequency-domain combine: IDFT(op(DFT(q)) ⊙ DFT(a)) / d, where op is
// conjugation for correlation and identity for convolution. Inputs and the
// public contract are real; any imaginary residue above 1e-6 is a fault.
template <typename T>
std::vector<T> fft_combine(const std::vector<T>& q, const std::vector<T>& a,
                           bool conjugate_q) {
  const std::size_t d = q.size();
  std::vector<std::complex<double>> buf(d), fq(d), fa(d);
  for (std::size_t i = 0; i < d; ++i) buf[i] = {static_cast<double>(q[i]), 0.0};
  fft::dft(d, buf.data(), fq.data(), false);
  for (std::size_t i = 0; i < d; ++i) buf[i] = {static_cast<double>(a[i]), 0.0};
  fft::dft(d, buf.data(), fa.data(), false);
  for (std::size_t i = 0; i < d; ++i)
    buf[i] = (conjugate_q ? std::conj(fq[i]) : fq[i]) * fa[i];
  fft::dft(d, buf.data(), fq.data(), true);
  std::vector<T> out(d);
  const double inv_d = 1.0 / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double re = fq[i].real() * inv_d;
    const double im = fq[i].imag() * inv_d;
    if (!(std::abs(im) < 1e-6))
      throw NumericError("imaginary residue " + std::to_string(im) +
                         " after inverse transform");
    out[i] = static_cast<T>(re);
  }
  return out;
}

}  // namespace detail

// [q ⋆ a]_k = Σ_i q_i · a_{(k+i) mod d}
template <typename T>
std::vector<T> circ_correlate_direct(const std::vector<T>& q, const std::vector<T>& a) {
  detail::require_equal_len(q, a, "circular_correlation");
  const std::size_t d = q.size();
  std::vector<T> out(d, T(0));
  for (std::size_t k = 0; k < d; ++k) {
    double s = 0;  // double accumulator keeps 32-bit backend parity at large d
    for (std::size_t i = 0; i < d; ++i)
      s += static_cast<double>(q[i]) * a[(k + i) % d];
    out[k] = static_cast<T>(s);
  }
  return out;
}

// [q ∗ a]_k = Σ_i q_i · a_{(k−i) mod d}
template <typename T>
std::vector<T> circ_convolve_direct(const std::vector<T>& q, const std::vector<T>& a) {
  detail::require_equal_len(q, a, "circular_convolution");
  const std::size_t d = q.size();
  std::vector<T> out(d, T(0));
  for (std::size_t k = 0; k < d; ++k) {
    double s = 0;
    for (std::size_t i = 0; i < d; ++i)
      s += static_cast<double>(q[i]) * a[(k + d - i) % d];
    out[k] = static_cast<T>(s);
  }
  return out;
}

template <typename T>
std::vector<T> circ_correlate_fft(const std::vector<T>& q, const std::vector<T>& a) {
  detail::require_equal_len(q, a, "circular_correlation");
  return detail::fft_combine(q, a, /*conjugate_q=*/true);
}

template <typename T>
std::vector<T> circ_convolve_fft(const std::vector<T>& q, const std::vector<T>& a) {
  detail::require_equal_len(q, a, "circular_convolution");
  return detail::fft_combine(q, a, /*conjugate_q=*/false);
}

// q̃_i = q_{(−i) mod d}: element 0 fixed, remainder reversed. Involution.
template <typename T>
std::vector<T> approximate_inverse(const std::vector<T>& q) {
  if (q.empty()) throw DimensionError("approximate_inverse: empty input");
  const std::size_t d = q.size();
  std::vector<T> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = q[(d - i) % d];
  return out;
}

// Explicit padding helper; composition itself never pads implicitly.
template <typename T>
std::vector<T> zero_pad_to(const std::vector<T>& v, std::size_t d) {
  if (v.size() > d)
    throw DimensionError("zero_pad_to: length " + std::to_string(v.size()) +
                         " exceeds target " + std::to_string(d));
  std::vector<T> out(v);
  out.resize(d, T(0));
  return out;
}

template <typename T>
std::vector<T> circular_correlation(const std::vector<T>& q, const std::vector<T>& a,
                                    CompositionBackend backend) {
  return backend == CompositionBackend::FFT ? circ_correlate_fft(q, a)
                                            : circ_correlate_direct(q, a);
}

template <typename T>
std::vector<T> circular_convolution(const std::vector<T>& q, const std::vector<T>& a,
                                    CompositionBackend backend = CompositionBackend::DirectSum) {
  return backend == CompositionBackend::FFT ? circ_convolve_fft(q, a)
                                            : circ_convolve_direct(q, a);
}

// For out = q ⋆ a: grad_q = upstream ⋆ a, grad_a = q ∗ upstream.
// (∂out_k/∂q_i = a_{(k+i) mod d}; ∂out_k/∂a_j = q_{(j−k) mod d}.)
template <typename T>
std::pair<std::vector<T>, std::vector<T>> correlation_backward(
    const std::vector<T>& upstream, const std::vector<T>& q, const std::vector<T>& a,
    CompositionBackend backend = CompositionBackend::DirectSum) {
  detail::require_equal_len(upstream, q, "correlation_backward");
  detail::require_equal_len(q, a, "correlation_backward");
  return {circular_correlation(upstream, a, backend),
          circular_convolution(q, upstream, backend)};
}

// Tape-aware composition of two rank-1 tensors.
template <typename T>
Tensor<T> circular_correlation(const Tensor<T>& q, const Tensor<T>& a,
                               CompositionBackend backend) {
  if (q.rank() != 1 || a.rank() != 1)
    throw DimensionError("circular_correlation expects rank-1 tensors, got " +
                         shape_str(q.shape()) + " and " + shape_str(a.shape()));
  std::vector<T> v = circular_correlation(q.values(), a.values(), backend);
  Tensor<T> out(q.shape(), std::move(v));
  detail::attach<T>(out, {q.node(), a.node()},
                    [qn = q.node(), an = a.node(), backend](TensorNode<T>& o) {
                      if (qn->requires_grad) {
                        auto gq = circular_correlation(o.grad, an->value, backend);
                        qn->accumulate(gq.data(), gq.size());
                      }
                      if (an->requires_grad) {
                        auto ga = circular_convolution(qn->value, o.grad, backend);
                        an->accumulate(ga.data(), ga.size());
                      }
                    });
  return out;
}

}  // namespace holoqa
