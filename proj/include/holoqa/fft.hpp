#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace holoqa::fft {

// Unnormalized complex DFT of length d (any d >= 1, mixed-radix via FFTW).
// Plans are cached per (d, direction) behind a mutex; execution is
// thread-safe on caller-owned buffers.
void dft(std::size_t d, const std::complex<double>* in, std::complex<double>* out,
         bool inverse);

}  // namespace holoqa::fft
