#pragma once

#include <stdexcept>
#include <string>

namespace holoqa {

// Base class for every error the library raises. Subclasses map to the
// CLI exit-code discipline: ConfigError -> 2, everything else -> 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible tensor/vector shapes.
struct DimensionError : Error {
  using Error::Error;
};

// API misuse: non-scalar loss, consumed tape, non-deterministic closure.
struct ContractError : Error {
  using Error::Error;
};

// NaN/Inf where finite values are required, divergence during training.
struct NumericError : Error {
  using Error::Error;
};

// Invalid or inconsistent configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input files, broken dataset invariants.
struct DataError : Error {
  using Error::Error;
};

// Token id outside the vocabulary.
struct VocabularyError : DataError {
  using DataError::DataError;
};

// Numeric tolerances keyed by scalar precision. Gradient checks are only
// meaningful in 64-bit; the float constants cover forward-path equality.
template <typename T>
struct precision_tol;

template <>
struct precision_tol<float> {
  static constexpr float backend_eq = 1e-5f;   // FFT vs direct summation
  static constexpr float batch_eq = 1e-5f;
};

template <>
struct precision_tol<double> {
  static constexpr double backend_eq = 1e-10;
  static constexpr double batch_eq = 1e-6;
  static constexpr double grad_rel = 1e-4;     // finite-difference gate
  static constexpr double fd_step = 1e-5;
};

}  // namespace holoqa
