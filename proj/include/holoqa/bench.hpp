#pragma once

// Wall-clock micro-benchmarks for the composition operators, plus the
// log-log slope fit used to compare measured scaling against analytic cost.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "holoqa/common.hpp"

namespace holoqa {

// Closed-form comparison-head parameter counts (weights, biases, softmax).
inline std::size_t holographic_head_params(std::size_t d, std::size_t h) {
  return d * h + h + 2 * h + 2;
}
inline std::size_t concat_head_params(std::size_t d, std::size_t h) {
  return 2 * d * h + h + 2 * h + 2;
}
inline std::size_t tensor_head_params(std::size_t d, std::size_t k) {
  return d * d * k + 2 * d * k + k + 2 * k + 2;
}

struct BenchRow {
  std::string op;  // corr_fft | corr_direct | tensor_slices | concat_dense
  std::size_t dim = 0;
  std::size_t params = 0;
  double median_ns = 0.0;
};

struct BenchConfig {
  std::vector<std::size_t> dims;
  std::size_t slices = 5;
  std::size_t hidden = 64;
  std::size_t reps = 30;
  std::size_t warmups = 5;
};

std::vector<BenchRow> run_bench(const BenchConfig& config);

// Least-squares slope of ln(y) against ln(x); needs >= 2 distinct x.
double log_log_slope(const std::vector<std::pair<double, double>>& points);

// Median of `rows` restricted to one operator, as (dim, median_ns) points.
std::vector<std::pair<double, double>> bench_points(
    const std::vector<BenchRow>& rows, const std::string& op);

std::string format_bench_table(const std::vector<BenchRow>& rows);

}  // namespace holoqa
