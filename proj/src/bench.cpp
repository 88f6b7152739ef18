#include "holoqa/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "holoqa/holo.hpp"
#include "holoqa/rng.hpp"

namespace holoqa {

namespace {

using clock_type = std::chrono::steady_clock;

double elapsed_ns(clock_type::time_point t0, clock_type::time_point t1) {
  return std::chrono::duration<double, std::nano>(t1 - t0).count();
}

// Batches calls until one sample spans >= 0.1 ms so the clock quantum
// stays well under the reading.
double median_ns(const std::function<void()>& fn, std::size_t reps,
                 std::size_t warmups) {
  for (std::size_t i = 0; i < warmups; ++i) fn();

  auto probe0 = clock_type::now();
  fn();
  const double once = std::max(elapsed_ns(probe0, clock_type::now()), 1.0);
  const double floor_ns = 1e5;
  const std::size_t inner =
      once >= floor_ns ? 1 : static_cast<std::size_t>(floor_ns / once) + 1;

  std::vector<double> samples(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    auto t0 = clock_type::now();
    for (std::size_t i = 0; i < inner; ++i) fn();
    samples[r] = elapsed_ns(t0, clock_type::now()) / static_cast<double>(inner);
  }
  std::sort(samples.begin(), samples.end());
  const std::size_t mid = reps / 2;
  return reps % 2 == 1 ? samples[mid]
                       : 0.5 * (samples[mid - 1] + samples[mid]);
}

std::vector<double> random_vec(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchConfig& config) {
  if (config.dims.empty()) throw ConfigError("bench needs at least one dim");
  if (config.reps == 0) throw ConfigError("bench needs reps >= 1");

  std::vector<BenchRow> rows;
  Rng rng(97);
  volatile double sink = 0.0;  // keeps the optimizer from dropping the work

  for (std::size_t d : config.dims) {
    auto q = random_vec(d, rng);
    auto a = random_vec(d, rng);

    rows.push_back({"corr_fft", d, holographic_head_params(d, config.hidden),
                    median_ns(
                        [&] {
                          auto out = circ_correlate_fft(q, a);
                          sink = sink + out[0];
                        },
                        config.reps, config.warmups)});

    rows.push_back({"corr_direct", d,
                    holographic_head_params(d, config.hidden),
                    median_ns(
                        [&] {
                          auto out = circ_correlate_direct(q, a);
                          sink = sink + out[0];
                        },
                        config.reps, config.warmups)});

    // One d*d slice streamed `slices` times costs the same arithmetic and
    // memory traffic as k distinct slices without holding k*d^2 doubles.
    {
      std::vector<double> slice(d * d);
      for (std::size_t i = 0; i < slice.size(); ++i)
        slice[i] = 1e-4 * static_cast<double>((i * 2654435761u) % 1000);
      rows.push_back(
          {"tensor_slices", d, tensor_head_params(d, config.slices),
           median_ns(
               [&] {
                 double total = 0.0;
                 for (std::size_t s = 0; s < config.slices; ++s) {
                   double acc = 0.0;
                   for (std::size_t i = 0; i < d; ++i) {
                     double row = 0.0;
                     const double* m = slice.data() + i * d;
                     for (std::size_t j = 0; j < d; ++j) row += m[j] * a[j];
                     acc += q[i] * row;
                   }
                   total += acc;
                 }
                 sink = sink + total;
               },
               config.reps, config.warmups)});
    }

    {
      const std::size_t h = config.hidden;
      std::vector<double> w(h * 2 * d);
      for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = 1e-4 * static_cast<double>((i * 40503u) % 1000);
      rows.push_back({"concat_dense", d, concat_head_params(d, config.hidden),
                      median_ns(
                          [&] {
                            double total = 0.0;
                            for (std::size_t r = 0; r < h; ++r) {
                              const double* row = w.data() + r * 2 * d;
                              double acc = 0.0;
                              for (std::size_t j = 0; j < d; ++j)
                                acc += row[j] * q[j];
                              for (std::size_t j = 0; j < d; ++j)
                                acc += row[d + j] * a[j];
                              total += acc;
                            }
                            sink = sink + total;
                          },
                          config.reps, config.warmups)});
    }
  }
  (void)sink;
  return rows;
}

double log_log_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw ConfigError("slope fit needs >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0))
      throw NumericError("log-log fit needs positive coordinates");
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(points.size());
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw ConfigError("slope fit needs >= 2 distinct x");
  return (n * sxy - sx * sy) / denom;
}

std::vector<std::pair<double, double>> bench_points(
    const std::vector<BenchRow>& rows, const std::string& op) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows)
    if (r.op == op)
      pts.emplace_back(static_cast<double>(r.dim), r.median_ns);
  return pts;
}

std::string format_bench_table(const std::vector<BenchRow>& rows) {
  std::string out = "operator        dim     params      median_ns\n";
  char line[96];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-14s %6zu %10zu %14.1f\n",
                  r.op.c_str(), r.dim, r.params, r.median_ns);
    out += line;
  }
  return out;
}

}  // namespace holoqa
