#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "holoqa/rng.hpp"

namespace testsupport {

// Scratch area for fixture files; recreated per process.
inline std::filesystem::path scratch_dir() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() / "holoqa_tests";
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

inline std::string write_fixture(const std::string& name, const std::string& content) {
  const auto path = scratch_dir() / name;
  std::ofstream out(path);
  out << content;
  out.close();
  return path.string();
}

template <typename T>
std::vector<T> rand_vec(holoqa::Rng& rng, std::size_t n, double lo = -1.0,
                        double hi = 1.0) {
  std::vector<T> v(n);
  for (auto& e : v) e = static_cast<T>(rng.uniform(lo, hi));
  return v;
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double worst = a.size() == b.size() ? 0.0 : 1e300;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return worst;
}

template <typename T>
std::vector<T> one_hot(std::size_t d, std::size_t at) {
  std::vector<T> v(d, T(0));
  v[at] = T(1);
  return v;
}

}  // namespace testsupport
