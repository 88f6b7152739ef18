#include "holoqa/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace holoqa::fft {
namespace {

// FFTW plan creation is not thread-safe; guard the cache. Plans are built
// with FFTW_UNALIGNED so they can run on any caller buffer via
// fftw_execute_dft.
struct PlanCache {
  std::mutex mu;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans;

  fftw_plan get(std::size_t d, int sign) {
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(d, sign);
    auto it = plans.find(key);
    if (it != plans.end()) return it->second;
    std::vector<fftw_complex> scratch_in(d), scratch_out(d);
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(d), scratch_in.data(),
                                   scratch_out.data(), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans.emplace(key, p);
    return p;
  }
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

}  // namespace

void dft(std::size_t d, const std::complex<double>* in, std::complex<double>* out,
         bool inverse) {
  if (d == 0) return;
  const int sign = inverse ? FFTW_BACKWARD : FFTW_FORWARD;
  fftw_plan p = cache().get(d, sign);
  // std::complex<double> is layout-compatible with fftw_complex.
  fftw_execute_dft(p,
                   reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

}  // namespace holoqa::fft
