#include "eegdt/spectrum.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

#include "eegdt/errors.hpp"

namespace eegdt {

namespace {

// FFTW planning is not thread safe; execution with new arrays is. Plans are
// created once per length with FFTW_UNALIGNED so any buffer can be used.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [n, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(size_t n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    std::vector<double> in(n);
    std::vector<fftw_complex> out(n / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(),
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(n, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<size_t, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

std::vector<double> magnitude_spectrum(std::span<const double> x) {
  const size_t n = x.size();
  if (n == 0) throw InvalidArgument("magnitude_spectrum: empty input");
  fftw_plan plan = plan_cache().get(n);
  std::vector<double> in(x.begin(), x.end());
  std::vector<fftw_complex> out(n / 2 + 1);
  fftw_execute_dft_r2c(plan, in.data(), out.data());
  std::vector<double> mag(n / 2 + 1);
  for (size_t k = 0; k < mag.size(); ++k) mag[k] = std::hypot(out[k][0], out[k][1]);
  return mag;
}

std::vector<double> rfft_frequencies(size_t n, double sample_rate_hz) {
  std::vector<double> f(n / 2 + 1);
  for (size_t k = 0; k < f.size(); ++k)
    f[k] = static_cast<double>(k) * sample_rate_hz / static_cast<double>(n);
  return f;
}

}  // namespace eegdt
