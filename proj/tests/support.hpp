#pragma once

// Shared helpers for the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "eegdt/autodiff.hpp"
#include "eegdt/params.hpp"
#include "eegdt/rng.hpp"
#include "eegdt/signal_io.hpp"

namespace eegdt::testing {

// |a - n| / max(|a|, |n|, floor). The floor keeps parameters whose true
// gradient is ~0 from turning rounding noise into a large relative error.
inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheckResult {
  size_t checked = 0;
  size_t failed = 0;
  double worst = 0.0;
  std::string worst_where;
};

// Central differences on selected (tensor, element) pairs of `params`.
// `loss` evaluates the scalar objective at the current parameter values;
// `analytic` holds gradients shaped like the parameter set.
inline GradCheckResult check_param_gradients(ParameterSet& params, const std::vector<Tensor>& analytic,
                                             const std::function<double()>& loss,
                                             const std::vector<std::pair<size_t, size_t>>& where,
                                             double tol, double step = 1e-5) {
  GradCheckResult r;
  for (const auto& [ti, ei] : where) {
    double& x = params.tensor(ti).data[ei];
    const double saved = x;
    x = saved + step;
    const double up = loss();
    x = saved - step;
    const double down = loss();
    x = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double e = rel_err(analytic[ti].data[ei], numeric);
    ++r.checked;
    if (!(e < tol)) ++r.failed;
    if (e > r.worst || std::isnan(e)) {
      r.worst = e;
      r.worst_where = params.name(ti) + "[" + std::to_string(ei) + "] analytic " +
                      std::to_string(analytic[ti].data[ei]) + " numeric " + std::to_string(numeric);
    }
  }
  return r;
}

inline std::vector<std::pair<size_t, size_t>> all_elements(const ParameterSet& params) {
  std::vector<std::pair<size_t, size_t>> out;
  for (size_t t = 0; t < params.size(); ++t)
    for (size_t e = 0; e < params.tensor(t).size(); ++e) out.emplace_back(t, e);
  return out;
}

inline std::vector<std::pair<size_t, size_t>> sample_elements(const ParameterSet& params, size_t count,
                                                              uint64_t seed) {
  auto all = all_elements(params);
  Rng rng(seed);
  std::shuffle(all.begin(), all.end(), rng.engine());
  if (all.size() > count) all.resize(count);
  return all;
}

// Overwrites every parameter with N(0, stddev) draws so zero-initialized
// gates and heads do not hide gradient paths.
inline void randomize(ParameterSet& params, uint64_t seed, double stddev = 0.2) {
  Rng rng(seed);
  for (size_t t = 0; t < params.size(); ++t)
    for (double& v : params.tensor(t).data) v = rng.normal(0.0, stddev);
}

inline Tensor random_tensor(std::vector<size_t> shape, uint64_t seed, double stddev = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (double& v : t.data) v = rng.normal(0.0, stddev);
  return t;
}

inline SignalSegment random_segment(size_t c, size_t l, uint64_t seed, std::optional<uint32_t> label = {},
                                    double stddev = 1.0) {
  Rng rng(seed);
  std::vector<double> d(c * l);
  for (double& v : d) v = rng.normal(0.0, stddev);
  return SignalSegment(c, l, std::move(d), label);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("eegdt_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace eegdt::testing
