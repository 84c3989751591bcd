#pragma once

// DDPM noise schedule, forward (noising) and reverse (denoising) steps,
// ancestral sampling and the noise-prediction training objective.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "eegdt/autodiff.hpp"
#include "eegdt/signal_io.hpp"

namespace eegdt {

// Tables indexed by step t in [1, T] through the accessors; the vectors
// themselves are 0-based (entry t-1).
struct NoiseSchedule {
  uint32_t steps = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
  // posterior variance ((1 - abar_{t-1}) / (1 - abar_t)) * beta_t, abar_0 := 1
  std::vector<double> sigma_sq;

  double beta(uint32_t t) const { return betas.at(t - 1); }
  double alpha(uint32_t t) const { return alphas.at(t - 1); }
  double alpha_bar(uint32_t t) const { return alpha_bars.at(t - 1); }
  double sigma(uint32_t t) const;
  double sigma2(uint32_t t) const { return sigma_sq.at(t - 1); }
};

NoiseSchedule make_linear_schedule(uint32_t steps, double beta_start, double beta_end);

// The classic range is 1e-4 .. 0.02 for 1000 steps; shorter schedules scale
// both ends by 1000/T so the total noise stays comparable. The end value is
// capped below 1.
struct BetaRange {
  double start;
  double end;
};
BetaRange default_beta_range(uint32_t steps);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
std::vector<double> forward_sample(std::span<const double> x0, uint32_t t,
                                   std::span<const double> eps, const NoiseSchedule& schedule);

// One ancestral step: mu + sigma_t * noise with
// mu = (x_t - beta_t / sqrt(1 - abar_t) * eps_pred) / sqrt(alpha_t).
std::vector<double> reverse_step(std::span<const double> x_t, uint32_t t,
                                 std::span<const double> eps_pred, const NoiseSchedule& schedule,
                                 std::span<const double> noise);

// Anything that predicts the added noise from (x_t, t, class).
class EpsilonPredictor {
 public:
  virtual ~EpsilonPredictor() = default;
  // x_t is C x L; the result is a C x L Var on `tape`.
  virtual ad::Var predict(ad::Tape& tape, const Tensor& x_t, uint32_t t,
                          std::optional<uint32_t> cls) const = 0;
  virtual uint32_t max_steps() const = 0;
  virtual size_t channels() const = 0;
  virtual size_t length() const = 0;
  virtual bool conditional() const = 0;
  virtual uint32_t num_classes() const = 0;
};

// Draws x_T ~ N(0, I) and applies reverse_step for t = T .. 1. Segment i uses
// its own RNG stream derived from (seed, i), so results do not depend on the
// worker count. Outputs are in the scaled domain.
std::vector<SignalSegment> generate(const EpsilonPredictor& model, const NoiseSchedule& schedule,
                                    size_t count, size_t channels, size_t length,
                                    const std::vector<uint32_t>* cond, uint64_t seed);

struct DiffusionBatchLossInput {
  std::vector<Tensor> x0;        // scaled C x L segments
  std::vector<uint32_t> t;       // in [1, T]
  std::vector<Tensor> epsilon;   // standard normal, same shapes as x0
  std::vector<uint32_t> cond;    // empty, or one class per sample
};

// Mean over batch and elements of (eps_theta(x_t, t, c) - eps)^2.
ad::Var diffusion_loss(ad::Tape& tape, const EpsilonPredictor& model,
                       const DiffusionBatchLossInput& input, const NoiseSchedule& schedule);

// Uniform integers in [1, T].
std::vector<uint32_t> sample_timesteps(size_t batch, uint32_t steps, uint64_t seed);

}  // namespace eegdt
