#include "eegdt/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "eegdt/errors.hpp"
#include "eegdt/parallel.hpp"
#include "eegdt/rng.hpp"

namespace eegdt {

double NoiseSchedule::sigma(uint32_t t) const { return std::sqrt(sigma2(t)); }

NoiseSchedule make_linear_schedule(uint32_t steps, double beta_start, double beta_end) {
  if (steps < 1) throw InvalidArgument("schedule: T must be >= 1");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw InvalidArgument("schedule: need 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.steps = steps;
  s.betas.resize(steps);
  s.alphas.resize(steps);
  s.alpha_bars.resize(steps);
  s.sigma_sq.resize(steps);
  double abar = 1.0;
  for (uint32_t i = 0; i < steps; ++i) {
    const double beta = steps == 1 ? beta_start
                                   : beta_start + (beta_end - beta_start) * static_cast<double>(i) /
                                                      static_cast<double>(steps - 1);
    const double abar_prev = abar;
    s.betas[i] = beta;
    s.alphas[i] = 1.0 - beta;
    abar *= 1.0 - beta;
    s.alpha_bars[i] = abar;
    s.sigma_sq[i] = (1.0 - abar_prev) / (1.0 - abar) * beta;
  }
  return s;
}

BetaRange default_beta_range(uint32_t steps) {
  if (steps < 1) throw InvalidArgument("schedule: T must be >= 1");
  const double factor = 1000.0 / static_cast<double>(steps);
  const double end = std::min(0.02 * factor, 0.999);
  const double start = std::min(1e-4 * factor, end);
  return {start, end};
}

namespace {

void check_step(uint32_t t, const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.steps) {
    throw InvalidArgument("step t = " + std::to_string(t) + " outside [1, " +
                          std::to_string(schedule.steps) + "]");
  }
}

}  // namespace

std::vector<double> forward_sample(std::span<const double> x0, uint32_t t,
                                   std::span<const double> eps, const NoiseSchedule& schedule) {
  check_step(t, schedule);
  if (x0.size() != eps.size()) throw InvalidArgument("forward_sample: x0 and epsilon shapes differ");
  const double a = std::sqrt(schedule.alpha_bar(t));
  const double b = std::sqrt(1.0 - schedule.alpha_bar(t));
  std::vector<double> out(x0.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

std::vector<double> reverse_step(std::span<const double> x_t, uint32_t t,
                                 std::span<const double> eps_pred, const NoiseSchedule& schedule,
                                 std::span<const double> noise) {
  check_step(t, schedule);
  if (x_t.size() != eps_pred.size() || x_t.size() != noise.size()) {
    throw InvalidArgument("reverse_step: x_t, eps_pred and noise shapes differ");
  }
  const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(t));
  const double coef = schedule.beta(t) / std::sqrt(1.0 - schedule.alpha_bar(t));
  const double sigma = schedule.sigma(t);
  std::vector<double> out(x_t.size());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = inv_sqrt_alpha * (x_t[i] - coef * eps_pred[i]);
    if (sigma != 0.0) out[i] += sigma * noise[i];
  }
  return out;
}

std::vector<SignalSegment> generate(const EpsilonPredictor& model, const NoiseSchedule& schedule,
                                    size_t count, size_t channels, size_t length,
                                    const std::vector<uint32_t>* cond, uint64_t seed) {
  if (model.max_steps() != schedule.steps) {
    throw InvalidArgument("generate: model expects T = " + std::to_string(model.max_steps()) +
                          " but schedule has T = " + std::to_string(schedule.steps));
  }
  if (model.channels() != channels || model.length() != length) {
    throw InvalidArgument("generate: model shape does not match requested C x L");
  }
  if (cond) {
    if (!model.conditional()) throw InvalidArgument("generate: class labels given to an unconditional model");
    if (cond->size() != count) throw InvalidArgument("generate: class list length differs from count");
    for (uint32_t c : *cond)
      if (c >= model.num_classes()) throw InvalidArgument("generate: class index out of range");
  } else if (model.conditional()) {
    throw InvalidArgument("generate: conditional model needs class labels");
  }

  const size_t n = channels * length;
  std::vector<SignalSegment> out(count);
  parallel_for(count, [&](size_t i) {
    Rng rng(derive_seed(seed, {i}));
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    std::vector<double> noise(n);
    const std::optional<uint32_t> cls = cond ? std::optional<uint32_t>((*cond)[i]) : std::nullopt;
    for (uint32_t t = schedule.steps; t >= 1; --t) {
      ad::Tape tape(false);
      const ad::Var eps = model.predict(tape, Tensor({channels, length}, x), t, cls);
      if (t > 1) {
        for (double& v : noise) v = rng.normal();
      } else {
        std::fill(noise.begin(), noise.end(), 0.0);
      }
      x = reverse_step(x, t, eps.value().data, schedule, noise);
    }
    for (double v : x)
      if (!std::isfinite(v)) throw NumericalError("generate: non-finite sample produced");
    out[i] = SignalSegment(channels, length, std::move(x), cls);
  });
  return out;
}

ad::Var diffusion_loss(ad::Tape& tape, const EpsilonPredictor& model,
                       const DiffusionBatchLossInput& input, const NoiseSchedule& schedule) {
  const size_t batch = input.x0.size();
  if (batch == 0) throw InvalidArgument("diffusion_loss: empty batch");
  if (input.t.size() != batch || input.epsilon.size() != batch) {
    throw InvalidArgument("diffusion_loss: batch fields have different lengths");
  }
  if (!input.cond.empty() && input.cond.size() != batch) {
    throw InvalidArgument("diffusion_loss: cond length differs from batch");
  }
  ad::Var total;
  size_t elements = 0;
  for (size_t b = 0; b < batch; ++b) {
    const Tensor& x0 = input.x0[b];
    const Tensor& eps = input.epsilon[b];
    if (x0.shape != eps.shape) {
      throw InvalidArgument("diffusion_loss: epsilon shape " + shape_string(eps.shape) +
                            " differs from x0 " + shape_string(x0.shape));
    }
    const Tensor x_t(x0.shape, forward_sample(x0.data, input.t[b], eps.data, schedule));
    const std::optional<uint32_t> cls =
        input.cond.empty() ? std::nullopt : std::optional<uint32_t>(input.cond[b]);
    const ad::Var pred = model.predict(tape, x_t, input.t[b], cls);
    if (pred.shape() != eps.shape) throw InvalidArgument("diffusion_loss: prediction shape mismatch");
    const ad::Var err = ad::sum(ad::square(ad::sub(pred, tape.constant(eps))));
    total = total.valid() ? ad::add(total, err) : err;
    elements += eps.size();
  }
  return ad::scale(total, 1.0 / static_cast<double>(elements));
}

std::vector<uint32_t> sample_timesteps(size_t batch, uint32_t steps, uint64_t seed) {
  if (steps < 1) throw InvalidArgument("sample_timesteps: T must be >= 1");
  Rng rng(seed);
  std::vector<uint32_t> t(batch);
  for (auto& v : t) v = static_cast<uint32_t>(rng.uniform_int(1, steps));
  return t;
}

}  // namespace eegdt
