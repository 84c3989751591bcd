#include "eegdt/diffusion_training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "eegdt/errors.hpp"
#include "eegdt/parallel.hpp"
#include "eegdt/rng.hpp"

namespace eegdt {

namespace {

constexpr size_t kChunk = 8;

struct ChunkResult {
  std::vector<Tensor> grads;
  double loss = 0.0;
};

}  // namespace

DiffusionTrainReport train_diffusion(NoisePredictor& model, const SignalDataset& train,
                                     const NoiseSchedule& schedule,
                                     const DiffusionTrainSettings& settings,
                                     const EpochCallback& on_epoch) {
  const auto started = std::chrono::steady_clock::now();
  const ModelConfig& cfg = model.config();
  if (schedule.steps != cfg.t_max) {
    throw InvalidArgument("train_diffusion: schedule T = " + std::to_string(schedule.steps) +
                          " but model T_max = " + std::to_string(cfg.t_max));
  }
  if (settings.batch_size < 1) throw InvalidArgument("train_diffusion: batch_size must be >= 1");
  DiffusionTrainReport report;
  if (settings.epochs == 0) return report;
  if (train.empty()) throw InvalidArgument("train_diffusion: empty training set");
  if (train.channels() != cfg.channels || train.length() != cfg.length) {
    throw InvalidArgument("train_diffusion: data is " + std::to_string(train.channels()) + "x" +
                          std::to_string(train.length()) + " but model expects " +
                          std::to_string(cfg.channels) + "x" + std::to_string(cfg.length));
  }
  if (cfg.conditional && !train.labeled()) {
    throw InvalidArgument("train_diffusion: conditional model needs labeled data");
  }

  const size_t n = train.size();
  std::vector<Tensor> x0(n);
  for (size_t i = 0; i < n; ++i) x0[i] = train.segments[i].as_tensor();

  AdamW optimizer(settings.optimizer);
  ParameterSet& params = model.parameters();
  std::vector<size_t> order(n);

  for (uint32_t epoch = 0; epoch < settings.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    Rng shuffle_rng(derive_seed(settings.seed, {0, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

    double epoch_sum = 0.0;
    size_t batch_index = 0;
    for (size_t start = 0; start < n; start += settings.batch_size, ++batch_index) {
      const size_t bsz = std::min<size_t>(settings.batch_size, n - start);
      const size_t chunks = (bsz + kChunk - 1) / kChunk;
      std::vector<ChunkResult> results(chunks);

      parallel_for(chunks, [&](size_t c) {
        const size_t lo = c * kChunk, hi = std::min(bsz, lo + kChunk);
        DiffusionBatchLossInput input;
        for (size_t j = lo; j < hi; ++j) {
          const size_t idx = order[start + j];
          Rng rng(derive_seed(settings.seed, {1, epoch, batch_index, j}));
          input.t.push_back(static_cast<uint32_t>(rng.uniform_int(1, schedule.steps)));
          Tensor eps(x0[idx].shape);
          for (double& v : eps.data) v = rng.normal();
          input.epsilon.push_back(std::move(eps));
          input.x0.push_back(x0[idx]);
          if (cfg.conditional) input.cond.push_back(*train.segments[idx].label());
        }
        ad::Tape tape;
        const ad::Var loss = diffusion_loss(tape, model, input, schedule);
        tape.backward(loss);
        ChunkResult& r = results[c];
        r.grads = params.zeros_like();
        const double weight = static_cast<double>(hi - lo) / static_cast<double>(bsz);
        tape.accumulate_param_grads(r.grads, weight);
        r.loss = loss.item() * static_cast<double>(hi - lo);
      });

      std::vector<Tensor> grads = std::move(results[0].grads);
      double batch_loss = results[0].loss;
      for (size_t c = 1; c < chunks; ++c) {
        add_into(grads, results[c].grads);
        batch_loss += results[c].loss;
      }
      if (!std::isfinite(batch_loss) || !all_finite(grads)) {
        throw NumericalError("diffusion training diverged (non-finite loss) at epoch " +
                             std::to_string(epoch + 1));
      }
      optimizer.step(params, grads);
      epoch_sum += batch_loss;
    }
    const double epoch_loss = epoch_sum / static_cast<double>(n);
    report.epoch_loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch + 1, epoch_loss);
  }
  report.optimizer_steps = optimizer.steps_taken();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace eegdt
