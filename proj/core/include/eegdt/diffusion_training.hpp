#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "eegdt/diffusion.hpp"
#include "eegdt/model.hpp"
#include "eegdt/params.hpp"
#include "eegdt/signal_io.hpp"

namespace eegdt {

struct DiffusionTrainSettings {
  AdamWSettings optimizer;
  uint32_t batch_size = 64;
  uint32_t epochs = 100;
  uint64_t seed = 0;
};

struct DiffusionTrainReport {
  // Sample-weighted mean loss of each epoch.
  std::vector<double> epoch_loss;
  uint64_t optimizer_steps = 0;
  double wall_seconds = 0.0;
};

using EpochCallback = std::function<void(uint32_t epoch, double loss)>;

// Minimizes the noise-prediction loss over uniformly drawn t. `train` must be
// in the scaled domain; conditional models read class labels from it.
//
// Each minibatch is split into fixed chunks of eight samples that are
// differentiated independently (possibly in parallel) and reduced in chunk
// order, so the trajectory does not depend on the worker count.
DiffusionTrainReport train_diffusion(NoisePredictor& model, const SignalDataset& train,
                                     const NoiseSchedule& schedule,
                                     const DiffusionTrainSettings& settings,
                                     const EpochCallback& on_epoch = {});

}  // namespace eegdt
