#pragma once

// JSON run configuration. Every field has a default, so `{}` is a valid
// config. Unknown keys are rejected with their dotted path.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eegdt/augmentation.hpp"
#include "eegdt/classifier.hpp"
#include "eegdt/diffusion.hpp"
#include "eegdt/model.hpp"
#include "eegdt/params.hpp"
#include "eegdt/signal_io.hpp"

namespace eegdt::app {

struct DatasetSection {
  std::string source = "synth";  // synth | file
  std::string path;              // SDF1 file, or a CSV manifest (*.csv)
  std::string name;              // tag used in results files; defaults to source/stem
  double sample_rate_hz = 128.0;  // CSV ingestion only
  SynthSpec synth;
};

struct ScheduleSection {
  uint32_t steps = 1000;
  // Zero means "use default_beta_range(steps)".
  double beta_start = 0.0;
  double beta_end = 0.0;

  NoiseSchedule build() const;
  BetaRange range() const;
};

struct TrainingSection {
  double lr = 2e-4;
  double weight_decay = 1e-6;
  uint32_t batch_size = 64;
  uint32_t epochs = 100;

  AdamWSettings optimizer() const;
};

struct RunConfig {
  uint64_t seed = 1;
  std::string out_dir = "runs/default";
  DatasetSection dataset;
  SplitSpec split;  // the seed field is ignored; splits use a stage seed
  ScheduleSection schedule;
  // Shape fields (channels, length, num_classes, t_max) are filled from the
  // data and schedule; patch_len 0 means length / 16.
  ModelConfig model = [] {
    ModelConfig m;
    m.patch_len = 0;
    m.conditional = true;
    return m;
  }();
  bool msc_enabled = true;
  bool dfsi_enabled = true;
  ClassifierConfig classifier;
  GoConfig go;
  TrainingSection diffusion_training{2e-4, 1e-6, 64, 200};
  TrainingSection classifier_training{2e-4, 1e-6, 64, 100};
  std::string augmentation_mode = "none";
  double append_ratio = 1.0;
  // 0 = as many as the training split ("an equal quantity").
  uint32_t generate_count = 0;
  std::vector<uint64_t> experiment_seeds{1, 2, 3, 4};
  std::vector<std::string> experiment_modes{"plain_ce", "go", "append"};

  // Derived model config for data of the given shape.
  ModelConfig model_for(uint32_t channels, uint32_t length, uint32_t num_classes) const;
  ClassifierConfig classifier_for(uint32_t channels, uint32_t length, uint32_t num_classes) const;
  std::string dataset_name() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

// Stage seeds derived from the master seed.
enum class Stage : uint64_t { split = 1, diffusion_init, diffusion_train, generate, extractor };
uint64_t stage_seed(const RunConfig& c, Stage s);

}  // namespace eegdt::app
