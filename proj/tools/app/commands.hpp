#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "eegdt/classifier.hpp"
#include "run_config.hpp"

namespace eegdt::app {

// Empty paths mean "default location under out_dir".

struct SynthOptions {
  std::filesystem::path output;
};

struct TrainDiffusionOptions {
  std::string data;   // dataset file; empty = config dataset
  bool full = false;  // train on every segment instead of the train split
  std::filesystem::path output;
};

struct GenerateOptions {
  std::string checkpoint;
  std::optional<uint32_t> count;  // default: training-set size of the checkpoint
  std::string classes;            // "0,0,1", "balanced", or empty
  std::filesystem::path output;
};

struct TrainClassifierOptions {
  std::string mode;  // none | go | append; empty = config
  std::optional<double> ratio;
  std::string data;
  std::string generated;
  std::filesystem::path output;  // checkpoint; report goes next to it
};

struct EvaluateOptions {
  std::string checkpoint;
  std::string data;  // empty = test split of the config dataset
  std::string tag;
  std::filesystem::path results;
};

struct FidOptions {
  std::string original;
  std::string generated;
  std::string extractor;  // empty = train one on the original data
  bool spectra = false;
  std::string tag;
  std::filesystem::path results;
};

struct ExperimentOptions {
  // Stop after the named stage (data, diffusion, generate, extractor, runs);
  // used to exercise resuming.
  std::string stop_after;
};

std::filesystem::path cmd_synth(const RunConfig& cfg, const SynthOptions& opt, std::ostream& out);
std::filesystem::path cmd_train_diffusion(const RunConfig& cfg, const TrainDiffusionOptions& opt,
                                          std::ostream& out);
std::filesystem::path cmd_generate(const RunConfig& cfg, const GenerateOptions& opt, std::ostream& out);
TrainReport cmd_train_classifier(const RunConfig& cfg, const TrainClassifierOptions& opt, std::ostream& out);
Metrics cmd_evaluate(const RunConfig& cfg, const EvaluateOptions& opt, std::ostream& out);
double cmd_fid(const RunConfig& cfg, const FidOptions& opt, std::ostream& out);
nlohmann::json cmd_experiment(const RunConfig& cfg, const ExperimentOptions& opt, std::ostream& out);

// Loads an SDF1 file, or a CSV manifest when the extension is .csv.
SignalDataset load_any_dataset(const std::filesystem::path& path, double sample_rate_hz);

}  // namespace eegdt::app
