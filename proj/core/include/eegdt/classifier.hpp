#pragma once

// Compact depthwise-separable ConvNet (EEGNet lineage). It is the downstream
// classifier for the augmentation experiments and, frozen, the embedding
// network for FID.
//
//   x ──► remove per-channel mean, divide by input_scale
//     ──► temporal conv (F1 filters) composed with depthwise spatial conv (x D)
//     ──► ELU ──► avg pool p1
//     ──► depthwise temporal conv ──► pointwise conv (F2) ──► ELU ──► avg pool p2
//     ──► flatten ──► linear E ──► ELU = embedding ──► linear k = logits
//
// Convolution weights are standardized per filter instead of using batch
// statistics, so a sample's output never depends on its batch.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eegdt/augmentation.hpp"
#include "eegdt/autodiff.hpp"
#include "eegdt/params.hpp"
#include "eegdt/signal_io.hpp"

namespace eegdt {

struct ClassifierConfig {
  uint32_t channels = 1;
  uint32_t length = 256;
  uint32_t num_classes = 2;
  uint32_t temporal_kernel = 32;
  uint32_t temporal_filters = 8;    // F1
  uint32_t depth_multiplier = 2;    // D
  uint32_t separable_filters = 16;  // F2
  uint32_t separable_kernel = 16;
  uint32_t pool1 = 4;
  uint32_t pool2 = 8;
  uint32_t embedding_dim = 64;  // E
  // Amplitude divisor applied after mean removal. Fixed per dataset (not per
  // sample) so amplitude differences between classes stay visible. A value
  // <= 0 means "fit from the training set".
  double input_scale = 0.0;

  uint32_t depthwise_filters() const { return temporal_filters * depth_multiplier; }
  uint32_t pooled_length() const { return length / pool1 / pool2; }
  void validate() const;

  bool operator==(const ClassifierConfig&) const = default;
};

void to_json(nlohmann::json& j, const ClassifierConfig& c);
void from_json(const nlohmann::json& j, ClassifierConfig& c);

// RMS of the per-channel mean-removed samples; 1 for constant data.
double fit_input_scale(const SignalDataset& data);

struct ClassifierOutput {
  ad::Var embedding;  // [E]
  ad::Var logits;     // [k]
};

class Classifier {
 public:
  // Fresh initialization; config.input_scale must be positive.
  Classifier(ClassifierConfig config, uint64_t seed);
  Classifier(ClassifierConfig config, ParameterSet params);

  const ClassifierConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  ClassifierOutput forward(ad::Tape& tape, const SignalSegment& x) const;

  // Inference helpers (no gradient recording).
  std::vector<double> embed(const SignalSegment& x) const;
  std::vector<double> logits(const SignalSegment& x) const;

 private:
  void build(uint64_t seed, bool initialize);
  ad::Var p(ad::Tape& tape, size_t index) const { return tape.param(params_, index); }

  ClassifierConfig config_;
  ParameterSet params_;
  size_t temporal_ = 0, spatial_ = 0, bias1_ = 0;
  size_t sep_depthwise_ = 0, sep_pointwise_ = 0, bias2_ = 0;
  size_t emb_w_ = 0, emb_b_ = 0, head_w_ = 0, head_b_ = 0;
};

// ---- metrics -----------------------------------------------------------------

struct Metrics {
  double acc = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  std::vector<std::string> warnings;
};

// Index of the largest entry, lowest index on ties.
size_t argmax(const std::vector<double>& v);

// Area under the ROC curve by the rank statistic with midranks for ties.
// Returns nullopt when either class is empty.
std::optional<double> auc_rank(const std::vector<double>& scores, const std::vector<bool>& positive);

// ACC, macro one-vs-rest AUC, macro F1 from per-sample class scores. Classes
// without test samples are skipped in the macro averages and recorded in
// `warnings`.
Metrics compute_metrics(const std::vector<uint32_t>& labels,
                        const std::vector<std::vector<double>>& scores, uint32_t k);

// Softmax probabilities for every segment (parallel over segments).
std::vector<std::vector<double>> predict_proba(const Classifier& model, const SignalDataset& data);
Metrics evaluate(const Classifier& model, const SignalDataset& test);

// ---- training ----------------------------------------------------------------

enum class LossMode { plain_ce, go, append };
std::string to_string(LossMode mode);
LossMode parse_loss_mode(const std::string& s);

struct ClassifierTrainSettings {
  AdamWSettings optimizer;
  uint32_t batch_size = 64;
  uint32_t epochs = 100;
  uint64_t seed = 0;
};

struct AugmentationSettings {
  LossMode mode = LossMode::plain_ce;
  // Generated pool (go) or generated data to append (append); same amplitude
  // domain as the training set, labeled.
  const SignalDataset* generated = nullptr;
  GoConfig go;
  double append_ratio = 0.0;
};

struct EpochRecord {
  uint32_t epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
};

struct TrainReport {
  std::string mode;
  uint64_t seed = 0;
  size_t train_size = 0;  // including appended generated samples
  std::vector<EpochRecord> epochs;
  uint32_t best_epoch = 0;  // 0: initialization / final-epoch fallback
  std::optional<Metrics> test;
  nlohmann::json config;  // classifier, optimizer and augmentation snapshot
  double wall_seconds = 0.0;
};

struct TrainedClassifier {
  Classifier model;
  TrainReport report;
};

// Mini-batch AdamW. Each batch is split into chunks of eight samples whose
// gradients are reduced in chunk order, so results are reproducible for any
// worker count. Returns the parameters with the best validation accuracy
// (earliest on ties), or the final epoch when `val` is empty.
TrainedClassifier train_classifier(const SignalDataset& train, const SignalDataset& val,
                                   ClassifierConfig config, const AugmentationSettings& aug,
                                   const ClassifierTrainSettings& settings);

// Mean cross-entropy of one batch and its parameter gradients (exposed for
// gradient checks).
double classifier_batch_loss(const Classifier& model, const std::vector<const SignalSegment*>& batch,
                             std::vector<Tensor>* grads);

// Plain-text report: `key = value` lines, then the per-epoch CSV in a sibling
// file `<stem>_epochs.csv` (columns epoch,train_loss,val_acc).
void write_train_report(const TrainReport& report, const std::filesystem::path& path);

// EDTM checkpoint with a {"kind": "classifier", "classifier": {...}} config.
void save_classifier(const Classifier& model, const std::filesystem::path& path);
Classifier load_classifier(const std::filesystem::path& path);

}  // namespace eegdt
