#pragma once

// Signal data model, constant-factor amplitude scaling, splitting, synthetic
// data and the SDF1 / CSV file formats.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "eegdt/autodiff.hpp"

namespace eegdt {

// C x L block of amplitude samples (microvolts in the raw domain), stored
// channel-major.
class SignalSegment {
 public:
  SignalSegment() = default;
  // Throws InvalidArgument on C == 0, L == 0, size mismatch or non-finite data.
  SignalSegment(size_t channels, size_t length, std::vector<double> data,
                std::optional<uint32_t> label = std::nullopt);

  size_t channels() const { return channels_; }
  size_t length() const { return length_; }
  const std::vector<double>& data() const { return data_; }
  std::span<const double> channel(size_t c) const {
    return {data_.data() + c * length_, length_};
  }
  double at(size_t c, size_t i) const { return data_[c * length_ + i]; }
  const std::optional<uint32_t>& label() const { return label_; }
  void set_label(std::optional<uint32_t> label) { label_ = label; }

  Tensor as_tensor() const { return Tensor({channels_, length_}, data_); }
  double max_abs() const;

  bool operator==(const SignalSegment&) const = default;

 private:
  size_t channels_ = 0;
  size_t length_ = 0;
  std::vector<double> data_;
  std::optional<uint32_t> label_;
};

struct SignalDataset {
  std::vector<SignalSegment> segments;
  uint32_t num_classes = 0;
  // When set, samples are stored in the scaled domain and multiplying by
  // this factor restores the original amplitude.
  std::optional<double> scale_factor;
  double sample_rate_hz = 128.0;

  size_t size() const { return segments.size(); }
  bool empty() const { return segments.empty(); }
  size_t channels() const { return segments.empty() ? 0 : segments.front().channels(); }
  size_t length() const { return segments.empty() ? 0 : segments.front().length(); }
  // True when every segment carries a label (and there is at least one).
  bool labeled() const;
  std::vector<uint32_t> labels() const;

  // Checks the shared-shape, label-range and scaled-range invariants.
  void validate() const;

  bool operator==(const SignalDataset&) const = default;
};

struct SplitSpec {
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;
  uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<size_t> train, val, test;
};

struct DatasetSplit {
  SignalDataset train, val, test;
  SplitIndices indices;
};

// s = max|x| / 4 over all samples, or 1 for all-zero data.
double compute_scale_factor(const SignalDataset& dataset);
SignalSegment scale(const SignalSegment& x, double s);
SignalSegment unscale(const SignalSegment& z, double s);
// Whole-dataset variants; scale_dataset records s in the result.
SignalDataset scale_dataset(const SignalDataset& d, double s);
SignalDataset unscale_dataset(const SignalDataset& d, double s);

SplitIndices split_indices(const SignalDataset& dataset, const SplitSpec& spec);
DatasetSplit split_dataset(const SignalDataset& dataset, const SplitSpec& spec);
SignalDataset subset(const SignalDataset& dataset, std::span<const size_t> indices);

struct SynthSpec {
  uint32_t num_classes = 2;
  uint32_t per_class = 32;
  uint32_t channels = 1;
  uint32_t length = 256;
  double sample_rate_hz = 128.0;
  // Class j occupies [band_start + j * band_step, band_start + j * band_step + band_width] Hz.
  double band_start_hz = 2.0;
  double band_width_hz = 4.0;
  double band_step_hz = 6.0;
  uint32_t components = 3;
  double amplitude_uv = 20.0;
  uint64_t seed = 1;
};

// Class-banded sums of sinusoids with amplitude jitter and additive noise at
// 10% of the signal RMS. Samples are float-representable.
SignalDataset synth_dataset(const SynthSpec& spec);

inline constexpr uint16_t kSdfVersion = 1;

void save_dataset(const SignalDataset& dataset, const std::filesystem::path& path);
SignalDataset load_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& os, const SignalDataset& dataset);
SignalDataset read_dataset(std::istream& is);

// One segment per CSV file (L rows x C columns). The manifest lists
// `path,label` lines; relative paths resolve against the manifest directory.
SignalDataset load_csv_manifest(const std::filesystem::path& manifest, double sample_rate_hz);

}  // namespace eegdt
