#pragma once

// Diffusion-transformer noise predictor for multichannel 1-D signals.
//
//   x_t ──► multi-scale conv (low / high kernel branches, each refined by
//           CBAM) ──► patchify ──► DiT blocks ──► LN + linear head ──► eps
//             guidance = I_T + [I_C] + w(t) * I_FS enters every block
//
// I_T is a sinusoidal step embedding followed by an MLP, I_C a learned class
// table row (conditional models only), I_FS an MLP over the per-channel FFT
// magnitude of x_t, and w(t) = cos(pi/2 * t / T_max).

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "eegdt/autodiff.hpp"
#include "eegdt/diffusion.hpp"
#include "eegdt/params.hpp"

namespace eegdt {

struct ModelConfig {
  uint32_t channels = 1;
  uint32_t length = 256;
  uint32_t patch_len = 16;
  uint32_t hidden_dim = 64;
  uint32_t depth = 4;
  uint32_t heads = 4;
  std::vector<uint32_t> msc_kernels_low{31, 63};
  std::vector<uint32_t> msc_kernels_high{3, 7};
  // Feature channels per branch; split evenly over the branch's kernels.
  uint32_t msc_channels = 16;
  bool conditional = false;
  uint32_t num_classes = 0;
  uint32_t t_max = 1000;
  bool msc_enabled = true;
  bool dfsi_enabled = true;
  uint32_t cbam_reduction = 8;
  uint32_t cbam_kernel = 7;
  uint32_t plain_conv_kernel = 7;
  uint32_t mlp_ratio = 4;
  // 0 means hidden_dim
  uint32_t dfsi_hidden = 0;

  // Desk defaults for a given signal shape: P = L/16, D = 64, depth 4.
  static ModelConfig desk_default(uint32_t channels, uint32_t length, uint32_t t_max);

  uint32_t feature_channels() const { return 2 * msc_channels; }
  uint32_t tokens() const { return length / patch_len; }
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// w(t) = cos(pi/2 * t / T_max), t in [0, T_max].
double time_weight(double t, uint32_t t_max);

// [sin(t f_0), cos(t f_0), sin(t f_1), cos(t f_1), ...], f_i = 10000^(-i / (dim/2)).
std::vector<double> sinusoidal_embedding(double t, size_t dim);

class NoisePredictor final : public EpsilonPredictor {
 public:
  // Fresh initialization. Output head, adaLN modulation (and so every block
  // gate) start at zero, so an untrained model predicts zero noise.
  NoisePredictor(ModelConfig config, uint64_t seed);
  // Rebinds loaded parameters; throws if names or shapes do not match.
  NoisePredictor(ModelConfig config, ParameterSet params);

  const ModelConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  ad::Var predict(ad::Tape& tape, const Tensor& x_t, uint32_t t,
                  std::optional<uint32_t> cls) const override;
  uint32_t max_steps() const override { return config_.t_max; }
  size_t channels() const override { return config_.channels; }
  size_t length() const override { return config_.length; }
  bool conditional() const override { return config_.conditional; }
  uint32_t num_classes() const override { return config_.num_classes; }

  // ---- building blocks, exposed for testing -----------------------------
  // C x L -> F x L (F = 2 * msc_channels); the plain conv when MSC is off.
  ad::Var msc_forward(ad::Tape& tape, ad::Var x) const;
  // One branch's convolutions before CBAM (branch 0 = low, 1 = high).
  ad::Var msc_branch_conv(ad::Tape& tape, ad::Var x, size_t branch) const;
  // Channel then temporal attention gating of a branch's features.
  ad::Var cbam(ad::Tape& tape, ad::Var features, size_t branch) const;
  ad::Var dfsi_forward(ad::Tape& tape, const Tensor& x_t) const;
  ad::Var timestep_embedding(ad::Tape& tape, uint32_t t) const;
  ad::Var class_embedding(ad::Tape& tape, uint32_t cls) const;
  ad::Var build_guidance(ad::Tape& tape, uint32_t t, std::optional<uint32_t> cls,
                         const Tensor& x_t) const;
  // F x L -> N x D tokens with positional embedding.
  ad::Var patchify(ad::Tape& tape, ad::Var features) const;
  ad::Var dit_block(ad::Tape& tape, size_t block, ad::Var tokens, ad::Var guidance) const;
  // N x D -> C x L
  ad::Var output_head(ad::Tape& tape, ad::Var tokens) const;

 private:
  struct Linear {
    size_t weight = 0, bias = 0;
  };
  struct Conv {
    size_t weight = 0, bias = 0;
  };
  struct Cbam {
    Linear fc1, fc2;
    Conv spatial;
  };
  struct Branch {
    std::vector<Conv> convs;
    Cbam cbam;
  };
  struct Block {
    Linear modulation, qkv, proj, fc1, fc2;
  };
  struct Layout {
    std::vector<Branch> branches;
    Conv plain;
    Linear dfsi1, dfsi2;
    Linear time1, time2;
    size_t class_table = 0;
    Conv patch;
    size_t pos = 0;
    std::vector<Block> blocks;
    Linear head;
  };

  void build(uint64_t seed, bool initialize);
  ad::Var p(ad::Tape& tape, size_t index) const { return tape.param(params_, index); }
  ad::Var apply_linear(ad::Tape& tape, ad::Var x, const Linear& l) const;

  ModelConfig config_;
  ParameterSet params_;
  Layout layout_;
};

// JSON block stored in EDTM checkpoints of the noise predictor.
struct DiffusionCheckpointMeta {
  ModelConfig model;
  uint32_t steps = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  double scale_factor = 1.0;
  double sample_rate_hz = 128.0;
  uint64_t train_size = 0;
};

nlohmann::json diffusion_checkpoint_config(const DiffusionCheckpointMeta& meta);
DiffusionCheckpointMeta parse_diffusion_checkpoint_config(const nlohmann::json& j);

}  // namespace eegdt
