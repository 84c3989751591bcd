#include "eegdt/model.hpp"

#include <cmath>
#include <numbers>

#include "eegdt/errors.hpp"
#include "eegdt/rng.hpp"
#include "eegdt/spectrum.hpp"

namespace eegdt {

// ---------------------------------------------------------------------------
// config

ModelConfig ModelConfig::desk_default(uint32_t channels, uint32_t length, uint32_t t_max) {
  ModelConfig c;
  c.channels = channels;
  c.length = length;
  c.patch_len = std::max<uint32_t>(1, length / 16);
  c.t_max = t_max;
  return c;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("model config: " + msg); };
  if (channels < 1 || length < 1) fail("channels and length must be >= 1");
  if (patch_len < 1 || length % patch_len != 0) fail("length must be divisible by patch_len");
  if (hidden_dim < 2 || hidden_dim % 2 != 0) fail("hidden_dim must be even and >= 2");
  if (heads < 1 || hidden_dim % heads != 0) fail("hidden_dim must be divisible by heads");
  if (depth < 1) fail("depth must be >= 1");
  if (t_max < 1) fail("t_max must be >= 1");
  if (msc_channels < 1) fail("msc_channels must be >= 1");
  if (mlp_ratio < 1) fail("mlp_ratio must be >= 1");
  if (conditional && num_classes < 1) fail("conditional model needs num_classes >= 1");
  auto check_kernel = [&](uint32_t k, const char* what) {
    if (k % 2 == 0) fail(std::string(what) + " kernel lengths must be odd");
    if (k > length) fail(std::string(what) + " kernel length " + std::to_string(k) + " exceeds L");
  };
  if (msc_enabled) {
    for (const auto* ks : {&msc_kernels_low, &msc_kernels_high}) {
      if (ks->empty()) fail("each MSC branch needs at least one kernel");
      if (msc_channels % ks->size() != 0) fail("msc_channels must be divisible by the branch kernel count");
      for (uint32_t k : *ks) check_kernel(k, "MSC");
    }
    if (msc_channels < cbam_reduction) fail("msc_channels must be >= the CBAM reduction ratio");
    check_kernel(cbam_kernel, "CBAM");
  } else {
    check_kernel(plain_conv_kernel, "plain conv");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"channels", c.channels},
                     {"length", c.length},
                     {"patch_len", c.patch_len},
                     {"hidden_dim", c.hidden_dim},
                     {"depth", c.depth},
                     {"heads", c.heads},
                     {"msc_kernels_low", c.msc_kernels_low},
                     {"msc_kernels_high", c.msc_kernels_high},
                     {"msc_channels", c.msc_channels},
                     {"conditional", c.conditional},
                     {"num_classes", c.num_classes},
                     {"t_max", c.t_max},
                     {"msc_enabled", c.msc_enabled},
                     {"dfsi_enabled", c.dfsi_enabled},
                     {"cbam_reduction", c.cbam_reduction},
                     {"cbam_kernel", c.cbam_kernel},
                     {"plain_conv_kernel", c.plain_conv_kernel},
                     {"mlp_ratio", c.mlp_ratio},
                     {"dfsi_hidden", c.dfsi_hidden}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.channels = j.value("channels", d.channels);
  c.length = j.value("length", d.length);
  c.patch_len = j.value("patch_len", d.patch_len);
  c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  c.depth = j.value("depth", d.depth);
  c.heads = j.value("heads", d.heads);
  c.msc_kernels_low = j.value("msc_kernels_low", d.msc_kernels_low);
  c.msc_kernels_high = j.value("msc_kernels_high", d.msc_kernels_high);
  c.msc_channels = j.value("msc_channels", d.msc_channels);
  c.conditional = j.value("conditional", d.conditional);
  c.num_classes = j.value("num_classes", d.num_classes);
  c.t_max = j.value("t_max", d.t_max);
  c.msc_enabled = j.value("msc_enabled", d.msc_enabled);
  c.dfsi_enabled = j.value("dfsi_enabled", d.dfsi_enabled);
  c.cbam_reduction = j.value("cbam_reduction", d.cbam_reduction);
  c.cbam_kernel = j.value("cbam_kernel", d.cbam_kernel);
  c.plain_conv_kernel = j.value("plain_conv_kernel", d.plain_conv_kernel);
  c.mlp_ratio = j.value("mlp_ratio", d.mlp_ratio);
  c.dfsi_hidden = j.value("dfsi_hidden", d.dfsi_hidden);
}

// ---------------------------------------------------------------------------
// closed-form pieces

double time_weight(double t, uint32_t t_max) {
  if (t_max == 0) throw InvalidArgument("time_weight: T_max must be positive");
  if (!(t >= 0.0) || t > static_cast<double>(t_max)) {
    throw InvalidArgument("time_weight: t outside [0, T_max]");
  }
  // cos(pi/2) evaluates to ~6e-17; the endpoint is pinned to an exact zero.
  if (t == static_cast<double>(t_max)) return 0.0;
  return std::cos(std::numbers::pi / 2.0 * t / static_cast<double>(t_max));
}

std::vector<double> sinusoidal_embedding(double t, size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw InvalidArgument("sinusoidal_embedding: dim must be even");
  const size_t half = dim / 2;
  std::vector<double> out(dim);
  for (size_t i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
    out[2 * i] = std::sin(t * freq);
    out[2 * i + 1] = std::cos(t * freq);
  }
  return out;
}

// ---------------------------------------------------------------------------
// construction

namespace {

class Initializer {
 public:
  Initializer(ParameterSet& params, uint64_t seed, bool active)
      : params_(params), rng_(seed), active_(active) {}

  size_t zeros(const std::string& name, std::vector<size_t> shape) {
    return params_.add(name, Tensor(std::move(shape), 0.0));
  }
  size_t uniform(const std::string& name, std::vector<size_t> shape, double bound) {
    Tensor t(std::move(shape), 0.0);
    if (active_)
      for (double& x : t.data) x = rng_.uniform(-bound, bound);
    return params_.add(name, std::move(t));
  }
  size_t normal(const std::string& name, std::vector<size_t> shape, double stddev) {
    Tensor t(std::move(shape), 0.0);
    if (active_)
      for (double& x : t.data) x = rng_.normal(0.0, stddev);
    return params_.add(name, std::move(t));
  }
  size_t xavier(const std::string& name, size_t out, size_t in) {
    return uniform(name, {out, in}, std::sqrt(6.0 / static_cast<double>(in + out)));
  }

 private:
  ParameterSet& params_;
  Rng rng_;
  bool active_;
};

}  // namespace

NoisePredictor::NoisePredictor(ModelConfig config, uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  build(seed, true);
  params_.quantize_f32();
}

NoisePredictor::NoisePredictor(ModelConfig config, ParameterSet params) : config_(std::move(config)) {
  config_.validate();
  build(0, false);
  if (params.size() != params_.size()) {
    throw InvalidArgument("noise predictor: checkpoint has " + std::to_string(params.size()) +
                          " tensors, config expects " + std::to_string(params_.size()));
  }
  for (size_t i = 0; i < params_.size(); ++i) {
    if (params.name(i) != params_.name(i) || params.tensor(i).shape != params_.tensor(i).shape) {
      throw InvalidArgument("noise predictor: tensor '" + params.name(i) + "' " +
                            shape_string(params.tensor(i).shape) + " does not match expected '" +
                            params_.name(i) + "' " + shape_string(params_.tensor(i).shape));
    }
  }
  params_ = std::move(params);
}

void NoisePredictor::build(uint64_t seed, bool initialize) {
  const auto& c = config_;
  Initializer init(params_, seed, initialize);
  const size_t d = c.hidden_dim;
  const size_t f = c.feature_channels();

  auto conv = [&](const std::string& name, size_t out, size_t in, size_t k) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * k));
    Conv cv;
    cv.weight = init.uniform(name + ".weight", {out, in, k}, bound);
    cv.bias = init.uniform(name + ".bias", {out}, bound);
    return cv;
  };
  auto linear = [&](const std::string& name, size_t out, size_t in) {
    Linear l;
    l.weight = init.xavier(name + ".weight", out, in);
    l.bias = init.zeros(name + ".bias", {out});
    return l;
  };

  if (c.msc_enabled) {
    const char* branch_names[2] = {"msc.low", "msc.high"};
    const std::vector<uint32_t>* kernels[2] = {&c.msc_kernels_low, &c.msc_kernels_high};
    for (size_t b = 0; b < 2; ++b) {
      Branch br;
      const std::string base = branch_names[b];
      const size_t per = c.msc_channels / kernels[b]->size();
      for (size_t i = 0; i < kernels[b]->size(); ++i) {
        br.convs.push_back(conv(base + ".conv" + std::to_string(i), per, c.channels, (*kernels[b])[i]));
      }
      const size_t hidden = std::max<size_t>(1, c.msc_channels / c.cbam_reduction);
      br.cbam.fc1 = linear(base + ".cbam.fc1", hidden, c.msc_channels);
      br.cbam.fc2 = linear(base + ".cbam.fc2", c.msc_channels, hidden);
      br.cbam.spatial = conv(base + ".cbam.spatial", 1, 2, c.cbam_kernel);
      layout_.branches.push_back(std::move(br));
    }
  } else {
    layout_.plain = conv("stem", f, c.channels, c.plain_conv_kernel);
  }

  if (c.dfsi_enabled) {
    const size_t bins = c.channels * (c.length / 2 + 1);
    const size_t hidden = c.dfsi_hidden ? c.dfsi_hidden : d;
    layout_.dfsi1 = linear("dfsi.fc1", hidden, bins);
    layout_.dfsi2 = linear("dfsi.fc2", d, hidden);
  }

  layout_.time1.weight = init.normal("time.fc1.weight", {d, d}, 0.02);
  layout_.time1.bias = init.zeros("time.fc1.bias", {d});
  layout_.time2.weight = init.normal("time.fc2.weight", {d, d}, 0.02);
  layout_.time2.bias = init.zeros("time.fc2.bias", {d});

  if (c.conditional) layout_.class_table = init.normal("class.table", {c.num_classes, d}, 0.02);

  layout_.patch.weight = init.uniform("patch.weight", {d, f, c.patch_len},
                                      std::sqrt(6.0 / static_cast<double>(f * c.patch_len + d)));
  layout_.patch.bias = init.zeros("patch.bias", {d});
  layout_.pos = init.normal("patch.pos", {c.tokens(), d}, 0.02);

  for (size_t i = 0; i < c.depth; ++i) {
    const std::string base = "blocks." + std::to_string(i);
    Block blk;
    blk.modulation.weight = init.zeros(base + ".mod.weight", {6 * d, d});
    blk.modulation.bias = init.zeros(base + ".mod.bias", {6 * d});
    blk.qkv = linear(base + ".qkv", 3 * d, d);
    blk.proj = linear(base + ".proj", d, d);
    blk.fc1 = linear(base + ".fc1", c.mlp_ratio * d, d);
    blk.fc2 = linear(base + ".fc2", d, c.mlp_ratio * d);
    layout_.blocks.push_back(blk);
  }

  layout_.head.weight = init.zeros("head.weight", {static_cast<size_t>(c.channels) * c.patch_len, d});
  layout_.head.bias = init.zeros("head.bias", {static_cast<size_t>(c.channels) * c.patch_len});
}

// ---------------------------------------------------------------------------
// forward

ad::Var NoisePredictor::apply_linear(ad::Tape& tape, ad::Var x, const Linear& l) const {
  return ad::linear(x, p(tape, l.weight), p(tape, l.bias));
}

ad::Var NoisePredictor::msc_branch_conv(ad::Tape& tape, ad::Var x, size_t branch) const {
  if (!config_.msc_enabled) throw InvalidArgument("msc_branch_conv: MSC is disabled");
  const Branch& br = layout_.branches.at(branch);
  std::vector<ad::Var> parts;
  for (const Conv& cv : br.convs) parts.push_back(ad::conv1d_same(x, p(tape, cv.weight), p(tape, cv.bias)));
  return parts.size() == 1 ? parts.front() : ad::concat_rows(parts);
}

ad::Var NoisePredictor::cbam(ad::Tape& tape, ad::Var features, size_t branch) const {
  const Cbam& cb = layout_.branches.at(branch).cbam;
  const size_t len = features.cols();
  auto shared_mlp = [&](ad::Var v) {
    return apply_linear(tape, ad::relu(apply_linear(tape, v, cb.fc1)), cb.fc2);
  };
  // channel attention
  const ad::Var channel_gate =
      ad::sigmoid(ad::add(shared_mlp(ad::mean_cols(features)), shared_mlp(ad::max_cols(features))));
  const ad::Var refined = ad::mul_col(features, channel_gate);
  // temporal attention
  const ad::Var pooled = ad::concat_rows({ad::reshape(ad::mean_rows(refined), {1, len}),
                                          ad::reshape(ad::max_rows(refined), {1, len})});
  // Edge-replicate padding: a map that is constant over time stays constant.
  const size_t k = config_.cbam_kernel;
  std::vector<ad::Var> cols;
  const ad::Var first = ad::slice_cols(pooled, 0, 1), last = ad::slice_cols(pooled, len - 1, 1);
  for (size_t i = 0; i < (k - 1) / 2; ++i) cols.push_back(first);
  cols.push_back(pooled);
  for (size_t i = 0; i < k / 2; ++i) cols.push_back(last);
  const ad::Var padded = cols.size() == 1 ? pooled : ad::concat_cols(cols);
  const ad::Var temporal_gate = ad::sigmoid(ad::reshape(
      ad::conv1d(padded, p(tape, cb.spatial.weight), p(tape, cb.spatial.bias), 1, 0, 0), {len}));
  return ad::mul_row(refined, temporal_gate);
}

ad::Var NoisePredictor::msc_forward(ad::Tape& tape, ad::Var x) const {
  if (x.rows() != config_.channels || x.cols() != config_.length) {
    throw InvalidArgument("msc_forward: input " + shape_string(x.shape()) + " does not match config");
  }
  if (!config_.msc_enabled) {
    return ad::conv1d_same(x, p(tape, layout_.plain.weight), p(tape, layout_.plain.bias));
  }
  const ad::Var low = cbam(tape, msc_branch_conv(tape, x, 0), 0);
  const ad::Var high = cbam(tape, msc_branch_conv(tape, x, 1), 1);
  return ad::concat_rows({low, high});
}

ad::Var NoisePredictor::dfsi_forward(ad::Tape& tape, const Tensor& x_t) const {
  if (!config_.dfsi_enabled) throw InvalidArgument("dfsi_forward: DFSI is disabled");
  if (x_t.rows() != config_.channels || x_t.cols() != config_.length) {
    throw InvalidArgument("dfsi_forward: input shape does not match config");
  }
  const size_t len = config_.length, bins = len / 2 + 1;
  // Orthonormal scaling keeps the MLP input O(1) for unit-variance signals.
  const double norm = 1.0 / std::sqrt(static_cast<double>(len));
  Tensor spec({config_.channels * bins});
  for (size_t c = 0; c < config_.channels; ++c) {
    const auto mag = magnitude_spectrum(std::span<const double>(x_t.data.data() + c * len, len));
    for (size_t k = 0; k < bins; ++k) spec[c * bins + k] = mag[k] * norm;
  }
  const ad::Var h = ad::silu(apply_linear(tape, tape.constant(std::move(spec)), layout_.dfsi1));
  return apply_linear(tape, h, layout_.dfsi2);
}

ad::Var NoisePredictor::timestep_embedding(ad::Tape& tape, uint32_t t) const {
  Tensor base({config_.hidden_dim}, sinusoidal_embedding(static_cast<double>(t), config_.hidden_dim));
  const ad::Var h = ad::silu(apply_linear(tape, tape.constant(std::move(base)), layout_.time1));
  return apply_linear(tape, h, layout_.time2);
}

ad::Var NoisePredictor::class_embedding(ad::Tape& tape, uint32_t cls) const {
  if (!config_.conditional) throw InvalidArgument("class_embedding: model is unconditional");
  if (cls >= config_.num_classes) {
    throw InvalidArgument("class_embedding: class " + std::to_string(cls) + " >= k = " +
                          std::to_string(config_.num_classes));
  }
  return ad::reshape(ad::slice_rows(p(tape, layout_.class_table), cls, 1), {config_.hidden_dim});
}

ad::Var NoisePredictor::build_guidance(ad::Tape& tape, uint32_t t, std::optional<uint32_t> cls,
                                       const Tensor& x_t) const {
  if (config_.conditional && !cls) throw InvalidArgument("guidance: conditional model needs a class");
  if (!config_.conditional && cls) throw InvalidArgument("guidance: unconditional model given a class");
  ad::Var g = timestep_embedding(tape, t);
  if (config_.dfsi_enabled) {
    const double w = time_weight(static_cast<double>(t), config_.t_max);
    g = ad::add(g, ad::scale(dfsi_forward(tape, x_t), w));
  }
  // Conditional guidance is the unconditional one plus the class row.
  if (config_.conditional) g = ad::add(g, class_embedding(tape, *cls));
  return g;
}

ad::Var NoisePredictor::patchify(ad::Tape& tape, ad::Var features) const {
  const size_t pl = config_.patch_len;
  if (features.cols() % pl != 0) throw InvalidArgument("patchify: length not divisible by patch_len");
  const ad::Var conv =
      ad::conv1d(features, p(tape, layout_.patch.weight), p(tape, layout_.patch.bias), pl, 0, 0);
  return ad::add(ad::transpose(conv), p(tape, layout_.pos));
}

ad::Var NoisePredictor::dit_block(ad::Tape& tape, size_t block, ad::Var tokens, ad::Var guidance) const {
  const Block& blk = layout_.blocks.at(block);
  const size_t d = config_.hidden_dim, heads = config_.heads, dh = d / heads;
  const ad::Var mod = apply_linear(tape, ad::silu(guidance), blk.modulation);
  auto chunk = [&](size_t i) { return ad::slice_cols(mod, i * d, d); };
  auto modulate = [](ad::Var h, ad::Var shift, ad::Var scale) {
    return ad::add_row(ad::mul_row(h, ad::add_scalar(scale, 1.0)), shift);
  };

  // attention sublayer
  const ad::Var h1 = modulate(ad::layer_norm_rows(tokens, 1e-6), chunk(0), chunk(1));
  const ad::Var qkv = apply_linear(tape, h1, blk.qkv);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<ad::Var> head_out;
  for (size_t h = 0; h < heads; ++h) {
    const ad::Var q = ad::slice_cols(qkv, h * dh, dh);
    const ad::Var k = ad::slice_cols(qkv, d + h * dh, dh);
    const ad::Var v = ad::slice_cols(qkv, 2 * d + h * dh, dh);
    const ad::Var att = ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), inv_sqrt));
    head_out.push_back(ad::matmul(att, v));
  }
  const ad::Var attn =
      apply_linear(tape, heads == 1 ? head_out.front() : ad::concat_cols(head_out), blk.proj);
  tokens = ad::add(tokens, ad::mul_row(attn, chunk(2)));

  // pointwise MLP sublayer
  const ad::Var h2 = modulate(ad::layer_norm_rows(tokens, 1e-6), chunk(3), chunk(4));
  const ad::Var mlp = apply_linear(tape, ad::gelu(apply_linear(tape, h2, blk.fc1)), blk.fc2);
  return ad::add(tokens, ad::mul_row(mlp, chunk(5)));
}

ad::Var NoisePredictor::output_head(ad::Tape& tape, ad::Var tokens) const {
  const size_t n = config_.tokens(), ch = config_.channels, pl = config_.patch_len;
  const ad::Var out = apply_linear(tape, ad::layer_norm_rows(tokens, 1e-6), layout_.head);
  // token n holds [c * P + p] -> signal[c, n * P + p]
  const ad::Var permuted = ad::permute3(ad::reshape(out, {n, ch, pl}), {1, 0, 2});
  return ad::reshape(permuted, {ch, static_cast<size_t>(config_.length)});
}

ad::Var NoisePredictor::predict(ad::Tape& tape, const Tensor& x_t, uint32_t t,
                                std::optional<uint32_t> cls) const {
  if (x_t.rows() != config_.channels || x_t.cols() != config_.length) {
    throw InvalidArgument("model: input " + shape_string(x_t.shape) + " does not match config " +
                          std::to_string(config_.channels) + "x" + std::to_string(config_.length));
  }
  if (t > config_.t_max) throw InvalidArgument("model: t exceeds T_max");
  const ad::Var x = tape.constant(x_t);
  ad::Var tokens = patchify(tape, msc_forward(tape, x));
  const ad::Var g = build_guidance(tape, t, cls, x_t);
  for (size_t i = 0; i < layout_.blocks.size(); ++i) tokens = dit_block(tape, i, tokens, g);
  return output_head(tape, tokens);
}

// ---------------------------------------------------------------------------
// checkpoint metadata

nlohmann::json diffusion_checkpoint_config(const DiffusionCheckpointMeta& meta) {
  return nlohmann::json{{"kind", "noise_predictor"},
                        {"model", meta.model},
                        {"schedule",
                         {{"steps", meta.steps}, {"beta_start", meta.beta_start}, {"beta_end", meta.beta_end}}},
                        {"scale_factor", meta.scale_factor},
                        {"sample_rate_hz", meta.sample_rate_hz},
                        {"train_size", meta.train_size}};
}

DiffusionCheckpointMeta parse_diffusion_checkpoint_config(const nlohmann::json& j) {
  if (j.value("kind", std::string()) != "noise_predictor") {
    throw InvalidArgument("checkpoint is not a noise predictor");
  }
  try {
    DiffusionCheckpointMeta m;
    m.model = j.at("model").get<ModelConfig>();
    m.steps = j.at("schedule").at("steps").get<uint32_t>();
    m.beta_start = j.at("schedule").at("beta_start").get<double>();
    m.beta_end = j.at("schedule").at("beta_end").get<double>();
    m.scale_factor = j.at("scale_factor").get<double>();
    m.sample_rate_hz = j.value("sample_rate_hz", 128.0);
    m.train_size = j.value("train_size", uint64_t{0});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("noise predictor checkpoint config: ") + e.what());
  }
}

}  // namespace eegdt
