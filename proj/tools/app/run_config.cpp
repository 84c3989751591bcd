#include "run_config.hpp"

#include <fstream>
#include <set>

#include "eegdt/errors.hpp"
#include "eegdt/rng.hpp"

namespace eegdt::app {

namespace {

using json = nlohmann::json;

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InvalidArgument("config: '" + path + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) {
      throw InvalidArgument("config: unknown key '" + (path.empty() ? key : path + "." + key) + "'");
    }
  }
}

template <typename T>
void read(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument("config: field '" + (path.empty() ? std::string(key) : path + "." + key) +
                          "' has the wrong type");
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  return j.contains(key) ? j.at(key) : empty;
}

void parse_training(const json& j, const std::string& path, TrainingSection& t) {
  check_keys(j, path, {"lr", "weight_decay", "batch_size", "epochs"});
  read(j, path, "lr", t.lr);
  read(j, path, "weight_decay", t.weight_decay);
  read(j, path, "batch_size", t.batch_size);
  read(j, path, "epochs", t.epochs);
  if (!(t.lr > 0.0)) throw InvalidArgument("config: " + path + ".lr must be > 0");
  if (!(t.weight_decay >= 0.0)) throw InvalidArgument("config: " + path + ".weight_decay must be >= 0");
  if (t.batch_size < 1) throw InvalidArgument("config: " + path + ".batch_size must be >= 1");
}

json training_json(const TrainingSection& t) {
  return {{"lr", t.lr}, {"weight_decay", t.weight_decay}, {"batch_size", t.batch_size}, {"epochs", t.epochs}};
}

}  // namespace

BetaRange ScheduleSection::range() const {
  BetaRange r = default_beta_range(steps);
  if (beta_start > 0.0) r.start = beta_start;
  if (beta_end > 0.0) r.end = beta_end;
  return r;
}

NoiseSchedule ScheduleSection::build() const {
  const BetaRange r = range();
  return make_linear_schedule(steps, r.start, r.end);
}

AdamWSettings TrainingSection::optimizer() const {
  AdamWSettings s;
  s.lr = lr;
  s.weight_decay = weight_decay;
  return s;
}

ModelConfig RunConfig::model_for(uint32_t channels, uint32_t length, uint32_t num_classes) const {
  ModelConfig m = model;
  m.channels = channels;
  m.length = length;
  m.t_max = schedule.steps;
  if (m.patch_len == 0) m.patch_len = std::max<uint32_t>(1, length / 16);
  m.conditional = model.conditional && num_classes >= 1;
  m.num_classes = m.conditional ? num_classes : 0;
  m.msc_enabled = msc_enabled;
  m.dfsi_enabled = dfsi_enabled;
  m.validate();
  return m;
}

ClassifierConfig RunConfig::classifier_for(uint32_t channels, uint32_t length, uint32_t num_classes) const {
  ClassifierConfig c = classifier;
  c.channels = channels;
  c.length = length;
  c.num_classes = num_classes;
  c.validate();
  return c;
}

std::string RunConfig::dataset_name() const {
  if (!dataset.name.empty()) return dataset.name;
  if (dataset.source == "file") return std::filesystem::path(dataset.path).stem().string();
  return "synth";
}

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  check_keys(j, "", {"seed", "out_dir", "dataset", "split", "schedule", "model", "ablation", "classifier", "go",
                     "diffusion_training", "classifier_training", "augmentation", "generation", "experiment"});
  read(j, "", "seed", c.seed);
  read(j, "", "out_dir", c.out_dir);

  const json& ds = section(j, "dataset");
  check_keys(ds, "dataset", {"source", "path", "name", "sample_rate_hz", "synth"});
  read(ds, "dataset", "source", c.dataset.source);
  read(ds, "dataset", "path", c.dataset.path);
  read(ds, "dataset", "name", c.dataset.name);
  read(ds, "dataset", "sample_rate_hz", c.dataset.sample_rate_hz);
  if (c.dataset.source != "synth" && c.dataset.source != "file") {
    throw InvalidArgument("config: dataset.source must be 'synth' or 'file'");
  }
  if (c.dataset.source == "file" && c.dataset.path.empty()) {
    throw InvalidArgument("config: dataset.path is required when dataset.source is 'file'");
  }
  const json& sy = section(ds, "synth");
  const std::string sp = "dataset.synth";
  check_keys(sy, sp, {"num_classes", "per_class", "channels", "length", "sample_rate_hz", "band_start_hz",
                      "band_width_hz", "band_step_hz", "components", "amplitude_uv", "seed"});
  auto& s = c.dataset.synth;
  read(sy, sp, "num_classes", s.num_classes);
  read(sy, sp, "per_class", s.per_class);
  read(sy, sp, "channels", s.channels);
  read(sy, sp, "length", s.length);
  read(sy, sp, "sample_rate_hz", s.sample_rate_hz);
  read(sy, sp, "band_start_hz", s.band_start_hz);
  read(sy, sp, "band_width_hz", s.band_width_hz);
  read(sy, sp, "band_step_hz", s.band_step_hz);
  read(sy, sp, "components", s.components);
  read(sy, sp, "amplitude_uv", s.amplitude_uv);
  read(sy, sp, "seed", s.seed);

  const json& split = section(j, "split");
  check_keys(split, "split", {"train", "val", "test"});
  read(split, "split", "train", c.split.train_frac);
  read(split, "split", "val", c.split.val_frac);
  read(split, "split", "test", c.split.test_frac);

  const json& sch = section(j, "schedule");
  check_keys(sch, "schedule", {"steps", "beta_start", "beta_end"});
  read(sch, "schedule", "steps", c.schedule.steps);
  read(sch, "schedule", "beta_start", c.schedule.beta_start);
  read(sch, "schedule", "beta_end", c.schedule.beta_end);
  if (c.schedule.steps < 1) throw InvalidArgument("config: schedule.steps must be >= 1");

  const json& m = section(j, "model");
  check_keys(m, "model", {"patch_len", "hidden_dim", "depth", "heads", "msc_kernels_low", "msc_kernels_high",
                          "msc_channels", "conditional", "cbam_reduction", "cbam_kernel", "plain_conv_kernel",
                          "mlp_ratio", "dfsi_hidden"});
  read(m, "model", "patch_len", c.model.patch_len);
  read(m, "model", "hidden_dim", c.model.hidden_dim);
  read(m, "model", "depth", c.model.depth);
  read(m, "model", "heads", c.model.heads);
  read(m, "model", "msc_kernels_low", c.model.msc_kernels_low);
  read(m, "model", "msc_kernels_high", c.model.msc_kernels_high);
  read(m, "model", "msc_channels", c.model.msc_channels);
  read(m, "model", "conditional", c.model.conditional);
  read(m, "model", "cbam_reduction", c.model.cbam_reduction);
  read(m, "model", "cbam_kernel", c.model.cbam_kernel);
  read(m, "model", "plain_conv_kernel", c.model.plain_conv_kernel);
  read(m, "model", "mlp_ratio", c.model.mlp_ratio);
  read(m, "model", "dfsi_hidden", c.model.dfsi_hidden);

  const json& ab = section(j, "ablation");
  check_keys(ab, "ablation", {"msc_enabled", "dfsi_enabled"});
  read(ab, "ablation", "msc_enabled", c.msc_enabled);
  read(ab, "ablation", "dfsi_enabled", c.dfsi_enabled);

  const json& cl = section(j, "classifier");
  check_keys(cl, "classifier", {"temporal_kernel", "temporal_filters", "depth_multiplier", "separable_filters",
                                "separable_kernel", "pool1", "pool2", "embedding_dim", "input_scale"});
  read(cl, "classifier", "temporal_kernel", c.classifier.temporal_kernel);
  read(cl, "classifier", "temporal_filters", c.classifier.temporal_filters);
  read(cl, "classifier", "depth_multiplier", c.classifier.depth_multiplier);
  read(cl, "classifier", "separable_filters", c.classifier.separable_filters);
  read(cl, "classifier", "separable_kernel", c.classifier.separable_kernel);
  read(cl, "classifier", "pool1", c.classifier.pool1);
  read(cl, "classifier", "pool2", c.classifier.pool2);
  read(cl, "classifier", "embedding_dim", c.classifier.embedding_dim);
  read(cl, "classifier", "input_scale", c.classifier.input_scale);

  const json& go = section(j, "go");
  check_keys(go, "go", {"beta_smooth", "alpha", "eta", "same_class_pairs"});
  read(go, "go", "beta_smooth", c.go.beta_smooth);
  read(go, "go", "alpha", c.go.alpha);
  read(go, "go", "eta", c.go.eta);
  read(go, "go", "same_class_pairs", c.go.same_class_pairs);
  c.go.validate();

  parse_training(section(j, "diffusion_training"), "diffusion_training", c.diffusion_training);
  parse_training(section(j, "classifier_training"), "classifier_training", c.classifier_training);

  const json& aug = section(j, "augmentation");
  check_keys(aug, "augmentation", {"mode", "append_ratio"});
  read(aug, "augmentation", "mode", c.augmentation_mode);
  read(aug, "augmentation", "append_ratio", c.append_ratio);
  parse_loss_mode(c.augmentation_mode);
  if (!(c.append_ratio >= 0.0)) throw InvalidArgument("config: augmentation.append_ratio must be >= 0");

  const json& gen = section(j, "generation");
  check_keys(gen, "generation", {"count"});
  read(gen, "generation", "count", c.generate_count);

  const json& ex = section(j, "experiment");
  check_keys(ex, "experiment", {"seeds", "modes"});
  read(ex, "experiment", "seeds", c.experiment_seeds);
  read(ex, "experiment", "modes", c.experiment_modes);
  if (c.experiment_seeds.empty()) throw InvalidArgument("config: experiment.seeds must not be empty");
  for (const auto& mode : c.experiment_modes) parse_loss_mode(mode);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  const auto& s = c.dataset.synth;
  const auto& m = c.model;
  const auto& cl = c.classifier;
  return {
      {"seed", c.seed},
      {"out_dir", c.out_dir},
      {"dataset",
       {{"source", c.dataset.source},
        {"path", c.dataset.path},
        {"name", c.dataset.name},
        {"sample_rate_hz", c.dataset.sample_rate_hz},
        {"synth",
         {{"num_classes", s.num_classes},
          {"per_class", s.per_class},
          {"channels", s.channels},
          {"length", s.length},
          {"sample_rate_hz", s.sample_rate_hz},
          {"band_start_hz", s.band_start_hz},
          {"band_width_hz", s.band_width_hz},
          {"band_step_hz", s.band_step_hz},
          {"components", s.components},
          {"amplitude_uv", s.amplitude_uv},
          {"seed", s.seed}}}}},
      {"split", {{"train", c.split.train_frac}, {"val", c.split.val_frac}, {"test", c.split.test_frac}}},
      {"schedule", {{"steps", c.schedule.steps}, {"beta_start", c.schedule.beta_start}, {"beta_end", c.schedule.beta_end}}},
      {"model",
       {{"patch_len", m.patch_len},
        {"hidden_dim", m.hidden_dim},
        {"depth", m.depth},
        {"heads", m.heads},
        {"msc_kernels_low", m.msc_kernels_low},
        {"msc_kernels_high", m.msc_kernels_high},
        {"msc_channels", m.msc_channels},
        {"conditional", m.conditional},
        {"cbam_reduction", m.cbam_reduction},
        {"cbam_kernel", m.cbam_kernel},
        {"plain_conv_kernel", m.plain_conv_kernel},
        {"mlp_ratio", m.mlp_ratio},
        {"dfsi_hidden", m.dfsi_hidden}}},
      {"ablation", {{"msc_enabled", c.msc_enabled}, {"dfsi_enabled", c.dfsi_enabled}}},
      {"classifier",
       {{"temporal_kernel", cl.temporal_kernel},
        {"temporal_filters", cl.temporal_filters},
        {"depth_multiplier", cl.depth_multiplier},
        {"separable_filters", cl.separable_filters},
        {"separable_kernel", cl.separable_kernel},
        {"pool1", cl.pool1},
        {"pool2", cl.pool2},
        {"embedding_dim", cl.embedding_dim},
        {"input_scale", cl.input_scale}}},
      {"go", c.go},
      {"diffusion_training", training_json(c.diffusion_training)},
      {"classifier_training", training_json(c.classifier_training)},
      {"augmentation", {{"mode", c.augmentation_mode}, {"append_ratio", c.append_ratio}}},
      {"generation", {{"count", c.generate_count}}},
      {"experiment", {{"seeds", c.experiment_seeds}, {"modes", c.experiment_modes}}},
  };
}

uint64_t stage_seed(const RunConfig& c, Stage s) {
  return derive_seed(c.seed, {static_cast<uint64_t>(s)});
}

}  // namespace eegdt::app
