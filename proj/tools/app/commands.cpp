#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "eegdt/checkpoint.hpp"
#include "eegdt/diffusion_training.hpp"
#include "eegdt/errors.hpp"
#include "eegdt/evaluation.hpp"
#include "eegdt/report.hpp"

namespace eegdt::app {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Full-scale runs use 5000 diffusion epochs; desk defaults are far smaller.
constexpr uint32_t kFullScaleDiffusionEpochs = 5000;

fs::path out_path(const RunConfig& cfg, const fs::path& given, const std::string& default_name) {
  if (!given.empty()) {
    if (given.has_parent_path()) fs::create_directories(given.parent_path());
    return given;
  }
  fs::create_directories(cfg.out_dir);
  return fs::path(cfg.out_dir) / default_name;
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
  fs::path s = p;
  s.replace_filename(p.stem().string() + suffix);
  return s;
}

SignalDataset source_dataset(const RunConfig& cfg, const std::string& data) {
  if (!data.empty()) return load_any_dataset(data, cfg.dataset.sample_rate_hz);
  if (cfg.dataset.source == "file") return load_any_dataset(cfg.dataset.path, cfg.dataset.sample_rate_hz);
  try {
    return synth_dataset(cfg.dataset.synth);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("config dataset.") + e.what());
  }
}

DatasetSplit split_for(const RunConfig& cfg, const SignalDataset& d) {
  SplitSpec spec = cfg.split;
  spec.seed = stage_seed(cfg, Stage::split);
  return split_dataset(d, spec);
}

std::string shape_of(const SignalDataset& d) {
  return std::to_string(d.channels()) + "x" + std::to_string(d.length());
}

struct DiffusionStageResult {
  DiffusionCheckpointMeta meta;
  std::vector<double> loss;
};

DiffusionStageResult train_diffusion_stage(const RunConfig& cfg, const SignalDataset& train,
                                           const fs::path& ckpt, const fs::path& curve, std::ostream& out) {
  const double s = compute_scale_factor(train);
  const SignalDataset scaled = scale_dataset(train, s);
  const uint32_t k = train.labeled() ? train.num_classes : 0;
  const ModelConfig mc = cfg.model_for(static_cast<uint32_t>(train.channels()),
                                       static_cast<uint32_t>(train.length()), k);
  NoisePredictor model(mc, stage_seed(cfg, Stage::diffusion_init));
  const NoiseSchedule schedule = cfg.schedule.build();

  DiffusionTrainSettings st;
  st.optimizer = cfg.diffusion_training.optimizer();
  st.batch_size = cfg.diffusion_training.batch_size;
  st.epochs = cfg.diffusion_training.epochs;
  st.seed = stage_seed(cfg, Stage::diffusion_train);
  out << "training diffusion model: " << train.size() << " segments " << shape_of(train) << ", T = "
      << schedule.steps << ", " << model.parameters().total_elements() << " parameters, " << st.epochs
      << " epochs (full-scale setting: " << kFullScaleDiffusionEpochs << ")"
      << (mc.conditional ? ", conditional" : ", unconditional") << (mc.msc_enabled ? "" : ", MSC off")
      << (mc.dfsi_enabled ? "" : ", DFSI off") << "\n";
  const uint32_t every = std::max<uint32_t>(1, st.epochs / 10);
  const DiffusionTrainReport rep = train_diffusion(model, scaled, schedule, st, [&](uint32_t e, double l) {
    if (e == 1 || e % every == 0 || e == st.epochs) out << "  epoch " << e << " loss " << format_double(l) << "\n";
  });

  DiffusionStageResult r;
  r.meta.model = mc;
  r.meta.steps = schedule.steps;
  r.meta.beta_start = cfg.schedule.range().start;
  r.meta.beta_end = cfg.schedule.range().end;
  r.meta.scale_factor = s;
  r.meta.sample_rate_hz = train.sample_rate_hz;
  r.meta.train_size = train.size();
  r.loss = rep.epoch_loss;
  save_checkpoint(ckpt, diffusion_checkpoint_config(r.meta), model.parameters());
  write_loss_curve(rep.epoch_loss, curve);
  out << "wrote " << ckpt.string() << " and " << curve.string() << "\n";
  return r;
}

SignalDataset generate_stage(const fs::path& ckpt_path, size_t count, const std::vector<uint32_t>* classes,
                             uint64_t seed) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  const DiffusionCheckpointMeta meta = parse_diffusion_checkpoint_config(ck.config);
  const NoisePredictor model(meta.model, std::move(ck.params));
  const NoiseSchedule schedule = make_linear_schedule(meta.steps, meta.beta_start, meta.beta_end);
  const std::vector<SignalSegment> scaled =
      generate(model, schedule, count, meta.model.channels, meta.model.length, classes, seed);
  SignalDataset d;
  d.num_classes = meta.model.num_classes;
  d.sample_rate_hz = meta.sample_rate_hz;
  d.segments.reserve(scaled.size());
  for (const auto& z : scaled) d.segments.push_back(unscale(z, meta.scale_factor));
  return d;
}

std::vector<uint32_t> parse_class_list(const std::string& s) {
  std::vector<uint32_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<uint32_t>(v));
    } catch (const std::exception&) {
      throw InvalidArgument("--classes: '" + item + "' is not a class index");
    }
  }
  return out;
}

AugmentationSettings augmentation_for(const RunConfig& cfg, LossMode mode, double ratio,
                                      const SignalDataset* generated) {
  AugmentationSettings aug;
  aug.mode = mode;
  aug.go = cfg.go;
  aug.append_ratio = ratio;
  aug.generated = mode == LossMode::plain_ce ? nullptr : generated;
  return aug;
}

ClassifierTrainSettings classifier_settings(const RunConfig& cfg, uint64_t seed) {
  ClassifierTrainSettings st;
  st.optimizer = cfg.classifier_training.optimizer();
  st.batch_size = cfg.classifier_training.batch_size;
  st.epochs = cfg.classifier_training.epochs;
  st.seed = seed;
  return st;
}

Classifier train_extractor(const RunConfig& cfg, const SignalDataset& data, const fs::path& ckpt,
                           std::ostream& out) {
  if (!data.labeled()) throw InvalidArgument("fid: training an extractor needs labeled original data");
  const ClassifierConfig cc = cfg.classifier_for(static_cast<uint32_t>(data.channels()),
                                                 static_cast<uint32_t>(data.length()), data.num_classes);
  out << "training FID extractor on " << data.size() << " segments (E = " << cc.embedding_dim << ")\n";
  TrainedClassifier t = train_classifier(data, SignalDataset{}, cc, AugmentationSettings{},
                                         classifier_settings(cfg, stage_seed(cfg, Stage::extractor)));
  save_classifier(t.model, ckpt);
  write_train_report(t.report, sibling(ckpt, "_report.txt"));
  return std::move(t.model);
}

void write_json_atomic(const json& j, const fs::path& path) {
  const fs::path tmp = sibling(path, ".json.tmp");
  {
    std::ofstream os(tmp);
    if (!os) throw IoError("cannot write " + tmp.string());
    os << j.dump(2) << "\n";
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

SignalDataset load_any_dataset(const fs::path& path, double sample_rate_hz) {
  if (path.extension() == ".csv") return load_csv_manifest(path, sample_rate_hz);
  return load_dataset(path);
}

// ---------------------------------------------------------------------------

fs::path cmd_synth(const RunConfig& cfg, const SynthOptions& opt, std::ostream& out) {
  const SignalDataset d = source_dataset(cfg, "");
  const fs::path path = out_path(cfg, opt.output, "data.sdf");
  save_dataset(d, path);
  out << "wrote " << path.string() << ": " << d.size() << " segments, " << d.num_classes << " classes, "
      << shape_of(d) << " at " << d.sample_rate_hz << " Hz\n";
  return path;
}

fs::path cmd_train_diffusion(const RunConfig& cfg, const TrainDiffusionOptions& opt, std::ostream& out) {
  const SignalDataset all = source_dataset(cfg, opt.data);
  const SignalDataset train = opt.full ? all : split_for(cfg, all).train;
  const fs::path ckpt = out_path(cfg, opt.output, "diffusion.edtm");
  train_diffusion_stage(cfg, train, ckpt, sibling(ckpt, "_loss.csv"), out);
  return ckpt;
}

fs::path cmd_generate(const RunConfig& cfg, const GenerateOptions& opt, std::ostream& out) {
  if (opt.checkpoint.empty()) throw InvalidArgument("generate: --checkpoint is required");
  const Checkpoint ck = load_checkpoint(opt.checkpoint);
  const DiffusionCheckpointMeta meta = parse_diffusion_checkpoint_config(ck.config);
  const bool conditional = meta.model.conditional;

  std::vector<uint32_t> classes;
  bool use_classes = false;
  size_t count = opt.count ? *opt.count : meta.train_size;
  if (opt.classes.empty() || opt.classes == "balanced") {
    if (opt.classes == "balanced" && !conditional) {
      throw InvalidArgument("generate: class spec given for an unconditional checkpoint");
    }
    if (conditional) {
      for (size_t j = 0; j < count; ++j) classes.push_back(static_cast<uint32_t>(j % meta.model.num_classes));
      use_classes = true;
    }
  } else {
    if (!conditional) throw InvalidArgument("generate: class spec given for an unconditional checkpoint");
    classes = parse_class_list(opt.classes);
    if (opt.count && *opt.count != classes.size()) {
      throw InvalidArgument("generate: --count " + std::to_string(*opt.count) + " differs from the " +
                            std::to_string(classes.size()) + " classes listed");
    }
    count = classes.size();
    use_classes = true;
  }
  const SignalDataset d =
      generate_stage(opt.checkpoint, count, use_classes ? &classes : nullptr, stage_seed(cfg, Stage::generate));
  const fs::path path = out_path(cfg, opt.output, "generated.sdf");
  save_dataset(d, path);
  out << "wrote " << path.string() << ": " << d.size() << " generated segments" << (use_classes ? " (labeled)" : "")
      << "\n";
  return path;
}

TrainReport cmd_train_classifier(const RunConfig& cfg, const TrainClassifierOptions& opt, std::ostream& out) {
  const LossMode mode = parse_loss_mode(opt.mode.empty() ? cfg.augmentation_mode : opt.mode);
  const double ratio = opt.ratio ? *opt.ratio : cfg.append_ratio;
  const SignalDataset all = source_dataset(cfg, opt.data);
  if (!all.labeled()) throw InvalidArgument("train-classifier: dataset must be labeled");
  const DatasetSplit split = split_for(cfg, all);

  SignalDataset generated;
  if (mode != LossMode::plain_ce) {
    if (opt.generated.empty()) throw InvalidArgument("train-classifier: mode " + to_string(mode) + " needs --generated");
    generated = load_any_dataset(opt.generated, cfg.dataset.sample_rate_hz);
  }
  const ClassifierConfig cc = cfg.classifier_for(static_cast<uint32_t>(all.channels()),
                                                 static_cast<uint32_t>(all.length()), all.num_classes);
  TrainedClassifier t = train_classifier(split.train, split.val, cc, augmentation_for(cfg, mode, ratio, &generated),
                                         classifier_settings(cfg, cfg.seed));
  t.report.test = evaluate(t.model, split.test);
  const fs::path ckpt = out_path(cfg, opt.output, "classifier.edtm");
  save_classifier(t.model, ckpt);
  const fs::path report = sibling(ckpt, "_report.txt");
  write_train_report(t.report, report);
  out << "mode " << t.report.mode << ": train size " << t.report.train_size << ", best epoch "
      << t.report.best_epoch << ", test acc " << format_double(t.report.test->acc) << " auc "
      << format_double(t.report.test->auc) << " f1 " << format_double(t.report.test->f1) << "\n";
  out << "wrote " << ckpt.string() << " and " << report.string() << "\n";
  return t.report;
}

Metrics cmd_evaluate(const RunConfig& cfg, const EvaluateOptions& opt, std::ostream& out) {
  if (opt.checkpoint.empty()) throw InvalidArgument("evaluate: --checkpoint is required");
  const Classifier model = load_classifier(opt.checkpoint);
  const SignalDataset test =
      opt.data.empty() ? split_for(cfg, source_dataset(cfg, "")).test : load_any_dataset(opt.data, cfg.dataset.sample_rate_hz);
  const Metrics m = evaluate(model, test);
  for (const auto& w : m.warnings) out << "warning: " << w << "\n";
  const std::string dataset = opt.data.empty() ? cfg.dataset_name() : fs::path(opt.data).stem().string();
  const std::string tag = opt.tag.empty() ? fs::path(opt.checkpoint).stem().string() : opt.tag;
  const fs::path results = out_path(cfg, opt.results, "results_metrics.csv");
  append_metrics_result(results, dataset, tag, "evaluate", cfg.seed, m);
  out << "acc " << format_double(m.acc) << " auc " << format_double(m.auc) << " f1 " << format_double(m.f1) << "\n";
  return m;
}

double cmd_fid(const RunConfig& cfg, const FidOptions& opt, std::ostream& out) {
  if (opt.original.empty() || opt.generated.empty()) {
    throw InvalidArgument("fid: --original and --generated are required");
  }
  const SignalDataset orig = load_any_dataset(opt.original, cfg.dataset.sample_rate_hz);
  const SignalDataset gen = load_any_dataset(opt.generated, cfg.dataset.sample_rate_hz);
  if (orig.channels() != gen.channels() || orig.length() != gen.length()) {
    throw InvalidArgument("fid: original segments are " + shape_of(orig) + " but generated segments are " +
                          shape_of(gen));
  }
  const Classifier extractor = opt.extractor.empty()
                                   ? train_extractor(cfg, orig, out_path(cfg, {}, "extractor.edtm"), out)
                                   : load_classifier(opt.extractor);
  const FidResult r = fid_protocol(orig, gen, extractor);
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
  const std::string tag = opt.tag.empty() ? fs::path(opt.generated).stem().string() : opt.tag;
  append_fid_result(out_path(cfg, opt.results, "results_fid.csv"), fs::path(opt.original).stem().string(), tag,
                    r.fid);
  out << "fid " << format_double(r.fid) << " (E = " << extractor.config().embedding_dim << ")\n";
  if (opt.spectra) {
    const SpectrumReport sr =
        merge_spectra({spectrum_report(orig, "original"), spectrum_report(gen, "generated")});
    const fs::path csv = out_path(cfg, {}, "spectra.csv");
    write_spectrum_csv(sr, csv);
    out << "wrote " << csv.string();
    for (const auto& p : write_spectrum_svg(sr, csv)) out << " " << p.string();
    out << "\n";
  }
  return r.fid;
}

// ---------------------------------------------------------------------------
// experiment

nlohmann::json cmd_experiment(const RunConfig& cfg, const ExperimentOptions& opt, std::ostream& out) {
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  const fs::path record_path = dir / "record.json";
  const json config_snapshot = to_json(cfg);

  json record;
  if (fs::exists(record_path)) {
    std::ifstream is(record_path);
    try {
      record = json::parse(is);
    } catch (const json::parse_error&) {
      record = json();
    }
    if (!record.is_object() || record.value("config", json()) != config_snapshot) {
      out << "existing record does not match this config; starting over\n";
      record = json();
    }
  }
  if (record.is_null()) {
    record = {{"config", config_snapshot},
              {"stage_seeds",
               {{"split", stage_seed(cfg, Stage::split)},
                {"diffusion_init", stage_seed(cfg, Stage::diffusion_init)},
                {"diffusion_train", stage_seed(cfg, Stage::diffusion_train)},
                {"generate", stage_seed(cfg, Stage::generate)},
                {"extractor", stage_seed(cfg, Stage::extractor)}}},
              {"classifier_seeds", cfg.experiment_seeds},
              {"notes",
               {"diffusion epochs " + std::to_string(cfg.diffusion_training.epochs) + " (full-scale setting: " +
                std::to_string(kFullScaleDiffusionEpochs) + ")"}},
              {"stages", json::object()},
              {"complete", false}};
  }
  auto done = [&](const std::string& stage) {
    if (!record["stages"].contains(stage)) return false;
    for (const auto& a : record["stages"][stage]["artifacts"])
      if (!fs::exists(dir / a.get<std::string>())) return false;
    return true;
  };
  auto finish = [&](const std::string& stage, json info) {
    record["stages"][stage] = std::move(info);
    write_json_atomic(record, record_path);
    out << "stage " << stage << " done\n";
    return opt.stop_after == stage;
  };
  auto skip = [&](const std::string& stage) { out << "stage " << stage << " already complete, skipping\n"; };

  // data
  if (done("data")) {
    skip("data");
  } else {
    const SignalDataset all = source_dataset(cfg, "");
    if (!all.labeled()) throw InvalidArgument("experiment: dataset must be labeled");
    const DatasetSplit split = split_for(cfg, all);
    save_dataset(all, dir / "data.sdf");
    save_dataset(split.train, dir / "train.sdf");
    save_dataset(split.val, dir / "val.sdf");
    save_dataset(split.test, dir / "test.sdf");
    record["split_indices"] = {{"train", split.indices.train}, {"val", split.indices.val}, {"test", split.indices.test}};
    if (finish("data", {{"artifacts", {"data.sdf", "train.sdf", "val.sdf", "test.sdf"}},
                        {"sizes", {split.train.size(), split.val.size(), split.test.size()}}}))
      return record;
  }
  const SignalDataset train = load_dataset(dir / "train.sdf");
  const SignalDataset val = load_dataset(dir / "val.sdf");
  const SignalDataset test = load_dataset(dir / "test.sdf");

  // diffusion (training split only)
  if (done("diffusion")) {
    skip("diffusion");
  } else {
    const auto& idx = record["split_indices"];
    std::set<size_t> held_out;
    for (const auto& v : idx["val"]) held_out.insert(v.get<size_t>());
    for (const auto& v : idx["test"]) held_out.insert(v.get<size_t>());
    std::vector<size_t> used = idx["train"].get<std::vector<size_t>>();
    for (size_t i : used)
      if (held_out.count(i)) throw InvalidArgument("experiment: segment " + std::to_string(i) + " is in train and a held-out split");
    if (used.size() != train.size()) throw InvalidArgument("experiment: training split does not match the record");
    record["audit"] = {{"diffusion_training_indices", used},
                       {"held_out_indices", std::vector<size_t>(held_out.begin(), held_out.end())},
                       {"overlap", 0}};
    const DiffusionStageResult r =
        train_diffusion_stage(cfg, train, dir / "diffusion.edtm", dir / "diffusion_loss.csv", out);
    if (finish("diffusion", {{"artifacts", {"diffusion.edtm", "diffusion_loss.csv"}},
                             {"first_epoch_loss", r.loss.empty() ? json() : json(r.loss.front())},
                             {"final_epoch_loss", r.loss.empty() ? json() : json(r.loss.back())}}))
      return record;
  }

  // generation: an equal quantity, with the training split's labels
  if (done("generate")) {
    skip("generate");
  } else {
    const size_t count = cfg.generate_count ? cfg.generate_count : train.size();
    const Checkpoint ck = load_checkpoint(dir / "diffusion.edtm");
    const bool conditional = parse_diffusion_checkpoint_config(ck.config).model.conditional;
    std::vector<uint32_t> classes;
    const auto labels = train.labels();
    for (size_t j = 0; j < count; ++j) classes.push_back(labels[j % labels.size()]);
    SignalDataset gen = generate_stage(dir / "diffusion.edtm", count, conditional ? &classes : nullptr,
                                       stage_seed(cfg, Stage::generate));
    save_dataset(gen, dir / "generated.sdf");
    if (finish("generate", {{"artifacts", {"generated.sdf"}}, {"count", count}})) return record;
  }
  const SignalDataset generated = load_dataset(dir / "generated.sdf");

  // FID extractor on the full dataset, FID of train vs generated, spectra
  if (done("extractor")) {
    skip("extractor");
  } else {
    const SignalDataset all = load_dataset(dir / "data.sdf");
    const Classifier extractor = train_extractor(cfg, all, dir / "extractor.edtm", out);
    const FidResult fr = fid_protocol(train, generated, extractor);
    append_fid_result(dir / "results_fid.csv", cfg.dataset_name(),
                      std::string("edt") + (cfg.msc_enabled ? "" : "_no_msc") + (cfg.dfsi_enabled ? "" : "_no_dfsi"),
                      fr.fid);
    out << "fid(train, generated) " << format_double(fr.fid) << "\n";
    const SpectrumReport sr = merge_spectra({spectrum_report(train, "original"), spectrum_report(generated, "generated")});
    write_spectrum_csv(sr, dir / "spectra.csv");
    json artifacts = {"extractor.edtm", "extractor_report.txt", "spectra.csv"};
    for (const auto& p : write_spectrum_svg(sr, dir / "spectra.csv")) artifacts.push_back(p.filename().string());
    if (finish("extractor", {{"artifacts", artifacts}, {"fid", fr.fid}, {"embedding_dim", extractor.config().embedding_dim}}))
      return record;
  }

  // classifier runs
  const ClassifierConfig cc = cfg.classifier_for(static_cast<uint32_t>(train.channels()),
                                                 static_cast<uint32_t>(train.length()), train.num_classes);
  for (const auto& mode_name : cfg.experiment_modes) {
    const LossMode mode = parse_loss_mode(mode_name);
    if (mode != LossMode::plain_ce && !generated.labeled()) {
      throw InvalidArgument("experiment: mode " + mode_name + " needs a conditional diffusion model");
    }
    for (uint64_t seed : cfg.experiment_seeds) {
      const std::string key = "run_" + to_string(mode) + "_seed" + std::to_string(seed);
      if (done(key)) {
        skip(key);
        continue;
      }
      out << "classifier " << to_string(mode) << " seed " << seed << "\n";
      TrainedClassifier t = train_classifier(train, val, cc, augmentation_for(cfg, mode, cfg.append_ratio, &generated),
                                             classifier_settings(cfg, seed));
      t.report.test = evaluate(t.model, test);
      const std::string stem = "classifier_" + to_string(mode) + "_seed" + std::to_string(seed);
      save_classifier(t.model, dir / (stem + ".edtm"));
      write_train_report(t.report, dir / (stem + ".txt"));
      append_metrics_result(dir / "results_metrics.csv", cfg.dataset_name(), stem, to_string(mode), seed, *t.report.test);
      out << "  acc " << format_double(t.report.test->acc) << " auc " << format_double(t.report.test->auc) << " f1 "
          << format_double(t.report.test->f1) << "\n";
      if (finish(key, {{"artifacts", {stem + ".edtm", stem + ".txt", stem + "_epochs.csv"}},
                       {"mode", to_string(mode)},
                       {"seed", seed},
                       {"acc", t.report.test->acc},
                       {"auc", t.report.test->auc},
                       {"f1", t.report.test->f1}}))
        return record;
    }
  }
  if (opt.stop_after == "runs") return record;

  // table: modes x metrics, mean/std over seeds, paired accuracy delta vs plain_ce
  std::map<std::string, std::map<uint64_t, json>> runs;
  for (const auto& [key, v] : record["stages"].items())
    if (key.rfind("run_", 0) == 0) runs[v["mode"].get<std::string>()][v["seed"].get<uint64_t>()] = v;
  std::ofstream table(dir / "experiment_table.csv");
  if (!table) throw IoError("cannot write experiment_table.csv");
  table << "mode,n_seeds,acc_mean,acc_std,auc_mean,auc_std,f1_mean,f1_std,acc_delta_mean,acc_delta_std\n";
  json summary = json::object();
  for (const auto& mode_name : cfg.experiment_modes) {
    const std::string mode = to_string(parse_loss_mode(mode_name));
    std::vector<double> acc, auc, f1, delta;
    for (uint64_t seed : cfg.experiment_seeds) {
      const json& r = runs.at(mode).at(seed);
      acc.push_back(r["acc"].get<double>());
      auc.push_back(r["auc"].get<double>());
      f1.push_back(r["f1"].get<double>());
      if (runs.count("plain_ce")) delta.push_back(acc.back() - runs["plain_ce"].at(seed)["acc"].get<double>());
    }
    table << mode << "," << acc.size() << "," << format_double(mean_of(acc)) << "," << format_double(std_of(acc)) << ","
          << format_double(mean_of(auc)) << "," << format_double(std_of(auc)) << "," << format_double(mean_of(f1))
          << "," << format_double(std_of(f1)) << ","
          << (delta.empty() ? "" : format_double(mean_of(delta))) << ","
          << (delta.empty() ? "" : format_double(std_of(delta))) << "\n";
    summary[mode] = {{"acc_mean", mean_of(acc)}, {"acc_std", std_of(acc)}};
  }
  if (!table) throw IoError("write failed: experiment_table.csv");
  table.close();
  record["complete"] = true;
  finish("table", {{"artifacts", {"experiment_table.csv", "results_metrics.csv", "results_fid.csv"}}, {"summary", summary}});
  out << "wrote " << (dir / "experiment_table.csv").string() << "\n";
  return record;
}

}  // namespace eegdt::app
