#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "commands.hpp"
#include "eegdt/errors.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kNumerical = 2, kIo = 3 };

}  // namespace

int main(int argc, char** argv) {
  using namespace eegdt;
  using namespace eegdt::app;

  CLI::App cli{"Diffusion-transformer signal generation and generated-original augmentation"};
  cli.require_subcommand(1);
  cli.fallthrough();

  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out_dir;
  cli.add_option("--config", config_path, "JSON run config (defaults for every field)");
  cli.add_option("--seed", seed, "Override the master seed");
  cli.add_option("--out", out_dir, "Override the output directory");

  SynthOptions synth_opt;
  auto* synth = cli.add_subcommand("synth", "Write the synthetic dataset");
  synth->add_option("--output", synth_opt.output, "Dataset file (default <out>/data.sdf)");

  TrainDiffusionOptions td_opt;
  auto* td = cli.add_subcommand("train-diffusion", "Train the noise predictor");
  td->add_option("--data", td_opt.data, "Dataset file (SDF1 or CSV manifest)");
  td->add_flag("--full", td_opt.full, "Use every segment instead of the training split");
  td->add_option("--output", td_opt.output, "Checkpoint (default <out>/diffusion.edtm)");

  GenerateOptions gen_opt;
  auto* gen = cli.add_subcommand("generate", "Sample signals from a checkpoint");
  gen->add_option("--checkpoint", gen_opt.checkpoint, "Diffusion checkpoint")->required();
  gen->add_option("--count", gen_opt.count, "Number of segments (default: training-set size)");
  gen->add_option("--classes", gen_opt.classes, "Comma-separated class list, or 'balanced'");
  gen->add_option("--output", gen_opt.output, "Dataset file (default <out>/generated.sdf)");

  TrainClassifierOptions tc_opt;
  auto* tc = cli.add_subcommand("train-classifier", "Train the classifier (none | go | append)");
  tc->add_option("--mode", tc_opt.mode, "Augmentation mode");
  tc->add_option("--ratio", tc_opt.ratio, "Generated fraction appended in append mode");
  tc->add_option("--data", tc_opt.data, "Dataset file");
  tc->add_option("--generated", tc_opt.generated, "Generated dataset (go / append)");
  tc->add_option("--output", tc_opt.output, "Checkpoint (default <out>/classifier.edtm)");

  EvaluateOptions ev_opt;
  auto* ev = cli.add_subcommand("evaluate", "Evaluate a classifier checkpoint");
  ev->add_option("--checkpoint", ev_opt.checkpoint, "Classifier checkpoint")->required();
  ev->add_option("--data", ev_opt.data, "Test dataset (default: test split of the config dataset)");
  ev->add_option("--tag", ev_opt.tag, "Model tag for the results row");
  ev->add_option("--results", ev_opt.results, "Results CSV (default <out>/results_metrics.csv)");

  FidOptions fid_opt;
  auto* fid = cli.add_subcommand("fid", "Frechet distance between two populations");
  fid->add_option("--original", fid_opt.original, "Original dataset")->required();
  fid->add_option("--generated", fid_opt.generated, "Generated dataset")->required();
  fid->add_option("--extractor", fid_opt.extractor, "Classifier checkpoint used as embedding network");
  fid->add_flag("--spectra", fid_opt.spectra, "Also write spectra CSV and SVG plots");
  fid->add_option("--tag", fid_opt.tag, "Model tag for the results row");
  fid->add_option("--results", fid_opt.results, "Results CSV (default <out>/results_fid.csv)");

  ExperimentOptions ex_opt;
  auto* ex = cli.add_subcommand("experiment", "Run the full protocol");
  ex->add_option("--stop-after", ex_opt.stop_after, "Stop after a stage (data, diffusion, generate, extractor, runs)");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return cli.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    RunConfig cfg = config_path.empty() ? parse_run_config(nlohmann::json::object()) : load_run_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;

    if (synth->parsed()) cmd_synth(cfg, synth_opt, std::cout);
    else if (td->parsed()) cmd_train_diffusion(cfg, td_opt, std::cout);
    else if (gen->parsed()) cmd_generate(cfg, gen_opt, std::cout);
    else if (tc->parsed()) cmd_train_classifier(cfg, tc_opt, std::cout);
    else if (ev->parsed()) cmd_evaluate(cfg, ev_opt, std::cout);
    else if (fid->parsed()) cmd_fid(cfg, fid_opt, std::cout);
    else if (ex->parsed()) cmd_experiment(cfg, ex_opt, std::cout);
    return kOk;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}
