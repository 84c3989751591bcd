#include <benchmark/benchmark.h>

#include "eegdt/autodiff.hpp"
#include "eegdt/classifier.hpp"
#include "eegdt/evaluation.hpp"
#include "eegdt/model.hpp"
#include "eegdt/rng.hpp"

using namespace eegdt;

namespace {

Tensor random_tensor(std::vector<size_t> shape, uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (double& v : t.data) v = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    ad::Tape tape(false);
    benchmark::DoNotOptimize(ad::matmul(tape.constant(a), tape.constant(b)).value().data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_Conv1dSame(benchmark::State& state) {
  const size_t k = static_cast<size_t>(state.range(0));
  const Tensor x = random_tensor({16, 256}, 3), w = random_tensor({16, 16, k}, 4), b = random_tensor({16}, 5);
  for (auto _ : state) {
    ad::Tape tape(false);
    benchmark::DoNotOptimize(
        ad::conv1d_same(tape.constant(x), tape.constant(w), tape.constant(b)).value().data.data());
  }
}
BENCHMARK(BM_Conv1dSame)->Arg(3)->Arg(31)->Arg(63);

void BM_ModelForward(benchmark::State& state) {
  auto cfg = ModelConfig::desk_default(1, 256, 50);
  cfg.conditional = true;
  cfg.num_classes = 2;
  const NoisePredictor m(cfg, 1);
  const Tensor x = random_tensor({1, 256}, 6);
  for (auto _ : state) {
    ad::Tape tape(false);
    benchmark::DoNotOptimize(m.predict(tape, x, 25, 1u).value().data.data());
  }
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

void BM_ModelTrainStep(benchmark::State& state) {
  auto cfg = ModelConfig::desk_default(1, 256, 50);
  const NoisePredictor m(cfg, 1);
  const Tensor x = random_tensor({1, 256}, 7);
  auto grads = m.parameters().zeros_like();
  for (auto _ : state) {
    ad::Tape tape;
    tape.backward(ad::mean(ad::square(m.predict(tape, x, 25, std::nullopt))));
    tape.accumulate_param_grads(grads);
  }
}
BENCHMARK(BM_ModelTrainStep)->Unit(benchmark::kMillisecond);

void BM_ClassifierForward(benchmark::State& state) {
  ClassifierConfig cfg;
  cfg.input_scale = 1.0;
  const Classifier c(cfg, 1);
  Rng rng(8);
  std::vector<double> d(256);
  for (double& v : d) v = rng.normal();
  const SignalSegment x(1, 256, d);
  for (auto _ : state) benchmark::DoNotOptimize(c.logits(x));
}
BENCHMARK(BM_ClassifierForward)->Unit(benchmark::kMicrosecond);

void BM_Frechet(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(9);
  Eigen::MatrixXd a(d, 4 * d), b(d, 4 * d);
  for (int i = 0; i < a.size(); ++i) {
    a.data()[i] = rng.normal();
    b.data()[i] = rng.normal() * 1.5;
  }
  const auto sa = fit_gaussian(a), sb = fit_gaussian(b);
  for (auto _ : state) benchmark::DoNotOptimize(frechet_distance(sa, sb));
}
BENCHMARK(BM_Frechet)->Arg(16)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
