#pragma once

// Generated-original reassembling augmentation: label smoothing of generated
// samples, Beta-distributed crop-and-reassemble of an original/generated pair,
// convex label mixing and the combined CE + eta * KL objective.

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "eegdt/autodiff.hpp"
#include "eegdt/rng.hpp"
#include "eegdt/signal_io.hpp"

namespace eegdt {

// Probability vector over k classes.
struct SoftLabel {
  std::vector<double> probs;

  size_t classes() const { return probs.size(); }
  // Nonnegative entries summing to 1 within tol.
  bool valid(double tol = 1e-9) const;
  bool operator==(const SoftLabel&) const = default;
};

struct GoConfig {
  double beta_smooth = 0.9;
  double alpha = 1.0;  // lambda ~ Beta(alpha, alpha)
  double eta = 1.0;
  // Restrict generated partners to the original sample's class.
  bool same_class_pairs = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const GoConfig& c);
void from_json(const nlohmann::json& j, GoConfig& c);

SoftLabel one_hot(uint32_t y, uint32_t k);
// onehot(y) * beta + (1 - beta) / k
SoftLabel smooth_labels(uint32_t y, double beta_smooth, uint32_t k);
// lambda * y_orig + (1 - lambda) * y_gen
SoftLabel mix_labels(const SoftLabel& y_orig, const SoftLabel& y_gen, double lambda);

// Beta(alpha, alpha) via the ratio of two Gamma(alpha) draws.
double sample_lambda(double alpha, Rng& rng);
double sample_lambda(double alpha, uint64_t seed);

struct Reassembled {
  SignalSegment x;
  double lambda_actual = 0.0;
  size_t start_orig = 0;
  size_t start_gen = 0;
  bool orig_first = true;
};

// Deterministic core: n_orig samples from x_orig starting at start_orig and
// L - n_orig samples from x_gen starting at start_gen, concatenated in the
// given order. The result carries no label.
Reassembled reassemble_at(const SignalSegment& x_orig, const SignalSegment& x_gen, size_t n_orig,
                          size_t start_orig, size_t start_gen, bool orig_first);

// n_orig = round(lambda * L). From Rng(seed), in order: start_orig uniform in
// [0, L - n_orig], start_gen uniform in [0, n_orig], then the order bit
// (0 = original first).
Reassembled reassemble(const SignalSegment& x_orig, const SignalSegment& x_gen, double lambda,
                       uint64_t seed);

struct VicinalSample {
  SignalSegment x_vic;
  SoftLabel y_vic;
  double lambda_actual = 0.0;
  size_t partner = 0;  // index into the generated pool
};

// One vicinal sample per original. Sample i uses streams derived from
// (seed, i); the partner is drawn uniformly from the pool (or from the
// same-class subset when configured).
std::vector<VicinalSample> make_vicinal_batch(const std::vector<const SignalSegment*>& originals,
                                              const std::vector<SignalSegment>& gen_pool,
                                              uint32_t k, const GoConfig& config, uint64_t seed);

// ---- losses ----------------------------------------------------------------
// log softmax with log-probabilities floored at log(1e-12).
ad::Var clamped_log_softmax(ad::Var logits);
// sum_i -<y_i, log softmax(logits_i)> over the rows of logits [n x k].
ad::Var soft_cross_entropy_sum(ad::Var logits, const std::vector<SoftLabel>& targets);
// sum_i KL(y_i || softmax(logits_i)), with 0 log 0 := 0.
ad::Var kl_divergence_sum(ad::Var logits, const std::vector<SoftLabel>& targets);

// Batch-mean CE on originals plus eta times batch-mean KL on vicinal samples.
ad::Var go_loss(ad::Var logits_orig, const std::vector<SoftLabel>& y_orig, ad::Var logits_vic,
                const std::vector<SoftLabel>& y_vic, double eta);

struct GoLossValue {
  double ce = 0.0;
  double kl = 0.0;
  double total = 0.0;
};
// Plain-double evaluation of go_loss (no tape).
GoLossValue go_loss_value(const std::vector<std::vector<double>>& logits_orig,
                          const std::vector<SoftLabel>& y_orig,
                          const std::vector<std::vector<double>>& logits_vic,
                          const std::vector<SoftLabel>& y_vic, double eta);

}  // namespace eegdt
