#include "eegdt/augmentation.hpp"

#include <algorithm>
#include <cmath>

#include "eegdt/errors.hpp"

namespace eegdt {

namespace {

const double kLogFloor = std::log(1e-12);

void check_label(const SoftLabel& y, const char* what) {
  if (!y.valid(1e-9)) throw InvalidArgument(std::string(what) + ": not a probability vector");
}

Tensor target_matrix(const std::vector<SoftLabel>& targets, size_t rows, size_t k) {
  if (targets.size() != rows) {
    throw InvalidArgument("loss: " + std::to_string(targets.size()) + " targets for " +
                          std::to_string(rows) + " logit rows");
  }
  Tensor y({rows, k});
  for (size_t i = 0; i < rows; ++i) {
    if (targets[i].classes() != k) throw InvalidArgument("loss: target width differs from logits");
    std::copy(targets[i].probs.begin(), targets[i].probs.end(), y.data.begin() + i * k);
  }
  return y;
}

ad::Var as_matrix(ad::Var logits) {
  for (double v : logits.value().data)
    if (std::isnan(v)) throw NumericalError("loss: NaN logits");
  if (logits.value().rank() == 1) return ad::reshape(logits, {1, logits.size()});
  return logits;
}

double neg_entropy(const SoftLabel& y) {
  double s = 0.0;
  for (double p : y.probs)
    if (p > 0.0) s += p * std::log(p);
  return s;
}

std::vector<double> clamped_log_softmax_values(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  const double lse = m + std::log(s);
  std::vector<double> out(z.size());
  for (size_t i = 0; i < z.size(); ++i) out[i] = std::max(z[i] - lse, kLogFloor);
  return out;
}

}  // namespace

bool SoftLabel::valid(double tol) const {
  if (probs.empty()) return false;
  double s = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) return false;
    s += p;
  }
  return std::abs(s - 1.0) <= tol;
}

void GoConfig::validate() const {
  if (!(beta_smooth >= 0.0 && beta_smooth <= 1.0)) throw InvalidArgument("go: beta_smooth must be in [0, 1]");
  if (!(alpha > 0.0)) throw InvalidArgument("go: alpha must be > 0");
  if (!(eta >= 0.0)) throw InvalidArgument("go: eta must be >= 0");
}

void to_json(nlohmann::json& j, const GoConfig& c) {
  j = nlohmann::json{{"beta_smooth", c.beta_smooth},
                     {"alpha", c.alpha},
                     {"eta", c.eta},
                     {"same_class_pairs", c.same_class_pairs}};
}

void from_json(const nlohmann::json& j, GoConfig& c) {
  GoConfig d;
  c.beta_smooth = j.value("beta_smooth", d.beta_smooth);
  c.alpha = j.value("alpha", d.alpha);
  c.eta = j.value("eta", d.eta);
  c.same_class_pairs = j.value("same_class_pairs", d.same_class_pairs);
}

SoftLabel one_hot(uint32_t y, uint32_t k) {
  if (y >= k) throw InvalidArgument("one_hot: class " + std::to_string(y) + " >= k");
  SoftLabel out{std::vector<double>(k, 0.0)};
  out.probs[y] = 1.0;
  return out;
}

SoftLabel smooth_labels(uint32_t y, double beta_smooth, uint32_t k) {
  if (k == 0 || y >= k) throw InvalidArgument("smooth_labels: need y < k");
  if (!(beta_smooth >= 0.0 && beta_smooth <= 1.0)) {
    throw InvalidArgument("smooth_labels: beta must be in [0, 1]");
  }
  const double base = (1.0 - beta_smooth) / static_cast<double>(k);
  SoftLabel out{std::vector<double>(k, base)};
  out.probs[y] = beta_smooth + base;
  return out;
}

SoftLabel mix_labels(const SoftLabel& y_orig, const SoftLabel& y_gen, double lambda) {
  if (y_orig.classes() != y_gen.classes()) throw InvalidArgument("mix_labels: class counts differ");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("mix_labels: lambda must be in [0, 1]");
  check_label(y_orig, "mix_labels");
  check_label(y_gen, "mix_labels");
  SoftLabel out{std::vector<double>(y_orig.classes())};
  for (size_t i = 0; i < out.probs.size(); ++i) {
    out.probs[i] = lambda * y_orig.probs[i] + (1.0 - lambda) * y_gen.probs[i];
  }
  return out;
}

double sample_lambda(double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw InvalidArgument("sample_lambda: alpha must be > 0");
  for (;;) {
    const double a = rng.gamma(alpha);
    const double b = rng.gamma(alpha);
    if (a + b > 0.0) return a / (a + b);
  }
}

double sample_lambda(double alpha, uint64_t seed) {
  Rng rng(seed);
  return sample_lambda(alpha, rng);
}

Reassembled reassemble_at(const SignalSegment& x_orig, const SignalSegment& x_gen, size_t n_orig,
                          size_t start_orig, size_t start_gen, bool orig_first) {
  const size_t ch = x_orig.channels(), len = x_orig.length();
  if (x_gen.channels() != ch || x_gen.length() != len) {
    throw InvalidArgument("reassemble: original and generated shapes differ");
  }
  if (n_orig > len) throw InvalidArgument("reassemble: crop longer than the segment");
  const size_t n_gen = len - n_orig;
  if (start_orig > len - n_orig || start_gen > len - n_gen) {
    throw InvalidArgument("reassemble: crop window out of range");
  }
  std::vector<double> data(ch * len);
  for (size_t c = 0; c < ch; ++c) {
    const auto o = x_orig.channel(c);
    const auto g = x_gen.channel(c);
    double* out = data.data() + c * len;
    if (orig_first) {
      std::copy_n(o.begin() + start_orig, n_orig, out);
      std::copy_n(g.begin() + start_gen, n_gen, out + n_orig);
    } else {
      std::copy_n(g.begin() + start_gen, n_gen, out);
      std::copy_n(o.begin() + start_orig, n_orig, out + n_gen);
    }
  }
  Reassembled r;
  r.x = SignalSegment(ch, len, std::move(data));
  r.lambda_actual = static_cast<double>(n_orig) / static_cast<double>(len);
  r.start_orig = start_orig;
  r.start_gen = start_gen;
  r.orig_first = orig_first;
  return r;
}

Reassembled reassemble(const SignalSegment& x_orig, const SignalSegment& x_gen, double lambda,
                       uint64_t seed) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("reassemble: lambda must be in [0, 1]");
  const size_t len = x_orig.length();
  const auto n_orig = static_cast<size_t>(std::llround(lambda * static_cast<double>(len)));
  Rng rng(seed);
  const size_t start_orig = rng.uniform_int(0, len - n_orig);
  const size_t start_gen = rng.uniform_int(0, n_orig);
  const bool orig_first = rng.uniform_int(0, 1) == 0;
  return reassemble_at(x_orig, x_gen, n_orig, start_orig, start_gen, orig_first);
}

std::vector<VicinalSample> make_vicinal_batch(const std::vector<const SignalSegment*>& originals,
                                              const std::vector<SignalSegment>& gen_pool,
                                              uint32_t k, const GoConfig& config, uint64_t seed) {
  config.validate();
  if (gen_pool.empty()) throw InvalidArgument("vicinal batch: generated pool is empty");
  std::vector<std::vector<size_t>> by_class(k);
  for (size_t j = 0; j < gen_pool.size(); ++j) {
    const auto& lbl = gen_pool[j].label();
    if (!lbl) throw InvalidArgument("vicinal batch: generated segments must be labeled");
    if (*lbl >= k) throw InvalidArgument("vicinal batch: generated label out of range");
    by_class[*lbl].push_back(j);
  }

  std::vector<VicinalSample> out(originals.size());
  for (size_t i = 0; i < originals.size(); ++i) {
    const SignalSegment& xo = *originals[i];
    if (!xo.label()) throw InvalidArgument("vicinal batch: original segments must be labeled");
    const uint32_t yo = *xo.label();
    Rng pick(derive_seed(seed, {i, 0}));
    size_t partner;
    if (config.same_class_pairs) {
      const auto& pool = by_class.at(yo);
      if (pool.empty()) {
        throw InvalidArgument("vicinal batch: no generated segment of class " + std::to_string(yo));
      }
      partner = pool[pick.uniform_int(0, pool.size() - 1)];
    } else {
      partner = pick.uniform_int(0, gen_pool.size() - 1);
    }
    Rng lambda_rng(derive_seed(seed, {i, 1}));
    const double lambda = sample_lambda(config.alpha, lambda_rng);
    const SignalSegment& xg = gen_pool[partner];
    Reassembled r = reassemble(xo, xg, lambda, derive_seed(seed, {i, 2}));
    const SoftLabel y_gen = smooth_labels(*xg.label(), config.beta_smooth, k);
    out[i].y_vic = mix_labels(one_hot(yo, k), y_gen, r.lambda_actual);
    out[i].x_vic = std::move(r.x);
    out[i].lambda_actual = r.lambda_actual;
    out[i].partner = partner;
  }
  return out;
}

ad::Var clamped_log_softmax(ad::Var logits) {
  return ad::clamp_min(ad::log_softmax_rows(logits), kLogFloor);
}

ad::Var soft_cross_entropy_sum(ad::Var logits, const std::vector<SoftLabel>& targets) {
  logits = as_matrix(logits);
  const Tensor y = target_matrix(targets, logits.rows(), logits.cols());
  const ad::Var logp = clamped_log_softmax(logits);
  return ad::scale(ad::sum(ad::mul(logits.tape().constant(y), logp)), -1.0);
}

ad::Var kl_divergence_sum(ad::Var logits, const std::vector<SoftLabel>& targets) {
  logits = as_matrix(logits);
  const Tensor y = target_matrix(targets, logits.rows(), logits.cols());
  double h = 0.0;
  for (const auto& t : targets) h += neg_entropy(t);
  const ad::Var logp = clamped_log_softmax(logits);
  return ad::add_scalar(ad::scale(ad::sum(ad::mul(logits.tape().constant(y), logp)), -1.0), h);
}

ad::Var go_loss(ad::Var logits_orig, const std::vector<SoftLabel>& y_orig, ad::Var logits_vic,
                const std::vector<SoftLabel>& y_vic, double eta) {
  if (!(eta >= 0.0)) throw InvalidArgument("go_loss: eta must be >= 0");
  if (y_orig.empty() || y_vic.empty()) throw InvalidArgument("go_loss: empty batch");
  for (const auto& y : y_orig) check_label(y, "go_loss");
  for (const auto& y : y_vic) check_label(y, "go_loss");
  const ad::Var ce =
      ad::scale(soft_cross_entropy_sum(logits_orig, y_orig), 1.0 / static_cast<double>(y_orig.size()));
  const ad::Var kl =
      ad::scale(kl_divergence_sum(logits_vic, y_vic), 1.0 / static_cast<double>(y_vic.size()));
  return ad::add(ce, ad::scale(kl, eta));
}

GoLossValue go_loss_value(const std::vector<std::vector<double>>& logits_orig,
                          const std::vector<SoftLabel>& y_orig,
                          const std::vector<std::vector<double>>& logits_vic,
                          const std::vector<SoftLabel>& y_vic, double eta) {
  if (logits_orig.size() != y_orig.size() || logits_vic.size() != y_vic.size()) {
    throw InvalidArgument("go_loss_value: logits and targets differ in count");
  }
  if (y_orig.empty() || y_vic.empty()) throw InvalidArgument("go_loss_value: empty batch");
  GoLossValue v;
  for (size_t i = 0; i < y_orig.size(); ++i) {
    const auto lp = clamped_log_softmax_values(logits_orig[i]);
    for (size_t c = 0; c < lp.size(); ++c) v.ce -= y_orig[i].probs.at(c) * lp[c];
  }
  for (size_t i = 0; i < y_vic.size(); ++i) {
    const auto lp = clamped_log_softmax_values(logits_vic[i]);
    for (size_t c = 0; c < lp.size(); ++c) {
      const double p = y_vic[i].probs.at(c);
      if (p > 0.0) v.kl += p * (std::log(p) - lp[c]);
    }
  }
  v.ce /= static_cast<double>(y_orig.size());
  v.kl /= static_cast<double>(y_vic.size());
  v.total = v.ce + eta * v.kl;
  return v;
}

}  // namespace eegdt
