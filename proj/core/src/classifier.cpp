#include "eegdt/classifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "eegdt/checkpoint.hpp"
#include "eegdt/errors.hpp"
#include "eegdt/parallel.hpp"
#include "eegdt/rng.hpp"

namespace eegdt {

namespace {

constexpr size_t kChunk = 8;
constexpr double kWsEps = 1e-5;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> softmax(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
  for (double& v : p) v /= s;
  return p;
}

void check_data(const SignalDataset& d, const ClassifierConfig& c, const char* what) {
  if (d.empty()) return;
  if (d.channels() != c.channels || d.length() != c.length) {
    throw InvalidArgument(std::string(what) + ": data is " + std::to_string(d.channels()) + "x" +
                          std::to_string(d.length()) + " but classifier expects " +
                          std::to_string(c.channels) + "x" + std::to_string(c.length));
  }
  for (const auto& s : d.segments) {
    if (!s.label()) throw InvalidArgument(std::string(what) + ": segments must be labeled");
    if (*s.label() >= c.num_classes) throw InvalidArgument(std::string(what) + ": label out of range");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// config

void ClassifierConfig::validate() const {
  auto fail = [](const std::string& m) { throw InvalidArgument("classifier config: " + m); };
  if (channels < 1 || length < 1) fail("channels and length must be >= 1");
  if (num_classes < 1) fail("num_classes must be >= 1");
  if (temporal_kernel < 1 || temporal_kernel > length) fail("temporal_kernel must be in [1, L]");
  if (separable_kernel < 1) fail("separable_kernel must be >= 1");
  if (temporal_filters < 1 || depth_multiplier < 1 || separable_filters < 1) fail("filter counts must be >= 1");
  if (pool1 < 1 || pool2 < 1) fail("pool lengths must be >= 1");
  if (pooled_length() < 1) fail("pooled length L / pool1 / pool2 must be >= 1");
  if (embedding_dim < 2) fail("embedding_dim must be >= 2");
  if (!std::isfinite(input_scale)) fail("input_scale must be finite");
}

void to_json(nlohmann::json& j, const ClassifierConfig& c) {
  j = nlohmann::json{{"channels", c.channels},
                     {"length", c.length},
                     {"num_classes", c.num_classes},
                     {"temporal_kernel", c.temporal_kernel},
                     {"temporal_filters", c.temporal_filters},
                     {"depth_multiplier", c.depth_multiplier},
                     {"separable_filters", c.separable_filters},
                     {"separable_kernel", c.separable_kernel},
                     {"pool1", c.pool1},
                     {"pool2", c.pool2},
                     {"embedding_dim", c.embedding_dim},
                     {"input_scale", c.input_scale}};
}

void from_json(const nlohmann::json& j, ClassifierConfig& c) {
  ClassifierConfig d;
  c.channels = j.value("channels", d.channels);
  c.length = j.value("length", d.length);
  c.num_classes = j.value("num_classes", d.num_classes);
  c.temporal_kernel = j.value("temporal_kernel", d.temporal_kernel);
  c.temporal_filters = j.value("temporal_filters", d.temporal_filters);
  c.depth_multiplier = j.value("depth_multiplier", d.depth_multiplier);
  c.separable_filters = j.value("separable_filters", d.separable_filters);
  c.separable_kernel = j.value("separable_kernel", d.separable_kernel);
  c.pool1 = j.value("pool1", d.pool1);
  c.pool2 = j.value("pool2", d.pool2);
  c.embedding_dim = j.value("embedding_dim", d.embedding_dim);
  c.input_scale = j.value("input_scale", d.input_scale);
}

double fit_input_scale(const SignalDataset& data) {
  if (data.empty()) throw InvalidArgument("fit_input_scale: empty dataset");
  double ss = 0.0;
  size_t count = 0;
  for (const auto& seg : data.segments) {
    for (size_t c = 0; c < seg.channels(); ++c) {
      const auto ch = seg.channel(c);
      const double m = std::accumulate(ch.begin(), ch.end(), 0.0) / static_cast<double>(ch.size());
      for (double v : ch) ss += (v - m) * (v - m);
      count += ch.size();
    }
  }
  const double rms = std::sqrt(ss / static_cast<double>(count));
  return rms > 0.0 ? rms : 1.0;
}

// ---------------------------------------------------------------------------
// model

Classifier::Classifier(ClassifierConfig config, uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  if (!(config_.input_scale > 0.0)) throw InvalidArgument("classifier: input_scale must be > 0");
  build(seed, true);
  params_.quantize_f32();
}

Classifier::Classifier(ClassifierConfig config, ParameterSet params) : config_(std::move(config)) {
  config_.validate();
  if (!(config_.input_scale > 0.0)) throw InvalidArgument("classifier: input_scale must be > 0");
  build(0, false);
  if (params.size() != params_.size()) throw InvalidArgument("classifier: parameter count mismatch");
  for (size_t i = 0; i < params_.size(); ++i) {
    if (params.name(i) != params_.name(i) || params.tensor(i).shape != params_.tensor(i).shape) {
      throw InvalidArgument("classifier: tensor '" + params.name(i) + "' does not match expected '" +
                            params_.name(i) + "' " + shape_string(params_.tensor(i).shape));
    }
  }
  params_ = std::move(params);
}

void Classifier::build(uint64_t seed, bool initialize) {
  const auto& c = config_;
  Rng rng(seed);
  auto uniform = [&](const std::string& name, std::vector<size_t> shape, double bound) {
    Tensor t(std::move(shape));
    if (initialize)
      for (double& v : t.data) v = rng.uniform(-bound, bound);
    return params_.add(name, std::move(t));
  };
  auto zeros = [&](const std::string& name, std::vector<size_t> shape) {
    return params_.add(name, Tensor(std::move(shape)));
  };
  const size_t f1 = c.temporal_filters, fd = c.depthwise_filters(), f2 = c.separable_filters;
  const size_t flat = static_cast<size_t>(f2) * c.pooled_length();
  temporal_ = uniform("temporal.weight", {f1, c.temporal_kernel}, 1.0 / std::sqrt(double(c.temporal_kernel)));
  spatial_ = uniform("spatial.weight", {fd, c.channels}, 1.0 / std::sqrt(double(c.channels)));
  bias1_ = zeros("spatial.bias", {fd});
  sep_depthwise_ = uniform("separable.depthwise", {fd, 1, c.separable_kernel},
                           1.0 / std::sqrt(double(c.separable_kernel)));
  sep_pointwise_ = uniform("separable.pointwise", {f2, fd}, 1.0 / std::sqrt(double(fd)));
  bias2_ = zeros("separable.bias", {f2});
  emb_w_ = uniform("embed.weight", {c.embedding_dim, flat}, std::sqrt(6.0 / double(flat + c.embedding_dim)));
  emb_b_ = zeros("embed.bias", {c.embedding_dim});
  head_w_ = uniform("head.weight", {c.num_classes, c.embedding_dim},
                    std::sqrt(6.0 / double(c.num_classes + c.embedding_dim)));
  head_b_ = zeros("head.bias", {c.num_classes});
}

ClassifierOutput Classifier::forward(ad::Tape& tape, const SignalSegment& x) const {
  const auto& c = config_;
  if (x.channels() != c.channels || x.length() != c.length) {
    throw InvalidArgument("classifier: input " + std::to_string(x.channels()) + "x" +
                          std::to_string(x.length()) + " does not match config " +
                          std::to_string(c.channels) + "x" + std::to_string(c.length));
  }
  Tensor xn({c.channels, c.length});
  for (size_t ch = 0; ch < c.channels; ++ch) {
    const auto row = x.channel(ch);
    const double m = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(c.length);
    for (size_t i = 0; i < c.length; ++i) xn[ch * c.length + i] = (row[i] - m) / c.input_scale;
  }
  const size_t fd = c.depthwise_filters();

  // Standardized filters, rescaled by 1/sqrt(fan-in).
  const ad::Var tw = ad::scale(ad::layer_norm_rows(p(tape, temporal_), kWsEps),
                               1.0 / std::sqrt(static_cast<double>(c.temporal_kernel)));
  const ad::Var w1 = ad::factorized_conv_weight(p(tape, spatial_), tw, c.depth_multiplier);
  ad::Var h = ad::conv1d_same(tape.constant(std::move(xn)), w1, p(tape, bias1_));
  h = ad::avg_pool_cols(ad::elu(h), c.pool1);

  h = ad::conv1d_same(h, p(tape, sep_depthwise_), ad::Var(), fd);
  const ad::Var pw = ad::scale(ad::layer_norm_rows(p(tape, sep_pointwise_), kWsEps),
                               1.0 / std::sqrt(static_cast<double>(fd)));
  h = ad::conv1d(h, ad::reshape(pw, {c.separable_filters, fd, 1}), p(tape, bias2_), 1, 0, 0);
  h = ad::avg_pool_cols(ad::elu(h), c.pool2);

  const ad::Var flat = ad::reshape(h, {h.size()});
  ClassifierOutput out;
  out.embedding = ad::elu(ad::linear(flat, p(tape, emb_w_), p(tape, emb_b_)));
  out.logits = ad::linear(out.embedding, p(tape, head_w_), p(tape, head_b_));
  return out;
}

std::vector<double> Classifier::embed(const SignalSegment& x) const {
  ad::Tape tape(false);
  return forward(tape, x).embedding.value().data;
}

std::vector<double> Classifier::logits(const SignalSegment& x) const {
  ad::Tape tape(false);
  return forward(tape, x).logits.value().data;
}

// ---------------------------------------------------------------------------
// metrics

size_t argmax(const std::vector<double>& v) {
  if (v.empty()) throw InvalidArgument("argmax of empty vector");
  size_t best = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::optional<double> auc_rank(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw InvalidArgument("auc: scores and labels differ in length");
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Midranks (1-based) over tie groups.
  std::vector<double> rank(n);
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t q = i; q <= j; ++q) rank[order[q]] = mid;
    i = j + 1;
  }
  double rank_sum = 0.0;
  size_t n_pos = 0;
  for (size_t i = 0; i < n; ++i) {
    if (positive[i]) {
      rank_sum += rank[i];
      ++n_pos;
    }
  }
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double u = rank_sum - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

Metrics compute_metrics(const std::vector<uint32_t>& labels,
                        const std::vector<std::vector<double>>& scores, uint32_t k) {
  if (labels.size() != scores.size()) throw InvalidArgument("metrics: labels and scores differ in length");
  if (labels.empty()) throw InvalidArgument("metrics: empty test set");
  const size_t n = labels.size();
  std::vector<size_t> pred(n);
  size_t correct = 0;
  for (size_t i = 0; i < n; ++i) {
    if (scores[i].size() != k) throw InvalidArgument("metrics: score width differs from k");
    if (labels[i] >= k) throw InvalidArgument("metrics: label out of range");
    pred[i] = argmax(scores[i]);
    correct += pred[i] == labels[i];
  }
  Metrics m;
  m.acc = static_cast<double>(correct) / static_cast<double>(n);

  double auc_sum = 0.0, f1_sum = 0.0;
  size_t auc_count = 0, f1_count = 0;
  for (uint32_t c = 0; c < k; ++c) {
    std::vector<double> s(n);
    std::vector<bool> pos(n);
    size_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < n; ++i) {
      s[i] = scores[i][c];
      pos[i] = labels[i] == c;
      if (pred[i] == c && pos[i]) ++tp;
      if (pred[i] == c && !pos[i]) ++fp;
      if (pred[i] != c && pos[i]) ++fn;
    }
    if (tp + fn == 0) {
      m.warnings.push_back("class " + std::to_string(c) + " absent from test set; skipped in macro averages");
      continue;
    }
    f1_sum += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    ++f1_count;
    if (const auto a = auc_rank(s, pos)) {
      auc_sum += *a;
      ++auc_count;
    } else {
      m.warnings.push_back("class " + std::to_string(c) + " has no negatives; skipped in AUC");
    }
  }
  m.f1 = f1_count ? f1_sum / static_cast<double>(f1_count) : 0.0;
  m.auc = auc_count ? auc_sum / static_cast<double>(auc_count) : 0.0;
  return m;
}

std::vector<std::vector<double>> predict_proba(const Classifier& model, const SignalDataset& data) {
  std::vector<std::vector<double>> out(data.size());
  parallel_for(data.size(), [&](size_t i) { out[i] = softmax(model.logits(data.segments[i])); });
  return out;
}

Metrics evaluate(const Classifier& model, const SignalDataset& test) {
  if (test.empty()) throw InvalidArgument("evaluate: empty test set");
  if (!test.labeled()) throw InvalidArgument("evaluate: test set must be labeled");
  check_data(test, model.config(), "evaluate");
  return compute_metrics(test.labels(), predict_proba(model, test), model.config().num_classes);
}

// ---------------------------------------------------------------------------
// training

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::plain_ce: return "plain_ce";
    case LossMode::go: return "go";
    case LossMode::append: return "append";
  }
  return "?";
}

LossMode parse_loss_mode(const std::string& s) {
  if (s == "plain_ce" || s == "none" || s == "plain") return LossMode::plain_ce;
  if (s == "go") return LossMode::go;
  if (s == "append") return LossMode::append;
  throw InvalidArgument("unknown augmentation mode '" + s + "' (expected none, go or append)");
}

namespace {

ad::Var stacked_logits(const Classifier& model, ad::Tape& tape,
                       const std::vector<const SignalSegment*>& xs) {
  const size_t k = model.config().num_classes;
  std::vector<ad::Var> rows;
  rows.reserve(xs.size());
  for (const auto* x : xs) rows.push_back(ad::reshape(model.forward(tape, *x).logits, {1, k}));
  return rows.size() == 1 ? rows.front() : ad::concat_rows(rows);
}

std::vector<SoftLabel> hard_targets(const std::vector<const SignalSegment*>& xs, uint32_t k) {
  std::vector<SoftLabel> y;
  y.reserve(xs.size());
  for (const auto* x : xs) y.push_back(one_hot(*x->label(), k));
  return y;
}

double accuracy(const Classifier& model, const SignalDataset& data) {
  std::vector<uint8_t> hit(data.size());
  parallel_for(data.size(), [&](size_t i) {
    hit[i] = argmax(model.logits(data.segments[i])) == *data.segments[i].label();
  });
  return static_cast<double>(std::accumulate(hit.begin(), hit.end(), size_t{0})) /
         static_cast<double>(data.size());
}

}  // namespace

double classifier_batch_loss(const Classifier& model, const std::vector<const SignalSegment*>& batch,
                             std::vector<Tensor>* grads) {
  if (batch.empty()) throw InvalidArgument("classifier loss: empty batch");
  ad::Tape tape(grads != nullptr);
  const ad::Var logits = stacked_logits(model, tape, batch);
  const ad::Var loss = ad::scale(soft_cross_entropy_sum(logits, hard_targets(batch, model.config().num_classes)),
                                 1.0 / static_cast<double>(batch.size()));
  if (grads) {
    tape.backward(loss);
    tape.accumulate_param_grads(*grads);
  }
  return loss.item();
}

TrainedClassifier train_classifier(const SignalDataset& train, const SignalDataset& val,
                                   ClassifierConfig config, const AugmentationSettings& aug,
                                   const ClassifierTrainSettings& settings) {
  const auto started = std::chrono::steady_clock::now();
  if (train.empty()) throw InvalidArgument("train_classifier: empty training set");
  if (!train.labeled()) throw InvalidArgument("train_classifier: training set must be labeled");
  if (settings.batch_size < 1) throw InvalidArgument("train_classifier: batch_size must be >= 1");
  config.validate();
  check_data(train, config, "train_classifier");
  check_data(val, config, "train_classifier (validation)");
  if (!(config.input_scale > 0.0)) config.input_scale = fit_input_scale(train);
  const uint32_t k = config.num_classes;

  std::vector<const SignalSegment*> pool;
  for (const auto& s : train.segments) pool.push_back(&s);

  TrainReport report;
  report.mode = to_string(aug.mode);
  report.seed = settings.seed;
  report.config = {{"classifier", config},
                   {"optimizer",
                    {{"lr", settings.optimizer.lr},
                     {"weight_decay", settings.optimizer.weight_decay},
                     {"batch_size", settings.batch_size},
                     {"epochs", settings.epochs}}}};

  if (aug.mode != LossMode::plain_ce) {
    if (!aug.generated || aug.generated->empty()) {
      throw InvalidArgument("train_classifier: mode " + report.mode + " needs generated data");
    }
    check_data(*aug.generated, config, "train_classifier (generated)");
  }
  const bool use_vicinal = aug.mode == LossMode::go && aug.go.eta != 0.0;
  if (aug.mode == LossMode::go) {
    aug.go.validate();
    report.config["go"] = aug.go;
  }
  if (aug.mode == LossMode::append) {
    if (!(aug.append_ratio >= 0.0)) throw InvalidArgument("train_classifier: append ratio must be >= 0");
    const auto extra = static_cast<size_t>(std::floor(aug.append_ratio * static_cast<double>(train.size())));
    if (extra > aug.generated->size()) {
      throw InvalidArgument("train_classifier: append needs " + std::to_string(extra) +
                            " generated segments but only " + std::to_string(aug.generated->size()) +
                            " are available");
    }
    std::vector<size_t> pick(aug.generated->size());
    std::iota(pick.begin(), pick.end(), size_t{0});
    Rng rng(derive_seed(settings.seed, {3}));
    std::shuffle(pick.begin(), pick.end(), rng.engine());
    for (size_t i = 0; i < extra; ++i) pool.push_back(&aug.generated->segments[pick[i]]);
    report.config["append_ratio"] = aug.append_ratio;
  }
  report.train_size = pool.size();

  Classifier model(config, derive_seed(settings.seed, {0}));
  ParameterSet& params = model.parameters();
  std::optional<ParameterSet> best;
  double best_acc = -1.0;
  AdamW optimizer(settings.optimizer);
  const size_t n = pool.size();
  std::vector<size_t> order(n);

  for (uint32_t epoch = 1; epoch <= settings.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    Rng shuffle_rng(derive_seed(settings.seed, {1, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

    double epoch_sum = 0.0;
    size_t batch_index = 0;
    for (size_t start = 0; start < n; start += settings.batch_size, ++batch_index) {
      const size_t bsz = std::min<size_t>(settings.batch_size, n - start);
      std::vector<const SignalSegment*> batch(bsz);
      for (size_t j = 0; j < bsz; ++j) batch[j] = pool[order[start + j]];
      std::vector<VicinalSample> vicinal;
      if (use_vicinal) {
        vicinal = make_vicinal_batch(batch, aug.generated->segments, k, aug.go,
                                     derive_seed(settings.seed, {2, epoch, batch_index}));
      }

      const size_t chunks = (bsz + kChunk - 1) / kChunk;
      std::vector<std::vector<Tensor>> chunk_grads(chunks);
      std::vector<double> chunk_loss(chunks);
      parallel_for(chunks, [&](size_t c) {
        const size_t lo = c * kChunk, hi = std::min(bsz, lo + kChunk);
        const std::vector<const SignalSegment*> xs(batch.begin() + lo, batch.begin() + hi);
        ad::Tape tape;
        ad::Var total = soft_cross_entropy_sum(stacked_logits(model, tape, xs), hard_targets(xs, k));
        if (use_vicinal) {
          std::vector<const SignalSegment*> xv;
          std::vector<SoftLabel> yv;
          for (size_t j = lo; j < hi; ++j) {
            xv.push_back(&vicinal[j].x_vic);
            yv.push_back(vicinal[j].y_vic);
          }
          total = ad::add(total, ad::scale(kl_divergence_sum(stacked_logits(model, tape, xv), yv), aug.go.eta));
        }
        const ad::Var loss = ad::scale(total, 1.0 / static_cast<double>(bsz));
        tape.backward(loss);
        chunk_grads[c] = params.zeros_like();
        tape.accumulate_param_grads(chunk_grads[c]);
        chunk_loss[c] = loss.item();
      });
      std::vector<Tensor> grads = std::move(chunk_grads[0]);
      double batch_loss = chunk_loss[0];
      for (size_t c = 1; c < chunks; ++c) {
        add_into(grads, chunk_grads[c]);
        batch_loss += chunk_loss[c];
      }
      if (!std::isfinite(batch_loss) || !all_finite(grads)) {
        throw NumericalError("classifier training diverged (non-finite loss) at epoch " +
                             std::to_string(epoch));
      }
      optimizer.step(params, grads);
      epoch_sum += batch_loss * static_cast<double>(bsz);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_sum / static_cast<double>(n);
    if (!val.empty()) {
      rec.val_acc = accuracy(model, val);
      if (rec.val_acc > best_acc) {
        best_acc = rec.val_acc;
        best = params;
        report.best_epoch = epoch;
      }
    }
    report.epochs.push_back(rec);
  }
  if (best) params = *best;
  if (val.empty() && settings.epochs > 0) report.best_epoch = settings.epochs;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(model), std::move(report)};
}

// ---------------------------------------------------------------------------
// persistence

void write_train_report(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write report " + path.string());
  os << "mode = " << report.mode << "\n";
  os << "seed = " << report.seed << "\n";
  os << "train_size = " << report.train_size << "\n";
  os << "epochs = " << report.epochs.size() << "\n";
  os << "best_epoch = " << report.best_epoch << "\n";
  if (report.config.contains("go")) {
    const auto& g = report.config["go"];
    os << "go_beta_smooth = " << fmt_double(g["beta_smooth"].get<double>()) << "\n";
    os << "go_alpha = " << fmt_double(g["alpha"].get<double>()) << "\n";
    os << "go_eta = " << fmt_double(g["eta"].get<double>()) << "\n";
  }
  if (report.config.contains("append_ratio")) {
    os << "append_ratio = " << fmt_double(report.config["append_ratio"].get<double>()) << "\n";
  }
  if (report.test) {
    os << "test_acc = " << fmt_double(report.test->acc) << "\n";
    os << "test_auc = " << fmt_double(report.test->auc) << "\n";
    os << "test_f1 = " << fmt_double(report.test->f1) << "\n";
    for (const auto& w : report.test->warnings) os << "warning = " << w << "\n";
  }
  os << "config = " << report.config.dump() << "\n";
  os << "wall_seconds = " << fmt_double(report.wall_seconds) << "\n";

  auto csv_path = path;
  csv_path.replace_filename(path.stem().string() + "_epochs.csv");
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write " + csv_path.string());
  csv << "epoch,train_loss,val_acc\n";
  for (const auto& e : report.epochs) {
    csv << e.epoch << "," << fmt_double(e.train_loss) << "," << fmt_double(e.val_acc) << "\n";
  }
  if (!os || !csv) throw IoError("write failed for report " + path.string());
}

void save_classifier(const Classifier& model, const std::filesystem::path& path) {
  save_checkpoint(path, {{"kind", "classifier"}, {"classifier", model.config()}}, model.parameters());
}

Classifier load_classifier(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.config.value("kind", std::string()) != "classifier") {
    throw InvalidArgument("checkpoint " + path.string() + " is not a classifier");
  }
  ClassifierConfig cfg;
  try {
    cfg = ck.config.at("classifier").get<ClassifierConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("classifier checkpoint config: ") + e.what());
  }
  return Classifier(cfg, std::move(ck.params));
}

}  // namespace eegdt
