#include "eegdt/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "eegdt/errors.hpp"
#include "eegdt/parallel.hpp"
#include "eegdt/spectrum.hpp"

namespace eegdt {

namespace {

bool finite(const FidStats& s) { return s.mu.allFinite() && s.sigma.allFinite(); }

// Symmetric PSD square root with relative eigenvalue clamping.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NumericalError("frechet_distance: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double cut = 1e-10 * std::max(ev.maxCoeff(), 0.0);
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = ev[i] > cut ? std::sqrt(ev[i]) : 0.0;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Eigen::MatrixXd embed_population(const Classifier& extractor, const SignalDataset& data) {
  const auto& cfg = extractor.config();
  if (!data.empty() && (data.channels() != cfg.channels || data.length() != cfg.length)) {
    throw InvalidArgument("embed_population: data is " + std::to_string(data.channels()) + "x" +
                          std::to_string(data.length()) + " but extractor expects " +
                          std::to_string(cfg.channels) + "x" + std::to_string(cfg.length));
  }
  const size_t e = cfg.embedding_dim;
  Eigen::MatrixXd out(e, data.size());
  std::vector<std::vector<double>> cols(data.size());
  parallel_for(data.size(), [&](size_t i) { cols[i] = extractor.embed(data.segments[i]); });
  for (size_t i = 0; i < cols.size(); ++i) out.col(i) = Eigen::Map<const Eigen::VectorXd>(cols[i].data(), e);
  return out;
}

FidStats fit_gaussian(const Eigen::MatrixXd& embeddings) {
  const auto n = embeddings.cols();
  if (n < 2) throw InvalidArgument("fit_gaussian: need at least 2 samples");
  FidStats s;
  s.n = static_cast<size_t>(n);
  s.mu = embeddings.rowwise().mean();
  const Eigen::MatrixXd centered = embeddings.colwise() - s.mu;
  const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(n - 1);
  s.sigma = 0.5 * (cov + cov.transpose());
  return s;
}

double frechet_distance(const FidStats& a, const FidStats& b) {
  if (a.mu.size() != b.mu.size() || a.sigma.rows() != a.mu.size() || b.sigma.rows() != b.mu.size() ||
      a.sigma.cols() != a.sigma.rows() || b.sigma.cols() != b.sigma.rows()) {
    throw InvalidArgument("frechet_distance: dimension mismatch (" + std::to_string(a.mu.size()) +
                          " vs " + std::to_string(b.mu.size()) + ")");
  }
  if (!finite(a) || !finite(b)) throw InvalidArgument("frechet_distance: non-finite statistics");
  const Eigen::MatrixXd ra = psd_sqrt(a.sigma);
  Eigen::MatrixXd inner = ra * b.sigma * ra;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("frechet_distance: eigendecomposition failed");
  const Eigen::VectorXd ev = es.eigenvalues();
  const double cut = 1e-10 * std::max(ev.maxCoeff(), 0.0);
  double tr_sqrt = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] > cut) tr_sqrt += std::sqrt(ev[i]);
  const double mean_term = (a.mu - b.mu).squaredNorm();
  const double d = mean_term + a.sigma.trace() + b.sigma.trace() - 2.0 * tr_sqrt;
  return std::max(d, 0.0);
}

FidResult fid_protocol(const SignalDataset& original, const SignalDataset& generated,
                       const Classifier& extractor) {
  if (original.channels() != generated.channels() || original.length() != generated.length()) {
    throw InvalidArgument("fid: original segments are " + std::to_string(original.channels()) + "x" +
                          std::to_string(original.length()) + " but generated are " +
                          std::to_string(generated.channels()) + "x" + std::to_string(generated.length()));
  }
  FidResult r;
  if (original.size() != generated.size()) {
    r.warnings.push_back("population sizes differ: original " + std::to_string(original.size()) +
                         ", generated " + std::to_string(generated.size()));
  }
  r.fid = frechet_distance(fit_gaussian(embed_population(extractor, original)),
                           fit_gaussian(embed_population(extractor, generated)));
  return r;
}

SpectrumReport spectrum_report(const SignalDataset& data, const std::string& name, bool power) {
  if (data.empty()) throw InvalidArgument("spectrum_report: empty dataset");
  const size_t ch = data.channels(), len = data.length(), bins = len / 2 + 1;
  SpectrumReport r;
  r.frequencies_hz = rfft_frequencies(len, data.sample_rate_hz);
  r.populations = {name};
  std::vector<std::vector<std::vector<double>>> per(data.size());
  parallel_for(data.size(), [&](size_t i) {
    per[i].resize(ch);
    for (size_t c = 0; c < ch; ++c) {
      per[i][c] = magnitude_spectrum(data.segments[i].channel(c));
      if (power)
        for (double& v : per[i][c]) v *= v;
    }
  });
  std::vector<std::vector<double>> mean(ch, std::vector<double>(bins, 0.0));
  for (const auto& seg : per)
    for (size_t c = 0; c < ch; ++c)
      for (size_t k = 0; k < bins; ++k) mean[c][k] += seg[c][k];
  for (auto& row : mean)
    for (double& v : row) v /= static_cast<double>(data.size());
  r.values = {std::move(mean)};
  return r;
}

SpectrumReport merge_spectra(const std::vector<SpectrumReport>& reports) {
  if (reports.empty()) throw InvalidArgument("merge_spectra: nothing to merge");
  SpectrumReport out;
  out.frequencies_hz = reports.front().frequencies_hz;
  for (const auto& r : reports) {
    if (r.frequencies_hz != out.frequencies_hz) throw InvalidArgument("merge_spectra: frequency bins differ");
    if (!r.values.empty() && !out.values.empty() && r.values.front().size() != out.values.front().size()) {
      throw InvalidArgument("merge_spectra: channel counts differ");
    }
    out.populations.insert(out.populations.end(), r.populations.begin(), r.populations.end());
    out.values.insert(out.values.end(), r.values.begin(), r.values.end());
  }
  return out;
}

size_t peak_bin(const SpectrumReport& report, size_t population, size_t channel) {
  const auto& v = report.values.at(population).at(channel);
  if (v.size() < 2) return 0;
  return static_cast<size_t>(std::max_element(v.begin() + 1, v.end()) - v.begin());
}

}  // namespace eegdt
