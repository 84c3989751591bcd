#pragma once

// Frechet distance between Gaussian fits of classifier embeddings, and mean
// magnitude spectra of signal populations.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eegdt/classifier.hpp"
#include "eegdt/signal_io.hpp"

namespace eegdt {

struct FidStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;  // unbiased (n - 1) sample covariance
  size_t n = 0;
};

// E x n matrix; column i is the embedding of segment i.
Eigen::MatrixXd embed_population(const Classifier& extractor, const SignalDataset& data);

FidStats fit_gaussian(const Eigen::MatrixXd& embeddings);

// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), clamped at 0.
//
// Tr (S_a S_b)^{1/2} is evaluated as the sum of square roots of the
// eigenvalues of S_a^{1/2} S_b S_a^{1/2}, which is similar to the product
// and symmetric PSD. Eigenvalues below 1e-10 times the largest are treated
// as zero.
double frechet_distance(const FidStats& a, const FidStats& b);

struct FidResult {
  double fid = 0.0;
  std::vector<std::string> warnings;
};

FidResult fid_protocol(const SignalDataset& original, const SignalDataset& generated,
                       const Classifier& extractor);

struct SpectrumReport {
  std::vector<double> frequencies_hz;  // floor(L/2) + 1 bins
  std::vector<std::string> populations;
  // values[p][c][bin]
  std::vector<std::vector<std::vector<double>>> values;
};

// Per-channel mean of per-segment FFT magnitudes (or squared magnitudes).
// The report holds a single population named `name`.
SpectrumReport spectrum_report(const SignalDataset& data, const std::string& name = "data",
                               bool power = false);

// Concatenates populations of reports with identical bins and channels.
SpectrumReport merge_spectra(const std::vector<SpectrumReport>& reports);

// Bin index of the largest value of one population/channel, ignoring DC.
size_t peak_bin(const SpectrumReport& report, size_t population, size_t channel);

}  // namespace eegdt
