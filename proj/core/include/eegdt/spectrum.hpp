#pragma once

#include <span>
#include <vector>

namespace eegdt {

// |X[k]| for k = 0 .. floor(n/2) of the real-input DFT of x (unnormalized).
std::vector<double> magnitude_spectrum(std::span<const double> x);

// Bin center frequencies for a length-n real FFT at the given sample rate.
std::vector<double> rfft_frequencies(size_t n, double sample_rate_hz);

}  // namespace eegdt
