#pragma once

// CSV / SVG writers for run outputs.

#include <filesystem>
#include <string>
#include <vector>

#include "eegdt/evaluation.hpp"

namespace eegdt {

// ISO-8601 UTC, second resolution: 2024-01-31T12:00:00Z
std::string utc_timestamp();

// Shortest text that round-trips the double (%.17g).
std::string format_double(double v);

// epoch,loss (epochs numbered from 1).
void write_loss_curve(const std::vector<double>& epoch_loss, const std::filesystem::path& path);

// frequency_hz,<population>_ch<c>,...
void write_spectrum_csv(const SpectrumReport& report, const std::filesystem::path& path);

// One standalone SVG line plot per channel, named <stem>_ch<c>.svg next to
// `prefix`. Returns the written paths.
std::vector<std::filesystem::path> write_spectrum_svg(const SpectrumReport& report,
                                                      const std::filesystem::path& prefix);

// Appends `row` to a CSV file, writing `header` first if the file is new or
// empty. Throws IoError if an existing header differs.
void append_csv_row(const std::filesystem::path& path, const std::string& header,
                    const std::string& row);

inline constexpr const char* kFidHeader = "timestamp,dataset,model_tag,fid";
inline constexpr const char* kMetricsHeader = "timestamp,dataset,model_tag,mode,seed,acc,auc,f1";

void append_fid_result(const std::filesystem::path& path, const std::string& dataset,
                       const std::string& model_tag, double fid);
void append_metrics_result(const std::filesystem::path& path, const std::string& dataset,
                           const std::string& model_tag, const std::string& mode, uint64_t seed,
                           const Metrics& m);

}  // namespace eegdt
