#include "eegdt/report.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "eegdt/errors.hpp"

namespace eegdt {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

// CSV fields here are identifiers and numbers; quote anything unusual.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_loss_curve(const std::vector<double>& epoch_loss, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "epoch,loss\n";
  for (size_t i = 0; i < epoch_loss.size(); ++i) os << i + 1 << "," << format_double(epoch_loss[i]) << "\n";
  if (!os) throw IoError("write failed: " + path.string());
}

void write_spectrum_csv(const SpectrumReport& report, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "frequency_hz";
  for (size_t p = 0; p < report.values.size(); ++p)
    for (size_t c = 0; c < report.values[p].size(); ++c)
      os << "," << csv_field(report.populations.at(p) + "_ch" + std::to_string(c));
  os << "\n";
  for (size_t k = 0; k < report.frequencies_hz.size(); ++k) {
    os << format_double(report.frequencies_hz[k]);
    for (const auto& pop : report.values)
      for (const auto& ch : pop) os << "," << format_double(ch.at(k));
    os << "\n";
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<std::filesystem::path> write_spectrum_svg(const SpectrumReport& report,
                                                      const std::filesystem::path& prefix) {
  std::vector<std::filesystem::path> out;
  if (report.values.empty()) return out;
  const size_t channels = report.values.front().size();
  const double w = 640, h = 360, ml = 60, mr = 20, mt = 30, mb = 45;
  const double fmax = report.frequencies_hz.empty() ? 1.0 : std::max(report.frequencies_hz.back(), 1e-12);

  for (size_t c = 0; c < channels; ++c) {
    double vmax = 0.0;
    for (const auto& pop : report.values)
      for (double v : pop.at(c)) vmax = std::max(vmax, v);
    if (vmax <= 0.0) vmax = 1.0;
    auto px = [&](double f) { return ml + (w - ml - mr) * f / fmax; };
    auto py = [&](double v) { return h - mb - (h - mt - mb) * v / vmax; };

    auto path = prefix;
    path.replace_filename(prefix.stem().string() + "_ch" + std::to_string(c) + ".svg");
    auto os = open_out(path);
    char buf[128];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\">channel " << c << "</text>\n";
    std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                  ml, h - mb, w - mr, h - mb);
    os << buf;
    std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                  ml, mt, ml, h - mb);
    os << buf;
    for (int t = 0; t <= 4; ++t) {
      const double f = fmax * t / 4.0;
      std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%.3g</text>\n", px(f),
                    h - mb + 16, f);
      os << buf;
    }
    os << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 8
       << "\" text-anchor=\"middle\">frequency (Hz)</text>\n";
    os << "<text x=\"14\" y=\"" << (mt + h - mb) / 2 << "\" transform=\"rotate(-90 14 " << (mt + h - mb) / 2
       << ")\" text-anchor=\"middle\">mean magnitude</text>\n";

    for (size_t p = 0; p < report.values.size(); ++p) {
      const auto& v = report.values[p].at(c);
      const char* color = kPalette[p % std::size(kPalette)];
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (size_t k = 0; k < v.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", k ? " " : "", px(report.frequencies_hz[k]), py(v[k]));
        os << buf;
      }
      os << "\"/>\n";
      os << "<text x=\"" << w - mr - 140 << "\" y=\"" << mt + 14 * (p + 1) << "\" fill=\"" << color << "\">"
         << report.populations.at(p) << "</text>\n";
    }
    os << "</svg>\n";
    if (!os) throw IoError("write failed: " + path.string());
    out.push_back(path);
  }
  return out;
}

void append_csv_row(const std::filesystem::path& path, const std::string& header, const std::string& row) {
  bool fresh = true;
  if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
    std::ifstream is(path);
    std::string first;
    std::getline(is, first);
    if (first != header) {
      throw IoError("results file " + path.string() + " has header '" + first + "', expected '" + header + "'");
    }
    fresh = false;
  }
  std::ofstream os(path, std::ios::app);
  if (!os) throw IoError("cannot append to " + path.string());
  if (fresh) os << header << "\n";
  os << row << "\n";
  if (!os) throw IoError("write failed: " + path.string());
}

void append_fid_result(const std::filesystem::path& path, const std::string& dataset,
                       const std::string& model_tag, double fid) {
  append_csv_row(path, kFidHeader,
                 utc_timestamp() + "," + csv_field(dataset) + "," + csv_field(model_tag) + "," +
                     format_double(fid));
}

void append_metrics_result(const std::filesystem::path& path, const std::string& dataset,
                           const std::string& model_tag, const std::string& mode, uint64_t seed,
                           const Metrics& m) {
  append_csv_row(path, kMetricsHeader,
                 utc_timestamp() + "," + csv_field(dataset) + "," + csv_field(model_tag) + "," +
                     csv_field(mode) + "," + std::to_string(seed) + "," + format_double(m.acc) + "," +
                     format_double(m.auc) + "," + format_double(m.f1));
}

}  // namespace eegdt
