#include "eegdt/signal_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "binary_io.hpp"
#include "eegdt/errors.hpp"
#include "eegdt/rng.hpp"

namespace eegdt {

using detail::read_exact;
using detail::read_le;
using detail::write_le;

SignalSegment::SignalSegment(size_t channels, size_t length, std::vector<double> data,
                             std::optional<uint32_t> label)
    : channels_(channels), length_(length), data_(std::move(data)), label_(label) {
  if (channels_ == 0 || length_ == 0) throw InvalidArgument("segment: C and L must be positive");
  if (data_.size() != channels_ * length_) {
    throw InvalidArgument("segment: expected " + std::to_string(channels_ * length_) +
                          " samples, got " + std::to_string(data_.size()));
  }
  for (double x : data_)
    if (!std::isfinite(x)) throw InvalidArgument("segment: non-finite sample");
}

double SignalSegment::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

bool SignalDataset::labeled() const {
  if (segments.empty()) return false;
  return std::all_of(segments.begin(), segments.end(),
                     [](const SignalSegment& s) { return s.label().has_value(); });
}

std::vector<uint32_t> SignalDataset::labels() const {
  std::vector<uint32_t> out;
  out.reserve(segments.size());
  for (const auto& s : segments) {
    if (!s.label()) throw InvalidArgument("dataset: segment without label");
    out.push_back(*s.label());
  }
  return out;
}

void SignalDataset::validate() const {
  if (sample_rate_hz <= 0.0 || !std::isfinite(sample_rate_hz)) {
    throw InvalidArgument("dataset: sample rate must be positive");
  }
  if (scale_factor && !(*scale_factor > 0.0)) throw InvalidArgument("dataset: scale factor must be positive");
  const size_t c = channels(), l = length();
  bool any_label = false, any_unlabeled = false;
  for (const auto& s : segments) {
    if (s.channels() != c || s.length() != l) {
      throw InvalidArgument("dataset: segments do not share shape (" + std::to_string(c) + "x" +
                            std::to_string(l) + " vs " + std::to_string(s.channels()) + "x" +
                            std::to_string(s.length()) + ")");
    }
    if (s.label()) {
      any_label = true;
      if (*s.label() >= num_classes) {
        throw InvalidArgument("dataset: label " + std::to_string(*s.label()) + " >= k = " +
                              std::to_string(num_classes));
      }
    } else {
      any_unlabeled = true;
    }
    if (scale_factor && s.max_abs() > 4.0 + 1e-9) {
      throw InvalidArgument("dataset: scaled sample outside [-4, 4]");
    }
  }
  if (any_label && any_unlabeled) throw InvalidArgument("dataset: mixture of labeled and unlabeled segments");
}

// ---------------------------------------------------------------------------
// scaling

double compute_scale_factor(const SignalDataset& dataset) {
  if (dataset.empty()) throw InvalidArgument("compute_scale_factor: empty dataset");
  double m = 0.0;
  for (const auto& s : dataset.segments) {
    for (double x : s.data()) {
      if (!std::isfinite(x)) throw InvalidArgument("compute_scale_factor: non-finite sample");
      m = std::max(m, std::abs(x));
    }
  }
  return m == 0.0 ? 1.0 : m / 4.0;
}

namespace {

void require_positive_scale(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("scale factor must be positive and finite");
}

}  // namespace

SignalSegment scale(const SignalSegment& x, double s) {
  require_positive_scale(s);
  std::vector<double> out(x.data());
  for (double& v : out) v /= s;
  return SignalSegment(x.channels(), x.length(), std::move(out), x.label());
}

SignalSegment unscale(const SignalSegment& z, double s) {
  require_positive_scale(s);
  std::vector<double> out(z.data());
  for (double& v : out) v *= s;
  return SignalSegment(z.channels(), z.length(), std::move(out), z.label());
}

SignalDataset scale_dataset(const SignalDataset& d, double s) {
  SignalDataset out = d;
  for (auto& seg : out.segments) seg = scale(seg, s);
  out.scale_factor = s;
  return out;
}

SignalDataset unscale_dataset(const SignalDataset& d, double s) {
  SignalDataset out = d;
  for (auto& seg : out.segments) seg = unscale(seg, s);
  out.scale_factor.reset();
  return out;
}

// ---------------------------------------------------------------------------
// splitting

SplitIndices split_indices(const SignalDataset& dataset, const SplitSpec& spec) {
  const size_t n = dataset.size();
  if (n < 5) throw InvalidArgument("split: need at least 5 segments, got " + std::to_string(n));
  if (spec.train_frac < 0 || spec.val_frac < 0 || spec.test_frac < 0) {
    throw InvalidArgument("split: fractions must be nonnegative");
  }
  if (std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9) {
    throw InvalidArgument("split: fractions must sum to 1");
  }
  auto part_size = [n](double frac) {
    size_t c = static_cast<size_t>(std::llround(frac * static_cast<double>(n)));
    if (frac > 0.0 && c == 0) c = 1;
    return c;
  };
  const size_t n_val = part_size(spec.val_frac);
  const size_t n_test = part_size(spec.test_frac);
  if (n_val + n_test >= n && spec.train_frac > 0.0) throw InvalidArgument("split: no room for a training part");
  const size_t n_train = n - n_val - n_test;

  // Stratify: shuffle each label group, then order every element by its
  // relative rank inside its group so all groups spread evenly across the
  // sequence. Rank 0 of each group sorts first, which puts every label in
  // the training part.
  const bool labeled = dataset.labeled();
  const uint32_t groups = labeled ? std::max<uint32_t>(dataset.num_classes, 1) : 1;
  std::vector<std::vector<size_t>> members(groups);
  for (size_t i = 0; i < n; ++i) members[labeled ? *dataset.segments[i].label() : 0].push_back(i);

  struct Keyed {
    double key;
    uint32_t group;
    size_t index;
  };
  std::vector<Keyed> order;
  order.reserve(n);
  for (uint32_t g = 0; g < groups; ++g) {
    auto& m = members[g];
    Rng rng(derive_seed(spec.seed, {g}));
    std::shuffle(m.begin(), m.end(), rng.engine());
    for (size_t r = 0; r < m.size(); ++r) {
      const double key = r == 0 ? 0.0 : (static_cast<double>(r) + 0.5) / static_cast<double>(m.size());
      order.push_back({key, g, m[r]});
    }
  }
  std::sort(order.begin(), order.end(), [](const Keyed& a, const Keyed& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.group < b.group;
  });

  SplitIndices out;
  for (size_t i = 0; i < n; ++i) {
    auto& dst = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
    dst.push_back(order[i].index);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

SignalDataset subset(const SignalDataset& dataset, std::span<const size_t> indices) {
  SignalDataset out;
  out.num_classes = dataset.num_classes;
  out.scale_factor = dataset.scale_factor;
  out.sample_rate_hz = dataset.sample_rate_hz;
  out.segments.reserve(indices.size());
  for (size_t i : indices) out.segments.push_back(dataset.segments.at(i));
  return out;
}

DatasetSplit split_dataset(const SignalDataset& dataset, const SplitSpec& spec) {
  DatasetSplit out;
  out.indices = split_indices(dataset, spec);
  out.train = subset(dataset, out.indices.train);
  out.val = subset(dataset, out.indices.val);
  out.test = subset(dataset, out.indices.test);
  return out;
}

// ---------------------------------------------------------------------------
// synthetic data

SignalDataset synth_dataset(const SynthSpec& spec) {
  if (spec.num_classes < 1) throw InvalidArgument("synth: num_classes must be >= 1");
  if (spec.per_class < 1) throw InvalidArgument("synth: per_class must be >= 1");
  if (spec.channels < 1 || spec.length < 1) throw InvalidArgument("synth: channels and length must be >= 1");
  if (!(spec.sample_rate_hz > 0.0)) throw InvalidArgument("synth: sample_rate_hz must be positive");
  if (!(spec.band_width_hz > 0.0)) throw InvalidArgument("synth: band_width_hz must be positive");
  if (!(spec.band_start_hz > 0.0)) throw InvalidArgument("synth: band_start_hz must be positive");
  if (spec.num_classes > 1 && !(spec.band_step_hz > spec.band_width_hz)) {
    throw InvalidArgument("synth: band_step_hz must exceed band_width_hz so class bands are disjoint");
  }
  const double top = spec.band_start_hz + (spec.num_classes - 1) * spec.band_step_hz + spec.band_width_hz;
  if (top >= spec.sample_rate_hz / 2.0) {
    throw InvalidArgument("synth: band exceeds Nyquist (top band edge " + std::to_string(top) +
                          " Hz >= sample_rate_hz/2 = " + std::to_string(spec.sample_rate_hz / 2.0) + ")");
  }
  if (spec.components < 1) throw InvalidArgument("synth: components must be >= 1");

  SignalDataset out;
  out.num_classes = spec.num_classes;
  out.sample_rate_hz = spec.sample_rate_hz;
  const size_t c_n = spec.channels, l_n = spec.length;
  for (uint32_t cls = 0; cls < spec.num_classes; ++cls) {
    const double lo = spec.band_start_hz + cls * spec.band_step_hz;
    const double hi = lo + spec.band_width_hz;
    for (uint32_t i = 0; i < spec.per_class; ++i) {
      Rng rng(derive_seed(spec.seed, {cls, i}));
      std::vector<double> data(c_n * l_n, 0.0);
      for (size_t c = 0; c < c_n; ++c) {
        double* row = data.data() + c * l_n;
        for (uint32_t k = 0; k < spec.components; ++k) {
          const double f = rng.uniform(lo, hi);
          const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
          const double amp = spec.amplitude_uv * rng.uniform(0.8, 1.2);
          for (size_t t = 0; t < l_n; ++t) {
            row[t] += amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(t) /
                                         spec.sample_rate_hz + phase);
          }
        }
        double power = 0.0;
        for (size_t t = 0; t < l_n; ++t) power += row[t] * row[t];
        const double noise_sd = 0.1 * std::sqrt(power / static_cast<double>(l_n));
        for (size_t t = 0; t < l_n; ++t) {
          row[t] = static_cast<double>(static_cast<float>(row[t] + rng.normal(0.0, noise_sd)));
        }
      }
      out.segments.emplace_back(c_n, l_n, std::move(data), cls);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SDF1

void write_dataset(std::ostream& os, const SignalDataset& dataset) {
  dataset.validate();
  const bool labeled = dataset.labeled();
  uint16_t flags = 0;
  if (labeled) flags |= 1u;
  if (dataset.scale_factor) flags |= 2u;
  os.write("SDF1", 4);
  write_le<uint16_t>(os, kSdfVersion);
  write_le<uint16_t>(os, flags);
  write_le<uint32_t>(os, dataset.num_classes);
  write_le<uint32_t>(os, static_cast<uint32_t>(dataset.channels()));
  write_le<uint32_t>(os, static_cast<uint32_t>(dataset.length()));
  write_le<uint32_t>(os, static_cast<uint32_t>(dataset.size()));
  write_le<float>(os, static_cast<float>(dataset.sample_rate_hz));
  if (dataset.scale_factor) write_le<float>(os, static_cast<float>(*dataset.scale_factor));
  for (const auto& s : dataset.segments) {
    if (labeled) {
      if (*s.label() > 0xFFFF) throw InvalidArgument("SDF1: label does not fit in u16");
      write_le<uint16_t>(os, static_cast<uint16_t>(*s.label()));
    }
    for (double x : s.data()) write_le<float>(os, static_cast<float>(x));
  }
}

SignalDataset read_dataset(std::istream& is) {
  char magic[4];
  read_exact(is, magic, 4, "magic");
  if (std::string(magic, 4) != "SDF1") throw BadMagicError("not an SDF1 dataset (bad magic)");
  const auto version = read_le<uint16_t>(is, "version");
  if (version != kSdfVersion) {
    throw VersionMismatchError("SDF1 version " + std::to_string(version) + " unsupported (expected " +
                               std::to_string(kSdfVersion) + ")");
  }
  const auto flags = read_le<uint16_t>(is, "flags");
  SignalDataset d;
  d.num_classes = read_le<uint32_t>(is, "k");
  const auto c = read_le<uint32_t>(is, "C");
  const auto l = read_le<uint32_t>(is, "L");
  const auto count = read_le<uint32_t>(is, "segment count");
  d.sample_rate_hz = read_le<float>(is, "sample rate");
  if (flags & 2u) d.scale_factor = read_le<float>(is, "scale factor");
  if (count > 0 && (c == 0 || l == 0)) throw FormatError("SDF1: zero C or L with nonzero segment count");
  const size_t per = static_cast<size_t>(c) * l;
  if (per > (size_t{1} << 26)) throw FormatError("SDF1: implausible segment size");
  std::vector<float> raw(per);
  d.segments.reserve(std::min<uint32_t>(count, 1u << 16));
  for (uint32_t i = 0; i < count; ++i) {
    std::optional<uint32_t> label;
    if (flags & 1u) label = read_le<uint16_t>(is, "label");
    read_exact(is, reinterpret_cast<char*>(raw.data()), per * sizeof(float), "segment samples");
    d.segments.emplace_back(c, l, std::vector<double>(raw.begin(), raw.end()), label);
  }
  try {
    d.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("SDF1: ") + e.what());
  }
  return d;
}

void save_dataset(const SignalDataset& dataset, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_dataset(os, dataset);
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

SignalDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset '" + path.string() + "'");
  return read_dataset(is);
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

SignalSegment read_csv_segment(const std::filesystem::path& path, uint32_t label) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open CSV segment '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& f : split_commas(line)) {
      try {
        row.push_back(std::stod(trim(f)));
      } catch (const std::exception&) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": not a number '" + f + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": column count changed");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(path.string() + ": no samples");
  const size_t l = rows.size(), c = rows.front().size();
  std::vector<double> data(c * l);
  for (size_t t = 0; t < l; ++t)
    for (size_t ch = 0; ch < c; ++ch) data[ch * l + t] = rows[t][ch];
  return SignalSegment(c, l, std::move(data), label);
}

}  // namespace

SignalDataset load_csv_manifest(const std::filesystem::path& manifest, double sample_rate_hz) {
  std::ifstream is(manifest);
  if (!is) throw IoError("cannot open manifest '" + manifest.string() + "'");
  SignalDataset d;
  d.sample_rate_hz = sample_rate_hz;
  const auto base = manifest.parent_path();
  std::string line;
  size_t line_no = 0;
  uint32_t max_label = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw FormatError(manifest.string() + ":" + std::to_string(line_no) + ": expected 'path,label'");
    }
    std::filesystem::path p = trim(line.substr(0, comma));
    if (p.is_relative()) p = base / p;
    uint32_t label = 0;
    try {
      const long v = std::stol(trim(line.substr(comma + 1)));
      if (v < 0) throw std::out_of_range("negative");
      label = static_cast<uint32_t>(v);
    } catch (const std::exception&) {
      throw FormatError(manifest.string() + ":" + std::to_string(line_no) + ": bad label");
    }
    max_label = std::max(max_label, label);
    d.segments.push_back(read_csv_segment(p, label));
  }
  if (d.segments.empty()) throw FormatError(manifest.string() + ": manifest lists no segments");
  d.num_classes = max_label + 1;
  d.validate();
  return d;
}

}  // namespace eegdt
