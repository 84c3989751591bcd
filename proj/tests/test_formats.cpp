#include <doctest.h>

#include <fstream>
#include <sstream>

#include "eegdt/checkpoint.hpp"
#include "eegdt/errors.hpp"
#include "eegdt/rng.hpp"
#include "eegdt/signal_io.hpp"
#include "support.hpp"

using namespace eegdt;

namespace {

double as_float(double x) { return static_cast<double>(static_cast<float>(x)); }

SignalDataset random_dataset(Rng& rng) {
  SignalDataset d;
  const size_t c = static_cast<size_t>(rng.uniform_int(1, 4));
  const size_t l = static_cast<size_t>(rng.uniform_int(1, 40));
  const size_t n = static_cast<size_t>(rng.uniform_int(0, 6));
  const bool labeled = rng.uniform() < 0.7;
  const bool scaled = rng.uniform() < 0.5;
  d.num_classes = labeled ? static_cast<uint32_t>(rng.uniform_int(1, 5)) : 0;
  d.sample_rate_hz = as_float(rng.uniform(1.0, 1000.0));
  if (scaled) d.scale_factor = as_float(rng.uniform(0.01, 100.0));
  const double amp = scaled ? 4.0 : rng.uniform(1e-3, 1e4);
  for (size_t s = 0; s < n; ++s) {
    std::vector<double> x(c * l);
    for (double& v : x) v = as_float(rng.uniform(-amp, amp));
    std::optional<uint32_t> y;
    if (labeled) y = static_cast<uint32_t>(rng.uniform_int(0, d.num_classes - 1));
    d.segments.emplace_back(c, l, std::move(x), y);
  }
  return d;
}

ParameterSet random_params(Rng& rng) {
  ParameterSet p;
  const int count = static_cast<int>(rng.uniform_int(0, 6));
  for (int i = 0; i < count; ++i) {
    std::vector<size_t> shape(static_cast<size_t>(rng.uniform_int(1, 3)));
    for (auto& s : shape) s = static_cast<size_t>(rng.uniform_int(1, 6));
    Tensor t(shape);
    for (double& v : t.data) v = rng.normal() * std::pow(10.0, rng.uniform(-6.0, 6.0));
    std::string name = "t" + std::to_string(i);
    if (rng.uniform() < 0.3) name += ".weight/ä";  // non-ASCII UTF-8
    p.add(name, std::move(t));
  }
  p.quantize_f32();
  return p;
}

nlohmann::json random_config(Rng& rng) {
  nlohmann::json j;
  j["kind"] = rng.uniform() < 0.5 ? "diffusion" : "classifier";
  j["value"] = rng.normal();
  j["n"] = rng.uniform_int(0, 1000000);
  j["list"] = std::vector<int>{1, 2, static_cast<int>(rng.uniform_int(0, 9))};
  j["nested"] = {{"flag", rng.uniform() < 0.5}, {"text", "quote \" and newline \n"}};
  return j;
}

template <class Read>
void every_truncation_throws(const std::string& bytes, Read read) {
  for (size_t cut = 0; cut < bytes.size(); ++cut) {
    std::istringstream is(bytes.substr(0, cut));
    CHECK_THROWS_AS(read(is), TruncatedError);
  }
}

}  // namespace

TEST_SUITE("format roundtrips") {
  TEST_CASE("1000 random SDF1 datasets roundtrip losslessly") {
    Rng rng(2024);
    for (int i = 0; i < 1000; ++i) {
      const auto d = random_dataset(rng);
      std::stringstream ss;
      write_dataset(ss, d);
      const auto back = read_dataset(ss);
      REQUIRE(back == d);
    }
  }

  TEST_CASE("1000 random EDTM checkpoints roundtrip losslessly") {
    Rng rng(4048);
    for (int i = 0; i < 1000; ++i) {
      const auto params = random_params(rng);
      const auto config = random_config(rng);
      std::stringstream ss;
      write_checkpoint(ss, config, params);
      const auto back = read_checkpoint(ss);
      REQUIRE(back.params == params);
      REQUIRE(back.config == config);
    }
  }

  TEST_CASE("file roundtrip and byte stability") {
    Rng rng(7);
    const auto dir = testing::scratch_dir("formats");
    const auto params = random_params(rng);
    save_checkpoint(dir / "a.edtm", {{"kind", "x"}}, params);
    save_checkpoint(dir / "b.edtm", {{"kind", "x"}}, load_checkpoint(dir / "a.edtm").params);
    std::ifstream a(dir / "a.edtm", std::ios::binary), b(dir / "b.edtm", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
    CHECK(sa.substr(0, 4) == "EDTM");
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.edtm"), IoError);
  }

  TEST_CASE("every truncation of an SDF1 stream throws TruncatedError") {
    Rng rng(11);
    SignalDataset d;
    while (d.empty()) d = random_dataset(rng);
    std::stringstream ss;
    write_dataset(ss, d);
    every_truncation_throws(ss.str(), [](std::istream& is) { return read_dataset(is); });
  }

  TEST_CASE("every truncation of an EDTM stream throws TruncatedError") {
    Rng rng(12);
    ParameterSet p;
    while (p.size() == 0) p = random_params(rng);
    std::stringstream ss;
    write_checkpoint(ss, {{"kind", "x"}}, p);
    every_truncation_throws(ss.str(), [](std::istream& is) { return read_checkpoint(is); });
  }

  TEST_CASE("EDTM header errors") {
    ParameterSet p;
    p.add("w", Tensor({2}, 0.5));
    std::stringstream ss;
    write_checkpoint(ss, {}, p);
    std::string bytes = ss.str();
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    std::istringstream m(bad_magic);
    CHECK_THROWS_AS(read_checkpoint(m), BadMagicError);
    std::string bad_version = bytes;
    bad_version[4] = 9;
    std::istringstream v(bad_version);
    CHECK_THROWS_AS(read_checkpoint(v), VersionMismatchError);
  }
}
