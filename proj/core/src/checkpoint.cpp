#include "eegdt/checkpoint.hpp"

#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "eegdt/errors.hpp"

namespace eegdt {

using detail::read_exact;
using detail::read_le;
using detail::write_le;

void write_checkpoint(std::ostream& os, const nlohmann::json& config, const ParameterSet& params) {
  os.write("EDTM", 4);
  write_le<uint16_t>(os, kCheckpointVersion);
  const std::string cfg = config.dump();
  write_le<uint32_t>(os, static_cast<uint32_t>(cfg.size()));
  os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  write_le<uint32_t>(os, static_cast<uint32_t>(params.size()));
  for (size_t p = 0; p < params.size(); ++p) {
    const std::string& name = params.name(p);
    const Tensor& t = params.tensor(p);
    write_le<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<uint32_t>(os, static_cast<uint32_t>(t.rank()));
    for (size_t d : t.shape) write_le<uint32_t>(os, static_cast<uint32_t>(d));
    for (double x : t.data) write_le<float>(os, static_cast<float>(x));
  }
}

Checkpoint read_checkpoint(std::istream& is) {
  char magic[4];
  read_exact(is, magic, 4, "magic");
  if (std::string(magic, 4) != "EDTM") throw BadMagicError("not an EDTM checkpoint (bad magic)");
  const auto version = read_le<uint16_t>(is, "version");
  if (version != kCheckpointVersion) {
    throw VersionMismatchError("EDTM version " + std::to_string(version) + " unsupported (expected " +
                               std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  const auto cfg_len = read_le<uint32_t>(is, "config length");
  if (cfg_len > (1u << 24)) throw FormatError("EDTM config block is implausibly large");
  std::string cfg(cfg_len, '\0');
  read_exact(is, cfg.data(), cfg_len, "config");
  try {
    ck.config = nlohmann::json::parse(cfg);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("EDTM config block is not valid JSON: ") + e.what());
  }
  const auto count = read_le<uint32_t>(is, "tensor count");
  for (uint32_t p = 0; p < count; ++p) {
    const auto name_len = read_le<uint32_t>(is, "tensor name length");
    if (name_len > 4096) throw FormatError("tensor name is implausibly long");
    std::string name(name_len, '\0');
    read_exact(is, name.data(), name_len, "tensor name");
    const auto rank = read_le<uint32_t>(is, "tensor rank");
    if (rank > 8) throw FormatError("tensor '" + name + "' has implausible rank");
    std::vector<size_t> shape(rank);
    for (auto& d : shape) d = read_le<uint32_t>(is, "tensor dims");
    const size_t n = shape_size(shape);
    if (n > (size_t{1} << 26)) throw FormatError("tensor '" + name + "' is implausibly large");
    std::vector<float> raw(n);
    read_exact(is, reinterpret_cast<char*>(raw.data()), n * sizeof(float), "tensor '" + name + "'");
    std::vector<double> data(raw.begin(), raw.end());
    ck.params.add(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& config,
                     const ParameterSet& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(os, config, params);
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(is);
}

}  // namespace eegdt
