#pragma once

// "EDTM" checkpoint container.
//
//   magic "EDTM" | version u16 | config length u32 | config (UTF-8 JSON)
//   | tensor count u32 | per tensor: name length u32, name bytes (UTF-8),
//     rank u32, dims u32 x rank, payload f32 x prod(dims)
//
// All integers and floats little-endian.

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "eegdt/params.hpp"

namespace eegdt {

inline constexpr uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json config;
  ParameterSet params;
};

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& config,
                     const ParameterSet& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Stream variants, used by tests to exercise truncation without touching disk.
void write_checkpoint(std::ostream& os, const nlohmann::json& config, const ParameterSet& params);
Checkpoint read_checkpoint(std::istream& is);

}  // namespace eegdt
