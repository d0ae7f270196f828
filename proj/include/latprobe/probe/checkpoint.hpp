#pragma once

// Probe checkpoint: "FPCK" | u32 version=1 | u32 header length | JSON header |
// FPRB blob (1 x (|theta| + |phi|)) holding theta followed by phi in float32.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "latprobe/probe/probe.hpp"
#include "latprobe/subsets/families.hpp"

namespace latprobe::probe {

struct Checkpoint {
  ProbeParams theta;
  subsets::SubsetFamilyParams phi;
  std::uint64_t seed = 0;
  std::string config_hash;
};

std::string encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace latprobe::probe
