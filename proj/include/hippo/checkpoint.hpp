#pragma once

#include <filesystem>
#include <string>

#include "hippo/network.hpp"

namespace hippo {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string config_hash;
  std::string config;  // canonical JSON of the training configuration
  std::uint64_t env_steps = 0;
  std::uint64_t updates = 0;
  PolicyParams params;

  bool operator==(const Checkpoint&) const = default;
};

// Binary little-endian layout: magic, version, config hash and JSON, counters,
// then the actor, critic and normaliser. Doubles are stored bit-exactly.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hippo
