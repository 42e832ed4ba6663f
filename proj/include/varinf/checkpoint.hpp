#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "varinf/mlp.hpp"

namespace varinf {

// On-disk layout (all integers little-endian):
//   8 bytes   magic "VARINFCK"
//   u32       format version (1)
//   u64       header length in bytes
//   ...       UTF-8 JSON header: {"networks": [{"name", "layer_sizes", "hidden",
//             "output", "offset", "count"}...], "count": N, "meta": {...}}
//   N x f64   parameter values, networks concatenated in header order
struct Checkpoint {
  struct Entry {
    std::string name;
    MlpSpec spec;
    ParamVector params;
  };
  std::vector<Entry> networks;
  nlohmann::json meta = nlohmann::json::object();

  void add(std::string name, const Mlp& net);
  bool has(const std::string& name) const;
  Mlp mlp(const std::string& name) const;
};

inline constexpr char kCheckpointMagic[8] = {'V', 'A', 'R', 'I', 'N', 'F', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

}  // namespace varinf
