#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "flowgrpo/diffcore/adam.hpp"
#include "flowgrpo/diffcore/params.hpp"
#include "flowgrpo/harness/config.hpp"
#include "flowgrpo/toytask/toytask.hpp"

namespace flowgrpo {

inline constexpr int kCheckpointVersion = 1;
inline constexpr int kDatasetVersion = 1;

enum class Phase { Pretrained, Grpo };

std::string_view to_string(Phase phase) noexcept;

// A JSON document. Doubles are written in shortest round-trip form, so parameter
// values survive save/load bit for bit and save -> load -> save is byte-identical.
struct Checkpoint {
  int version = kCheckpointVersion;
  Phase phase = Phase::Pretrained;
  std::uint64_t step = 0;
  RunConfig config;
  ParamSet params;
  AdamState optimizer;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
// ParseError (with byte offset) for malformed input, ContractError for a version
// mismatch. Nothing is returned unless the whole document validated.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_dataset(const Dataset& dataset);
Dataset parse_dataset(std::string_view bytes);

}  // namespace flowgrpo
