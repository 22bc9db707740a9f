#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "visern/trainer.hpp"

namespace visern {

// Checkpoint file, little-endian:
//   "VSCK", u32 version,
//   u32 byte length + UTF-8 key=value block (config, model shape, epoch,
//   lr, best validation loss, optimizer step),
//   then records until end of file:
//   u32 name length, name, u32 rows, u32 cols, rows*cols f64.
// Parameters are recorded under their ModelParams names; Adam moments under
// "adam.m.<name>" and "adam.v.<name>".

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace visern
