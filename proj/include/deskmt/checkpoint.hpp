#pragma once

#include <filesystem>
#include <string>

#include "deskmt/train.hpp"

namespace deskmt {

/// Binary layout (little-endian):
///   magic "DSKMTCKP", u32 version, u32 scalar bytes,
///   config, schedule, progress, preprocessing hashes,
///   u32 tensor count, then per tensor: name, u32 rows, u32 cols, values,
///   u32 provenance count, then per record: corpus, u32 epochs, timestamp,
///   32-byte SHA-256 of everything before it.
/// Strings are u32 length + bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws CorruptionError on checksum failure or truncation, FormatError on a
/// foreign magic or unsupported version.
Checkpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Lowercase hex of the trailing checksum; identifies a checkpoint.
std::string checkpoint_hash(const Checkpoint& ckpt);
std::string checkpoint_file_hash(const std::filesystem::path& path);

/// SHA-256 over config and parameter values only, so it ignores provenance
/// timestamps.
std::string params_hash(const Checkpoint& ckpt);

}  // namespace deskmt
