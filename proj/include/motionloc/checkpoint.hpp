#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "motionloc/training.hpp"

namespace motionloc {

class CheckpointError : public std::runtime_error {
public:
    enum class Kind { io, corrupt, version };

    CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Single-file container:
///
///   "MLOCCKPT" | u32 format_version | u64 header bytes | JSON header
///   | u32 array count | arrays... | "MLOCEND!"
///
/// The JSON header holds the architecture, training config, step, restart
/// records and loss history. Each array is u32 name length, name, u32 rank,
/// u32 dims, u8 trainable flag, then little-endian float32 values.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace motionloc
