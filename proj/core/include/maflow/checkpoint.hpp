#pragma once

// Binary checkpoint: "MAFLOW01", then little-endian u16 version, u8 n,
// u32 count and f64 period per real direction, f64 t, and the row-major f64
// samples of u.

#include <cstdint>
#include <filesystem>
#include <stdexcept>

#include "maflow/torus_geometry.hpp"

namespace maflow {

inline constexpr std::uint16_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  double t = 0.0;
  ScalarField u;
};

void write_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
/// Throws CheckpointError on bad magic, version, truncation or trailing bytes.
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// As above, and also rejects a grid that differs from `expected`.
Checkpoint read_checkpoint(const std::filesystem::path& path, const TorusDomain& expected);

}  // namespace maflow
