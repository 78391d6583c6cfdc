#pragma once

#include <cstdint>
#include <string>

#include "taas/optim.hpp"

namespace taas {

/// Single-file parameter snapshot: a line-oriented text manifest (format tag,
/// seed, parameter count, then one "param <name> <rows> <cols> <step_count>"
/// line per parameter) followed by the raw values as little-endian 64-bit
/// floats in manifest order. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ParameterSet& params,
                     std::uint64_t seed);

/// Loads values and step counts into an already-constructed ParameterSet.
/// The file must list exactly the same parameter names and shapes in the
/// same order; any mismatch is a config_error naming the offender. Returns
/// the seed recorded at save time.
std::uint64_t load_checkpoint(const std::string& path, ParameterSet& params);

}  // namespace taas
