#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gridshield/learning.hpp"
#include "gridshield/reachability.hpp"
#include "gridshield/safety_game.hpp"

namespace gridshield {

using Bytes = std::vector<std::uint8_t>;

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// Shield file: "SHLD", version, partition header, action names, oob byte,
/// one allowed-action mask per cell, FNV-1a checksum of the masks.
Bytes encode_shield(const MostPermissiveStrategy& strategy);
MostPermissiveStrategy decode_shield(std::span<const std::uint8_t> bytes);

/// Transition cache: "HSTS", version, partition header, action names,
/// scheme, config digest, then per (cell, action) a LEB128 count and
/// LEB128 deltas of the sorted successor ordinals (out of bounds written as
/// cell_count), FNV-1a checksum of the body.
struct TransitionCache {
  TransitionSystem ts;
  SupportScheme scheme;
  std::uint64_t digest = 0;
};
Bytes encode_transitions(const TransitionSystem& ts, const SupportScheme& scheme, std::uint64_t digest);
TransitionCache decode_transitions(std::span<const std::uint8_t> bytes);

/// Q-table: "HSQT", version, partition header, action names, values as
/// 64-bit floats in cell x action order, 32-bit visit counts, checksum.
Bytes encode_qtable(const QTable& q);
QTable decode_qtable(std::span<const std::uint8_t> bytes);

/// Partition and action header of any of the files above, without the body.
struct FileHeader {
  char magic[4]{};
  std::uint16_t version = 0;
  PartitionSpec spec;
  std::vector<Action> actions;
};
FileHeader peek_header(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace gridshield
