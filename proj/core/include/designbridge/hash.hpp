#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace designbridge {

/// Lowercase hex SHA-256 of a byte range.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// 64-bit FNV-1a, used for cheap deterministic seeding only.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace designbridge
