#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace designbridge::png {

using Rgb = std::array<std::uint8_t, 3>;

/// 1-bit grayscale PNG from MSB-first packed rows of stride (width + 7) / 8.
std::vector<std::uint8_t> encode_bilevel(int width, int height, std::span<const std::uint8_t> packed_rows);

/// 8-bit indexed PNG; one palette index per pixel, row-major.
std::vector<std::uint8_t> encode_indexed(int width, int height, std::span<const Rgb> palette,
                                         std::span<const std::uint8_t> indices);

/// Single-color image encoded as a 1-bit indexed PNG (small and fast to build).
std::vector<std::uint8_t> encode_solid(int width, int height, Rgb color);

}  // namespace designbridge::png
