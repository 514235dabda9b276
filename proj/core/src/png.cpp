#include "designbridge/png.hpp"

#include <zlib.h>

#include <stdexcept>
#include <string_view>

namespace designbridge::png {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, std::string_view type, std::span<const std::uint8_t> data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type.begin(), type.end());
  out.insert(out.end(), data.begin(), data.end());
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + type_at, static_cast<uInt>(4 + data.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

// raw: filter byte (0) + row bytes, per row
std::vector<std::uint8_t> encode(int width, int height, std::uint8_t bit_depth, std::uint8_t color_type,
                                 std::span<const Rgb> palette, const std::vector<std::uint8_t>& raw) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("png: empty image");
  std::vector<std::uint8_t> out{0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(width));
  put_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(bit_depth);
  ihdr.push_back(color_type);
  ihdr.push_back(0);  // deflate
  ihdr.push_back(0);  // adaptive filtering
  ihdr.push_back(0);  // no interlace
  put_chunk(out, "IHDR", ihdr);

  if (!palette.empty()) {
    std::vector<std::uint8_t> plte;
    for (const auto& c : palette) plte.insert(plte.end(), c.begin(), c.end());
    put_chunk(out, "PLTE", plte);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(bound);
  if (compress2(packed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw std::runtime_error("png: deflate failed");
  }
  packed.resize(bound);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", {});
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_bilevel(int width, int height, std::span<const std::uint8_t> packed_rows) {
  const std::size_t stride = static_cast<std::size_t>(width + 7) / 8;
  if (packed_rows.size() != stride * static_cast<std::size_t>(height)) {
    throw std::invalid_argument("png: packed size mismatch");
  }
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    auto row = packed_rows.subspan(static_cast<std::size_t>(y) * stride, stride);
    raw.insert(raw.end(), row.begin(), row.end());
  }
  return encode(width, height, 1, 0, {}, raw);
}

std::vector<std::uint8_t> encode_indexed(int width, int height, std::span<const Rgb> palette,
                                         std::span<const std::uint8_t> indices) {
  if (palette.empty() || palette.size() > 256) throw std::invalid_argument("png: palette size");
  if (indices.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw std::invalid_argument("png: index count mismatch");
  }
  std::vector<std::uint8_t> raw;
  raw.reserve((static_cast<std::size_t>(width) + 1) * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    auto row = indices.subspan(static_cast<std::size_t>(y) * static_cast<std::size_t>(width),
                               static_cast<std::size_t>(width));
    raw.insert(raw.end(), row.begin(), row.end());
  }
  return encode(width, height, 8, 3, palette, raw);
}

std::vector<std::uint8_t> encode_solid(int width, int height, Rgb color) {
  const std::size_t stride = static_cast<std::size_t>(width + 7) / 8;
  std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(height), 0);
  const std::array<Rgb, 1> palette{color};
  return encode(width, height, 1, 3, palette, raw);
}

}  // namespace designbridge::png
