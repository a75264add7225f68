#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "wcs/image.hpp"
#include "wcs/sampling.hpp"

namespace wcs {

using Bytes = std::vector<std::uint8_t>;

/// Binary PGM (P5, maxval 255). Intensities are divided by 255 on ingest.
Image decode_pgm(std::span<const std::uint8_t> bytes);
/// Multiplies by 255, rounds half away from zero and clamps to [0, 255].
Bytes encode_pgm(const Image& image);

Image read_image(const std::filesystem::path& path);
void write_image(const Image& image, const std::filesystem::path& path);

/// WCS1 container, all integers little-endian:
///   "WCS1" | version u16 | H u32 | W u32 | n u16 | l u8 | rate num u32 | rate den u32 |
///   seed u64 | subband count u8 | M_s u32 x count | flags u8 | payload
/// flags: bit0 rows orthonormalized, bit1 degenerate allocation fallback.
/// Payload: blocks row-major, subbands canonical, binary32 little-endian.
inline constexpr std::uint16_t kBitstreamVersion = 1;

std::size_t bitstream_header_size(int levels);

Bytes encode(const MeasurementSet& measurements, bool rows_orthonormalized = true);
MeasurementSet decode(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace wcs
