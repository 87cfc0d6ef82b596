#pragma once

// Low-level RGEO container: a 64-byte little-endian header followed by a
// row-major payload.
//
//   bytes 0-3   magic "RGEO"
//   byte  4     format version (1)
//   byte  5     dtype code (1 = f32, 2 = f64)
//   bytes 6-7   reserved, zero
//   bytes 8-15  row count n, u64
//   bytes 16-23 column count d, u64
//   bytes 24-63 reserved, zero
//
// Representation files always use f32. The f64 code is used for derived
// arrays (subspace bases, axes, affine maps) where single precision would
// perturb the operators.

#include "repgeo/common.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

namespace repgeo {

inline constexpr char kRgeoMagic[4] = {'R', 'G', 'E', 'O'};
inline constexpr std::uint8_t kRgeoVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;
inline constexpr std::uint8_t kDtypeF64 = 2;
inline constexpr std::size_t kRgeoHeaderBytes = 64;

struct RgeoHeader {
  std::uint8_t version = kRgeoVersion;
  std::uint8_t dtype = kDtypeF32;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;

  std::uint64_t element_bytes() const { return dtype == kDtypeF64 ? 8 : 4; }
  std::uint64_t payload_bytes() const { return rows * cols * element_bytes(); }
};

// Parses and validates the header bytes; throws bad_magic / version_mismatch / bad_dtype.
RgeoHeader parse_rgeo_header(const unsigned char* bytes, std::size_t size);
RgeoHeader read_rgeo_header(const std::filesystem::path& path);

void write_rgeo_f32(const std::filesystem::path& path, const FloatRows& rows);
FloatRows read_rgeo_f32(const std::filesystem::path& path);

// Row-major f64 array. The in-memory Matrix is column-major; element (i, j) is
// stored at offset i * cols + j regardless.
void write_rgeo_f64(const std::filesystem::path& path, const Matrix& m);
Matrix read_rgeo_f64(const std::filesystem::path& path);

// Streams an f32 file in blocks of at most block_rows rows without loading the
// whole payload. The callback receives the block and the index of its first row.
void for_each_row_block(const std::filesystem::path& path, std::size_t block_rows,
                        const std::function<void(const FloatRows&, std::uint64_t)>& fn);

// Writes to a temporary sibling and renames it over the destination.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace repgeo
