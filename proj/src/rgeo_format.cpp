#include "repgeo/rgeo_format.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

namespace repgeo {
namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
constexpr bool kLittle = std::endian::native == std::endian::little;

template <typename T>
T byteswap_value(T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  std::memcpy(&v, b, sizeof(T));
  return v;
}

void put_u64(unsigned char* dst, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) dst[i] = static_cast<unsigned char>(v >> (8 * i));
}

std::uint64_t get_u64(const unsigned char* src) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(src[i]) << (8 * i);
  return v;
}

std::array<unsigned char, kRgeoHeaderBytes> encode_header(const RgeoHeader& h) {
  std::array<unsigned char, kRgeoHeaderBytes> out{};
  std::memcpy(out.data(), kRgeoMagic, 4);
  out[4] = h.version;
  out[5] = h.dtype;
  put_u64(out.data() + 8, h.rows);
  put_u64(out.data() + 16, h.cols);
  return out;
}

void write_atomic(const fs::path& path, const std::function<void(std::ofstream&)>& body) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io, "cannot open " + tmp.string() + " for writing");
    body(out);
    out.flush();
    if (!out) fail(Errc::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(Errc::io, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

template <typename T>
void write_values(std::ofstream& out, const T* data, std::size_t count) {
  if constexpr (kLittle) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  } else {
    std::vector<T> buf(data, data + count);
    for (auto& v : buf) v = byteswap_value(v);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(T)));
  }
}

template <typename T>
void read_values(std::ifstream& in, T* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if constexpr (!kLittle) {
    for (std::size_t i = 0; i < count; ++i) data[i] = byteswap_value(data[i]);
  }
}

struct OpenedPayload {
  std::ifstream in;
  RgeoHeader header;
};

OpenedPayload open_payload(const fs::path& path, std::uint8_t want_dtype) {
  OpenedPayload p;
  p.header = read_rgeo_header(path);
  if (p.header.dtype != want_dtype) {
    fail(Errc::bad_dtype, path.string() + ": dtype code " + std::to_string(p.header.dtype) + ", expected " +
                              std::to_string(want_dtype));
  }
  const std::uint64_t expected = kRgeoHeaderBytes + p.header.payload_bytes();
  const std::uint64_t actual = fs::file_size(path);
  if (actual < expected) {
    fail(Errc::truncated, path.string() + ": truncated payload, expected " + std::to_string(expected) +
                              " bytes, got " + std::to_string(actual));
  }
  if (actual > expected) {
    fail(Errc::truncated, path.string() + ": size mismatch, expected " + std::to_string(expected) +
                              " bytes, got " + std::to_string(actual));
  }
  p.in.open(path, std::ios::binary);
  if (!p.in) fail(Errc::io, "cannot open " + path.string());
  p.in.seekg(static_cast<std::streamoff>(kRgeoHeaderBytes));
  return p;
}

}  // namespace

RgeoHeader parse_rgeo_header(const unsigned char* bytes, std::size_t size) {
  if (size < kRgeoHeaderBytes) {
    fail(Errc::truncated, "truncated header, expected " + std::to_string(kRgeoHeaderBytes) + " bytes, got " +
                              std::to_string(size));
  }
  if (std::memcmp(bytes, kRgeoMagic, 4) != 0) fail(Errc::bad_magic, "bad magic");
  RgeoHeader h;
  h.version = bytes[4];
  if (h.version != kRgeoVersion) {
    fail(Errc::version_mismatch, "version mismatch: file has " + std::to_string(h.version) + ", reader supports " +
                                     std::to_string(kRgeoVersion));
  }
  h.dtype = bytes[5];
  if (h.dtype != kDtypeF32 && h.dtype != kDtypeF64) {
    fail(Errc::bad_dtype, "unknown dtype code " + std::to_string(h.dtype));
  }
  for (std::size_t i : {std::size_t{6}, std::size_t{7}}) {
    if (bytes[i] != 0) fail(Errc::version_mismatch, "nonzero reserved header byte " + std::to_string(i));
  }
  for (std::size_t i = 24; i < kRgeoHeaderBytes; ++i) {
    if (bytes[i] != 0) fail(Errc::version_mismatch, "nonzero reserved header byte " + std::to_string(i));
  }
  h.rows = get_u64(bytes + 8);
  h.cols = get_u64(bytes + 16);
  return h;
}

RgeoHeader read_rgeo_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  std::array<unsigned char, kRgeoHeaderBytes> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), kRgeoHeaderBytes);
  try {
    return parse_rgeo_header(buf.data(), static_cast<std::size_t>(in.gcount()));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_rgeo_f32(const fs::path& path, const FloatRows& rows) {
  RgeoHeader h{kRgeoVersion, kDtypeF32, static_cast<std::uint64_t>(rows.rows()),
               static_cast<std::uint64_t>(rows.cols())};
  write_atomic(path, [&](std::ofstream& out) {
    const auto hdr = encode_header(h);
    out.write(reinterpret_cast<const char*>(hdr.data()), hdr.size());
    write_values(out, rows.data(), static_cast<std::size_t>(rows.size()));
  });
}

FloatRows read_rgeo_f32(const fs::path& path) {
  auto p = open_payload(path, kDtypeF32);
  FloatRows rows(static_cast<Eigen::Index>(p.header.rows), static_cast<Eigen::Index>(p.header.cols));
  read_values(p.in, rows.data(), static_cast<std::size_t>(rows.size()));
  if (!p.in) fail(Errc::truncated, path.string() + ": short read");
  return rows;
}

void write_rgeo_f64(const fs::path& path, const Matrix& m) {
  RgeoHeader h{kRgeoVersion, kDtypeF64, static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  write_atomic(path, [&](std::ofstream& out) {
    const auto hdr = encode_header(h);
    out.write(reinterpret_cast<const char*>(hdr.data()), hdr.size());
    write_values(out, rm.data(), static_cast<std::size_t>(rm.size()));
  });
}

Matrix read_rgeo_f64(const fs::path& path) {
  auto p = open_payload(path, kDtypeF64);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
      static_cast<Eigen::Index>(p.header.rows), static_cast<Eigen::Index>(p.header.cols));
  read_values(p.in, rm.data(), static_cast<std::size_t>(rm.size()));
  if (!p.in) fail(Errc::truncated, path.string() + ": short read");
  return rm;
}

void for_each_row_block(const fs::path& path, std::size_t block_rows,
                        const std::function<void(const FloatRows&, std::uint64_t)>& fn) {
  if (block_rows == 0) fail(Errc::invalid_argument, "block_rows must be positive");
  auto p = open_payload(path, kDtypeF32);
  FloatRows block;
  for (std::uint64_t first = 0; first < p.header.rows; first += block_rows) {
    const std::uint64_t count = std::min<std::uint64_t>(block_rows, p.header.rows - first);
    block.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(p.header.cols));
    read_values(p.in, block.data(), static_cast<std::size_t>(block.size()));
    if (!p.in) fail(Errc::truncated, path.string() + ": short read at row " + std::to_string(first));
    fn(block, first);
  }
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  write_atomic(path, [&](std::ofstream& out) { out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); });
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace repgeo
