#pragma once

#include "repgeo/common.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace repgeo {

inline constexpr int kMaxLayer = 12;
inline constexpr int kMaxPosition = 511;

struct RowMeta {
  std::string language;
  int layer = 0;
  int position = 0;
  std::int64_t token_id = 0;
  std::vector<std::string> pos_tags;

  bool operator==(const RowMeta&) const = default;
};

// An n x d block of token representations plus one metadata record per row.
struct ReprMatrix {
  FloatRows data;
  std::vector<RowMeta> meta;
  bool has_pos_tags = false;
  std::string source;
  std::optional<std::uint64_t> seed;

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index dim() const { return data.cols(); }

  // Throws metadata_mismatch / invalid_argument / non_finite.
  void validate() const;

  // Rows as f64 (n x d).
  Matrix as_double() const { return data.cast<double>(); }
};

// Builds a matrix whose rows all share one language and layer; positions and
// token ids default to row order when empty.
ReprMatrix make_repr(FloatRows data, const std::string& language, int layer, std::vector<int> positions = {},
                     std::vector<std::int64_t> token_ids = {});

// `<path>.meta.json`
std::filesystem::path sidecar_path(const std::filesystem::path& path);

// Writes the payload and the JSON sidecar. All rows must share one language
// and layer, since the sidecar records them once.
void write_repr_matrix(const ReprMatrix& m, const std::filesystem::path& path);
ReprMatrix read_repr_matrix(const std::filesystem::path& path);

// Uniform sample without replacement, deterministic in seed. The seed is
// recorded in the result.
ReprMatrix sample_rows(const ReprMatrix& m, std::size_t count, std::uint64_t seed);

// Indices drawn by sample_rows, in output order.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed);

ReprMatrix select_rows(const ReprMatrix& m, std::span<const std::size_t> indices);

ReprMatrix concat_rows(std::span<const ReprMatrix> parts);

}  // namespace repgeo
