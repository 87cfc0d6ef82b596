#pragma once

#include "repgeo/common.hpp"

#include <cstdint>
#include <filesystem>

namespace repgeo {

// Running mean and scatter sum((x - mean)(x - mean)^T).
//
// Rows are absorbed in blocks: each block's own mean and centered scatter are
// computed with a symmetric rank-k update and then combined with the running
// state by the pairwise (Chan et al.) merge, which is the same rule used to
// join shards accumulated on different threads.
class MomentAccumulator {
 public:
  MomentAccumulator() = default;
  explicit MomentAccumulator(Eigen::Index dim);

  Eigen::Index dim() const { return mean_.size(); }
  std::uint64_t count() const { return count_; }
  const Vector& mean() const { return mean_; }
  const Matrix& scatter() const { return scatter_; }

  // scatter / (count - 1); requires count >= 2.
  Matrix covariance() const;

  void push(const Eigen::Ref<const Vector>& row);
  void add_rows(const Eigen::Ref<const Matrix>& rows);
  void add_rows(const Eigen::Ref<const FloatRows>& rows);

  void merge(const MomentAccumulator& other);

  static MomentAccumulator from_rows(const Eigen::Ref<const Matrix>& rows);

  // Streams an RGEO f32 file without loading it whole.
  static MomentAccumulator from_file(const std::filesystem::path& path);

 private:
  void merge_block(std::uint64_t n, const Vector& block_mean, const Matrix& block_scatter);
  template <typename Rows>
  void add_block(const Rows& rows);

  std::uint64_t count_ = 0;
  Vector mean_;
  Matrix scatter_;
};

MomentAccumulator accumulate(MomentAccumulator acc, const Eigen::Ref<const Matrix>& rows);

}  // namespace repgeo
