#include "repgeo/moments.hpp"

#include "repgeo/rgeo_format.hpp"

#include <algorithm>
#include <string>

namespace repgeo {

namespace {

constexpr Eigen::Index kBlockRows = 4096;

}  // namespace

MomentAccumulator::MomentAccumulator(Eigen::Index dim) : mean_(Vector::Zero(dim)), scatter_(Matrix::Zero(dim, dim)) {}

Matrix MomentAccumulator::covariance() const {
  if (count_ < 2) fail(Errc::invalid_argument, "covariance needs at least 2 rows, have " + std::to_string(count_));
  return scatter_ / static_cast<double>(count_ - 1);
}

void MomentAccumulator::merge_block(std::uint64_t n, const Vector& block_mean, const Matrix& block_scatter) {
  if (n == 0) return;
  if (count_ == 0) {
    count_ = n;
    mean_ = block_mean;
    scatter_ = block_scatter;
    return;
  }
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(n);
  const double total = na + nb;
  const Vector delta = block_mean - mean_;
  mean_ += delta * (nb / total);
  scatter_ += block_scatter;
  scatter_.noalias() += (na * nb / total) * delta * delta.transpose();
  count_ += n;
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.count_ == 0) return;
  if (count_ > 0 || mean_.size() > 0) require_dims(other.dim(), dim(), "MomentAccumulator::merge");
  merge_block(other.count_, other.mean_, other.scatter_);
}

template <typename Rows>
void MomentAccumulator::add_block(const Rows& rows) {
  if (rows.rows() == 0) return;
  if (mean_.size() == 0 && count_ == 0) *this = MomentAccumulator(rows.cols());
  require_dims(rows.cols(), dim(), "accumulate");
  for (Eigen::Index first = 0; first < rows.rows(); first += kBlockRows) {
    const Eigen::Index n = std::min(kBlockRows, rows.rows() - first);
    Matrix block = rows.middleRows(first, n).template cast<double>();
    if (!block.allFinite()) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!block.row(i).allFinite()) {
          fail(Errc::non_finite, "non-finite input row " + std::to_string(count_ + static_cast<std::uint64_t>(i)));
        }
      }
    }
    const Vector block_mean = block.colwise().mean().transpose();
    block.rowwise() -= block_mean.transpose();
    Matrix lower = Matrix::Zero(dim(), dim());
    lower.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
    const Matrix full = lower.selfadjointView<Eigen::Lower>();
    merge_block(static_cast<std::uint64_t>(n), block_mean, full);
  }
}

void MomentAccumulator::push(const Eigen::Ref<const Vector>& row) {
  if (mean_.size() == 0 && count_ == 0) *this = MomentAccumulator(row.size());
  require_dims(row.size(), dim(), "accumulate");
  if (!row.allFinite()) fail(Errc::non_finite, "non-finite input row " + std::to_string(count_));
  // Welford single-row update.
  ++count_;
  const Vector delta = row - mean_;
  const double n = static_cast<double>(count_);
  mean_ += delta / n;
  scatter_.noalias() += ((n - 1.0) / n) * delta * delta.transpose();
}

void MomentAccumulator::add_rows(const Eigen::Ref<const Matrix>& rows) { add_block(rows); }
void MomentAccumulator::add_rows(const Eigen::Ref<const FloatRows>& rows) { add_block(rows); }

MomentAccumulator MomentAccumulator::from_rows(const Eigen::Ref<const Matrix>& rows) {
  MomentAccumulator acc(rows.cols());
  acc.add_rows(rows);
  return acc;
}

MomentAccumulator MomentAccumulator::from_file(const std::filesystem::path& path) {
  const auto header = read_rgeo_header(path);
  MomentAccumulator acc(static_cast<Eigen::Index>(header.cols));
  for_each_row_block(path, kBlockRows, [&](const FloatRows& block, std::uint64_t) { acc.add_rows(block); });
  return acc;
}

MomentAccumulator accumulate(MomentAccumulator acc, const Eigen::Ref<const Matrix>& rows) {
  acc.add_rows(rows);
  return acc;
}

}  // namespace repgeo
