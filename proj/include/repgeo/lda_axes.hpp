#pragma once

#include "repgeo/common.hpp"
#include "repgeo/repr_store.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace repgeo {

struct LabeledSet {
  ReprMatrix x;
  std::vector<int> labels;  // one class id per row, indexing class_names
  std::vector<std::string> class_names;

  // >= 2 classes, every class has >= 2 rows, labels in range.
  void validate() const;
};

// One class per input matrix, named by the matrix's language (or its index
// when the matrix carries no rows).
LabeledSet label_by_source(std::span<const ReprMatrix> parts, std::span<const std::string> names = {});

// Class = position / bucket_size, named "pos[lo-hi]".
LabeledSet bucket_positions(const ReprMatrix& x, int bucket_size = 16);

// Keeps rows whose tag set intersects tag_subset in exactly one tag; rows
// matching several requested tags are dropped. `dropped` receives the count.
LabeledSet label_by_pos_tag(const ReprMatrix& x, std::span<const std::string> tag_subset,
                            std::size_t* dropped = nullptr);

struct LdaAxes {
  Matrix w;  // d x m, unit columns ordered by decreasing eigenvalue
  Vector eigenvalues;
  std::vector<std::string> class_names;
  int fitted_layer = 0;
  double shrinkage = 0.0;  // absolute epsilon added to the within-class scatter

  Eigen::Index dim() const { return w.rows(); }
  Eigen::Index count() const { return w.cols(); }
};

struct ClassScatter {
  Matrix between;  // sum_c n_c (mu_c - mu)(mu_c - mu)^T
  Matrix within;   // sum_c sum_{x in c} (x - mu_c)(x - mu_c)^T
  Matrix class_means;  // classes x d
  std::vector<std::size_t> class_counts;
  Vector mean;
};

ClassScatter class_scatter(const LabeledSet& s);

// epsilon = 1e-4 * trace(S_W) / d
inline constexpr double kDefaultShrinkage = 1e-4;
double default_shrinkage(const Matrix& within);

// Solves S_B w = lambda (S_W + eps I) w through the Cholesky factor of
// S_W + eps I and returns the top (classes - 1) directions. `shrinkage` is the
// absolute eps; nullopt selects default_shrinkage.
LdaAxes fit_lda(const LabeledSet& s, std::optional<double> shrinkage = std::nullopt);

// Gram-Schmidt in the given column order (with one reorthogonalization pass).
// Throws rank_deficient naming the first dependent column.
Matrix orthonormalize_axes(const Eigen::Ref<const Matrix>& axes);

struct CoordinateTable {
  std::vector<RowMeta> meta;
  Matrix coords;  // n x m
};

// (rows - origin) W_ortho
CoordinateTable project_axes(const LdaAxes& a, const ReprMatrix& x, const Eigen::Ref<const Vector>& origin);

// Between-class over within-class variance of projected coordinates along one
// direction (ratio of per-row averages).
double separation_ratio(const LabeledSet& s, const Eigen::Ref<const Vector>& direction);

void write_lda_axes(const LdaAxes& a, const std::filesystem::path& path);
LdaAxes read_lda_axes(const std::filesystem::path& path);

}  // namespace repgeo
