#pragma once

#include "repgeo/common.hpp"
#include "repgeo/moments.hpp"
#include "repgeo/repr_store.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace repgeo {

struct SpdMatrix {
  Matrix k;
  double ridge_applied = 0.0;  // epsilon added to the diagonal
  std::string source;

  Eigen::Index dim() const { return k.rows(); }
};

struct Covariance {
  Vector mu;
  SpdMatrix k;
};

// Relative ridge: epsilon = relative * trace(K) / d.
inline constexpr double kDefaultRidge = 1e-6;

// centered^T centered / (n - 1), no ridge.
Covariance covariance_of(const ReprMatrix& x);
Covariance covariance_of(const Eigen::Ref<const Matrix>& rows);
Covariance covariance_of(const MomentAccumulator& moments);

SpdMatrix with_ridge(SpdMatrix k, double relative = kDefaultRidge);

// sqrt(sum_i ln^2 lambda_i) over the eigenvalues of A^{-1} B, computed from the
// Cholesky factor L of A and the symmetric matrix L^{-1} B L^{-T}. Inputs are
// used as given; ridge them first if they may be singular.
double spd_distance(const SpdMatrix& a, const SpdMatrix& b);
double spd_distance(const Matrix& a, const Matrix& b);

// Haar-distributed orthogonal matrix from the QR factorization of a Gaussian matrix.
Matrix random_orthogonal(Eigen::Index d, std::uint64_t seed);

// Q G Q^T where Q is random orthogonal and G rotates each disjoint pair of
// consecutive columns (0,1), (2,3), ... of Q by +theta or -theta (random sign
// per plane). For odd d the last column is left fixed.
Matrix random_plane_rotation(Eigen::Index d, double theta_deg, std::uint64_t seed);

// R K R^T for the rotation above.
Matrix rotated_copy(const Matrix& k, double theta_deg, std::uint64_t seed);
double rotated_distance(const SpdMatrix& k, double theta_deg, std::uint64_t seed);

// Multiplies or divides the variance along each principal axis of K by gamma^2
// (random choice per axis).
Matrix scaled_copy(const Matrix& k, double gamma, std::uint64_t seed);
double scaled_distance(const SpdMatrix& k, double gamma, std::uint64_t seed);

enum class CalibrationKind { rotation, scaling };

std::string to_string(CalibrationKind kind);
CalibrationKind parse_calibration_kind(const std::string& name);

struct CalibrationCurve {
  CalibrationKind kind = CalibrationKind::rotation;
  std::vector<double> grid;
  std::vector<double> mean_distance_raw;
  std::vector<double> mean_distance;  // isotonic cleanup of the raw means
  int num_seeds = 0;
  std::uint64_t base_seed = 0;
  int layer = 0;

  std::size_t raw_violations() const;
};

// Rotation: theta = 0, 1, ..., 90 degrees. Scaling: gamma = 1.00, 1.01, ..., 4.00.
std::vector<double> default_grid(CalibrationKind kind);

// Seed of one (matrix, grid point, replicate) cell.
std::uint64_t calibration_cell_seed(std::uint64_t base_seed, std::size_t matrix, std::size_t grid_index,
                                    std::size_t replicate);

// Mean rotated/scaled self-distance over every matrix and num_seeds replicates
// at each grid point. Independent of thread count.
CalibrationCurve build_calibration_curve(std::span<const SpdMatrix> ks, CalibrationKind kind, int num_seeds,
                                         std::uint64_t base_seed = 0, int layer = 0,
                                         std::optional<std::vector<double>> grid = std::nullopt,
                                         std::size_t threads = 0);

struct CalibrationLookup {
  double value = 0.0;
  std::size_t index = 0;
  bool saturated = false;
};

// Lowest grid value whose cleaned mean distance is >= distance; the top grid
// value flagged saturated when the distance exceeds the whole curve.
CalibrationLookup invert_calibration(const CalibrationCurve& c, double distance);

// Pool-adjacent-violators fit of a nondecreasing sequence (unit weights when
// weights is empty).
std::vector<double> isotonic_nondecreasing(std::span<const double> y, std::span<const double> weights = {});

// Symmetric, zero diagonal.
Matrix pairwise_distances(std::span<const SpdMatrix> ks, std::size_t threads = 0);

void write_calibration_curve(const CalibrationCurve& c, const std::filesystem::path& path);
CalibrationCurve read_calibration_curve(const std::filesystem::path& path);

void write_spd_matrix(const SpdMatrix& k, const std::filesystem::path& path);
SpdMatrix read_spd_matrix(const std::filesystem::path& path);

// CSV with a header row and a leading label column.
void write_labeled_matrix_csv(const Matrix& m, std::span<const std::string> labels,
                              const std::filesystem::path& path);
Matrix read_labeled_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* labels = nullptr);

}  // namespace repgeo
