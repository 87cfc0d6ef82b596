#pragma once

#include "repgeo/common.hpp"
#include "repgeo/moments.hpp"
#include "repgeo/repr_store.hpp"

#include <filesystem>
#include <span>
#include <string>

namespace repgeo {

// Affine subspace {mu + basis * c}: the language mean plus the top-k principal
// directions of the mean-centered representations.
struct AffineSubspace {
  Vector mu;
  Matrix basis;            // d x k, orthonormal columns, largest-magnitude entry positive
  Vector singular_values;  // k, nonincreasing
  double total_variance = 0.0;     // sum of all d squared singular values
  double captured_fraction = 0.0;  // sum of the kept squared singular values / total_variance
  std::string language;
  int layer = 0;

  Eigen::Index dim() const { return mu.size(); }
  Eigen::Index rank() const { return basis.cols(); }
};

// Smallest k such that the cumulative squared-singular-value fraction is
// >= fraction (compared in f64). Throws unreachable_fraction if no prefix of
// the spectrum reaches it.
Eigen::Index select_rank(std::span<const double> singular_values, double fraction);

AffineSubspace fit_subspace(const ReprMatrix& x, double variance_fraction);
AffineSubspace fit_subspace(const Eigen::Ref<const Matrix>& rows, double variance_fraction);
// Uses a streamed mean and scatter instead of the rows themselves.
AffineSubspace fit_subspace(const MomentAccumulator& moments, double variance_fraction);

// V V^T (x - mu) + mu
Vector project_onto(const AffineSubspace& s, const Eigen::Ref<const Vector>& x);
// Rows of `rows` are points.
Matrix project_onto_rows(const AffineSubspace& s, const Eigen::Ref<const Matrix>& rows);

// V_B V_B^T (x - target_mu) + target_mu
Vector project_shifted(const AffineSubspace& s_b, const Eigen::Ref<const Vector>& target_mu,
                       const Eigen::Ref<const Vector>& x);
Matrix project_shifted_rows(const AffineSubspace& s_b, const Eigen::Ref<const Vector>& target_mu,
                            const Eigen::Ref<const Matrix>& rows);

// x + (mu_tgt - mu_src)
Vector apply_shift(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& mu_src,
                   const Eigen::Ref<const Vector>& mu_tgt);
Matrix apply_shift_rows(const Eigen::Ref<const Matrix>& rows, const Eigen::Ref<const Vector>& mu_src,
                   const Eigen::Ref<const Vector>& mu_tgt);

enum class InterventionKind { shift, proj, shift_proj };

std::string to_string(InterventionKind kind);
InterventionKind parse_intervention_kind(const std::string& name);

// f(x) = W x + b
struct AffineMap {
  Matrix w;
  Vector b;
  std::string description;

  Vector apply(const Eigen::Ref<const Vector>& x) const;
  Matrix apply_rows(const Eigen::Ref<const Matrix>& rows) const;
};

//   shift       W = I,         b = mu_B - mu_A
//   proj        W = V_B V_B^T, b = (I - V_B V_B^T) mu_B
//   shift_proj  W = V_B V_B^T, b = mu_B - V_B V_B^T mu_A
AffineMap compose_intervention(InterventionKind kind, const AffineSubspace& s_b, const Eigen::Ref<const Vector>& mu_a,
                               const std::string& description = {});

void write_subspace(const AffineSubspace& s, const std::filesystem::path& path);
AffineSubspace read_subspace(const std::filesystem::path& path);

void write_affine_map(const AffineMap& m, const std::filesystem::path& path);
AffineMap read_affine_map(const std::filesystem::path& path);

}  // namespace repgeo
