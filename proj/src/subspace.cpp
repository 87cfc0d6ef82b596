#include "repgeo/subspace.hpp"

#include "bundle.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace repgeo {
namespace fs = std::filesystem;
using nlohmann::json;

Eigen::Index select_rank(std::span<const double> singular_values, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    fail(Errc::invalid_argument, "variance fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  std::vector<double> cumulative(singular_values.size());
  double running = 0.0;
  for (std::size_t i = 0; i < singular_values.size(); ++i) {
    running += singular_values[i] * singular_values[i];
    cumulative[i] = running;
  }
  const double total = running;
  if (!(total > 0.0)) fail(Errc::invalid_argument, "degenerate input: total variance is zero");
  for (std::size_t i = 0; i < cumulative.size(); ++i) {
    if (cumulative[i] / total >= fraction) return static_cast<Eigen::Index>(i + 1);
  }
  fail(Errc::unreachable_fraction, "variance fraction " + std::to_string(fraction) +
                                       " is unreachable; achievable maximum is " +
                                       std::to_string(cumulative.back() / total));
}

AffineSubspace fit_subspace(const MomentAccumulator& moments, double variance_fraction) {
  if (moments.count() < 2) {
    fail(Errc::invalid_argument, "fit_subspace needs at least 2 rows, have " + std::to_string(moments.count()));
  }
  if (!(variance_fraction > 0.0 && variance_fraction <= 1.0)) {
    fail(Errc::invalid_argument, "variance fraction must lie in (0, 1], got " + std::to_string(variance_fraction));
  }
  const Eigen::Index d = moments.dim();
  // Squared singular values of the centered matrix are the eigenvalues of its scatter.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(moments.scatter());
  if (eig.info() != Eigen::Success) fail(Errc::invalid_argument, "eigensolver failed on scatter matrix");
  const Vector& ascending = eig.eigenvalues();
  const double top = ascending(d - 1);
  if (!(top > 0.0)) fail(Errc::invalid_argument, "degenerate input: all rows identical (total variance 0)");
  // Eigenvalues at rounding level relative to the largest are the null space.
  const double floor = top * static_cast<double>(d) * std::numeric_limits<double>::epsilon() * 16.0;

  std::vector<double> sv(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    const double lambda = ascending(d - 1 - i);
    sv[static_cast<std::size_t>(i)] = lambda > floor ? std::sqrt(lambda) : 0.0;
  }
  const Eigen::Index k = select_rank(sv, variance_fraction);

  AffineSubspace s;
  s.mu = moments.mean();
  s.basis.resize(d, k);
  s.singular_values.resize(k);
  double total = 0.0;
  for (double v : sv) total += v * v;
  double kept = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    s.basis.col(i) = eig.eigenvectors().col(d - 1 - i);
    s.singular_values(i) = sv[static_cast<std::size_t>(i)];
    kept += sv[static_cast<std::size_t>(i)] * sv[static_cast<std::size_t>(i)];
  }
  canonicalize_signs(s.basis);
  s.total_variance = total;
  s.captured_fraction = kept / total;
  return s;
}

AffineSubspace fit_subspace(const Eigen::Ref<const Matrix>& rows, double variance_fraction) {
  if (rows.rows() < 2) {
    fail(Errc::invalid_argument, "fit_subspace needs at least 2 rows, have " + std::to_string(rows.rows()));
  }
  return fit_subspace(MomentAccumulator::from_rows(rows), variance_fraction);
}

AffineSubspace fit_subspace(const ReprMatrix& x, double variance_fraction) {
  if (x.rows() < 2) fail(Errc::invalid_argument, "fit_subspace needs at least 2 rows, have " + std::to_string(x.rows()));
  MomentAccumulator acc(x.dim());
  acc.add_rows(x.data);
  AffineSubspace s = fit_subspace(acc, variance_fraction);
  if (!x.meta.empty()) {
    s.language = x.meta.front().language;
    s.layer = x.meta.front().layer;
  }
  return s;
}

Vector project_onto(const AffineSubspace& s, const Eigen::Ref<const Vector>& x) {
  return project_shifted(s, s.mu, x);
}

Matrix project_onto_rows(const AffineSubspace& s, const Eigen::Ref<const Matrix>& rows) {
  return project_shifted_rows(s, s.mu, rows);
}

Vector project_shifted(const AffineSubspace& s_b, const Eigen::Ref<const Vector>& target_mu,
                       const Eigen::Ref<const Vector>& x) {
  require_dims(x.size(), s_b.dim(), "project");
  require_dims(target_mu.size(), s_b.dim(), "project (target mean)");
  const Vector centered = x - target_mu;
  return s_b.basis * (s_b.basis.transpose() * centered) + target_mu;
}

Matrix project_shifted_rows(const AffineSubspace& s_b, const Eigen::Ref<const Vector>& target_mu,
                       const Eigen::Ref<const Matrix>& rows) {
  require_dims(rows.cols(), s_b.dim(), "project");
  require_dims(target_mu.size(), s_b.dim(), "project (target mean)");
  Matrix centered = rows.rowwise() - target_mu.transpose();
  Matrix out = (centered * s_b.basis) * s_b.basis.transpose();
  out.rowwise() += target_mu.transpose();
  return out;
}

Vector apply_shift(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& mu_src,
                   const Eigen::Ref<const Vector>& mu_tgt) {
  require_dims(mu_src.size(), x.size(), "apply_shift (source mean)");
  require_dims(mu_tgt.size(), x.size(), "apply_shift (target mean)");
  return x + (mu_tgt - mu_src);
}

Matrix apply_shift_rows(const Eigen::Ref<const Matrix>& rows, const Eigen::Ref<const Vector>& mu_src,
                   const Eigen::Ref<const Vector>& mu_tgt) {
  require_dims(mu_src.size(), rows.cols(), "apply_shift (source mean)");
  require_dims(mu_tgt.size(), rows.cols(), "apply_shift (target mean)");
  const RowVector delta = (mu_tgt - mu_src).transpose();
  return rows.rowwise() + delta;
}

std::string to_string(InterventionKind kind) {
  switch (kind) {
    case InterventionKind::shift: return "shift";
    case InterventionKind::proj: return "proj";
    case InterventionKind::shift_proj: return "shift_proj";
  }
  return "unknown";
}

InterventionKind parse_intervention_kind(const std::string& name) {
  if (name == "shift") return InterventionKind::shift;
  if (name == "proj") return InterventionKind::proj;
  if (name == "shift_proj" || name == "shift+proj") return InterventionKind::shift_proj;
  fail(Errc::invalid_argument, "unknown intervention kind '" + name + "' (expected shift, proj, shift_proj)");
}

Vector AffineMap::apply(const Eigen::Ref<const Vector>& x) const {
  require_dims(x.size(), w.cols(), "AffineMap::apply");
  return w * x + b;
}

Matrix AffineMap::apply_rows(const Eigen::Ref<const Matrix>& rows) const {
  require_dims(rows.cols(), w.cols(), "AffineMap::apply_rows");
  Matrix out = rows * w.transpose();
  out.rowwise() += b.transpose();
  return out;
}

AffineMap compose_intervention(InterventionKind kind, const AffineSubspace& s_b, const Eigen::Ref<const Vector>& mu_a,
                               const std::string& description) {
  const Eigen::Index d = s_b.dim();
  require_dims(mu_a.size(), d, "compose_intervention");
  AffineMap m;
  m.description = description.empty() ? to_string(kind) : description;
  const Matrix projector = s_b.basis * s_b.basis.transpose();
  switch (kind) {
    case InterventionKind::shift:
      m.w = Matrix::Identity(d, d);
      m.b = s_b.mu - mu_a;
      break;
    case InterventionKind::proj:
      m.w = projector;
      m.b = s_b.mu - projector * s_b.mu;
      break;
    case InterventionKind::shift_proj:
      m.w = projector;
      m.b = s_b.mu - projector * mu_a;
      break;
  }
  return m;
}

void write_subspace(const AffineSubspace& s, const fs::path& path) {
  detail::Bundle b;
  b.header = {{"language", s.language},
              {"layer", s.layer},
              {"d", s.dim()},
              {"k", s.rank()},
              {"captured_fraction", s.captured_fraction},
              {"total_variance", s.total_variance},
              {"basis_layout", "column-major"},
              {"sign_convention", "largest-magnitude entry of each basis column is positive"}};
  b.arrays["mu"] = s.mu.transpose();
  // k x d row-major is the d x k basis in column-major order.
  b.arrays["basis"] = s.basis.transpose();
  b.arrays["singular_values"] = s.singular_values.transpose();
  detail::write_bundle(path, "affine_subspace", b);
}

AffineSubspace read_subspace(const fs::path& path) {
  const auto b = detail::read_bundle(path, "affine_subspace");
  AffineSubspace s;
  s.language = detail::field<std::string>(b.header, "language", path);
  s.layer = detail::field<int>(b.header, "layer", path);
  s.captured_fraction = detail::field<double>(b.header, "captured_fraction", path);
  s.total_variance = detail::field<double>(b.header, "total_variance", path);
  const auto d = detail::field<Eigen::Index>(b.header, "d", path);
  const auto k = detail::field<Eigen::Index>(b.header, "k", path);
  const auto layout = detail::field<std::string>(b.header, "basis_layout", path);
  const Matrix& mu = detail::array(b, "mu", path);
  const Matrix& basis = detail::array(b, "basis", path);
  const Matrix& sv = detail::array(b, "singular_values", path);
  if (mu.size() != d || sv.size() != k || basis.size() != d * k) {
    fail(Errc::metadata_mismatch, path.string() + ": array shapes disagree with d=" + std::to_string(d) +
                                      ", k=" + std::to_string(k));
  }
  s.mu = mu.transpose();
  s.singular_values = sv.transpose();
  if (layout == "column-major") {
    s.basis = basis.transpose();
  } else if (layout == "row-major") {
    s.basis = basis;
  } else {
    fail(Errc::metadata_mismatch, path.string() + ": unknown basis_layout '" + layout + "'");
  }
  return s;
}

void write_affine_map(const AffineMap& m, const fs::path& path) {
  detail::Bundle b;
  b.header = {{"description", m.description}, {"d", m.w.rows()}};
  b.arrays["w"] = m.w;
  b.arrays["b"] = m.b.transpose();
  detail::write_bundle(path, "affine_map", b);
}

AffineMap read_affine_map(const fs::path& path) {
  const auto b = detail::read_bundle(path, "affine_map");
  AffineMap m;
  m.description = detail::field<std::string>(b.header, "description", path);
  const auto d = detail::field<Eigen::Index>(b.header, "d", path);
  m.w = detail::array(b, "w", path);
  m.b = detail::array(b, "b", path).transpose();
  if (m.w.rows() != d || m.w.cols() != d || m.b.size() != d) {
    fail(Errc::metadata_mismatch, path.string() + ": affine map shapes disagree with d=" + std::to_string(d));
  }
  return m;
}

}  // namespace repgeo
