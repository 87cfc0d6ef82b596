#include "repgeo/common.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace repgeo {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::io: return "io";
    case Errc::bad_magic: return "bad_magic";
    case Errc::version_mismatch: return "version_mismatch";
    case Errc::bad_dtype: return "bad_dtype";
    case Errc::truncated: return "truncated";
    case Errc::non_finite: return "non_finite";
    case Errc::metadata_mismatch: return "metadata_mismatch";
    case Errc::not_positive_definite: return "not_positive_definite";
    case Errc::rank_deficient: return "rank_deficient";
    case Errc::no_separation: return "no_separation";
    case Errc::unreachable_fraction: return "unreachable_fraction";
    case Errc::not_found: return "not_found";
  }
  return "unknown";
}

void canonicalize_signs(Matrix& columns) {
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < columns.rows(); ++i) {
      const double a = std::abs(columns(i, j));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (columns.rows() > 0 && columns(best, j) < 0.0) columns.col(j) *= -1.0;
  }
}

std::string format_double(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

double max_rel_diff(const Matrix& a, const Matrix& b) {
  if (a.size() == 0 && b.size() == 0) return 0.0;
  const double scale = std::max(b.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace repgeo
