#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace repgeo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Representation payloads are stored as f32, row-major, one token per row.
using FloatRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Errc {
  invalid_argument,
  dimension_mismatch,
  io,
  bad_magic,
  version_mismatch,
  bad_dtype,
  truncated,
  non_finite,
  metadata_mismatch,
  not_positive_definite,
  rank_deficient,
  no_separation,
  unreachable_fraction,
  not_found,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require_dims(Eigen::Index got, Eigen::Index want, std::string_view what) {
  if (got != want) {
    fail(Errc::dimension_mismatch, std::string(what) + ": expected dimension " + std::to_string(want) +
                                       ", got " + std::to_string(got));
  }
}

// Flips each column so that its largest-magnitude entry is positive (first index wins ties).
void canonicalize_signs(Matrix& columns);

// "%.17g": parses back to the identical double.
std::string format_double(double v);

// max |a - b| / max(|b|_max, tiny)
double max_rel_diff(const Matrix& a, const Matrix& b);

}  // namespace repgeo
