#pragma once

#include "repgeo/common.hpp"
#include "repgeo/lda_axes.hpp"
#include "repgeo/repr_store.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace repgeo {

enum class AxisRole { language_sensitive, position, pos, custom };

std::string to_string(AxisRole role);
AxisRole parse_axis_role(const std::string& name);

struct AxisSource {
  std::string axes_file;  // provenance label; empty for in-memory axes
  Eigen::Index column = 0;
  AxisRole role = AxisRole::custom;
  Vector direction;
};

AxisSource axis_from(const LdaAxes& axes, Eigen::Index column, AxisRole role, const std::string& axes_file = {});

struct FrameRow {
  std::string language;
  std::string family;
  int layer = 0;
  int position = 0;
  std::int64_t token_id = 0;
  std::vector<std::string> tags;

  bool operator==(const FrameRow&) const = default;
};

struct ProjectionFrame {
  std::vector<AxisSource> sources;
  Vector origin;
  Matrix basis;  // d x m, orthonormalized sources in listed order
  std::vector<FrameRow> rows;
  Matrix coords;  // rows x m
  // Mean per-direction variance of the projected inputs (trace(cov) / d); the
  // yardstick for "low variance" axes.
  double reference_variance = 0.0;
};

// Orthonormalizes the listed axes, then projects (rows - origin). The origin
// defaults to the mean of x.
ProjectionFrame build_frame(std::span<const AxisSource> sources, const ReprMatrix& x,
                            std::optional<Vector> origin = std::nullopt);

enum class SensitivityLabel { neutral_low_var, neutral_high_var, sensitive_var_asymmetric, sensitive_mean_shift };

std::string to_string(SensitivityLabel label);

struct ClassMoments {
  std::string name;
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // population
};

struct DiagnosticThresholds {
  double mean_gap = 0.5;        // in pooled standard deviations
  double variance_ratio = 4.0;  // largest over smallest class variance
  double low_variance = 0.25;   // pooled variance relative to reference_variance
};

struct AxisDiagnostics {
  std::size_t axis = 0;
  AxisRole role = AxisRole::custom;
  std::vector<ClassMoments> classes;  // sorted by class name
  double between_within_ratio = 0.0;
  double max_mean_gap = 0.0;
  double variance_ratio = 1.0;
  SensitivityLabel label = SensitivityLabel::neutral_high_var;
};

// class_field: language, family, layer, position, token_id or tags (rows
// grouped by their '|'-joined tag set).
std::vector<AxisDiagnostics> axis_diagnostics(const ProjectionFrame& frame, const std::string& class_field,
                                              const DiagnosticThresholds& thresholds = {});

enum class FrameFormat { csv, json };

FrameFormat frame_format_for(const std::filesystem::path& path);

// Writes at most max_rows rows (a seeded uniform subsample when the frame is
// larger); coordinates are printed with 17 significant digits.
void export_frame(const ProjectionFrame& frame, const std::filesystem::path& path, FrameFormat format,
                  std::optional<std::size_t> max_rows = std::nullopt, std::uint64_t seed = 0);

// Restores rows, coordinates and axis roles (directions are not stored).
ProjectionFrame import_frame(const std::filesystem::path& path, FrameFormat format);

// Family label from the bundled ISO-639 table; "Unknown" when absent.
std::string language_family(const std::string& iso_code);
const std::vector<std::pair<std::string, std::string>>& language_family_table();

}  // namespace repgeo
