#include "repgeo/viz_export.hpp"

#include "repgeo/rgeo_format.hpp"

#include "../support/test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace repgeo;
using namespace repgeo::testing;

namespace {

AxisSource custom_axis(const Vector& v, AxisRole role = AxisRole::custom) {
  AxisSource s;
  s.direction = v;
  s.role = role;
  s.axes_file = "axes.json";
  return s;
}

// One-axis frame with two classes "a" and "b" holding the given coordinates.
ProjectionFrame two_class_frame(const std::vector<double>& a, const std::vector<double>& b, double reference = 1.0) {
  ProjectionFrame f;
  f.sources.push_back(custom_axis(Vector::Ones(1)));
  f.coords.resize(static_cast<Eigen::Index>(a.size() + b.size()), 1);
  Eigen::Index i = 0;
  for (double v : a) {
    f.rows.push_back({"a", "", 0, 0, 0, {}});
    f.coords(i++, 0) = v;
  }
  for (double v : b) {
    f.rows.push_back({"b", "", 0, 0, 0, {}});
    f.coords(i++, 0) = v;
  }
  f.reference_variance = reference;
  return f;
}

ReprMatrix tagged_rows(const Matrix& rows, const std::string& lang) {
  auto x = to_repr(rows, lang, 5);
  x.has_pos_tags = true;
  for (std::size_t i = 0; i < x.meta.size(); ++i) {
    x.meta[i].position = static_cast<int>(i);
    x.meta[i].token_id = 100 + static_cast<std::int64_t>(i);
    x.meta[i].pos_tags = i % 2 ? std::vector<std::string>{"NOUN", "PROPN"} : std::vector<std::string>{};
  }
  return x;
}

}  // namespace

TEST_CASE("frame shape, centering and orthonormal basis") {
  std::mt19937_64 gen(1);
  const auto x = tagged_rows(gaussian(50, 6, gen) * 2.0, "fr");
  std::vector<AxisSource> sources = {custom_axis(gaussian_vector(6, gen), AxisRole::language_sensitive),
                                     custom_axis(gaussian_vector(6, gen), AxisRole::position)};
  const auto f = build_frame(sources, x);
  CHECK(f.coords.rows() == 50);
  CHECK(f.coords.cols() == 2);
  CHECK(f.rows.size() == 50);
  CHECK(f.coords.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  CHECK((f.basis.transpose() * f.basis - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
  // First axis keeps its direction.
  CHECK(abs_cos(f.basis.col(0), sources[0].direction) == doctest::Approx(1.0));
  CHECK(f.rows[3].family == "Romance");
  CHECK(f.rows[3].tags == std::vector<std::string>{"NOUN", "PROPN"});
  CHECK(f.rows[3].token_id == 103);
  // Coordinates are the centered rows times the basis.
  const Matrix rows = x.as_double();
  const Matrix expected = (rows.rowwise() - rows.colwise().mean()) * f.basis;
  CHECK(max_rel_diff(f.coords, expected) < 1e-12);
  CHECK(f.reference_variance > 0.0);
}

TEST_CASE("frame with explicit origin and error cases") {
  std::mt19937_64 gen(2);
  const auto x = to_repr(gaussian(10, 3, gen), "en");
  std::vector<AxisSource> one = {custom_axis(Vector::Unit(3, 1))};
  const auto f = build_frame(one, x, Vector::Zero(3));
  for (Eigen::Index i = 0; i < 10; ++i) CHECK(f.coords(i, 0) == doctest::Approx(static_cast<double>(x.data(i, 1))));
  CHECK_THROWS_AS(build_frame(std::vector<AxisSource>{}, x), Error);
  std::vector<AxisSource> wrong = {custom_axis(Vector::Ones(4))};
  CHECK_THROWS_AS(build_frame(wrong, x), Error);
  std::vector<AxisSource> dependent = {custom_axis(Vector::Ones(3)), custom_axis(Vector::Ones(3) * 2.0)};
  CHECK_THROWS_AS(build_frame(dependent, x), Error);
}

TEST_CASE("axis_from picks an LDA column") {
  LdaAxes a;
  a.w = Matrix::Identity(4, 2);
  const auto s = axis_from(a, 1, AxisRole::pos, "pos_axes.json");
  CHECK(s.direction == Vector::Unit(4, 1));
  CHECK(s.column == 1);
  CHECK_THROWS_AS(axis_from(a, 2, AxisRole::pos), Error);
}

TEST_CASE("diagnostic labels") {
  SUBCASE("unequal spread") {
    const auto d = axis_diagnostics(two_class_frame({-1, 1}, {-3, 3}), "language");
    REQUIRE(d.size() == 1);
    CHECK(d[0].variance_ratio == doctest::Approx(9.0));
    CHECK(d[0].label == SensitivityLabel::sensitive_var_asymmetric);
    CHECK(to_string(d[0].label) == "sensitive-var-asymmetric");
  }
  SUBCASE("mean shift") {
    const auto d = axis_diagnostics(two_class_frame({0, 2}, {1, 3}), "language");
    CHECK(d[0].max_mean_gap == doctest::Approx(1.0));
    CHECK(d[0].label == SensitivityLabel::sensitive_mean_shift);
    REQUIRE(d[0].classes.size() == 2);
    CHECK(d[0].classes[0].name == "a");
    CHECK(d[0].classes[0].mean == doctest::Approx(1.0));
    CHECK(d[0].classes[0].variance == doctest::Approx(1.0));
    // between = 2 * 0.25 + 2 * 0.25, within = 4
    CHECK(d[0].between_within_ratio == doctest::Approx(0.25));
  }
  SUBCASE("low variance") {
    const auto d = axis_diagnostics(two_class_frame({-0.1, 0.1}, {-0.1, 0.1}), "language");
    CHECK(d[0].label == SensitivityLabel::neutral_low_var);
  }
  SUBCASE("high variance") {
    const auto d = axis_diagnostics(two_class_frame({-1, 1}, {-1, 1}), "language");
    CHECK(d[0].label == SensitivityLabel::neutral_high_var);
    CHECK(d[0].max_mean_gap == 0.0);
  }
  SUBCASE("thresholds are configurable") {
    DiagnosticThresholds t;
    t.mean_gap = 2.0;
    const auto d = axis_diagnostics(two_class_frame({0, 2}, {1, 3}), "language", t);
    CHECK(d[0].label == SensitivityLabel::neutral_high_var);
  }
  SUBCASE("unknown class field") {
    CHECK_THROWS_AS(axis_diagnostics(two_class_frame({0, 1}, {0, 1}), "colour"), Error);
  }
}

TEST_CASE("language shift along one axis is detected") {
  std::mt19937_64 gen(3);
  Matrix en = gaussian(200, 4, gen);
  Matrix de = gaussian(200, 4, gen);
  de.col(0).array() += 3.0;
  std::vector<ReprMatrix> parts = {to_repr(en, "en"), to_repr(de, "de")};
  const auto x = concat_rows(parts);
  std::vector<AxisSource> sources = {custom_axis(Vector::Unit(4, 0)), custom_axis(Vector::Unit(4, 1))};
  const auto diag = axis_diagnostics(build_frame(sources, x), "language");
  CHECK(diag[0].label == SensitivityLabel::sensitive_mean_shift);
  CHECK(diag[1].label == SensitivityLabel::neutral_high_var);
  const auto by_family = axis_diagnostics(build_frame(sources, x), "family");
  CHECK(by_family[0].classes.size() == 1);  // both Germanic
}

TEST_CASE("CSV and JSON round-trips") {
  TempDir dir("viz");
  std::mt19937_64 gen(4);
  const auto x = tagged_rows(gaussian(20, 5, gen), "ja");
  std::vector<AxisSource> sources = {custom_axis(gaussian_vector(5, gen), AxisRole::language_sensitive),
                                     custom_axis(gaussian_vector(5, gen), AxisRole::pos)};
  const auto f = build_frame(sources, x);
  for (const char* name : {"frame.csv", "frame.json"}) {
    const auto path = dir / name;
    const auto fmt = frame_format_for(path);
    export_frame(f, path, fmt);
    const auto back = import_frame(path, fmt);
    CHECK(back.rows == f.rows);
    CHECK(back.coords == f.coords);  // 17 significant digits
    REQUIRE(back.sources.size() == 2);
    CHECK(back.sources[0].role == AxisRole::language_sensitive);
    CHECK(back.sources[1].role == AxisRole::pos);
    CHECK(back.sources[1].axes_file == "axes.json");
  }
  const std::string csv = read_file(dir / "frame.csv");
  CHECK(csv.rfind("# axes: c1=language-sensitive@axes.json#0;c2=pos@axes.json#0\n", 0) == 0);
  CHECK(csv.find("language,family,layer,position,token_id,tags,c1,c2\n") != std::string::npos);
}

TEST_CASE("subsampled export and empty frames") {
  TempDir dir("viz2");
  std::mt19937_64 gen(5);
  const auto x = tagged_rows(gaussian(100, 3, gen), "en");
  std::vector<AxisSource> sources = {custom_axis(Vector::Unit(3, 0))};
  const auto f = build_frame(sources, x);
  export_frame(f, dir / "s.csv", FrameFormat::csv, 10, 7);
  const auto s = import_frame(dir / "s.csv", FrameFormat::csv);
  CHECK(s.rows.size() == 10);
  for (std::size_t i = 1; i < s.rows.size(); ++i) CHECK(s.rows[i].position > s.rows[i - 1].position);
  export_frame(f, dir / "s2.csv", FrameFormat::csv, 10, 7);
  CHECK(read_file(dir / "s.csv") == read_file(dir / "s2.csv"));

  ProjectionFrame empty;
  empty.sources = sources;
  empty.coords.resize(0, 1);
  export_frame(empty, dir / "e.csv", FrameFormat::csv);
  CHECK(read_file(dir / "e.csv") == "# axes: c1=custom@axes.json#0\nlanguage,family,layer,position,token_id,tags,c1\n");
  CHECK(import_frame(dir / "e.csv", FrameFormat::csv).rows.empty());
}

TEST_CASE("language families") {
  CHECK(language_family("en") == "Germanic");
  CHECK(language_family("hi") == "Indo-Aryan");
  CHECK(language_family("eu") == "Isolate");
  CHECK(language_family("zz") == "Unknown");
  CHECK(language_family_table().size() == 93);
}
