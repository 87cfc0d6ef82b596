#include "repgeo/spd_geometry.hpp"

#include "../support/test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace repgeo;
using namespace repgeo::testing;

namespace {

SpdMatrix spd(Matrix k) {
  SpdMatrix s;
  s.k = std::move(k);
  return s;
}

Matrix diag(std::initializer_list<double> v) {
  Vector d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) d(i++) = x;
  return d.asDiagonal();
}

}  // namespace

TEST_CASE("closed-form distances") {
  const double ln2 = std::log(2.0);
  CHECK(spd_distance(diag({1, 4}), diag({2, 2})) == doctest::Approx(std::sqrt(2.0) * ln2).epsilon(1e-12));
  CHECK(dense_spd_distance(diag({1, 4}), diag({2, 2})) == doctest::Approx(std::sqrt(2.0) * ln2).epsilon(1e-12));
  std::mt19937_64 gen(1);
  const Matrix a = random_spd(4, gen);
  CHECK(spd_distance(a, std::exp(1.0) * a) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(spd_distance(a, a) == 0.0);
}

TEST_CASE("metric properties against the dense oracle") {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index d = 2 + trial % 12;
    const Matrix a = random_spd(d, gen, 100.0);
    const Matrix b = random_spd(d, gen, 100.0);
    const Matrix c = random_spd(d, gen, 100.0);
    const double ab = spd_distance(a, b);
    CHECK(ab == doctest::Approx(dense_spd_distance(a, b)).epsilon(1e-8));
    CHECK(std::abs(ab - spd_distance(b, a)) <= 1e-8 * std::max(1.0, ab));
    CHECK(ab <= spd_distance(a, c) + spd_distance(c, b) + 1e-9);
    CHECK(ab > 0.0);
    const Matrix p = random_invertible(d, gen);
    const double congruent = spd_distance(Matrix(p * a * p.transpose()), Matrix(p * b * p.transpose()));
    CHECK(std::abs(congruent - ab) <= 1e-5 * std::max(1.0, ab));
    // Invariance under inversion.
    CHECK(spd_distance(Matrix(a.inverse()), Matrix(b.inverse())) == doctest::Approx(ab).epsilon(1e-6));
  }
}

TEST_CASE("distance errors") {
  CHECK_THROWS_AS(spd_distance(diag({1, 2}), diag({1, 2, 3})), Error);
  try {
    spd_distance(diag({1, 0}), diag({1, 1}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::not_positive_definite);
  }
  try {
    spd_distance(diag({1, 1}), diag({1, -1}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::not_positive_definite);
  }
}

TEST_CASE("ridge") {
  const auto r = with_ridge(spd(diag({1, 3})), 0.5);
  CHECK(r.ridge_applied == doctest::Approx(1.0));
  CHECK(r.k(0, 0) == doctest::Approx(2.0));
  CHECK(r.k(1, 1) == doctest::Approx(4.0));
  // A singular matrix becomes usable after ridging.
  const SpdMatrix singular = spd(diag({2, 0, 0}));
  CHECK_THROWS_AS(spd_distance(singular, spd(diag({1, 1, 1}))), Error);
  const auto ridged = with_ridge(singular);
  CHECK(ridged.ridge_applied == doctest::Approx(1e-6 * 2.0 / 3.0));
  CHECK(std::isfinite(spd_distance(ridged, spd(diag({1, 1, 1})))));
}

TEST_CASE("covariance_of matches the batch formula") {
  std::mt19937_64 gen(3);
  const Matrix rows = gaussian(300, 6, gen) * random_invertible(6, gen);
  const auto cov = covariance_of(rows);
  CHECK(max_rel_diff(cov.k.k, batch_covariance(rows)) < 1e-10);
  CHECK(max_rel_diff(cov.mu, rows.colwise().mean().transpose()) < 1e-12);
  CHECK(cov.k.ridge_applied == 0.0);
  CHECK_THROWS_AS(covariance_of(Matrix(gaussian(1, 3, gen))), Error);
  const auto from_repr = covariance_of(to_repr(rows, "de", 5));
  CHECK(from_repr.k.source == "de/5");
}

TEST_CASE("rotation examples") {
  SUBCASE("90 degrees in 2D swaps the axes") {
    const SpdMatrix k = spd(diag({1, 100}));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      CHECK(rotated_distance(k, 90.0, seed) == doctest::Approx(std::sqrt(2.0) * std::log(100.0)).epsilon(1e-9));
    }
  }
  SUBCASE("zero angle is exact") {
    std::mt19937_64 gen(4);
    const SpdMatrix k = spd(random_spd(7, gen));
    CHECK(rotated_distance(k, 0.0, 9) == 0.0);
    CHECK(random_plane_rotation(5, 0.0, 9) == Matrix::Identity(5, 5));
  }
  SUBCASE("isotropic matrices are rotation invariant") {
    const SpdMatrix k = spd(3.0 * Matrix::Identity(6, 6));
    CHECK(rotated_distance(k, 45.0, 1) < 1e-10);
  }
  SUBCASE("invalid angles") {
    const SpdMatrix k = spd(Matrix::Identity(2, 2));
    CHECK_THROWS_AS(rotated_distance(k, -1.0, 0), Error);
    CHECK_THROWS_AS(rotated_distance(k, 91.0, 0), Error);
  }
}

TEST_CASE("rotation structure") {
  for (Eigen::Index d : {2, 3, 8, 9}) {
    const Matrix r = random_plane_rotation(d, 30.0, 17);
    CHECK((r.transpose() * r - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.determinant() == doctest::Approx(1.0));
    // Every rotated plane turns by exactly theta: the eigenvalues of R are
    // exp(+-i theta) per plane plus 1 for the fixed axis of odd d.
    Eigen::EigenSolver<Matrix> es(r);
    const double c = std::cos(30.0 * std::numbers::pi / 180.0);
    int ones = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto l = es.eigenvalues()(i);
      if (std::abs(l.real() - 1.0) < 1e-9) {
        ++ones;
      } else {
        CHECK(l.real() == doctest::Approx(c).epsilon(1e-9));
      }
    }
    CHECK(ones == static_cast<int>(d % 2));
  }
  const Matrix q = random_orthogonal(6, 3);
  CHECK((q.transpose() * q - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(random_orthogonal(6, 3) == q);
  CHECK(random_orthogonal(6, 4) != q);
}

TEST_CASE("scaling closed form") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index d = 2 + trial;
    const SpdMatrix k = spd(random_spd(d, gen, 1000.0));
    for (double gamma : {1.1, 1.53, 2.0, 4.0}) {
      const double expected = 2.0 * std::sqrt(static_cast<double>(d)) * std::log(gamma);
      CHECK(std::abs(scaled_distance(k, gamma, 11 + trial) - expected) <= 1e-6 * expected);
    }
    CHECK(scaled_distance(k, 1.0, 3) == 0.0);
    for (double c : {0.5, 3.0, 10.0}) {
      CHECK(std::abs(spd_distance(k.k, Matrix(c * k.k)) - std::sqrt(static_cast<double>(d)) * std::abs(std::log(c))) <=
            1e-8);
    }
  }
  const SpdMatrix k4 = spd(diag({1, 2, 3, 4}));
  CHECK(scaled_distance(k4, 2.0, 0) == doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(scaled_distance(k4, 0.9, 0), Error);
}

TEST_CASE("isotonic cleanup") {
  const std::vector<double> y = {1, 3, 2, 4, 3.5, 5};
  const auto fit = isotonic_nondecreasing(y);
  const std::vector<double> expected = {1, 2.5, 2.5, 3.75, 3.75, 5};
  REQUIRE(fit.size() == expected.size());
  for (std::size_t i = 0; i < fit.size(); ++i) CHECK(fit[i] == doctest::Approx(expected[i]));
  const std::vector<double> sorted = {0, 1, 1, 2};
  CHECK(isotonic_nondecreasing(sorted) == sorted);
  CHECK(isotonic_nondecreasing(std::vector<double>{}).empty());
  // Weighted pooling.
  const std::vector<double> w = {3, 1};
  const auto wf = isotonic_nondecreasing(std::vector<double>{2, 0}, w);
  CHECK(wf[0] == doctest::Approx(1.5));
  CHECK(wf[1] == doctest::Approx(1.5));
}

TEST_CASE("calibration curves") {
  std::mt19937_64 gen(6);
  std::vector<SpdMatrix> ks;
  for (int i = 0; i < 3; ++i) ks.push_back(spd(random_spd(8, gen, 100.0)));

  SUBCASE("rotation curve starts at zero and is monotone") {
    const auto c = build_calibration_curve(ks, CalibrationKind::rotation, 4, 42, 3);
    REQUIRE(c.grid.size() == 91);
    CHECK(c.mean_distance.front() == 0.0);
    CHECK(c.mean_distance_raw.front() == 0.0);
    for (std::size_t i = 1; i < c.mean_distance.size(); ++i) CHECK(c.mean_distance[i] >= c.mean_distance[i - 1]);
    CHECK(c.layer == 3);
    // A cell reproduced by hand.
    const std::size_t gi = 20;
    double sum = 0.0;
    for (std::size_t m = 0; m < ks.size(); ++m)
      for (std::size_t r = 0; r < 4; ++r) sum += rotated_distance(ks[m], 20.0, calibration_cell_seed(42, m, gi, r));
    CHECK(c.mean_distance_raw[gi] == doctest::Approx(sum / 12.0).epsilon(1e-12));
  }

  SUBCASE("thread count does not change the curve") {
    const std::vector<double> grid = {0, 10, 20, 30};
    const auto one = build_calibration_curve(ks, CalibrationKind::rotation, 3, 7, 0, grid, 1);
    const auto four = build_calibration_curve(ks, CalibrationKind::rotation, 3, 7, 0, grid, 4);
    CHECK(one.mean_distance_raw == four.mean_distance_raw);
  }

  SUBCASE("scaling curve matches the closed form") {
    const std::vector<double> grid = {1.0, 1.5, 2.0, 3.0};
    const auto c = build_calibration_curve(ks, CalibrationKind::scaling, 2, 1, 0, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(c.mean_distance_raw[i] == doctest::Approx(2.0 * std::sqrt(8.0) * std::log(grid[i])).epsilon(1e-8));
    }
    REQUIRE(default_grid(CalibrationKind::scaling).size() == 301);
    CHECK(default_grid(CalibrationKind::scaling)[53] == 1.53);
  }

  SUBCASE("inversion") {
    CalibrationCurve c;
    c.grid = {0, 1, 2, 3};
    c.mean_distance = {0.0, 0.5, 0.5, 2.0};
    c.mean_distance_raw = c.mean_distance;
    CHECK(invert_calibration(c, 0.0).value == 0.0);
    CHECK(invert_calibration(c, 0.3).value == 1.0);
    CHECK(invert_calibration(c, 0.5).value == 1.0);  // lowest value on a plateau
    CHECK(invert_calibration(c, 1.0).value == 3.0);
    const auto sat = invert_calibration(c, 5.0);
    CHECK(sat.saturated);
    CHECK(sat.value == 3.0);
    CHECK_THROWS_AS(invert_calibration(c, -1.0), Error);
  }

  SUBCASE("argument checks") {
    CHECK_THROWS_AS(build_calibration_curve({}, CalibrationKind::rotation, 1), Error);
    CHECK_THROWS_AS(build_calibration_curve(ks, CalibrationKind::rotation, 0), Error);
    std::vector<SpdMatrix> mixed = {ks[0], spd(Matrix::Identity(3, 3))};
    CHECK_THROWS_AS(build_calibration_curve(mixed, CalibrationKind::rotation, 1), Error);
  }
}

TEST_CASE("pairwise distances") {
  std::mt19937_64 gen(7);
  std::vector<SpdMatrix> ks;
  for (int i = 0; i < 5; ++i) ks.push_back(spd(random_spd(5, gen)));
  const Matrix d = pairwise_distances(ks, 2);
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK(d(i, i) == 0.0);
    for (Eigen::Index j = 0; j < 5; ++j) {
      CHECK(d(i, j) == d(j, i));
      if (i != j) {
        CHECK(d(i, j) == doctest::Approx(dense_spd_distance(ks[static_cast<std::size_t>(i)].k,
                                                             ks[static_cast<std::size_t>(j)].k))
                             .epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("file round-trips") {
  TempDir dir("spd");
  std::mt19937_64 gen(8);
  SpdMatrix k = with_ridge(spd(random_spd(6, gen)));
  k.source = "en/4";
  write_spd_matrix(k, dir / "en.cov.json");
  const auto back = read_spd_matrix(dir / "en.cov.json");
  CHECK(back.k == k.k);
  CHECK(back.ridge_applied == k.ridge_applied);
  CHECK(back.source == "en/4");

  std::vector<SpdMatrix> ks = {k, spd(random_spd(6, gen))};
  const auto c = build_calibration_curve(ks, CalibrationKind::rotation, 2, 5, 4, std::vector<double>{0, 5, 10});
  write_calibration_curve(c, dir / "rot.json");
  const auto cb = read_calibration_curve(dir / "rot.json");
  CHECK(cb.grid == c.grid);
  CHECK(cb.mean_distance_raw == c.mean_distance_raw);
  CHECK(cb.mean_distance == c.mean_distance);
  CHECK(cb.num_seeds == 2);
  CHECK(cb.base_seed == 5);
  CHECK(cb.layer == 4);

  const Matrix m = pairwise_distances(ks);
  const std::vector<std::string> labels = {"en", "fr"};
  write_labeled_matrix_csv(m, labels, dir / "d.csv");
  std::vector<std::string> lb;
  CHECK(read_labeled_matrix_csv(dir / "d.csv", &lb) == m);
  CHECK(lb == labels);
}
