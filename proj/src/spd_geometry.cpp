#include "repgeo/spd_geometry.hpp"

#include "bundle.hpp"
#include "repgeo/parallel.hpp"
#include "repgeo/rgeo_format.hpp"
#include "repgeo/rng.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace repgeo {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().size() > 0 ? eig.eigenvalues()(0) : 0.0;
}

// Caches the Cholesky factor of the reference matrix so that many distances
// from the same K are cheap.
class DistanceFrom {
 public:
  explicit DistanceFrom(const Matrix& a) : a_(a), llt_(a) {
    if (a.rows() != a.cols()) fail(Errc::dimension_mismatch, "spd_distance: matrix is not square");
    if (llt_.info() != Eigen::Success) {
      fail(Errc::not_positive_definite,
           "spd_distance: first matrix is not positive definite (lambda_min = " + format_double(min_eigenvalue(a)) + ")");
    }
  }

  double to(const Matrix& b) const {
    require_dims(b.rows(), a_.rows(), "spd_distance");
    require_dims(b.cols(), a_.cols(), "spd_distance");
    if (b == a_) return 0.0;
    // L^{-1} B L^{-T} shares its spectrum with A^{-1} B.
    Matrix c = llt_.matrixL().solve(b);
    c = llt_.matrixL().solve(Matrix(c.transpose()));
    c = 0.5 * (c + c.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) fail(Errc::not_positive_definite, "spd_distance: eigensolver failed");
    const Vector& lambda = eig.eigenvalues();
    if (lambda.size() > 0 && !(lambda(0) > 0.0)) {
      fail(Errc::not_positive_definite,
           "spd_distance: second matrix is not positive definite (lambda_min = " + format_double(min_eigenvalue(b)) + ")");
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
      const double l = std::log(lambda(i));
      sum += l * l;
    }
    return std::sqrt(sum);
  }

 private:
  Matrix a_;
  Eigen::LLT<Matrix> llt_;
};

void check_theta(double theta_deg) {
  if (!(theta_deg >= 0.0 && theta_deg <= 90.0)) {
    fail(Errc::invalid_argument, "rotation angle must lie in [0, 90] degrees, got " + format_double(theta_deg));
  }
}

void check_gamma(double gamma) {
  if (!(gamma >= 1.0) || !std::isfinite(gamma)) {
    fail(Errc::invalid_argument, "scaling multiplier must be >= 1, got " + format_double(gamma));
  }
}

Matrix scaled_from_eig(const Eigen::SelfAdjointEigenSolver<Matrix>& eig, double gamma, std::uint64_t seed) {
  CounterRng rng(seed);
  const double g2 = gamma * gamma;
  Vector lambda = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) lambda(i) = rng.coin() ? lambda(i) * g2 : lambda(i) / g2;
  Matrix out = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

Covariance covariance_of(const MomentAccumulator& moments) {
  if (moments.count() < 2) {
    fail(Errc::invalid_argument, "covariance needs at least 2 rows, have " + std::to_string(moments.count()));
  }
  Covariance c;
  c.mu = moments.mean();
  c.k.k = moments.covariance();
  return c;
}

Covariance covariance_of(const Eigen::Ref<const Matrix>& rows) {
  if (rows.rows() < 2) fail(Errc::invalid_argument, "covariance needs at least 2 rows, have " + std::to_string(rows.rows()));
  return covariance_of(MomentAccumulator::from_rows(rows));
}

Covariance covariance_of(const ReprMatrix& x) {
  if (x.rows() < 2) fail(Errc::invalid_argument, "covariance needs at least 2 rows, have " + std::to_string(x.rows()));
  MomentAccumulator acc(x.dim());
  acc.add_rows(x.data);
  Covariance c = covariance_of(acc);
  if (!x.meta.empty()) c.k.source = x.meta.front().language + "/" + std::to_string(x.meta.front().layer);
  return c;
}

SpdMatrix with_ridge(SpdMatrix k, double relative) {
  if (relative < 0.0) fail(Errc::invalid_argument, "ridge must be nonnegative");
  const Eigen::Index d = k.dim();
  if (d == 0) return k;
  const double eps = relative * k.k.trace() / static_cast<double>(d);
  k.k.diagonal().array() += eps;
  k.ridge_applied += eps;
  return k;
}

double spd_distance(const Matrix& a, const Matrix& b) {
  require_dims(b.rows(), a.rows(), "spd_distance");
  return DistanceFrom(a).to(b);
}

double spd_distance(const SpdMatrix& a, const SpdMatrix& b) { return spd_distance(a.k, b.k); }

Matrix random_orthogonal(Eigen::Index d, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix g(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix& r = qr.matrixQR();
  // Fix column signs by diag(R) so Q is Haar distributed.
  for (Eigen::Index j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

Matrix random_plane_rotation(Eigen::Index d, double theta_deg, std::uint64_t seed) {
  check_theta(theta_deg);
  if (theta_deg == 0.0) return Matrix::Identity(d, d);
  const Matrix q = random_orthogonal(d, derive_seed(seed, {0}));
  CounterRng signs(derive_seed(seed, {1}));
  const double t = theta_deg * std::numbers::pi / 180.0;
  const double c = std::cos(t);
  Matrix g = Matrix::Identity(d, d);
  for (Eigen::Index p = 0; p + 1 < d; p += 2) {
    const double s = signs.coin() ? std::sin(t) : -std::sin(t);
    g(p, p) = c;
    g(p + 1, p + 1) = c;
    g(p + 1, p) = s;
    g(p, p + 1) = -s;
  }
  return q * g * q.transpose();
}

Matrix rotated_copy(const Matrix& k, double theta_deg, std::uint64_t seed) {
  check_theta(theta_deg);
  if (theta_deg == 0.0) return k;
  const Matrix r = random_plane_rotation(k.rows(), theta_deg, seed);
  Matrix out = r * k * r.transpose();
  return 0.5 * (out + out.transpose());
}

double rotated_distance(const SpdMatrix& k, double theta_deg, std::uint64_t seed) {
  check_theta(theta_deg);
  if (theta_deg == 0.0) return 0.0;
  return spd_distance(k.k, rotated_copy(k.k, theta_deg, seed));
}

Matrix scaled_copy(const Matrix& k, double gamma, std::uint64_t seed) {
  check_gamma(gamma);
  if (gamma == 1.0) return k;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
  return scaled_from_eig(eig, gamma, seed);
}

double scaled_distance(const SpdMatrix& k, double gamma, std::uint64_t seed) {
  check_gamma(gamma);
  if (gamma == 1.0) return 0.0;
  return spd_distance(k.k, scaled_copy(k.k, gamma, seed));
}

std::string to_string(CalibrationKind kind) { return kind == CalibrationKind::rotation ? "rotation" : "scaling"; }

CalibrationKind parse_calibration_kind(const std::string& name) {
  if (name == "rotation") return CalibrationKind::rotation;
  if (name == "scaling") return CalibrationKind::scaling;
  fail(Errc::invalid_argument, "unknown calibration kind '" + name + "'");
}

std::size_t CalibrationCurve::raw_violations() const {
  std::size_t v = 0;
  for (std::size_t i = 1; i < mean_distance_raw.size(); ++i) {
    if (mean_distance_raw[i] < mean_distance_raw[i - 1]) ++v;
  }
  return v;
}

std::vector<double> default_grid(CalibrationKind kind) {
  std::vector<double> grid;
  if (kind == CalibrationKind::rotation) {
    for (int i = 0; i <= 90; ++i) grid.push_back(static_cast<double>(i));
  } else {
    for (int i = 100; i <= 400; ++i) grid.push_back(static_cast<double>(i) / 100.0);
  }
  return grid;
}

std::uint64_t calibration_cell_seed(std::uint64_t base_seed, std::size_t matrix, std::size_t grid_index,
                                    std::size_t replicate) {
  return derive_seed(base_seed, {matrix, grid_index, replicate});
}

std::vector<double> isotonic_nondecreasing(std::span<const double> y, std::span<const double> weights) {
  if (!weights.empty() && weights.size() != y.size()) {
    fail(Errc::dimension_mismatch, "isotonic: weights and values differ in length");
  }
  struct Block {
    double value;
    double weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    blocks.push_back({y[i], weights.empty() ? 1.0 : weights[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].value > blocks.back().value) {
      Block top = blocks.back();
      blocks.pop_back();
      Block& prev = blocks.back();
      const double w = prev.weight + top.weight;
      prev.value = (prev.value * prev.weight + top.value * top.weight) / w;
      prev.weight = w;
      prev.count += top.count;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.value);
  return out;
}

CalibrationCurve build_calibration_curve(std::span<const SpdMatrix> ks, CalibrationKind kind, int num_seeds,
                                         std::uint64_t base_seed, int layer, std::optional<std::vector<double>> grid,
                                         std::size_t threads) {
  if (ks.empty()) fail(Errc::invalid_argument, "calibration needs at least one matrix");
  if (num_seeds < 1) fail(Errc::invalid_argument, "calibration needs num_seeds >= 1");
  for (const auto& k : ks) require_dims(k.dim(), ks.front().dim(), "calibration");

  CalibrationCurve c;
  c.kind = kind;
  c.grid = grid ? *grid : default_grid(kind);
  c.num_seeds = num_seeds;
  c.base_seed = base_seed;
  c.layer = layer;
  for (double v : c.grid) kind == CalibrationKind::rotation ? check_theta(v) : check_gamma(v);

  const std::size_t m = ks.size();
  const std::size_t g = c.grid.size();
  const auto reps = static_cast<std::size_t>(num_seeds);

  // Per-matrix factorizations are shared by every cell.
  std::vector<std::optional<DistanceFrom>> from(m);
  std::vector<Eigen::SelfAdjointEigenSolver<Matrix>> eig(m);
  parallel_for(
      m,
      [&](std::size_t i) {
        from[i].emplace(ks[i].k);
        if (kind == CalibrationKind::scaling) eig[i].compute(ks[i].k);
      },
      threads);

  std::vector<double> cell(m * g * reps, 0.0);
  parallel_for(
      cell.size(),
      [&](std::size_t idx) {
        const std::size_t r = idx % reps;
        const std::size_t gi = (idx / reps) % g;
        const std::size_t mi = idx / (reps * g);
        const double p = c.grid[gi];
        const std::uint64_t seed = calibration_cell_seed(base_seed, mi, gi, r);
        if (kind == CalibrationKind::rotation) {
          cell[idx] = p == 0.0 ? 0.0 : from[mi]->to(rotated_copy(ks[mi].k, p, seed));
        } else {
          cell[idx] = p == 1.0 ? 0.0 : from[mi]->to(scaled_from_eig(eig[mi], p, seed));
        }
      },
      threads);

  c.mean_distance_raw.assign(g, 0.0);
  for (std::size_t gi = 0; gi < g; ++gi) {
    double sum = 0.0;
    for (std::size_t mi = 0; mi < m; ++mi)
      for (std::size_t r = 0; r < reps; ++r) sum += cell[(mi * g + gi) * reps + r];
    c.mean_distance_raw[gi] = sum / static_cast<double>(m * reps);
  }
  c.mean_distance = isotonic_nondecreasing(c.mean_distance_raw);
  return c;
}

CalibrationLookup invert_calibration(const CalibrationCurve& c, double distance) {
  if (c.grid.empty() || c.grid.size() != c.mean_distance.size()) {
    fail(Errc::invalid_argument, "calibration curve is empty or malformed");
  }
  if (!(distance >= 0.0)) fail(Errc::invalid_argument, "distance must be nonnegative");
  for (std::size_t i = 0; i < c.grid.size(); ++i) {
    if (c.mean_distance[i] >= distance) return {c.grid[i], i, false};
  }
  return {c.grid.back(), c.grid.size() - 1, true};
}

Matrix pairwise_distances(std::span<const SpdMatrix> ks, std::size_t threads) {
  if (ks.size() < 2) fail(Errc::invalid_argument, "pairwise distances need at least 2 matrices");
  for (const auto& k : ks) require_dims(k.dim(), ks.front().dim(), "pairwise_distances");
  const std::size_t n = ks.size();
  std::vector<std::optional<DistanceFrom>> from(n);
  parallel_for(n, [&](std::size_t i) { from[i].emplace(ks[i].k); }, threads);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  parallel_for(
      pairs.size(),
      [&](std::size_t p) {
        const auto [i, j] = pairs[p];
        const double dist = from[i]->to(ks[j].k);
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = dist;
        out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = dist;
      },
      threads);
  return out;
}

void write_calibration_curve(const CalibrationCurve& c, const fs::path& path) {
  json j = {{"kind", to_string(c.kind)},
            {"layer", c.layer},
            {"grid", c.grid},
            {"mean_distance_raw", c.mean_distance_raw},
            {"mean_distance_monotone", c.mean_distance},
            {"raw_violations", c.raw_violations()},
            {"num_seeds", c.num_seeds},
            {"base_seed", c.base_seed}};
  write_file_atomic(path, j.dump(2) + "\n");
}

CalibrationCurve read_calibration_curve(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(Errc::metadata_mismatch, path.string() + ": " + e.what());
  }
  CalibrationCurve c;
  c.kind = parse_calibration_kind(detail::field<std::string>(j, "kind", path));
  c.layer = detail::field<int>(j, "layer", path);
  c.grid = detail::field<std::vector<double>>(j, "grid", path);
  c.mean_distance_raw = detail::field<std::vector<double>>(j, "mean_distance_raw", path);
  c.mean_distance = detail::field<std::vector<double>>(j, "mean_distance_monotone", path);
  c.num_seeds = detail::field<int>(j, "num_seeds", path);
  c.base_seed = detail::field<std::uint64_t>(j, "base_seed", path);
  if (c.grid.size() != c.mean_distance.size() || c.grid.size() != c.mean_distance_raw.size()) {
    fail(Errc::metadata_mismatch, path.string() + ": grid and distance arrays differ in length");
  }
  return c;
}

void write_spd_matrix(const SpdMatrix& k, const fs::path& path) {
  detail::Bundle b;
  b.header = {{"source", k.source}, {"ridge_applied", k.ridge_applied}, {"d", k.dim()}};
  b.arrays["k"] = k.k;
  detail::write_bundle(path, "spd_matrix", b);
}

SpdMatrix read_spd_matrix(const fs::path& path) {
  const auto b = detail::read_bundle(path, "spd_matrix");
  SpdMatrix k;
  k.source = detail::field<std::string>(b.header, "source", path);
  k.ridge_applied = detail::field<double>(b.header, "ridge_applied", path);
  k.k = detail::array(b, "k", path);
  const auto d = detail::field<Eigen::Index>(b.header, "d", path);
  if (k.k.rows() != d || k.k.cols() != d) fail(Errc::metadata_mismatch, path.string() + ": matrix is not d x d");
  return k;
}

void write_labeled_matrix_csv(const Matrix& m, std::span<const std::string> labels, const fs::path& path) {
  if (static_cast<Eigen::Index>(labels.size()) != m.rows() || m.rows() != m.cols()) {
    fail(Errc::dimension_mismatch, "labeled matrix must be square with one label per row");
  }
  std::ostringstream out;
  out << "language";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << format_double(m(i, j));
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

Matrix read_labeled_matrix_csv(const fs::path& path, std::vector<std::string>* labels) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) fail(Errc::metadata_mismatch, path.string() + ": empty CSV");
  std::vector<std::string> names;
  {
    std::istringstream hs(line);
    std::string cell;
    std::getline(hs, cell, ',');
    while (std::getline(hs, cell, ',')) names.push_back(cell);
  }
  const auto n = static_cast<Eigen::Index>(names.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::getline(in, line)) fail(Errc::truncated, path.string() + ": missing row " + std::to_string(i));
    std::istringstream rs(line);
    std::string cell;
    std::getline(rs, cell, ',');
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::getline(rs, cell, ',')) fail(Errc::truncated, path.string() + ": short row " + std::to_string(i));
      m(i, j) = std::stod(cell);
    }
  }
  if (labels) *labels = std::move(names);
  return m;
}

}  // namespace repgeo
