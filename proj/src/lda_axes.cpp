#include "repgeo/lda_axes.hpp"

#include "bundle.hpp"
#include "repgeo/moments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace repgeo {
namespace fs = std::filesystem;

void LabeledSet::validate() const {
  if (class_names.size() < 2) fail(Errc::invalid_argument, "LDA needs at least 2 classes");
  if (labels.size() != static_cast<std::size_t>(x.rows())) {
    fail(Errc::metadata_mismatch, "labels size " + std::to_string(labels.size()) + " != rows " + std::to_string(x.rows()));
  }
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= class_names.size()) {
      fail(Errc::invalid_argument, "label " + std::to_string(l) + " out of range");
    }
    ++counts[static_cast<std::size_t>(l)];
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < 2) {
      fail(Errc::invalid_argument,
           "class '" + class_names[c] + "' has " + std::to_string(counts[c]) + " rows; at least 2 required");
    }
  }
}

LabeledSet label_by_source(std::span<const ReprMatrix> parts, std::span<const std::string> names) {
  if (!names.empty() && names.size() != parts.size()) {
    fail(Errc::invalid_argument, "one class name per input matrix required");
  }
  LabeledSet s;
  s.x = concat_rows(parts);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::string name;
    if (!names.empty()) {
      name = names[i];
    } else if (!parts[i].meta.empty()) {
      name = parts[i].meta.front().language;
    } else {
      name = std::to_string(i);
    }
    s.class_names.push_back(name);
    s.labels.insert(s.labels.end(), static_cast<std::size_t>(parts[i].rows()), static_cast<int>(i));
  }
  return s;
}

LabeledSet bucket_positions(const ReprMatrix& x, int bucket_size) {
  if (bucket_size < 1) fail(Errc::invalid_argument, "bucket size must be positive");
  if (x.meta.size() != static_cast<std::size_t>(x.rows()) || x.rows() == 0) {
    fail(Errc::metadata_mismatch, "bucket_positions needs a position for every row");
  }
  LabeledSet s;
  s.x = x;
  int max_bucket = 0;
  s.labels.reserve(x.meta.size());
  for (const auto& r : x.meta) {
    const int b = r.position / bucket_size;
    s.labels.push_back(b);
    max_bucket = std::max(max_bucket, b);
  }
  for (int b = 0; b <= max_bucket; ++b) {
    s.class_names.push_back("pos[" + std::to_string(b * bucket_size) + "-" + std::to_string((b + 1) * bucket_size - 1) +
                            "]");
  }
  return s;
}

LabeledSet label_by_pos_tag(const ReprMatrix& x, std::span<const std::string> tag_subset, std::size_t* dropped) {
  if (tag_subset.size() < 2) fail(Errc::invalid_argument, "POS labeling needs at least 2 tags");
  if (!x.has_pos_tags) fail(Errc::metadata_mismatch, "representations carry no POS tags");
  std::vector<std::size_t> keep;
  std::vector<int> labels;
  std::vector<std::size_t> counts(tag_subset.size(), 0);
  std::size_t ambiguous = 0;
  for (std::size_t i = 0; i < x.meta.size(); ++i) {
    int match = -1;
    int matches = 0;
    for (std::size_t t = 0; t < tag_subset.size(); ++t) {
      const auto& tags = x.meta[i].pos_tags;
      if (std::find(tags.begin(), tags.end(), tag_subset[t]) != tags.end()) {
        match = static_cast<int>(t);
        ++matches;
      }
    }
    if (matches == 1) {
      keep.push_back(i);
      labels.push_back(match);
      ++counts[static_cast<std::size_t>(match)];
    } else if (matches > 1) {
      ++ambiguous;
    }
  }
  for (std::size_t t = 0; t < tag_subset.size(); ++t) {
    if (counts[t] == 0) fail(Errc::invalid_argument, "requested tag " + tag_subset[t] + " has no rows");
  }
  if (dropped) *dropped = ambiguous;
  LabeledSet s;
  s.x = select_rows(x, keep);
  s.labels = std::move(labels);
  s.class_names.assign(tag_subset.begin(), tag_subset.end());
  return s;
}

ClassScatter class_scatter(const LabeledSet& s) {
  s.validate();
  const Eigen::Index d = s.x.dim();
  const std::size_t classes = s.class_names.size();
  std::vector<std::vector<Eigen::Index>> members(classes);
  for (std::size_t i = 0; i < s.labels.size(); ++i) members[static_cast<std::size_t>(s.labels[i])].push_back(static_cast<Eigen::Index>(i));

  ClassScatter out;
  out.within = Matrix::Zero(d, d);
  out.class_means.resize(static_cast<Eigen::Index>(classes), d);
  out.class_counts.resize(classes);
  MomentAccumulator all(d);
  for (std::size_t c = 0; c < classes; ++c) {
    Matrix rows(static_cast<Eigen::Index>(members[c].size()), d);
    for (std::size_t r = 0; r < members[c].size(); ++r) {
      rows.row(static_cast<Eigen::Index>(r)) = s.x.data.row(members[c][r]).cast<double>();
    }
    const auto acc = MomentAccumulator::from_rows(rows);
    out.within += acc.scatter();
    out.class_means.row(static_cast<Eigen::Index>(c)) = acc.mean().transpose();
    out.class_counts[c] = members[c].size();
    all.merge(acc);
  }
  out.mean = all.mean();
  out.between = Matrix::Zero(d, d);
  for (std::size_t c = 0; c < classes; ++c) {
    const Vector delta = out.class_means.row(static_cast<Eigen::Index>(c)).transpose() - out.mean;
    out.between.noalias() += static_cast<double>(out.class_counts[c]) * delta * delta.transpose();
  }
  return out;
}

double default_shrinkage(const Matrix& within) {
  if (within.rows() == 0) return 0.0;
  return kDefaultShrinkage * within.trace() / static_cast<double>(within.rows());
}

LdaAxes fit_lda(const LabeledSet& s, std::optional<double> shrinkage) {
  const ClassScatter sc = class_scatter(s);
  const Eigen::Index d = s.x.dim();
  const auto m = static_cast<Eigen::Index>(s.class_names.size()) - 1;
  if (m > d) {
    fail(Errc::invalid_argument, std::to_string(m + 1) + " classes need " + std::to_string(m) +
                                     " axes but the dimension is " + std::to_string(d));
  }
  const double eps = shrinkage ? *shrinkage : default_shrinkage(sc.within);
  if (eps < 0.0) fail(Errc::invalid_argument, "shrinkage must be nonnegative");

  const double scale = std::max(sc.within.trace(), sc.between.trace());
  if (!(sc.between.trace() > 1e-14 * scale) || scale == 0.0) {
    fail(Errc::no_separation, "no separation: all class means are identical");
  }

  Matrix regularized = sc.within;
  regularized.diagonal().array() += eps;
  Eigen::LLT<Matrix> llt(regularized);
  if (llt.info() != Eigen::Success) {
    fail(Errc::not_positive_definite, "within-class scatter plus shrinkage is not positive definite; raise shrinkage");
  }
  Matrix whitened = llt.matrixL().solve(sc.between);
  whitened = llt.matrixL().solve(Matrix(whitened.transpose()));
  whitened = 0.5 * (whitened + whitened.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(whitened);
  if (eig.info() != Eigen::Success) fail(Errc::invalid_argument, "LDA eigensolver failed");

  LdaAxes a;
  a.w.resize(d, m);
  a.eigenvalues.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index src = d - 1 - i;
    a.eigenvalues(i) = std::max(0.0, eig.eigenvalues()(src));
    // w = L^{-T} v
    Vector w = llt.matrixU().solve(eig.eigenvectors().col(src));
    a.w.col(i) = w / w.norm();
  }
  canonicalize_signs(a.w);
  a.class_names = s.class_names;
  a.shrinkage = eps;
  if (!s.x.meta.empty()) a.fitted_layer = s.x.meta.front().layer;
  return a;
}

Matrix orthonormalize_axes(const Eigen::Ref<const Matrix>& axes) {
  Matrix q = axes;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    const double original = q.col(j).norm();
    if (!(original > 0.0)) fail(Errc::rank_deficient, "axis " + std::to_string(j) + " is zero");
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
    }
    const double remaining = q.col(j).norm();
    if (remaining <= 1e-10 * original) {
      fail(Errc::rank_deficient, "axis " + std::to_string(j) + " is linearly dependent on the preceding axes");
    }
    q.col(j) /= remaining;
  }
  return q;
}

CoordinateTable project_axes(const LdaAxes& a, const ReprMatrix& x, const Eigen::Ref<const Vector>& origin) {
  require_dims(x.dim(), a.dim(), "project_axes");
  require_dims(origin.size(), a.dim(), "project_axes (origin)");
  const Matrix w = orthonormalize_axes(a.w);
  CoordinateTable t;
  t.meta = x.meta;
  Matrix centered = x.as_double();
  centered.rowwise() -= origin.transpose();
  t.coords = centered * w;
  return t;
}

double separation_ratio(const LabeledSet& s, const Eigen::Ref<const Vector>& direction) {
  require_dims(direction.size(), s.x.dim(), "separation_ratio");
  const Vector y = s.x.data.cast<double>() * direction;
  const std::size_t classes = s.class_names.size();
  std::vector<double> sum(classes, 0.0);
  std::vector<double> count(classes, 0.0);
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    sum[static_cast<std::size_t>(s.labels[i])] += y(static_cast<Eigen::Index>(i));
    count[static_cast<std::size_t>(s.labels[i])] += 1.0;
  }
  const double grand = y.mean();
  double between = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (count[c] == 0.0) continue;
    const double mc = sum[c] / count[c];
    between += count[c] * (mc - grand) * (mc - grand);
  }
  double within = 0.0;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    const auto c = static_cast<std::size_t>(s.labels[i]);
    const double r = y(static_cast<Eigen::Index>(i)) - sum[c] / count[c];
    within += r * r;
  }
  return between / within;
}

void write_lda_axes(const LdaAxes& a, const fs::path& path) {
  detail::Bundle b;
  b.header = {{"class_names", a.class_names},
              {"eigenvalues", std::vector<double>(a.eigenvalues.data(), a.eigenvalues.data() + a.eigenvalues.size())},
              {"fitted_layer", a.fitted_layer},
              {"shrinkage", a.shrinkage},
              {"d", a.dim()},
              {"m", a.count()},
              {"sign_convention", "largest-magnitude entry of each axis is positive"}};
  b.arrays["w"] = a.w;
  detail::write_bundle(path, "lda_axes", b);
}

LdaAxes read_lda_axes(const fs::path& path) {
  const auto b = detail::read_bundle(path, "lda_axes");
  LdaAxes a;
  a.class_names = detail::field<std::vector<std::string>>(b.header, "class_names", path);
  const auto ev = detail::field<std::vector<double>>(b.header, "eigenvalues", path);
  a.eigenvalues = Eigen::Map<const Vector>(ev.data(), static_cast<Eigen::Index>(ev.size()));
  a.fitted_layer = detail::field<int>(b.header, "fitted_layer", path);
  a.shrinkage = detail::field<double>(b.header, "shrinkage", path);
  a.w = detail::array(b, "w", path);
  if (a.w.cols() != a.eigenvalues.size()) {
    fail(Errc::metadata_mismatch, path.string() + ": axis count disagrees with eigenvalue count");
  }
  return a;
}

}  // namespace repgeo
