#include "repgeo/viz_export.hpp"

#include "repgeo/rgeo_format.hpp"
#include "repgeo/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace repgeo {
namespace detail {
extern const char* const kFamilyCsv;
}

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join_tags(const std::vector<std::string>& tags) {
  std::string out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (i) out += '|';
    out += tags[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string class_key(const FrameRow& r, const std::string& field) {
  if (field == "language") return r.language;
  if (field == "family") return r.family;
  if (field == "layer") return std::to_string(r.layer);
  if (field == "position") return std::to_string(r.position);
  if (field == "token_id") return std::to_string(r.token_id);
  if (field == "tags") return join_tags(r.tags);
  fail(Errc::invalid_argument, "unknown class field '" + field + "'");
}

}  // namespace

std::string to_string(AxisRole role) {
  switch (role) {
    case AxisRole::language_sensitive: return "language-sensitive";
    case AxisRole::position: return "position";
    case AxisRole::pos: return "pos";
    case AxisRole::custom: return "custom";
  }
  return "custom";
}

AxisRole parse_axis_role(const std::string& name) {
  if (name == "language-sensitive" || name == "language") return AxisRole::language_sensitive;
  if (name == "position") return AxisRole::position;
  if (name == "pos") return AxisRole::pos;
  if (name == "custom") return AxisRole::custom;
  fail(Errc::invalid_argument, "unknown axis role '" + name + "'");
}

std::string to_string(SensitivityLabel label) {
  switch (label) {
    case SensitivityLabel::neutral_low_var: return "neutral-low-var";
    case SensitivityLabel::neutral_high_var: return "neutral-high-var";
    case SensitivityLabel::sensitive_var_asymmetric: return "sensitive-var-asymmetric";
    case SensitivityLabel::sensitive_mean_shift: return "sensitive-mean-shift";
  }
  return "neutral-high-var";
}

AxisSource axis_from(const LdaAxes& axes, Eigen::Index column, AxisRole role, const std::string& axes_file) {
  if (column < 0 || column >= axes.count()) {
    fail(Errc::invalid_argument, "axis column " + std::to_string(column) + " out of range (have " +
                                     std::to_string(axes.count()) + ")");
  }
  return {axes_file, column, role, axes.w.col(column)};
}

ProjectionFrame build_frame(std::span<const AxisSource> sources, const ReprMatrix& x, std::optional<Vector> origin) {
  if (sources.empty()) fail(Errc::invalid_argument, "a frame needs at least one axis");
  const Eigen::Index d = x.dim();
  Matrix axes(d, static_cast<Eigen::Index>(sources.size()));
  for (std::size_t i = 0; i < sources.size(); ++i) {
    require_dims(sources[i].direction.size(), d, "build_frame (axis " + std::to_string(i) + ")");
    axes.col(static_cast<Eigen::Index>(i)) = sources[i].direction;
  }
  ProjectionFrame f;
  f.sources.assign(sources.begin(), sources.end());
  f.basis = orthonormalize_axes(axes);
  const Matrix rows = x.as_double();
  if (origin) {
    require_dims(origin->size(), d, "build_frame (origin)");
    f.origin = *origin;
  } else {
    f.origin = rows.rows() > 0 ? Vector(rows.colwise().mean().transpose()) : Vector::Zero(d);
  }
  const Matrix centered = rows.rowwise() - f.origin.transpose();
  f.coords = centered * f.basis;
  if (rows.rows() > 1) {
    const Matrix around_mean = rows.rowwise() - rows.colwise().mean();
    f.reference_variance = around_mean.squaredNorm() / static_cast<double>(rows.rows()) / static_cast<double>(d);
  }
  f.rows.reserve(x.meta.size());
  for (const auto& m : x.meta) {
    f.rows.push_back({m.language, language_family(m.language), m.layer, m.position, m.token_id, m.pos_tags});
  }
  return f;
}

std::vector<AxisDiagnostics> axis_diagnostics(const ProjectionFrame& frame, const std::string& class_field,
                                              const DiagnosticThresholds& thresholds) {
  if (frame.rows.size() != static_cast<std::size_t>(frame.coords.rows())) {
    fail(Errc::metadata_mismatch, "frame rows and coordinates disagree");
  }
  std::map<std::string, std::vector<Eigen::Index>> groups;
  for (std::size_t i = 0; i < frame.rows.size(); ++i) {
    groups[class_key(frame.rows[i], class_field)].push_back(static_cast<Eigen::Index>(i));
  }
  if (groups.empty()) fail(Errc::invalid_argument, "frame has no rows");

  std::vector<AxisDiagnostics> out;
  const double n_total = static_cast<double>(frame.rows.size());
  for (Eigen::Index a = 0; a < frame.coords.cols(); ++a) {
    AxisDiagnostics diag;
    diag.axis = static_cast<std::size_t>(a);
    if (static_cast<std::size_t>(a) < frame.sources.size()) diag.role = frame.sources[static_cast<std::size_t>(a)].role;
    const double grand = frame.coords.col(a).mean();
    double within_sum = 0.0;
    double between_sum = 0.0;
    double min_var = std::numeric_limits<double>::infinity();
    double max_var = 0.0;
    double min_mean = std::numeric_limits<double>::infinity();
    double max_mean = -std::numeric_limits<double>::infinity();
    for (const auto& [name, idx] : groups) {
      ClassMoments cm;
      cm.name = name;
      cm.count = idx.size();
      double s = 0.0;
      for (Eigen::Index i : idx) s += frame.coords(i, a);
      cm.mean = s / static_cast<double>(idx.size());
      double ss = 0.0;
      for (Eigen::Index i : idx) ss += (frame.coords(i, a) - cm.mean) * (frame.coords(i, a) - cm.mean);
      cm.variance = ss / static_cast<double>(idx.size());
      within_sum += ss;
      between_sum += static_cast<double>(idx.size()) * (cm.mean - grand) * (cm.mean - grand);
      min_var = std::min(min_var, cm.variance);
      max_var = std::max(max_var, cm.variance);
      min_mean = std::min(min_mean, cm.mean);
      max_mean = std::max(max_mean, cm.mean);
      diag.classes.push_back(std::move(cm));
    }
    const double pooled_var = within_sum / n_total;
    const double pooled_sd = std::sqrt(pooled_var);
    diag.between_within_ratio =
        within_sum > 0.0 ? between_sum / within_sum : (between_sum > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    diag.max_mean_gap = pooled_sd > 0.0 ? (max_mean - min_mean) / pooled_sd
                                        : (max_mean > min_mean ? std::numeric_limits<double>::infinity() : 0.0);
    diag.variance_ratio =
        min_var > 0.0 ? max_var / min_var : (max_var > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);

    if (diag.variance_ratio >= thresholds.variance_ratio) {
      diag.label = SensitivityLabel::sensitive_var_asymmetric;
    } else if (diag.max_mean_gap >= thresholds.mean_gap) {
      diag.label = SensitivityLabel::sensitive_mean_shift;
    } else if (pooled_var < thresholds.low_variance * frame.reference_variance) {
      diag.label = SensitivityLabel::neutral_low_var;
    } else {
      diag.label = SensitivityLabel::neutral_high_var;
    }
    out.push_back(std::move(diag));
  }
  return out;
}

FrameFormat frame_format_for(const fs::path& path) {
  return path.extension() == ".json" ? FrameFormat::json : FrameFormat::csv;
}

void export_frame(const ProjectionFrame& frame, const fs::path& path, FrameFormat format,
                  std::optional<std::size_t> max_rows, std::uint64_t seed) {
  if (frame.rows.size() != static_cast<std::size_t>(frame.coords.rows())) {
    fail(Errc::metadata_mismatch, "frame rows and coordinates disagree");
  }
  std::vector<std::size_t> order;
  if (max_rows && *max_rows < frame.rows.size()) {
    order = sample_indices(frame.rows.size(), *max_rows, seed);
    std::sort(order.begin(), order.end());
  } else {
    order.resize(frame.rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  const Eigen::Index m = frame.coords.cols();

  if (format == FrameFormat::json) {
    json axes = json::array();
    for (Eigen::Index a = 0; a < m; ++a) {
      json entry = {{"name", "c" + std::to_string(a + 1)}};
      if (static_cast<std::size_t>(a) < frame.sources.size()) {
        const auto& s = frame.sources[static_cast<std::size_t>(a)];
        entry["role"] = to_string(s.role);
        entry["source"] = s.axes_file;
        entry["column"] = s.column;
      }
      axes.push_back(std::move(entry));
    }
    json rows = json::array();
    for (std::size_t i : order) {
      const auto& r = frame.rows[i];
      std::vector<double> c(static_cast<std::size_t>(m));
      for (Eigen::Index a = 0; a < m; ++a) c[static_cast<std::size_t>(a)] = frame.coords(static_cast<Eigen::Index>(i), a);
      rows.push_back({{"language", r.language},
                      {"family", r.family},
                      {"layer", r.layer},
                      {"position", r.position},
                      {"token_id", r.token_id},
                      {"tags", r.tags},
                      {"coords", c}});
    }
    json j = {{"axes", axes}, {"rows", rows}};
    write_file_atomic(path, j.dump() + "\n");
    return;
  }

  std::ostringstream out;
  out << "# axes:";
  for (Eigen::Index a = 0; a < m; ++a) {
    out << (a ? ";" : " ") << 'c' << a + 1 << '=';
    if (static_cast<std::size_t>(a) < frame.sources.size()) {
      const auto& s = frame.sources[static_cast<std::size_t>(a)];
      out << to_string(s.role) << '@' << s.axes_file << '#' << s.column;
    } else {
      out << "custom@#0";
    }
  }
  out << '\n' << "language,family,layer,position,token_id,tags";
  for (Eigen::Index a = 0; a < m; ++a) out << ",c" << a + 1;
  out << '\n';
  for (std::size_t i : order) {
    const auto& r = frame.rows[i];
    out << r.language << ',' << r.family << ',' << r.layer << ',' << r.position << ',' << r.token_id << ','
        << join_tags(r.tags);
    for (Eigen::Index a = 0; a < m; ++a) out << ',' << format_double(frame.coords(static_cast<Eigen::Index>(i), a));
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

ProjectionFrame import_frame(const fs::path& path, FrameFormat format) {
  const std::string text = read_file(path);
  ProjectionFrame f;
  if (format == FrameFormat::json) {
    try {
      const json j = json::parse(text);
      for (const auto& a : j.at("axes")) {
        AxisSource s;
        s.role = parse_axis_role(a.value("role", std::string("custom")));
        s.axes_file = a.value("source", std::string{});
        s.column = a.value("column", Eigen::Index{0});
        f.sources.push_back(std::move(s));
      }
      const auto& rows = j.at("rows");
      f.coords.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(f.sources.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        f.rows.push_back({r.at("language").get<std::string>(), r.at("family").get<std::string>(), r.at("layer").get<int>(),
                          r.at("position").get<int>(), r.at("token_id").get<std::int64_t>(),
                          r.at("tags").get<std::vector<std::string>>()});
        const auto c = r.at("coords").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(c.size()) != f.coords.cols()) {
          fail(Errc::metadata_mismatch, path.string() + ": row " + std::to_string(i) + " has wrong coordinate count");
        }
        for (std::size_t a = 0; a < c.size(); ++a) f.coords(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = c[a];
      }
    } catch (const json::exception& e) {
      fail(Errc::metadata_mismatch, path.string() + ": " + e.what());
    }
    return f;
  }

  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> coords;
  bool have_header = false;
  std::size_t m = 0;
  while (std::getline(in, line)) {
    if (line.rfind("# axes:", 0) == 0) {
      const std::string body = line.substr(7);
      for (auto spec : split(body, ';')) {
        spec.erase(0, spec.find_first_not_of(' '));
        const auto eq = spec.find('=');
        const auto at = spec.find('@');
        const auto hash = spec.rfind('#');
        if (eq == std::string::npos || at == std::string::npos || hash == std::string::npos) {
          fail(Errc::metadata_mismatch, path.string() + ": malformed axis header '" + spec + "'");
        }
        AxisSource s;
        s.role = parse_axis_role(spec.substr(eq + 1, at - eq - 1));
        s.axes_file = spec.substr(at + 1, hash - at - 1);
        s.column = std::stol(spec.substr(hash + 1));
        f.sources.push_back(std::move(s));
      }
      continue;
    }
    if (!have_header) {
      const auto cols = split(line, ',');
      if (cols.size() < 6 || cols[0] != "language") fail(Errc::metadata_mismatch, path.string() + ": bad header");
      m = cols.size() - 6;
      have_header = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 6 + m) {
      fail(Errc::metadata_mismatch, path.string() + ": row has " + std::to_string(cells.size()) + " fields");
    }
    FrameRow r{cells[0], cells[1], std::stoi(cells[2]), std::stoi(cells[3]), std::stoll(cells[4]),
               cells[5].empty() ? std::vector<std::string>{} : split(cells[5], '|')};
    f.rows.push_back(std::move(r));
    std::vector<double> c(m);
    for (std::size_t a = 0; a < m; ++a) c[a] = std::stod(cells[6 + a]);
    coords.push_back(std::move(c));
  }
  if (!have_header) fail(Errc::metadata_mismatch, path.string() + ": missing header");
  f.coords.resize(static_cast<Eigen::Index>(coords.size()), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < coords.size(); ++i)
    for (std::size_t a = 0; a < m; ++a) f.coords(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = coords[i][a];
  return f;
}

const std::vector<std::pair<std::string, std::string>>& language_family_table() {
  static const auto table = [] {
    std::vector<std::pair<std::string, std::string>> t;
    std::istringstream in(detail::kFamilyCsv);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line.rfind("iso_code", 0) == 0) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      t.emplace_back(line.substr(0, comma), line.substr(comma + 1));
    }
    return t;
  }();
  return table;
}

std::string language_family(const std::string& iso_code) {
  for (const auto& [code, family] : language_family_table()) {
    if (code == iso_code) return family;
  }
  return "Unknown";
}

}  // namespace repgeo
