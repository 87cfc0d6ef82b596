// repgeo: batch driver over <root>/<lang>/<layer>.rgeo inputs.

#include "repgeo/lda_axes.hpp"
#include "repgeo/moments.hpp"
#include "repgeo/parallel.hpp"
#include "repgeo/rgeo_format.hpp"
#include "repgeo/rng.hpp"
#include "repgeo/spd_geometry.hpp"
#include "repgeo/subspace.hpp"
#include "repgeo/viz_export.hpp"
#include "repgeo/vocab_stats.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace repgeo;

namespace {

struct Options {
  std::string root;
  std::string out = "repgeo_out";
  std::vector<int> layers;
  std::vector<std::string> languages;
  double variance_fraction = 0.9;
  int seeds = 16;
  std::uint64_t base_seed = 0;
  double ridge = kDefaultRidge;
  double shrinkage = kDefaultShrinkage;  // relative to trace(S_W) / d

  // fit-lda
  std::string labels = "language";
  std::size_t samples = 0;  // 0 = default for the label kind
  int bucket_size = 16;
  std::vector<std::string> tags;

  // export-intervention
  std::string eval_language;
  std::string target_language;
  std::string kind = "shift+proj";

  // export-frame
  std::vector<std::string> axes;
  std::size_t per_language = 1000;
  std::size_t max_rows = 0;
  std::string class_field = "language";
  std::string format = "csv";

  // vocab-report
  std::string counts_dir;
  double threshold = kDefaultVocabThreshold;
  double common_fraction = kDefaultCommonFraction;
  std::string predictions;
  std::string ratio_pairs;
};

constexpr std::size_t kLanguageSamples = 4000;
constexpr std::size_t kPositionSamples = 8000;
constexpr std::size_t kPosTagSamples = 8000;

std::string sha256_hex(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string layer_tag(int layer) { return "L" + std::to_string(layer); }

fs::path input_path(const Options& o, const std::string& lang, int layer) {
  return fs::path(o.root) / lang / (std::to_string(layer) + ".rgeo");
}

// Languages are subdirectories of root; layers are <n>.rgeo files found in any of them.
void discover_inputs(Options& o) {
  if (o.root.empty()) fail(Errc::invalid_argument, "--root is required");
  if (!fs::is_directory(o.root)) fail(Errc::not_found, "input root " + o.root + " is not a directory");
  if (o.languages.empty()) {
    for (const auto& e : fs::directory_iterator(o.root))
      if (e.is_directory()) o.languages.push_back(e.path().filename().string());
    std::sort(o.languages.begin(), o.languages.end());
  }
  if (o.layers.empty()) {
    std::set<int> found;
    for (const auto& lang : o.languages) {
      const fs::path dir = fs::path(o.root) / lang;
      if (!fs::is_directory(dir)) continue;
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".rgeo") continue;
        const auto stem = e.path().stem().string();
        if (!stem.empty() && std::all_of(stem.begin(), stem.end(), ::isdigit)) found.insert(std::stoi(stem));
      }
    }
    o.layers.assign(found.begin(), found.end());
  }
  if (o.languages.empty()) fail(Errc::not_found, "no languages under " + o.root);
  if (o.layers.empty()) fail(Errc::not_found, "no layer files under " + o.root);
}

void require_all(const std::vector<fs::path>& paths, const std::string& what) {
  std::vector<std::string> missing;
  for (const auto& p : paths)
    if (!fs::exists(p)) missing.push_back(p.string());
  if (missing.empty()) return;
  std::string msg = std::to_string(missing.size()) + " missing " + what + ":";
  for (const auto& m : missing) msg += "\n  " + m;
  fail(Errc::not_found, msg);
}

void require_inputs(const Options& o) {
  std::vector<fs::path> paths;
  for (const auto& lang : o.languages)
    for (int layer : o.layers) paths.push_back(input_path(o, lang, layer));
  require_all(paths, "input file(s)");
}

fs::path subspace_path(const Options& o, const std::string& lang, int layer) {
  return fs::path(o.out) / "subspaces" / lang / (layer_tag(layer) + ".subspace.json");
}
fs::path covariance_path(const Options& o, const std::string& lang, int layer) {
  return fs::path(o.out) / "covariances" / lang / (layer_tag(layer) + ".cov.json");
}
fs::path curve_path(const Options& o, CalibrationKind kind, int layer) {
  return fs::path(o.out) / "calibration" / (layer_tag(layer) + "." + to_string(kind) + ".json");
}

// Languages/layers with fitted outputs when none were given on the command line.
void discover_outputs(Options& o) {
  const fs::path dir = fs::path(o.out) / "covariances";
  if (o.languages.empty() && fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory()) o.languages.push_back(e.path().filename().string());
    std::sort(o.languages.begin(), o.languages.end());
  }
  if (o.layers.empty() && !o.languages.empty()) {
    std::set<int> found;
    const fs::path lang_dir = dir / o.languages.front();
    if (fs::is_directory(lang_dir)) {
      for (const auto& e : fs::directory_iterator(lang_dir)) {
        const auto name = e.path().filename().string();
        if (name.size() > 9 && name[0] == 'L' && name.ends_with(".cov.json")) {
          found.insert(std::stoi(name.substr(1, name.size() - 10)));
        }
      }
    }
    o.layers.assign(found.begin(), found.end());
  }
  if (o.languages.empty() || o.layers.empty()) {
    fail(Errc::not_found, "no fitted covariances under " + dir.string() + "; run fit-subspaces first");
  }
}

void write_manifest(const Options& o, const std::string& command, const json& config, const json& extra) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["config_hash"] = sha256_hex(config.dump());
  m["base_seed"] = o.base_seed;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  const fs::path path = fs::path(o.out) / "manifests" / (command + ".json");
  fs::create_directories(path.parent_path());
  write_file_atomic(path, m.dump(2) + "\n");
}

json base_config(const Options& o) {
  return {{"root", o.root}, {"languages", o.languages}, {"layers", o.layers}};
}

void ensure_parent(const fs::path& p) { fs::create_directories(p.parent_path()); }

// ---- fit-subspaces -------------------------------------------------------

int cmd_fit_subspaces(Options o) {
  discover_inputs(o);
  require_inputs(o);
  if (!(o.variance_fraction > 0.0 && o.variance_fraction <= 1.0)) {
    fail(Errc::invalid_argument, "--variance-fraction must lie in (0, 1]");
  }
  struct Task {
    std::string lang;
    int layer;
  };
  std::vector<Task> tasks;
  for (const auto& lang : o.languages)
    for (int layer : o.layers) tasks.push_back({lang, layer});

  struct Result {
    std::size_t rows = 0;
    Eigen::Index dim = 0;
    Eigen::Index k = 0;
    double captured = 0.0;
  };
  std::vector<Result> results(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t i) {
    const auto& t = tasks[i];
    const auto moments = MomentAccumulator::from_file(input_path(o, t.lang, t.layer));
    auto s = fit_subspace(moments, o.variance_fraction);
    s.language = t.lang;
    s.layer = t.layer;
    const fs::path sp = subspace_path(o, t.lang, t.layer);
    ensure_parent(sp);
    write_subspace(s, sp);
    auto cov = covariance_of(moments);
    cov.k.source = t.lang + "/" + std::to_string(t.layer);
    const fs::path cp = covariance_path(o, t.lang, t.layer);
    ensure_parent(cp);
    write_spd_matrix(cov.k, cp);
    results[i] = {moments.count(), moments.dim(), s.rank(), s.captured_fraction};
  });

  std::ostringstream csv;
  csv << "language,layer,rows,dim,k,captured_fraction\n";
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    csv << tasks[i].lang << ',' << tasks[i].layer << ',' << results[i].rows << ',' << results[i].dim << ','
        << results[i].k << ',' << format_double(results[i].captured) << '\n';
  }
  const fs::path summary = fs::path(o.out) / "subspace_summary.csv";
  ensure_parent(summary);
  write_file_atomic(summary, csv.str());

  json config = base_config(o);
  config["variance_fraction"] = o.variance_fraction;
  write_manifest(o, "fit-subspaces", config, {{"outputs", {{"summary", summary.string()}}}});
  std::cout << "fitted " << tasks.size() << " subspaces; summary in " << summary.string() << "\n";
  return 0;
}

// ---- calibrate ------------------------------------------------------------

std::vector<SpdMatrix> load_ridged(const Options& o, int layer) {
  std::vector<SpdMatrix> ks(o.languages.size());
  parallel_for(ks.size(), [&](std::size_t i) {
    ks[i] = with_ridge(read_spd_matrix(covariance_path(o, o.languages[i], layer)), o.ridge);
  });
  return ks;
}

void require_covariances(const Options& o) {
  std::vector<fs::path> paths;
  for (const auto& lang : o.languages)
    for (int layer : o.layers) paths.push_back(covariance_path(o, lang, layer));
  require_all(paths, "covariance file(s); run fit-subspaces first");
}

int cmd_calibrate(Options o) {
  discover_outputs(o);
  require_covariances(o);
  json seeds = json::object();
  for (int layer : o.layers) {
    const auto ks = load_ridged(o, layer);
    const std::uint64_t layer_seed = derive_seed(o.base_seed, {static_cast<std::uint64_t>(layer)});
    seeds[layer_tag(layer)] = layer_seed;
    for (auto kind : {CalibrationKind::rotation, CalibrationKind::scaling}) {
      const auto curve = build_calibration_curve(ks, kind, o.seeds, layer_seed, layer);
      const fs::path p = curve_path(o, kind, layer);
      ensure_parent(p);
      write_calibration_curve(curve, p);
      std::cout << layer_tag(layer) << ' ' << to_string(kind) << ": " << curve.raw_violations()
                << " raw violations over " << curve.grid.size() << " grid points\n";
    }
  }
  json config = {{"languages", o.languages}, {"layers", o.layers}, {"seeds", o.seeds}, {"ridge", o.ridge},
                 {"base_seed", o.base_seed}};
  write_manifest(o, "calibrate", config, {{"layer_seeds", seeds}, {"num_seeds", o.seeds}});
  return 0;
}

// ---- distance-table -------------------------------------------------------

int cmd_distance_table(Options o) {
  discover_outputs(o);
  require_covariances(o);
  std::vector<fs::path> curves;
  for (int layer : o.layers)
    for (auto kind : {CalibrationKind::rotation, CalibrationKind::scaling}) curves.push_back(curve_path(o, kind, layer));
  require_all(curves, "calibration curve(s); run calibrate first");

  const fs::path dir = fs::path(o.out) / "distances";
  fs::create_directories(dir);
  std::ostringstream summary;
  summary << "layer,mean_distance,mean_theta_deg,mean_gamma,saturated_pairs\n";
  for (int layer : o.layers) {
    const auto ks = load_ridged(o, layer);
    const Matrix dist = pairwise_distances(ks);
    const auto rot = read_calibration_curve(curve_path(o, CalibrationKind::rotation, layer));
    const auto sca = read_calibration_curve(curve_path(o, CalibrationKind::scaling, layer));
    const auto n = dist.rows();
    Matrix theta = Matrix::Zero(n, n);
    Matrix gamma = Matrix::Ones(n, n);
    double sum_d = 0.0, sum_t = 0.0, sum_g = 0.0;
    std::size_t pairs = 0, saturated = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto t = invert_calibration(rot, dist(i, j));
        const auto g = invert_calibration(sca, dist(i, j));
        theta(i, j) = t.value;
        gamma(i, j) = g.value;
        if (i < j) {
          sum_d += dist(i, j);
          sum_t += t.value;
          sum_g += g.value;
          ++pairs;
          saturated += (t.saturated || g.saturated) ? 1 : 0;
        }
      }
    }
    write_labeled_matrix_csv(dist, o.languages, dir / (layer_tag(layer) + ".distance.csv"));
    write_labeled_matrix_csv(theta, o.languages, dir / (layer_tag(layer) + ".theta.csv"));
    write_labeled_matrix_csv(gamma, o.languages, dir / (layer_tag(layer) + ".gamma.csv"));
    const double np = static_cast<double>(std::max<std::size_t>(pairs, 1));
    summary << layer << ',' << format_double(sum_d / np) << ',' << format_double(sum_t / np) << ','
            << format_double(sum_g / np) << ',' << saturated << '\n';
    std::cout << layer_tag(layer) << ": mean distance " << sum_d / np << ", mean theta " << sum_t / np
              << " deg, mean gamma " << sum_g / np << "\n";
  }
  write_file_atomic(dir / "summary.csv", summary.str());
  json config = {{"languages", o.languages}, {"layers", o.layers}, {"ridge", o.ridge}};
  write_manifest(o, "distance-table", config, json::object());
  return 0;
}

// ---- export-intervention --------------------------------------------------

int cmd_export_intervention(Options o) {
  if (o.eval_language.empty() || o.target_language.empty()) {
    fail(Errc::invalid_argument, "--eval and --target are required");
  }
  if (o.layers.empty()) fail(Errc::invalid_argument, "--layers is required");
  const auto kind = parse_intervention_kind(o.kind);
  std::vector<fs::path> needed;
  for (int layer : o.layers) {
    needed.push_back(subspace_path(o, o.eval_language, layer));
    needed.push_back(subspace_path(o, o.target_language, layer));
  }
  require_all(needed, "subspace file(s); run fit-subspaces first");
  std::string kind_tag = o.kind;
  std::replace(kind_tag.begin(), kind_tag.end(), '+', '_');
  json outputs = json::array();
  for (int layer : o.layers) {
    const auto s_a = read_subspace(subspace_path(o, o.eval_language, layer));
    const auto s_b = read_subspace(subspace_path(o, o.target_language, layer));
    const auto map = compose_intervention(kind, s_b, s_a.mu,
                                          o.kind + " " + o.eval_language + "->" + o.target_language + " layer " +
                                              std::to_string(layer));
    const fs::path p = fs::path(o.out) / "maps" /
                       (kind_tag + "." + o.eval_language + "-" + o.target_language + "." + layer_tag(layer) + ".map.json");
    ensure_parent(p);
    write_affine_map(map, p);
    outputs.push_back(p.string());
    std::cout << p.string() << "\n";
  }
  json config = {{"eval", o.eval_language}, {"target", o.target_language}, {"kind", o.kind}, {"layers", o.layers}};
  write_manifest(o, "export-intervention", config, {{"outputs", outputs}});
  return 0;
}

// ---- fit-lda --------------------------------------------------------------

// Uniform subsample of each class down to `per_class` rows.
LabeledSet balance(const LabeledSet& s, std::size_t per_class, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> members(s.class_names.size());
  for (std::size_t i = 0; i < s.labels.size(); ++i) members[static_cast<std::size_t>(s.labels[i])].push_back(i);
  std::vector<std::size_t> keep;
  std::vector<int> labels;
  for (std::size_t c = 0; c < members.size(); ++c) {
    const auto pick = sample_indices(members[c].size(), std::min(per_class, members[c].size()), derive_seed(seed, {c}));
    for (std::size_t p : pick) {
      keep.push_back(members[c][p]);
      labels.push_back(static_cast<int>(c));
    }
  }
  LabeledSet out;
  out.x = select_rows(s.x, keep);
  out.labels = std::move(labels);
  out.class_names = s.class_names;
  return out;
}

// Drops classes with fewer than two rows (e.g. a sparsely populated last position bucket).
LabeledSet drop_small_classes(const LabeledSet& s) {
  std::vector<std::size_t> counts(s.class_names.size(), 0);
  for (int l : s.labels) ++counts[static_cast<std::size_t>(l)];
  std::vector<int> remap(s.class_names.size(), -1);
  LabeledSet out;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] >= 2) {
      remap[c] = static_cast<int>(out.class_names.size());
      out.class_names.push_back(s.class_names[c]);
    }
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    const int r = remap[static_cast<std::size_t>(s.labels[i])];
    if (r >= 0) {
      keep.push_back(i);
      out.labels.push_back(r);
    }
  }
  out.x = select_rows(s.x, keep);
  return out;
}

int cmd_fit_lda(Options o) {
  discover_inputs(o);
  require_inputs(o);
  json outputs = json::array();
  for (int layer : o.layers) {
    const std::uint64_t seed = derive_seed(o.base_seed, {static_cast<std::uint64_t>(layer)});
    std::vector<ReprMatrix> parts(o.languages.size());
    parallel_for(parts.size(), [&](std::size_t i) { parts[i] = read_repr_matrix(input_path(o, o.languages[i], layer)); });

    LabeledSet s;
    if (o.labels == "language") {
      const std::size_t n = o.samples ? o.samples : kLanguageSamples;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        parts[i] = sample_rows(parts[i], std::min<std::size_t>(n, static_cast<std::size_t>(parts[i].rows())),
                               derive_seed(seed, {i}));
      }
      s = label_by_source(parts, o.languages);
    } else if (o.labels == "position") {
      s = balance(drop_small_classes(bucket_positions(concat_rows(parts), o.bucket_size)),
                  o.samples ? o.samples : kPositionSamples, seed);
    } else if (o.labels == "pos") {
      std::size_t dropped = 0;
      s = balance(label_by_pos_tag(concat_rows(parts), o.tags, &dropped), o.samples ? o.samples : kPosTagSamples, seed);
      std::cout << layer_tag(layer) << ": dropped " << dropped << " rows matching several tags\n";
    } else {
      fail(Errc::invalid_argument, "--labels must be language, position or pos");
    }

    const auto scatter = class_scatter(s);
    const double eps = o.shrinkage * scatter.within.trace() / static_cast<double>(scatter.within.rows());
    const auto axes = fit_lda(s, eps);
    const fs::path p = fs::path(o.out) / "axes" / (o.labels + "." + layer_tag(layer) + ".axes.json");
    ensure_parent(p);
    write_lda_axes(axes, p);

    json report = {{"layer", layer}, {"labels", o.labels}, {"classes", s.class_names}, {"rows", s.x.rows()}};
    json ratios = json::array();
    for (Eigen::Index a = 0; a < axes.count(); ++a) ratios.push_back(separation_ratio(s, axes.w.col(a)));
    report["separation_ratio"] = ratios;
    report["eigenvalues"] = std::vector<double>(axes.eigenvalues.data(), axes.eigenvalues.data() + axes.count());
    const fs::path rp = p.parent_path() / (o.labels + "." + layer_tag(layer) + ".report.json");
    write_file_atomic(rp, report.dump(2) + "\n");
    outputs.push_back(p.string());
    std::cout << p.string() << ": " << axes.count() << " axes, leading separation ratio "
              << (ratios.empty() ? 0.0 : ratios.front().get<double>()) << "\n";
  }
  json config = base_config(o);
  config["labels"] = o.labels;
  config["samples"] = o.samples;
  config["bucket_size"] = o.bucket_size;
  config["tags"] = o.tags;
  config["shrinkage"] = o.shrinkage;
  config["base_seed"] = o.base_seed;
  write_manifest(o, "fit-lda-" + o.labels, config, {{"outputs", outputs}});
  return 0;
}

// ---- export-frame ---------------------------------------------------------

// "file:column:role" with column and role optional.
AxisSource parse_axis_spec(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.empty() || parts.size() > 3) fail(Errc::invalid_argument, "axis spec '" + spec + "' is not file[:column[:role]]");
  const auto axes = read_lda_axes(parts[0]);
  const Eigen::Index column = parts.size() > 1 ? std::stol(parts[1]) : 0;
  const AxisRole role = parts.size() > 2 ? parse_axis_role(parts[2]) : AxisRole::custom;
  return axis_from(axes, column, role, fs::path(parts[0]).filename().string());
}

int cmd_export_frame(Options o) {
  if (o.axes.empty()) fail(Errc::invalid_argument, "at least one --axis is required");
  discover_inputs(o);
  require_inputs(o);
  std::vector<AxisSource> sources;
  for (const auto& spec : o.axes) sources.push_back(parse_axis_spec(spec));
  const FrameFormat fmt = o.format == "json" ? FrameFormat::json : FrameFormat::csv;
  json outputs = json::array();
  for (int layer : o.layers) {
    const std::uint64_t seed = derive_seed(o.base_seed, {static_cast<std::uint64_t>(layer)});
    std::vector<ReprMatrix> parts(o.languages.size());
    parallel_for(parts.size(), [&](std::size_t i) {
      auto x = read_repr_matrix(input_path(o, o.languages[i], layer));
      parts[i] = sample_rows(x, std::min<std::size_t>(o.per_language, static_cast<std::size_t>(x.rows())),
                             derive_seed(seed, {i}));
    });
    const auto frame = build_frame(sources, concat_rows(parts));
    const fs::path p = fs::path(o.out) / "frames" / (layer_tag(layer) + ".frame." + o.format);
    ensure_parent(p);
    export_frame(frame, p, fmt, o.max_rows ? std::optional<std::size_t>(o.max_rows) : std::nullopt, seed);

    json diag = json::array();
    for (const auto& d : axis_diagnostics(frame, o.class_field)) {
      json classes = json::array();
      for (const auto& c : d.classes) {
        classes.push_back({{"name", c.name}, {"count", c.count}, {"mean", c.mean}, {"variance", c.variance}});
      }
      diag.push_back({{"axis", "c" + std::to_string(d.axis + 1)},
                      {"role", to_string(d.role)},
                      {"label", to_string(d.label)},
                      {"between_within_ratio", d.between_within_ratio},
                      {"max_mean_gap", d.max_mean_gap},
                      {"variance_ratio", d.variance_ratio},
                      {"classes", classes}});
      std::cout << layer_tag(layer) << " c" << d.axis + 1 << " (" << to_string(d.role) << "): " << to_string(d.label)
                << "\n";
    }
    write_file_atomic(fs::path(o.out) / "frames" / (layer_tag(layer) + ".diagnostics.json"), diag.dump(2) + "\n");
    outputs.push_back(p.string());
  }
  json config = base_config(o);
  config["axes"] = o.axes;
  config["per_language"] = o.per_language;
  config["max_rows"] = o.max_rows;
  config["class_field"] = o.class_field;
  config["format"] = o.format;
  config["base_seed"] = o.base_seed;
  write_manifest(o, "export-frame", config, {{"outputs", outputs}});
  return 0;
}

// ---- vocab-report ---------------------------------------------------------

std::vector<TokenId> read_predictions(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<TokenId> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    out.push_back(std::stoll(line));
  }
  return out;
}

fs::path counts_file(const Options& o, const std::string& lang) {
  const fs::path csv = fs::path(o.counts_dir) / (lang + ".csv");
  return fs::exists(csv) ? csv : fs::path(o.counts_dir) / (lang + ".json");
}

int cmd_vocab_report(Options o) {
  if (o.counts_dir.empty()) fail(Errc::invalid_argument, "--counts-dir is required");
  if (o.languages.empty()) fail(Errc::invalid_argument, "--languages is required");
  std::vector<fs::path> files;
  for (const auto& lang : o.languages) files.push_back(counts_file(o, lang));
  require_all(files, "token count file(s)");

  std::vector<VocabSet> vocabs;
  json sizes = json::object();
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto c = read_token_counts(files[i]);
    vocabs.push_back(build_vocab(c.counts, c.total, o.threshold, o.languages[i]));
    sizes[o.languages[i]] = vocabs.back().token_ids.size();
  }
  const TokenSet common = common_tokens(vocabs, o.common_fraction);
  json report = {{"threshold", o.threshold},
                 {"common_fraction", o.common_fraction},
                 {"vocab_sizes", sizes},
                 {"common_size", common.size()}};

  if (!o.predictions.empty()) {
    auto find = [&](const std::string& lang) -> const VocabSet& {
      for (const auto& v : vocabs)
        if (v.language == lang) return v;
      fail(Errc::invalid_argument, "language " + lang + " is not among --languages");
    };
    const auto preds = read_predictions(o.predictions);
    const auto r = token_proportions(preds, find(o.eval_language), find(o.target_language), common);
    report["proportions"] = {{"eval", r.eval_language},         {"target", r.target_language},
                             {"n", r.n_predictions},            {"p_eval", r.p_eval},
                             {"p_target", r.p_target},          {"p_common", r.p_common},
                             {"p_other", r.p_other},            {"p_both", r.p_both},
                             {"p_eval_only", r.p_eval_only},    {"p_target_only", r.p_target_only}};
  }
  if (!o.ratio_pairs.empty()) {
    std::istringstream in(read_file(o.ratio_pairs));
    std::vector<std::pair<double, double>> pairs;
    std::string line;
    while (std::getline(in, line)) {
      const auto comma = line.find(',');
      if (line.empty() || comma == std::string::npos || !(std::isdigit(line[0]) || line[0] == '.')) continue;
      pairs.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    }
    const auto g = geometric_mean_ratio(pairs);
    report["perplexity_ratio"] = {{"pairs", pairs.size()}, {"geometric_mean", g.mean}, {"geometric_sd", g.gsd}};
  }
  const fs::path p = fs::path(o.out) / "vocab_report.json";
  ensure_parent(p);
  write_file_atomic(p, report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  json config = {{"counts_dir", o.counts_dir}, {"languages", o.languages}, {"threshold", o.threshold},
                 {"common_fraction", o.common_fraction}, {"predictions", o.predictions},
                 {"eval", o.eval_language}, {"target", o.target_language}, {"ratio_pairs", o.ratio_pairs}};
  write_manifest(o, "vocab-report", config, {{"outputs", {p.string()}}});
  return 0;
}

void add_selection(CLI::App* cmd, Options& o, bool needs_root) {
  auto* root = cmd->add_option("--root", o.root, "input directory laid out as <root>/<lang>/<layer>.rgeo");
  if (needs_root) root->required();
  cmd->add_option("--layers", o.layers, "layers to process (default: all found)")->delimiter(',');
  cmd->add_option("--languages", o.languages, "languages to process (default: all found)")->delimiter(',');
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_option("--base-seed", o.base_seed, "base seed for every derived random stream")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"repgeo: representation geometry pipeline"};
  app.require_subcommand(1);
  Options o;

  auto* fit = app.add_subcommand("fit-subspaces", "fit affine subspaces and covariances per (language, layer)");
  add_selection(fit, o, true);
  fit->add_option("--variance-fraction", o.variance_fraction, "variance captured by each subspace")->capture_default_str();

  auto* cal = app.add_subcommand("calibrate", "build rotation and scaling calibration curves per layer");
  add_selection(cal, o, false);
  cal->add_option("--seeds", o.seeds, "random replicates per matrix and grid point")->capture_default_str();
  cal->add_option("--ridge", o.ridge, "relative ridge added before distances")->capture_default_str();

  auto* dist = app.add_subcommand("distance-table", "pairwise distances with analogous rotation and scaling tables");
  add_selection(dist, o, false);
  dist->add_option("--ridge", o.ridge, "relative ridge added before distances")->capture_default_str();

  auto* inter = app.add_subcommand("export-intervention", "write the affine map for an eval -> target intervention");
  add_selection(inter, o, false);
  inter->add_option("--eval", o.eval_language, "language of the evaluated text")->required();
  inter->add_option("--target", o.target_language, "language whose subspace is used")->required();
  inter->add_option("--kind", o.kind, "shift, proj or shift+proj")->capture_default_str();

  auto* lda = app.add_subcommand("fit-lda", "fit LDA axes for language, position or POS classes");
  add_selection(lda, o, true);
  lda->add_option("--labels", o.labels, "language, position or pos")->capture_default_str();
  lda->add_option("--samples", o.samples, "rows per class (default 4000 language, 8000 position/pos)");
  lda->add_option("--bucket-size", o.bucket_size, "positions per bucket")->capture_default_str();
  lda->add_option("--tags", o.tags, "POS tags used as classes")->delimiter(',');
  lda->add_option("--shrinkage", o.shrinkage, "shrinkage relative to trace(S_W)/d")->capture_default_str();

  auto* frame = app.add_subcommand("export-frame", "project representations onto LDA axes and export a frame");
  add_selection(frame, o, true);
  frame->add_option("--axis", o.axes, "axes file[:column[:role]], repeatable, in frame order")->required();
  frame->add_option("--per-language", o.per_language, "rows sampled per language")->capture_default_str();
  frame->add_option("--max-rows", o.max_rows, "row budget of the exported file (0 = all)");
  frame->add_option("--class-field", o.class_field, "field used to group rows for diagnostics")->capture_default_str();
  frame->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  auto* vocab = app.add_subcommand("vocab-report", "vocabulary sets, predicted-token proportions, perplexity ratios");
  vocab->add_option("--counts-dir", o.counts_dir, "directory with <lang>.csv or <lang>.json token counts")->required();
  vocab->add_option("--languages", o.languages, "languages")->delimiter(',')->required();
  vocab->add_option("--threshold", o.threshold, "minimum relative frequency")->capture_default_str();
  vocab->add_option("--common-fraction", o.common_fraction, "fraction of vocabularies for a common token")
      ->capture_default_str();
  vocab->add_option("--predictions", o.predictions, "predicted token ids, one per line");
  vocab->add_option("--eval", o.eval_language, "eval language for proportions");
  vocab->add_option("--target", o.target_language, "target language for proportions");
  vocab->add_option("--ratio-pairs", o.ratio_pairs, "CSV of projected,baseline perplexities");
  vocab->add_option("--out", o.out, "output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) return cmd_fit_subspaces(o);
    if (*cal) return cmd_calibrate(o);
    if (*dist) return cmd_distance_table(o);
    if (*inter) return cmd_export_intervention(o);
    if (*lda) return cmd_fit_lda(o);
    if (*frame) return cmd_export_frame(o);
    if (*vocab) return cmd_vocab_report(o);
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
