#include "repgeo/lda_axes.hpp"
#include "repgeo/rgeo_format.hpp"
#include "repgeo/spd_geometry.hpp"
#include "repgeo/subspace.hpp"
#include "repgeo/viz_export.hpp"

#include "../support/test_support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>

using namespace repgeo;
using namespace repgeo::testing;
namespace fs = std::filesystem;

#ifndef REPGEO_CLI_PATH
#error "REPGEO_CLI_PATH must point at the repgeo executable"
#endif

namespace {

struct RunResult {
  int status = 0;
  std::string output;
};

RunResult run(const std::string& args, const fs::path& log, const std::string& env = {}) {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(REPGEO_CLI_PATH) + " " + args + " > " +
                          log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.output = read_file(log);
  return r;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

ReprMatrix with_positions(const Matrix& rows, const std::string& lang, int layer) {
  auto x = to_repr(rows, lang, layer);
  x.has_pos_tags = true;
  for (std::size_t i = 0; i < x.meta.size(); ++i) {
    x.meta[i].position = static_cast<int>(i % 64);
    x.meta[i].token_id = static_cast<std::int64_t>(i % 50);
    x.meta[i].pos_tags = {i % 3 == 0 ? "NOUN" : "VERB"};
  }
  return x;
}

// Languages en/fr/de with distinct means, plus "dup" (a copy of en), "sc"
// (en with each principal variance scaled by 1.5^{+-2}) and "r1" (rank 1).
struct Corpus {
  TempDir dir{"cli"};
  fs::path root;
  fs::path out;
  Eigen::Index d = 8;

  Corpus() {
    root = dir / "reps";
    out = dir / "out";
    std::mt19937_64 gen(99);
    const Matrix mix = random_invertible(d, gen);
    for (int layer : {4, 5}) {
      Matrix en;
      for (const char* lang : {"en", "fr", "de"}) {
        Matrix rows = gaussian(600, d, gen) * mix;
        rows.rowwise() += (gaussian_vector(d, gen) * 6.0).transpose();
        if (std::string(lang) == "en") en = rows;
        write(rows, lang, layer);
      }
      write(en, "dup", layer);
      // Transform by Q diag(g) Q^T in the eigenbasis of the stored data's covariance.
      const Matrix stored = en.cast<float>().cast<double>();
      Eigen::SelfAdjointEigenSolver<Matrix> eig(batch_covariance(stored));
      Vector g(d);
      for (Eigen::Index i = 0; i < d; ++i) g(i) = i % 2 ? 1.5 : 1.0 / 1.5;
      const Matrix m = eig.eigenvectors() * g.asDiagonal() * eig.eigenvectors().transpose();
      write(stored * m, "sc", layer);
      Matrix r1 = gaussian(600, 1, gen) * gaussian(1, d, gen);
      r1.rowwise() += Vector::Constant(d, 2.0).transpose();
      write(r1, "r1", layer);
    }
  }

  void write(const Matrix& rows, const std::string& lang, int layer) const {
    fs::create_directories(root / lang);
    write_repr_matrix(with_positions(rows, lang, layer), root / lang / (std::to_string(layer) + ".rgeo"));
  }

  std::string common() const { return "--root " + root.string() + " --out " + out.string(); }
  fs::path log(const std::string& name) const { return dir / (name + ".log"); }
};

}  // namespace

TEST_CASE("full pipeline on synthetic languages") {
  Corpus c;

  SUBCASE("missing inputs are listed before anything runs") {
    const auto r = run("fit-subspaces " + c.common() + " --languages en,zz,yy --layers 4,9", c.log("missing2"));
    CHECK(r.status == 2);
    CHECK(r.output.find("5 missing input file(s)") != std::string::npos);
    for (const char* p : {"en/9.rgeo", "zz/4.rgeo", "zz/9.rgeo", "yy/4.rgeo", "yy/9.rgeo"}) {
      CHECK(r.output.find(p) != std::string::npos);
    }
    CHECK_FALSE(fs::exists(c.out / "subspace_summary.csv"));
  }

  SUBCASE("subspaces, calibration, distances and maps") {
    const std::string langs = " --languages en,fr,de,dup,sc,r1";
    REQUIRE(run("fit-subspaces " + c.common() + langs, c.log("fit")).status == 0);
    const auto summary = read_csv(c.out / "subspace_summary.csv");
    REQUIRE(summary.size() == 1 + 12);
    CHECK(summary[0] == std::vector<std::string>{"language", "layer", "rows", "dim", "k", "captured_fraction"});
    for (std::size_t i = 1; i < summary.size(); ++i) {
      if (summary[i][0] == "r1") CHECK(summary[i][4] == "1");
      CHECK(summary[i][2] == "600");
    }
    CHECK(fs::exists(c.out / "subspaces" / "fr" / "L5.subspace.json"));

    // Rerunning overwrites with identical bytes.
    const std::string first_basis = read_file(c.out / "subspaces" / "de" / "L4.subspace.basis.rgeo");
    const std::string first_manifest = read_file(c.out / "manifests" / "fit-subspaces.json");
    REQUIRE(run("fit-subspaces " + c.common() + langs, c.log("fit2")).status == 0);
    CHECK(read_file(c.out / "subspaces" / "de" / "L4.subspace.basis.rgeo") == first_basis);
    CHECK(read_file(c.out / "manifests" / "fit-subspaces.json") == first_manifest);
    const auto manifest = nlohmann::json::parse(first_manifest);
    CHECK(manifest.at("config_hash").get<std::string>().size() == 64);

    // A higher fraction never needs fewer axes.
    const fs::path out99 = c.dir / "out99";
    REQUIRE(run("fit-subspaces --root " + c.root.string() + " --out " + out99.string() + langs +
                    " --variance-fraction 0.99",
                c.log("fit99"))
                .status == 0);
    const auto summary99 = read_csv(out99 / "subspace_summary.csv");
    for (std::size_t i = 1; i < summary.size(); ++i) CHECK(std::stoi(summary99[i][4]) >= std::stoi(summary[i][4]));

    // distance-table refuses to run without curves.
    const auto no_curve = run("distance-table --out " + c.out.string(), c.log("nocurve"));
    CHECK(no_curve.status == 2);
    CHECK(no_curve.output.find("calibration curve") != std::string::npos);

    REQUIRE(run("calibrate --out " + c.out.string() + " --seeds 2 --base-seed 5", c.log("cal")).status == 0);
    REQUIRE(run("distance-table --out " + c.out.string(), c.log("dist")).status == 0);
    std::vector<std::string> labels;
    const Matrix dist = read_labeled_matrix_csv(c.out / "distances" / "L4.distance.csv", &labels);
    const Matrix theta = read_labeled_matrix_csv(c.out / "distances" / "L4.theta.csv");
    const Matrix gamma = read_labeled_matrix_csv(c.out / "distances" / "L4.gamma.csv");
    auto idx = [&](const std::string& l) {
      return static_cast<Eigen::Index>(std::find(labels.begin(), labels.end(), l) - labels.begin());
    };
    // Discovery sorts languages.
    CHECK(labels == std::vector<std::string>{"de", "dup", "en", "fr", "r1", "sc"});
    CHECK(dist(idx("en"), idx("dup")) == 0.0);
    CHECK(theta(idx("en"), idx("dup")) == 0.0);
    CHECK(gamma(idx("en"), idx("dup")) == 1.0);
    CHECK(std::abs(gamma(idx("en"), idx("sc")) - 1.5) <= 0.0100001);
    CHECK(dist(idx("en"), idx("sc")) == doctest::Approx(2.0 * std::sqrt(8.0) * std::log(1.5)).epsilon(1e-4));
    CHECK(fs::exists(c.out / "distances" / "summary.csv"));

    // Thread count does not change results.
    const std::string before = read_file(c.out / "distances" / "L5.distance.csv");
    const std::string curve_before = read_file(c.out / "calibration" / "L5.rotation.json");
    REQUIRE(run("calibrate --out " + c.out.string() + " --seeds 2 --base-seed 5", c.log("cal3"), "REPGEO_THREADS=3")
                .status == 0);
    REQUIRE(run("distance-table --out " + c.out.string(), c.log("dist3"), "REPGEO_THREADS=3").status == 0);
    CHECK(read_file(c.out / "distances" / "L5.distance.csv") == before);
    CHECK(read_file(c.out / "calibration" / "L5.rotation.json") == curve_before);

    // Interventions.
    REQUIRE(run("export-intervention --out " + c.out.string() + " --eval en --target en --kind shift --layers 4",
                c.log("shift"))
                .status == 0);
    const auto identity = read_affine_map(c.out / "maps" / "shift.en-en.L4.map.json");
    CHECK(identity.w == Matrix::Identity(8, 8));
    CHECK(identity.b == Vector::Zero(8));

    REQUIRE(run("export-intervention --out " + c.out.string() + " --eval en --target fr --kind shift+proj --layers 4",
                c.log("sp"))
                .status == 0);
    const auto map = read_affine_map(c.out / "maps" / "shift_proj.en-fr.L4.map.json");
    const auto s_en = read_subspace(c.out / "subspaces" / "en" / "L4.subspace.json");
    const auto s_fr = read_subspace(c.out / "subspaces" / "fr" / "L4.subspace.json");
    const Matrix cloud = read_repr_matrix(c.root / "en" / "4.rgeo").as_double().topRows(50);
    const Matrix mapped = map.apply_rows(cloud);
    for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
      const Vector expected = project_shifted(s_fr, s_en.mu, cloud.row(i).transpose()) - s_en.mu + s_fr.mu;
      CHECK(max_rel_diff(mapped.row(i).transpose(), expected) < 1e-5);
    }
    const auto missing = run("export-intervention --out " + c.out.string() + " --eval en --target xx --layers 4",
                             c.log("nomap"));
    CHECK(missing.status == 2);
    CHECK(missing.output.find("xx") != std::string::npos);
  }
}

TEST_CASE("LDA axes, frames and vocabulary reports") {
  Corpus c;
  const std::string langs = " --languages en,fr,de --layers 4";
  const auto lda = run("fit-lda " + c.common() + langs + " --samples 300", c.log("lda"));
  REQUIRE(lda.status == 0);
  const fs::path axes = c.out / "axes" / "language.L4.axes.json";
  const auto a = read_lda_axes(axes);
  CHECK(a.count() == 2);
  CHECK(a.class_names == std::vector<std::string>{"en", "fr", "de"});
  const auto report = nlohmann::json::parse(read_file(c.out / "axes" / "language.L4.report.json"));
  CHECK(report.at("rows").get<int>() == 900);
  CHECK(report.at("separation_ratio")[0].get<double>() > 1.0);

  REQUIRE(run("fit-lda " + c.common() + langs + " --labels position --samples 50", c.log("ldapos")).status == 0);
  CHECK(read_lda_axes(c.out / "axes" / "position.L4.axes.json").count() == 3);  // 4 buckets of 16
  REQUIRE(run("fit-lda " + c.common() + langs + " --labels pos --tags NOUN,VERB", c.log("ldatag")).status == 0);
  CHECK(read_lda_axes(c.out / "axes" / "pos.L4.axes.json").count() == 1);

  const auto fr = run("export-frame " + c.common() + langs + " --axis " + axes.string() + ":0:language-sensitive --axis " +
                          axes.string() + ":1 --per-language 100 --max-rows 150",
                      c.log("frame"));
  REQUIRE(fr.status == 0);
  const auto frame = import_frame(c.out / "frames" / "L4.frame.csv", FrameFormat::csv);
  CHECK(frame.rows.size() == 150);
  CHECK(frame.coords.cols() == 2);
  CHECK(frame.sources[0].role == AxisRole::language_sensitive);
  CHECK(frame.rows[0].family == "Germanic");
  const auto diag = nlohmann::json::parse(read_file(c.out / "frames" / "L4.diagnostics.json"));
  CHECK(diag.size() == 2);
  CHECK(diag[0].at("label").get<std::string>().rfind("sensitive", 0) == 0);

  // Vocabulary report.
  const fs::path counts = c.dir / "counts";
  fs::create_directories(counts);
  std::ofstream(counts / "en.csv") << "token_id,count\n1,5\n2,5\n3,1\ntotal,1000000\n";
  std::ofstream(counts / "fr.csv") << "token_id,count\n1,5\n4,5\ntotal,1000000\n";
  std::ofstream(counts / "de.csv") << "token_id,count\n1,5\n2,9\ntotal,1000000\n";
  std::ofstream(c.dir / "preds.txt") << "1\n2\n3\n4\n9\n";
  std::ofstream(c.dir / "pairs.csv") << "projected,baseline\n4,1\n1,4\n";
  const auto vr = run("vocab-report --counts-dir " + counts.string() + " --languages en,fr,de --out " + c.out.string() +
                          " --predictions " + (c.dir / "preds.txt").string() + " --eval en --target fr --ratio-pairs " +
                          (c.dir / "pairs.csv").string(),
                      c.log("vocab"));
  REQUIRE(vr.status == 0);
  const auto v = nlohmann::json::parse(read_file(c.out / "vocab_report.json"));
  CHECK(v.at("common_size").get<int>() == 1);  // token 1, in 3 of 3 (ceil(0.9 * 3) = 3)
  const auto& p = v.at("proportions");
  CHECK(p.at("p_common").get<double>() == doctest::Approx(0.2));
  CHECK(p.at("p_eval").get<double>() == doctest::Approx(0.4));  // 2 and 3
  CHECK(p.at("p_target").get<double>() == doctest::Approx(0.2));
  CHECK(p.at("p_other").get<double>() == doctest::Approx(0.2));
  CHECK(v.at("perplexity_ratio").at("geometric_mean").get<double>() == 1.0);
  CHECK(v.at("perplexity_ratio").at("geometric_sd").get<double>() == 4.0);
}
