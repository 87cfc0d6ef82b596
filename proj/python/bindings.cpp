// Python bindings for the core operations. Matrices cross the boundary as
// NumPy arrays (copied); file formats are shared with the C++ tools.

#include "repgeo/lda_axes.hpp"
#include "repgeo/moments.hpp"
#include "repgeo/repr_store.hpp"
#include "repgeo/spd_geometry.hpp"
#include "repgeo/subspace.hpp"
#include "repgeo/vocab_stats.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace repgeo;

namespace {

std::vector<SpdMatrix> as_spd_list(const std::vector<Matrix>& ks) {
  std::vector<SpdMatrix> out(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) out[i].k = ks[i];
  return out;
}

}  // namespace

PYBIND11_MODULE(_repgeo, m) {
  m.doc() = "Representation geometry: subspaces, SPD distances, LDA axes, vocabulary statistics.";

  static py::exception<Error> error_type(m, "RepgeoError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error_type)(e.what());
      inst.attr("code") = std::string(errc_name(e.code()));
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  // Representation matrices.
  py::class_<ReprMatrix>(m, "ReprMatrix")
      .def_property_readonly("data", [](const ReprMatrix& r) { return FloatRows(r.data); })
      .def_property_readonly("language", [](const ReprMatrix& r) { return r.meta.empty() ? std::string() : r.meta[0].language; })
      .def_property_readonly("layer", [](const ReprMatrix& r) { return r.meta.empty() ? 0 : r.meta[0].layer; })
      .def_property_readonly("positions", [](const ReprMatrix& r) {
        std::vector<int> v;
        for (const auto& row : r.meta) v.push_back(row.position);
        return v;
      })
      .def_property_readonly("token_ids", [](const ReprMatrix& r) {
        std::vector<std::int64_t> v;
        for (const auto& row : r.meta) v.push_back(row.token_id);
        return v;
      })
      .def_property_readonly("pos_tags", [](const ReprMatrix& r) {
        std::vector<std::vector<std::string>> v;
        for (const auto& row : r.meta) v.push_back(row.pos_tags);
        return v;
      })
      .def_readwrite("source", &ReprMatrix::source)
      .def_readwrite("seed", &ReprMatrix::seed)
      .def_property_readonly("rows", &ReprMatrix::rows)
      .def_property_readonly("dim", &ReprMatrix::dim);

  m.def("make_repr", &make_repr, py::arg("data"), py::arg("language"), py::arg("layer"),
        py::arg("positions") = std::vector<int>{}, py::arg("token_ids") = std::vector<std::int64_t>{});
  m.def("write_repr_matrix", &write_repr_matrix, py::arg("matrix"), py::arg("path"));
  m.def("read_repr_matrix", &read_repr_matrix, py::arg("path"));
  m.def("sample_rows", &sample_rows, py::arg("matrix"), py::arg("count"), py::arg("seed"));

  py::class_<MomentAccumulator>(m, "MomentAccumulator")
      .def(py::init<Eigen::Index>(), py::arg("dim"))
      .def("add_rows", py::overload_cast<const Eigen::Ref<const Matrix>&>(&MomentAccumulator::add_rows))
      .def("merge", &MomentAccumulator::merge)
      .def_property_readonly("count", &MomentAccumulator::count)
      .def_property_readonly("mean", &MomentAccumulator::mean)
      .def("covariance", &MomentAccumulator::covariance)
      .def_static("from_file", &MomentAccumulator::from_file, py::arg("path"));

  // Subspaces and interventions.
  py::class_<AffineSubspace>(m, "AffineSubspace")
      .def_readonly("mu", &AffineSubspace::mu)
      .def_readonly("basis", &AffineSubspace::basis)
      .def_readonly("singular_values", &AffineSubspace::singular_values)
      .def_readonly("total_variance", &AffineSubspace::total_variance)
      .def_readonly("captured_fraction", &AffineSubspace::captured_fraction)
      .def_readonly("language", &AffineSubspace::language)
      .def_readonly("layer", &AffineSubspace::layer)
      .def_property_readonly("rank", &AffineSubspace::rank);

  m.def("fit_subspace", py::overload_cast<const Eigen::Ref<const Matrix>&, double>(&fit_subspace), py::arg("rows"),
        py::arg("variance_fraction") = 0.9);
  m.def("fit_subspace_repr", py::overload_cast<const ReprMatrix&, double>(&fit_subspace), py::arg("matrix"),
        py::arg("variance_fraction") = 0.9);
  m.def("select_rank", [](const std::vector<double>& sv, double f) { return select_rank(sv, f); },
        py::arg("singular_values"), py::arg("fraction"));
  m.def("project_onto", &project_onto_rows, py::arg("subspace"), py::arg("rows"));
  m.def("project_shifted", &project_shifted_rows, py::arg("subspace"), py::arg("target_mu"), py::arg("rows"));
  m.def("write_subspace", &write_subspace, py::arg("subspace"), py::arg("path"));
  m.def("read_subspace", &read_subspace, py::arg("path"));

  py::class_<AffineMap>(m, "AffineMap")
      .def_readonly("w", &AffineMap::w)
      .def_readonly("b", &AffineMap::b)
      .def_readonly("description", &AffineMap::description)
      .def("apply", &AffineMap::apply_rows, py::arg("rows"));
  m.def(
      "compose_intervention",
      [](const std::string& kind, const AffineSubspace& s_b, const Vector& mu_a, const std::string& description) {
        return compose_intervention(parse_intervention_kind(kind), s_b, mu_a, description);
      },
      py::arg("kind"), py::arg("target"), py::arg("source_mu"), py::arg("description") = "");
  m.def("write_affine_map", &write_affine_map, py::arg("map"), py::arg("path"));
  m.def("read_affine_map", &read_affine_map, py::arg("path"));

  // SPD geometry and calibration.
  m.def("covariance", [](const Matrix& rows) { return covariance_of(rows).k.k; }, py::arg("rows"));
  m.def("with_ridge", [](const Matrix& k, double relative) { return with_ridge(SpdMatrix{k, 0.0, {}}, relative).k; },
        py::arg("k"), py::arg("relative") = kDefaultRidge);
  m.def("spd_distance", py::overload_cast<const Matrix&, const Matrix&>(&spd_distance), py::arg("a"), py::arg("b"));
  m.def("pairwise_distances", [](const std::vector<Matrix>& ks) { return pairwise_distances(as_spd_list(ks)); },
        py::arg("ks"));
  m.def("random_plane_rotation", &random_plane_rotation, py::arg("d"), py::arg("theta_deg"), py::arg("seed"));
  m.def("rotated_distance", [](const Matrix& k, double t, std::uint64_t s) { return rotated_distance({k, 0.0, {}}, t, s); },
        py::arg("k"), py::arg("theta_deg"), py::arg("seed"));
  m.def("scaled_distance", [](const Matrix& k, double g, std::uint64_t s) { return scaled_distance({k, 0.0, {}}, g, s); },
        py::arg("k"), py::arg("gamma"), py::arg("seed"));

  py::class_<CalibrationCurve>(m, "CalibrationCurve")
      .def_property_readonly("kind", [](const CalibrationCurve& c) { return to_string(c.kind); })
      .def_readonly("grid", &CalibrationCurve::grid)
      .def_readonly("mean_distance_raw", &CalibrationCurve::mean_distance_raw)
      .def_readonly("mean_distance", &CalibrationCurve::mean_distance)
      .def_readonly("num_seeds", &CalibrationCurve::num_seeds)
      .def_readonly("base_seed", &CalibrationCurve::base_seed)
      .def_readonly("layer", &CalibrationCurve::layer)
      .def("raw_violations", &CalibrationCurve::raw_violations)
      .def("invert", [](const CalibrationCurve& c, double distance) {
        const auto hit = invert_calibration(c, distance);
        return py::make_tuple(hit.value, hit.saturated);
      }, py::arg("distance"), "Returns (parameter value, saturated).");
  m.def(
      "build_calibration_curve",
      [](const std::vector<Matrix>& ks, const std::string& kind, int num_seeds, std::uint64_t base_seed, int layer) {
        return build_calibration_curve(as_spd_list(ks), parse_calibration_kind(kind), num_seeds, base_seed, layer);
      },
      py::arg("ks"), py::arg("kind"), py::arg("num_seeds") = 16, py::arg("base_seed") = 0, py::arg("layer") = 0);
  m.def("write_calibration_curve", &write_calibration_curve, py::arg("curve"), py::arg("path"));
  m.def("read_calibration_curve", &read_calibration_curve, py::arg("path"));

  // LDA axes.
  py::class_<LdaAxes>(m, "LdaAxes")
      .def_readonly("w", &LdaAxes::w)
      .def_readonly("eigenvalues", &LdaAxes::eigenvalues)
      .def_readonly("class_names", &LdaAxes::class_names)
      .def_readonly("shrinkage", &LdaAxes::shrinkage);
  m.def(
      "fit_lda",
      [](const Matrix& rows, const std::vector<int>& labels, std::vector<std::string> class_names,
         std::optional<double> shrinkage) {
        LabeledSet s;
        s.x = make_repr(rows.cast<float>(), "", 0);
        s.labels = labels;
        if (class_names.empty()) {
          const int top = labels.empty() ? -1 : *std::max_element(labels.begin(), labels.end());
          for (int c = 0; c <= top; ++c) class_names.push_back(std::to_string(c));
        }
        s.class_names = std::move(class_names);
        return fit_lda(s, shrinkage);
      },
      py::arg("rows"), py::arg("labels"), py::arg("class_names") = std::vector<std::string>{},
      py::arg("shrinkage") = std::nullopt, "Rows are cast to f32 first, like stored representations.");
  m.def("write_lda_axes", &write_lda_axes, py::arg("axes"), py::arg("path"));
  m.def("read_lda_axes", &read_lda_axes, py::arg("path"));

  // Vocabulary statistics.
  py::class_<VocabSet>(m, "VocabSet")
      .def_readonly("language", &VocabSet::language)
      .def_readonly("token_ids", &VocabSet::token_ids);
  m.def("build_vocab", &build_vocab, py::arg("counts"), py::arg("total"), py::arg("threshold") = kDefaultVocabThreshold,
        py::arg("language") = "");
  m.def("common_tokens", [](const std::vector<VocabSet>& v, double f) { return common_tokens(v, f); },
        py::arg("vocabs"), py::arg("fraction") = kDefaultCommonFraction);
  m.def(
      "token_proportions",
      [](const std::vector<TokenId>& preds, const VocabSet& ev, const VocabSet& tg, const TokenSet& common) {
        const auto r = token_proportions(preds, ev, tg, common);
        py::dict d;
        d["p_eval"] = r.p_eval;
        d["p_target"] = r.p_target;
        d["p_common"] = r.p_common;
        d["p_other"] = r.p_other;
        d["p_both"] = r.p_both;
        d["p_eval_only"] = r.p_eval_only;
        d["p_target_only"] = r.p_target_only;
        d["n_predictions"] = r.n_predictions;
        return d;
      },
      py::arg("predictions"), py::arg("eval_vocab"), py::arg("target_vocab"), py::arg("common"));
  m.def(
      "geometric_mean_ratio",
      [](const std::vector<std::pair<double, double>>& pairs) {
        const auto g = geometric_mean_ratio(pairs);
        return py::make_tuple(g.mean, g.gsd);
      },
      py::arg("pairs"), "(projected, baseline) pairs -> (geometric mean ratio, geometric std dev).");
}
