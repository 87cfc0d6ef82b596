import math

import numpy as np
import pytest

import repgeo


def test_repr_round_trip(tmp_path):
    data = np.arange(12, dtype=np.float32).reshape(4, 3)
    m = repgeo.make_repr(data, "fr", 7)
    m.seed = 123
    path = tmp_path / "fr.rgeo"
    repgeo.write_repr_matrix(m, path)
    back = repgeo.read_repr_matrix(path)
    assert np.array_equal(back.data, data)
    assert back.language == "fr" and back.layer == 7 and back.seed == 123
    assert back.positions == [0, 1, 2, 3]


def test_malformed_file_reports_code(tmp_path):
    path = tmp_path / "bad.rgeo"
    repgeo.write_repr_matrix(repgeo.make_repr(np.zeros((2, 2), np.float32), "en", 0), path)
    raw = bytearray(path.read_bytes())
    raw[0:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(repgeo.RepgeoError) as info:
        repgeo.read_repr_matrix(path)
    assert info.value.code == "bad_magic"


def test_subspace_and_projection():
    rng = np.random.default_rng(0)
    rows = np.outer(rng.normal(size=50), [1.0, 0.0, 0.0]) + [2.0, 3.0, 5.0]
    s = repgeo.fit_subspace(rows, 0.9)
    assert s.rank == 1
    p = repgeo.project_onto(s, np.array([[2.0, 3.0, 5.0], [7.0, 3.0, 1.0]]))
    assert np.allclose(p, [[2.0, 3.0, 5.0], [7.0, 3.0, 5.0]])
    m = repgeo.compose_intervention("shift+proj", s, np.zeros(3))
    # V V^T (x - 0) + mu_B keeps the first coordinate of x and the rest of mu_B.
    assert np.allclose(m.apply(np.array([[1.0, 1.0, 1.0]])), [[1.0 + s.mu[0], 3.0, 5.0]])


def test_intervention_map_file(tmp_path):
    rng = np.random.default_rng(1)
    s = repgeo.fit_subspace(rng.normal(size=(40, 5)), 0.8)
    m = repgeo.compose_intervention("proj", s, np.zeros(5), "demo")
    repgeo.write_affine_map(m, tmp_path / "m.map.json")
    back = repgeo.read_affine_map(tmp_path / "m.map.json")
    assert np.array_equal(back.w, m.w) and np.array_equal(back.b, m.b)
    assert back.description == "demo"


def test_spd_distance_and_scaling():
    assert repgeo.spd_distance(np.diag([1.0, 4.0]), np.diag([2.0, 2.0])) == pytest.approx(math.sqrt(2) * math.log(2))
    k = np.diag([1.0, 2.0, 3.0, 4.0])
    assert repgeo.scaled_distance(k, 2.0, 5) == pytest.approx(4 * math.log(2), rel=1e-9)


def test_calibration_inversion():
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.normal(size=(8, 8)))
    k = q @ np.diag(np.logspace(0, 2, 8)) @ q.T
    curve = repgeo.build_calibration_curve([k], "scaling", num_seeds=2)
    value, saturated = curve.invert(2 * math.sqrt(8) * math.log(1.5))
    assert value == pytest.approx(1.5) and not saturated
    assert len(curve.grid) == 301


def test_lda_two_classes():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(100, 4))
    b = rng.normal(size=(100, 4)) + [4.0, 0.0, 0.0, 0.0]
    axes = repgeo.fit_lda(np.vstack([a, b]), [0] * 100 + [1] * 100, ["a", "b"])
    assert axes.w.shape == (4, 1)
    assert abs(axes.w[0, 0]) > 0.9


def test_vocab_statistics():
    ev = repgeo.build_vocab({1: 10, 2: 10}, 20, 0.1, "en")
    tg = repgeo.build_vocab({2: 10, 3: 10}, 20, 0.1, "fr")
    common = repgeo.common_tokens([ev, tg], 1.0)
    assert common == {2}
    r = repgeo.token_proportions([1, 2, 3, 4], ev, tg, common)
    assert sum(r[k] for k in ("p_eval", "p_target", "p_common", "p_other")) == pytest.approx(1.0)
    assert repgeo.geometric_mean_ratio([(4, 1), (1, 4)]) == (1.0, 4.0)
