import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hsmor.metrics import (
    ConfigError, Metric, MetricSpec, ObjectConfig, Semantics, SquareMatrix,
    euclidean_dissimilarity, hybridize_geometric_mean, monomer_matrix,
    similarity_matrix, similarity_stack,
)

ED, CB, XR = MetricSpec(Metric.ED), MetricSpec(Metric.CB), MetricSpec(Metric.XR)
ALL = [ED, CB, XR]


def cfg3(dr=(1, 0, 0)):
    return ObjectConfig(("A", "B", "Dr"), ((1, 1, 0), (0, 0, 1), dr))


# -- configuration validation ---------------------------------------------------


@pytest.mark.parametrize("names, coords, msg", [
    (("A", "B", "Dr"), ((1, 1, 0), (0, 0), (0, 0, 0)), "'B' has 2 coordinates"),
    (("A", "A", "Dr"), ((1,), (0,), (2,)), "unique"),
    (("A", "B-C", "Dr"), ((1,), (0,), (2,)), "invalid object name"),
    (("A B", "C", "Dr"), ((1,), (0,), (2,)), "invalid object name"),
    (("A", "Dr"), ((1,), (0,)), "at least two fixed"),
    (("A", "B", "X"), ((1,), (0,), (2,)), "drifter"),
    (("A", "B", "Dr"), ((1,), (math.nan,), (2,)), "non-finite"),
])
def test_object_config_rejects(names, coords, msg):
    with pytest.raises(ConfigError, match=msg):
        ObjectConfig(names, coords)


def test_metric_spec_validation():
    with pytest.raises(ConfigError):
        MetricSpec(Metric.XR, b=1.0)
    with pytest.raises(ConfigError):
        MetricSpec(Metric.CB, cb_floor=0.0)
    with pytest.raises(ConfigError):
        MetricSpec("manhattan")
    assert MetricSpec("xr").kind is Metric.XR


def test_fo_extent_and_centroid():
    cfg = cfg3()
    assert cfg.fo_extent == pytest.approx(math.sqrt(3))
    np.testing.assert_allclose(cfg.centroid, [0.5, 0.5, 0.5])
    assert cfg.fixed_names == ("A", "B")


# -- hand-computed values -----------------------------------------------------------


def test_euclidean_values():
    d = euclidean_dissimilarity(cfg3())
    assert d.semantics is Semantics.DISSIMILARITY
    assert d["A", "B"] == pytest.approx(1.7320508, abs=1e-7)
    assert d["Dr", "A"] == 1.0
    assert d["Dr", "B"] == pytest.approx(math.sqrt(2))
    assert d["A", "A"] == 0.0


def test_monomers():
    cfg = cfg3()
    m = monomer_matrix(cfg, 0, XR)
    assert m["A", "B"] == pytest.approx(1 / 1.5)
    assert m["Dr", "A"] == 1.0  # x coordinates coincide
    c = monomer_matrix(cfg, 0, CB)
    assert c["Dr", "A"] == 1e-9  # floored zero difference
    assert c["A", "A"] == 0.0
    with pytest.raises(ConfigError):
        monomer_matrix(cfg, 0, ED)
    with pytest.raises(ConfigError):
        monomer_matrix(cfg, 3, XR)


def test_geometric_mean():
    names = ("A", "B", "C")

    def mat(v):
        m = np.full((3, 3), v)
        np.fill_diagonal(m, 1.0)
        return SquareMatrix(names, m, Semantics.SIMILARITY)

    out = hybridize_geometric_mean([mat(0.5), mat(1 / 1.5), mat(1.0)])
    assert out["A", "B"] == pytest.approx((0.5 * (1 / 1.5)) ** (1 / 3), rel=1e-12)
    assert out["A", "B"] == pytest.approx(0.69336, abs=1e-5)
    single = mat(0.3)
    np.testing.assert_allclose(hybridize_geometric_mean([single]).values, single.values)
    assert hybridize_geometric_mean([mat(1.0)] * 3)["A", "C"] == 1.0
    with pytest.raises(ConfigError):
        hybridize_geometric_mean([])
    dis = SquareMatrix(names, np.zeros((3, 3)) + np.eye(3) * 0 + 0.5 * (1 - np.eye(3)),
                       Semantics.DISSIMILARITY)
    with pytest.raises(ConfigError):
        hybridize_geometric_mean([mat(0.5), dis])


def test_similarity_values():
    cfg = cfg3()
    assert similarity_matrix(cfg, ED)["A", "B"] == pytest.approx(1 / (1 + math.sqrt(3)))
    assert similarity_matrix(cfg, ED)["A", "B"] == pytest.approx(0.36603, abs=1e-5)
    assert similarity_matrix(cfg, XR)["A", "B"] == pytest.approx(1 / 1.5)
    # CB: geometric mean of |dx| = (1*1*1)^(1/3) = 1
    assert similarity_matrix(cfg, CB)["A", "B"] == pytest.approx(0.5)


@pytest.mark.parametrize("spec", ALL, ids=lambda s: s.kind.value)
def test_duplicates_have_unit_similarity(spec):
    cfg = ObjectConfig(("A", "B", "Dr"), ((1, 1, 0), (0, 0, 1), (1, 1, 0)))
    assert similarity_matrix(cfg, spec)["A", "Dr"] == 1.0


def test_log_channel_survives_underflow():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1e4, 1e4, 1e4]])
    s, log_s = similarity_stack(pts, XR)
    assert s[0, 2] == 0.0
    assert log_s[0, 2] == pytest.approx(-1e4 * math.log(1.5), rel=1e-12)


# -- properties ------------------------------------------------------------------------

dyadic = st.integers(-64, 64).map(lambda k: k / 8.0)
points = st.lists(st.tuples(dyadic, dyadic, dyadic), min_size=3, max_size=7)


def _cfg(pts):
    names = tuple(f"O{i}" for i in range(len(pts) - 1)) + ("Dr",)
    return ObjectConfig(names, tuple(pts))


@given(points, st.tuples(dyadic, dyadic, dyadic), st.sampled_from(ALL))
def test_translation_is_bit_exact(pts, shift, spec):
    # dyadic coordinates keep every difference exact under the shift
    cfg = _cfg(pts)
    a = similarity_matrix(cfg, spec).values
    b = similarity_matrix(cfg.translated(shift), spec).values
    assert np.array_equal(a, b)


@given(points, st.randoms(use_true_random=False), st.sampled_from(ALL))
def test_permutation_equivariance(pts, rnd, spec):
    cfg = _cfg(pts)
    order = list(range(cfg.n))
    rnd.shuffle(order)
    a = similarity_matrix(cfg, spec).values
    b = similarity_matrix(cfg.relabeled(order), spec).values
    assert np.array_equal(a[np.ix_(order, order)], b)


@given(points, st.sampled_from(ALL))
def test_similarity_range_symmetry_diagonal(pts, spec):
    s = similarity_matrix(_cfg(pts), spec).values
    assert np.array_equal(s, s.T)
    assert np.all(np.diag(s) == 1.0)
    assert np.all((s > 0) & (s <= 1))


@given(st.floats(0, 50), st.floats(0, 50))
def test_xr_monotone_and_log_linear(d1, d2):
    pts = np.array([[0.0, 0.0], [d1, d2], [d1 + 1, 0.0]])
    _, log_s = similarity_stack(pts, XR)
    assert log_s[0, 1] == pytest.approx(-math.log(1.5) * (d1 + d2) / 2, rel=1e-12, abs=1e-300)
    near = np.array([[0.0], [d1], [d1 + 0.5]])
    s, _ = similarity_stack(near, XR)
    assert s[0, 2] < s[0, 1] or s[0, 1] == 0.0
