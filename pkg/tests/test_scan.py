import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hsmor.ia import DEGENERATE_MARK, relabel_signature
from hsmor.metrics import Metric, MetricSpec
from hsmor.scan import (
    BudgetError, DrifterField, LabelField, MembranePoint, ScanGrid, axis_values,
    detect_transitions, measure_ima_thickness, measure_ima_thickness_many, refine_boundary, refine_transitions, scan,
)

from conftest import FIG4_GRID, TWO_FO

SWAP = {"A": "B", "B": "A", "Dr": "Dr"}


def synthetic(grid, rule):
    pts = grid.positions()
    sigs = tuple(rule(p) for p in pts)
    zeros = np.zeros(grid.size)
    return LabelField(grid, sigs, zeros + 1, zeros, zeros.astype(int), zeros.astype(bool))


def half_space(p):
    return "L" if p[0] < 0.5 else "R"


# -- grids -----------------------------------------------------------------------------


def test_axis_values_nest_under_interval_doubling():
    coarse = axis_values(-3.0, 4.0, 129)
    fine = axis_values(-3.0, 4.0, 257)
    assert np.array_equal(coarse, fine[::2])
    assert fine[-1] == 4.0 and fine[0] == -3.0


def test_grid_validation_and_order():
    with pytest.raises(ValueError):
        ScanGrid(3, ((0, 0.0, 1.0, 4),), ((2, 0.5),))
    with pytest.raises(ValueError):
        ScanGrid(2, ((0, 1.0, 0.0, 4),), ((1, 0.5),))
    with pytest.raises(ValueError):
        ScanGrid(2, ((0, 0.0, 1.0, 1),), ((1, 0.5),))
    g = ScanGrid.plane("z", 0.5, ((0.0, 1.0), (0.0, 2.0)), (3, 2))
    pts = g.positions()
    assert g.shape == (2, 3)
    assert pts[:3, 0].tolist() == [0.0, 0.5, 1.0]  # first free axis fastest
    assert pts[:, 2].tolist() == [0.5] * 6
    assert pts[3, 1] == 2.0


def test_budget_refusal():
    with pytest.raises(BudgetError, match="MB"):
        scan(TWO_FO, MetricSpec(), FIG4_GRID, budget=1000)


# -- two-object field -------------------------------------------------------------------


def test_fig4_three_variants(coarse_field):
    clean = {s for s in coarse_field.distinct() if not s.startswith(DEGENERATE_MARK)}
    assert clean == {"AB - Dr", "A - BDr", "B - ADr"}


def test_outside_the_aura_is_constant():
    grid = ScanGrid.plane("z", 0.5, ((30.0, 40.0), (30.0, 40.0)), 16)
    for kind in Metric:
        f = scan(TWO_FO, MetricSpec(kind), grid)
        assert f.distinct() == {"AB - Dr"}
        assert detect_transitions(f) == []


def test_density_doubling_is_bit_exact():
    coarse = ScanGrid.plane("z", 0.5, ((-3.0, 4.0), (-3.0, 4.0)), 33)
    fine = coarse.with_steps(65)
    a, b = scan(TWO_FO, MetricSpec(), coarse), scan(TWO_FO, MetricSpec(), fine)
    sub = np.arange(fine.size).reshape(fine.shape)[::2, ::2].ravel()
    assert np.array_equal(coarse.positions(), fine.positions()[sub])
    assert a.signatures == tuple(b.signatures[i] for i in sub)
    assert np.array_equal(a.omega, b.omega[sub])
    assert np.array_equal(a.cycles, b.cycles[sub])


def test_workers_do_not_change_results():
    grid = ScanGrid.plane("z", 0.5, ((-3.0, 4.0), (-3.0, 4.0)), 91)  # two chunks
    a = scan(TWO_FO, MetricSpec(Metric.XR), grid, workers=1)
    b = scan(TWO_FO, MetricSpec(Metric.XR), grid, workers=3)
    assert a.signatures == b.signatures
    assert np.array_equal(a.omega, b.omega) and np.array_equal(a.cycles, b.cycles)


def test_midpoint_swap_symmetry(coarse_field):
    # p -> (A + B) - p maps index i to steps-1-i on both axes of this grid
    g = coarse_field.signature_grid()
    mirrored = np.vectorize(lambda s: relabel_signature(s, SWAP))(g[::-1, ::-1])
    match = (g == mirrored) | (
        np.char.startswith(g.astype(str), DEGENERATE_MARK)
        & np.char.startswith(mirrored.astype(str), DEGENERATE_MARK))
    assert match.mean() == 1.0


@settings(max_examples=10)
@given(st.tuples(*[st.integers(-40, 40).map(lambda k: k / 4.0)] * 3))
def test_translation_invariance(shift):
    grid = ScanGrid.plane("z", 0.5, ((-3.0, 4.0), (-3.0, 4.0)), 24)
    a = scan(TWO_FO, MetricSpec(), grid)
    b = scan(TWO_FO.translated(shift), MetricSpec(), grid.translated(shift))
    assert a.signatures == b.signatures
    np.testing.assert_allclose(a.omega, b.omega, rtol=0, atol=1e-12)


# -- transitions and refinement ------------------------------------------------------------


def test_transitions_synthetic_half_space():
    grid = ScanGrid(2, ((0, 0.0, 1.0, 4), (1, 0.0, 1.0, 4)))
    edges = detect_transitions(synthetic(grid, half_space))
    assert len(edges) == 4
    assert all(j == i + 1 for i, j in edges)
    assert detect_transitions(synthetic(grid, lambda p: "C")) == []


def test_transitions_close_up(coarse_field):
    # no 2x2 cell has exactly one transition side, so chains never dead-end
    # inside the grid; and none reach the border, which lies outside the aura
    g = coarse_field.signature_grid()
    horiz = g[:, :-1] != g[:, 1:]
    vert = g[:-1, :] != g[1:, :]
    sides = (horiz[:-1, :].astype(int) + horiz[1:, :] + vert[:, :-1] + vert[:, 1:])
    assert horiz.any() and not np.any(sides == 1)
    border = np.zeros(g.shape, dtype=bool)
    border[[0, -1], :] = border[:, [0, -1]] = True
    flat = set(np.flatnonzero(border.ravel()).tolist())
    assert not any(i in flat or j in flat for i, j in detect_transitions(coarse_field))


def test_refine_synthetic_boundary():
    m = refine_boundary((0.0, 0.3, 0.0), (1.0, 0.3, 0.0), half_space)
    assert abs(m.position[0] - 0.5) <= 1e-12
    assert m.width <= 1e-12
    assert (m.sig_a, m.sig_b) == ("L", "R")
    with pytest.raises(ValueError):
        refine_boundary((0.0, 0, 0), (0.2, 0, 0), half_space)


def test_refine_between_objects_reaches_unit_omega():
    fld = DrifterField(TWO_FO)
    a, b = np.array([0.0, 0.3, 0.5]), np.array([1.0, 0.3, 0.5])
    m = refine_boundary(a, b, fld)
    u = np.asarray(m.direction)
    rec = fld.record(np.asarray(m.position) - 1e-6 * u)
    assert rec.neg_ln_omega < 0.01
    assert m.width <= 1e-10


def test_batched_refinement_matches_single(coarse_field):
    fld = DrifterField(TWO_FO)
    edges = detect_transitions(coarse_field)[::40]
    many = refine_transitions(coarse_field, fld, edges)
    pts = coarse_field.positions()
    for (i, j), m in zip(edges, many):
        one = refine_boundary(pts[i], pts[j], fld)
        assert one.position == m.position and one.sig_b == m.sig_b


def test_ima_thickness_synthetic():
    clean = MembranePoint((0.5, 0.0), "L", "R", 0.0, (1.0, 0.0))
    assert measure_ima_thickness(clean, half_space) == 0.0

    def banded(p):
        if p[0] < 0.5:
            return "L"
        return DEGENERATE_MARK + "T" if p[0] < 0.5 + 1e-6 else "R"

    entry = MembranePoint((0.5, 0.0), "L", "R", 0.0, (1.0, 0.0))
    assert measure_ima_thickness(entry, banded) == pytest.approx(1e-6, abs=1e-8)


def test_batched_thickness_matches_single(coarse_field):
    fld = DrifterField(TWO_FO)
    pts = refine_transitions(coarse_field, fld, detect_transitions(coarse_field)[::30])
    many = measure_ima_thickness_many(pts, fld)
    assert many.tolist() == [measure_ima_thickness(m, fld) for m in pts]
    assert np.all(many < 1e-9)
