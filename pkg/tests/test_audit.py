import numpy as np
import pytest

from sktlab.audit import (CUTOFF_GRADIENT_TERMS, TERM_NAMES, ConstantProxy, EntropyReport,
                          audit_refinement_study, default_tolerance, entropy_balance_terms,
                          exact_trajectory, fischer_bounds_check, fischer_constant, fischer_ensemble,
                          fischer_threshold, gronwall_probe, observed_orders, relative_entropy_series,
                          weak_strong_probe)
from sktlab.entropy import CutoffSpec
from sktlab.errors import HypothesisError, InputError
from sktlab.grid import Field, Grid, transfer
from sktlab.model import ModelSpec
from sktlab.solver import manufactured_strong, simulate

from conftest import relaxation_spec


def smooth_field(grid, mean=(1.0, 0.8), amp=(0.3, -0.2)):
    x = grid.centers[0]
    return Field(np.vstack([m + a * np.cos(np.pi * x) for m, a in zip(mean, amp)]), grid)


# balance audit ---------------------------------------------------------------


def test_balance_at_equilibrium_vanishes():
    spec = relaxation_spec(lam=(1.0, 0.5))
    g = Grid((1.0,), (8,))
    eq = np.exp(-spec.lam)
    u = Field(np.repeat(eq[:, None], 8, axis=1), g)
    traj = simulate(spec, g, u, 0.3, 0.1)
    terms = entropy_balance_terms(spec, CutoffSpec(K=3, L=1.0, M=2.0), traj, ConstantProxy(eq))
    for name in TERM_NAMES:
        assert abs(terms.terms[name]) <= 1e-14, name
    assert abs(terms.residual) <= 1e-14


def test_plateau_terms_exactly_zero(sym2):
    g = Grid((1.0,), (16,))
    traj = simulate(sym2, g, smooth_field(g), 0.05, 0.01)
    v = ConstantProxy(np.array([1.0, 0.8]))
    # sum(u + eps) stays well below L
    terms = entropy_balance_terms(sym2, CutoffSpec(K=3, L=50.0, M=100.0), traj, v)
    for name in CUTOFF_GRADIENT_TERMS:
        assert terms.terms[name] == 0.0, name
    assert terms.terms["G1"] < 0.0


def test_balance_rows_and_total(sym2):
    g = Grid((1.0,), (8,))
    traj = simulate(sym2, g, smooth_field(g), 0.02, 0.01)
    terms = entropy_balance_terms(sym2, CutoffSpec(), traj, ConstantProxy(np.array([1.0, 0.8])))
    rows = terms.rows()
    assert [r["term"] for r in rows[:18]] == list(TERM_NAMES)
    assert terms.total == pytest.approx(sum(terms.terms.values()))
    assert terms.residual == pytest.approx(terms.lhs - terms.total)
    assert terms.snapshots == 3


@pytest.mark.parametrize("window", [-0.1, 0.5, 0.015])
def test_balance_window_errors(sym2, window):
    g = Grid((1.0,), (8,))
    traj = simulate(sym2, g, smooth_field(g), 0.02, 0.01)
    with pytest.raises(InputError):
        entropy_balance_terms(sym2, CutoffSpec(), traj, ConstantProxy(np.array([1.0, 1.0])), window)


def test_exact_audit_second_order():
    spec = ModelSpec.build([1.0, 0.5], [[1.0, 2.0], [1.0, 1.5]], pi=[1.0, 2.0], lam=[1.0, 1.0])
    px = manufactured_strong(spec, (1.0,), [2.0, 1.5], [0.5, -0.4])
    cut = CutoffSpec(K=3, L=1.0, M=2.0)
    res, orders, results = audit_refinement_study(spec, cut, px, [16, 32, 64], 0.1, [4, 8, 16])
    assert np.all(orders >= 1.8)
    # every term takes part: the cutoffs are active somewhere
    assert all(abs(results[-1].terms[k]) > 0 for k in ("G2", "G5", "I1", "I3"))


def test_audit_unknown_source():
    spec = relaxation_spec()
    px = manufactured_strong(spec, (1.0,), [2.0, 1.5], [0.5, -0.4])
    with pytest.raises(InputError):
        audit_refinement_study(spec, CutoffSpec(), px, [8, 16], 0.1, [2, 4], source="magic")


def test_observed_orders():
    np.testing.assert_allclose(observed_orders([1.0, 0.25, 0.0625]), [2.0, 2.0])


def test_exact_trajectory_matches_proxy():
    spec = relaxation_spec()
    px = manufactured_strong(spec, (1.0,), [2.0, 1.5], [0.5, -0.4])
    g = Grid((1.0,), (8,))
    traj = exact_trajectory(px, g, [0.0, 0.1])
    np.testing.assert_array_equal(traj[1].data, px.field(g, 0.1).data)


# series -----------------------------------------------------------------------


def test_series_zero_against_self(sym2):
    g = Grid((1.0,), (16,))
    traj = simulate(sym2, g, smooth_field(g), 0.03, 0.01)
    series = relative_entropy_series(sym2, CutoffSpec(), traj, _TrajProxy(traj))
    assert np.max(np.abs(series.H_rel)) <= 1e-15 and np.max(np.abs(series.H_KL)) <= 1e-15
    assert len(series) == 4 and series.dissipation.size == 3
    assert np.all(series.min_u > 0) and series.mass.shape == (4, 2)


class _TrajProxy:
    def __init__(self, traj):
        self.traj = traj

    def snapshot(self, grid, t):
        k = int(np.argmin(np.abs(self.traj.times - t)))
        return self.traj[k]


def test_series_invariant_under_piecewise_constant_refinement():
    spec = relaxation_spec()
    g = Grid((1.0,), (8,))
    fine = g.refine(4)
    u = smooth_field(g)
    v = ConstantProxy(np.array([0.9, 1.1]))
    cut = CutoffSpec(K=3, L=1.5, M=4.0)
    coarse_traj = exact_trajectory(_Static(u), g, [0.0])
    fine_traj = exact_trajectory(_Static(transfer(u, g, fine)), fine, [0.0])
    a = relative_entropy_series(spec, cut, coarse_traj, v)
    b = relative_entropy_series(spec, cut, fine_traj, v)
    for name in ("entropy", "H_rel", "H_KL", "H_KepsML"):
        np.testing.assert_allclose(getattr(a, name), getattr(b, name), rtol=1e-13)


class _Static:
    def __init__(self, f):
        self.f = f

    def field(self, grid, t):
        return self.f


# Gronwall ---------------------------------------------------------------------


def test_gronwall_exponential_rate():
    t = np.linspace(0, 1, 21)
    r = gronwall_probe(t, np.exp(2 * t))
    assert r.rate == pytest.approx(2.0, abs=1e-6)
    assert r.ok and r.branch == "gronwall" and not r.degenerate
    assert r.envelope_rate == pytest.approx(2.0, abs=1e-6)


def test_gronwall_zero_series_degenerate():
    r = gronwall_probe(np.linspace(0, 1, 5), np.zeros(5))
    assert r.degenerate and r.ok and r.branch == "uniqueness"


def test_gronwall_linear_growth_from_zero_fails():
    t = np.linspace(0, 1, 11)
    r = gronwall_probe(t, t)
    assert r.branch == "uniqueness" and not r.ok


def test_gronwall_input_validation():
    with pytest.raises(InputError):
        gronwall_probe([0, 1], [1, 1])
    with pytest.raises(InputError):
        gronwall_probe([0, 1, 2], [1, -1, 1])


# Fischer ------------------------------------------------------------------------


def test_fischer_threshold_and_constant():
    spec = ModelSpec.build([1, 1], [[1, 0.5], [0.5, 1]], lam=[1, 1])
    L = fischer_threshold(spec, (0.5, 2.0))
    assert L == 32.0
    assert fischer_constant(spec, L, (0.5, 2.0)) == pytest.approx(15.33, rel=1e-3)


def test_fischer_equal_fields_trivial(sym2):
    g = Grid((1.0,), (8,))
    v = np.full((2, 8), 1.0)
    r = fischer_bounds_check(sym2, CutoffSpec(), v, v, g, (0.5, 2.0))
    assert r.H_KL == 0 and r.ineq2_ok and r.lhs2 == 0
    assert r.ineq1_ok and r.lhs1 == 0


def test_fischer_rejects_bounds(sym2):
    g = Grid((1.0,), (4,))
    with pytest.raises(InputError):
        fischer_bounds_check(sym2, CutoffSpec(), np.ones((2, 4)), np.full((2, 4), 3.0), g, (0.5, 2.0))
    with pytest.raises(InputError):
        fischer_threshold(sym2, (0.0, 1.0))


def test_fischer_small_ensemble_holds():
    spec = ModelSpec.build([1, 1], [[1, 0.5], [0.5, 1]], lam=[1, 1])
    L, C_L, results, worst = fischer_ensemble(spec, CutoffSpec(), Grid((1.0,), (16,)), (0.5, 2.0),
                                              count=50)
    assert all(r.ineq1_ok and r.ineq2_ok for r in results)
    assert worst <= C_L


# probe ----------------------------------------------------------------------------


def test_default_tolerance():
    g = Grid((2.0,), (10,))
    assert default_tolerance(g, 0.01) == pytest.approx((0.04 + 0.01) ** 2 * 2.0)


def test_probe_fine_proxy_uniqueness(sym2):
    g = Grid((1.0,), (16,))
    rep = weak_strong_probe(sym2, g, 2, CutoffSpec(), smooth_field(g), 0.05, 0.01)
    assert rep.gronwall.branch == "uniqueness" and rep.passed
    assert rep.fischer is not None
    assert "gronwall" in rep.summary()


def test_probe_manufactured_passes():
    spec = relaxation_spec()
    px = manufactured_strong(spec, (1.0,), [2.0, 1.5], [0.5, -0.4])
    g = Grid((1.0,), (32,))
    rep = weak_strong_probe(spec, g, 1, CutoffSpec(), None, 0.1, 0.005, mode="manufactured", proxy=px)
    assert rep.passed and np.max(rep.series.H_KL) < rep.tolerance


def test_probe_zero_tolerance_fails_honestly():
    spec = relaxation_spec()
    px = manufactured_strong(spec, (1.0,), [2.0, 1.5], [0.5, -0.4])
    g = Grid((1.0,), (16,))
    rep = weak_strong_probe(spec, g, 1, CutoffSpec(), None, 0.1, 0.01, mode="manufactured", proxy=px,
                            tolerance=0.0)
    assert not rep.passed


def test_probe_perturbed_uses_gronwall_branch(sym2):
    g = Grid((1.0,), (16,))
    rep = weak_strong_probe(sym2, g, 2, CutoffSpec(), smooth_field(g), 0.05, 0.01, perturbation=0.1)
    assert rep.gronwall.branch == "gronwall"
    assert rep.series.H_KL[0] > 0


def test_probe_requires_h4():
    spec = ModelSpec.build([1, 1], [[0.0, 3.0], [0.1, 1.0]])
    g = Grid((1.0,), (8,))
    with pytest.raises(HypothesisError, match="H4"):
        weak_strong_probe(spec, g, 2, CutoffSpec(), smooth_field(g), 0.02, 0.01)


def test_probe_mode_errors(sym2):
    g = Grid((1.0,), (8,))
    with pytest.raises(InputError):
        weak_strong_probe(sym2, g, 2, CutoffSpec(), smooth_field(g), 0.02, 0.01, mode="other")
    with pytest.raises(InputError):
        weak_strong_probe(sym2, g, 2, CutoffSpec(), None, 0.02, 0.01, mode="manufactured")


def test_report_csv_columns(sym2, tmp_path):
    g = Grid((1.0,), (8,))
    traj = simulate(sym2, g, smooth_field(g), 0.02, 0.01)
    rep = EntropyReport(series=relative_entropy_series(sym2, CutoffSpec(), traj,
                                                       ConstantProxy(np.array([1.0, 0.8]))))
    rep.to_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "t,entropy,H_rel,H_KL,H_KepsML,mass_1,mass_2,min_u,max_u"
    assert len(lines) == 4 and not rep.passed
