"""Relative-entropy diagnostics for a computed solution u against a strong proxy v.

* ``entropy_balance_terms`` evaluates every term of the approximate entropy
  identity for the doubly cut-off relative entropy, so the identity can be
  checked term by term on discrete data.
* ``relative_entropy_series`` tracks H(u|v), H_K^L(u|v) and H_{K,eps}^{M,L}(u|v).
* ``gronwall_probe`` fits dH/dt <= C H and checks the exponential envelope.
* ``fischer_bounds_check`` searches the plateau edge L above which the cut-off
  entropy controls the mass and verifies both coercivity bounds.
* ``weak_strong_probe`` runs the whole experiment.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .entropy import (CutoffSpec, cutoff_of_total, cutoff_relative_entropy,
                      double_cutoff_relative_entropy,
                      relative_entropy, total_entropy)
from .errors import HypothesisError, InputError
from .grid import Field, Grid, values_on
from .model import HypothesisReport, validate_hypotheses
from .reactions import Sampling
from .reactions import evaluate as react
from .solver.fv import NewtonOptions, Trajectory, simulate
from .solver.proxy import ManufacturedProxy, fine_grid_proxy

log = logging.getLogger(__name__)

G_NAMES = tuple(f"G{k}" for k in range(1, 7))
I_NAMES = tuple(f"I{k}" for k in range(1, 13))
TERM_NAMES = G_NAMES + I_NAMES
#: terms that carry a derivative of a cutoff and vanish on its plateau
CUTOFF_GRADIENT_TERMS = ("G2", "G3", "G4", "G5", "I1", "I2", "I3", "I5", "I7", "I9")


# --------------------------------------------------------------------------
# balance audit


@dataclass
class EntropyBalanceTerms:
    """Time-integrated terms over [0, s] and the balance residual.

    ``lhs`` is the change of H_{K,eps}^{M,L} plus the change of
    sum_i pi_i exp(-lambda_i) int phi_K^M(u + eps) dx; ``residual`` is
    ``lhs - sum(terms)``.
    """

    window: float
    terms: dict
    lhs: float
    residual: float
    snapshots: int
    integrands: np.ndarray = field(repr=False, default=None)

    @property
    def total(self) -> float:
        return float(sum(self.terms.values()))

    def rows(self):
        out = [{"term": k, "value": v} for k, v in self.terms.items()]
        out += [{"term": "lhs", "value": self.lhs}, {"term": "sum_terms", "value": self.total},
                {"term": "residual", "value": self.residual}]
        return out


def _face_view(grid: Grid, x):
    left, right, axis, inv_h = grid.faces
    return 0.5 * (x[:, left] + x[:, right]), (x[:, right] - x[:, left]) * inv_h


def _fluxes(spec, ub, grad, axis, drift=True):
    """sum_l A_jl(ub) grad_l - ub_j b_j along each face's axis, shape (n, F)."""
    crowd = spec.a0[:, None] + spec.a @ ub
    flux = crowd * grad + ub * (spec.a @ grad)
    if drift:
        flux = flux - ub * spec.b[:, axis]
    return flux


def _balance_integrands(spec, cut: CutoffSpec, grid: Grid, u, v, src_u, src_v):
    """Spatial integrals of the 18 identity terms at one time level, plus the lhs functional.

    u, v: (n, cells) values; src_u = f(u) + g, src_v = f(v) + g at the cells.
    """
    eps = cut.eps
    pi = spec.pi[:, None]
    lam = spec.lam[:, None]
    w = grid.cell_measure
    _, _, axis, _ = grid.faces
    n = spec.n

    # faces ------------------------------------------------------------------
    ub, gu = _face_view(grid, u)
    vb, gv = _face_view(grid, v)
    ue = ub + eps
    total = ue.sum(axis=0)
    pm, pm_s, pm_ss = cutoff_of_total(total, cut.K, cut.M, cut.profile)
    pl, pl_s, pl_ss = cutoff_of_total(total, cut.K, cut.L, cut.profile)
    ent = np.sum(pi * (ue * (np.log(ue) + lam - 1.0) + np.exp(-lam)), axis=0)
    psi_u = np.log(ue) + lam
    psi_v = np.log(vb) + lam
    ju = _fluxes(spec, ub, gu, axis)
    jv = _fluxes(spec, vb, gv, axis)
    du = _fluxes(spec, ub, gu, axis, drift=False)
    dv = _fluxes(spec, vb, gv, axis, drift=False)
    bface = spec.b[:, axis]
    sum_ju = ju.sum(axis=0)
    sum_gu = gu.sum(axis=0)

    def faces(x):
        return float(np.sum(x) * w)

    G = np.empty(6)
    I = np.empty(12)
    G[0] = -faces(pm * np.sum(pi * ju * gu / ue, axis=0))
    G[1] = -faces(pm_ss * ent * sum_ju * sum_gu)
    G[2] = -faces(pm_s * np.sum(pi * psi_u * ju, axis=0) * sum_gu)
    G[3] = -faces(pm_s * sum_ju * np.sum(pi * psi_u * gu, axis=0))
    I[0] = faces(pl_s * sum_ju * np.sum(pi * psi_v * gu, axis=0))
    I[1] = faces(pl_s * np.sum(pi * psi_v * ju, axis=0) * sum_gu)
    I[2] = faces(pl_ss * np.sum(pi * ue * psi_v, axis=0) * sum_ju * sum_gu)
    I[3] = faces(pl * np.sum(pi * du * gv / vb, axis=0))
    I[4] = faces(pl_s * sum_ju * np.sum(pi * ue * gv / vb, axis=0))
    I[5] = faces(pl * np.sum(pi * jv * gu / vb, axis=0))
    I[6] = faces(pl_s * np.sum(pi * ue * jv / vb, axis=0) * sum_gu)
    I[9] = -faces(pl * np.sum(pi * ue * dv * gv / vb ** 2, axis=0))
    I[11] = eps * faces(pl * np.sum(pi * bface * gv / vb, axis=0))

    # cells --------------------------------------------------------------------
    uc = u + eps
    tc = uc.sum(axis=0)
    cm, cm_s, _ = cutoff_of_total(tc, cut.K, cut.M, cut.profile)
    cl, cl_s, _ = cutoff_of_total(tc, cut.K, cut.L, cut.profile)
    ent_c = np.sum(pi * (uc * (np.log(uc) + lam - 1.0) + np.exp(-lam)), axis=0)
    psi_uc = np.log(uc) + lam
    psi_vc = np.log(v) + lam

    def cells(x):
        return float(np.sum(x) * w)

    G[4] = cells(cm_s * ent_c * src_u.sum(axis=0))
    G[5] = cells(cm * np.sum(pi * psi_uc * src_u, axis=0))
    I[7] = -cells(cl * np.sum(pi * psi_vc * src_u, axis=0))
    I[8] = -cells(cl_s * np.sum(pi * uc * psi_vc, axis=0) * src_u.sum(axis=0))
    I[10] = -cells(np.sum(pi * (uc * cl / v - 1.0) * src_v, axis=0))

    lhs = (np.sum(pi * (cm * uc * (np.log(uc) + lam - 1.0) - cl * uc * psi_vc + v)) * w
           + np.sum(pi * np.exp(-lam)) * np.sum(cm) * w)
    del n
    return np.concatenate([G, I]), float(lhs)


@dataclass(frozen=True)
class ConstantProxy:
    """A spatially and temporally constant positive state."""

    values: np.ndarray

    def snapshot(self, grid: Grid, t: float) -> Field:
        vals = np.asarray(self.values, dtype=float).reshape(-1, 1)
        return Field(np.repeat(vals, grid.size, axis=1), grid)

    def bounds(self):
        return float(np.min(self.values)), float(np.max(self.values))


def _proxy_snapshot(proxy, grid, t):
    return values_on(proxy.snapshot(grid, t), grid)


def _proxy_forcing(proxy, grid, forcing):
    if forcing is not None:
        return forcing
    if isinstance(proxy, ManufacturedProxy):
        return proxy.forcing_on(grid)
    return None


def _window_indices(traj: Trajectory, s: float):
    times = traj.times
    if s is None:
        return np.arange(len(times))
    if s < 0 or s > times[-1] * (1 + 1e-12) + 1e-14:
        raise InputError(f"window [0, {s}] exceeds the trajectory horizon {times[-1]}")
    k = int(np.argmin(np.abs(times - s)))
    if abs(times[k] - s) > 1e-9 * max(1.0, s):
        raise InputError(f"window end {s} is not a snapshot time")
    return np.arange(k + 1)


def entropy_balance_terms(spec, cut: CutoffSpec, traj_u: Trajectory, proxy_v, window: float = None,
                          forcing=None) -> EntropyBalanceTerms:
    """Evaluate G1..G6, I1..I12 over [0, window] and the balance residual.

    Space: midpoint sums on cells for pointwise terms, face averages and
    face differences for terms containing gradients.  Time: trapezoid rule
    over the snapshots.  When the proxy is manufactured its forcing is added
    to the reaction in every reaction term.
    """
    grid = traj_u.grid
    idx = _window_indices(traj_u, window)
    times = traj_u.times[idx]
    g = _proxy_forcing(proxy_v, grid, forcing)
    vals = np.empty((idx.size, 18))
    lhs = np.empty(idx.size)
    for row, k in enumerate(idx):
        t = times[row]
        u = traj_u[k].data
        v = _proxy_snapshot(proxy_v, grid, t)
        if np.any(u <= 0) or np.any(v <= 0):
            raise InputError(f"nonpositive density at t = {t}")
        gval = 0.0 if g is None else values_on(g(t) if callable(g) else g, grid)
        src_u = react(spec.reaction, u) + gval
        src_v = react(spec.reaction, v) + gval
        vals[row], lhs[row] = _balance_integrands(spec, cut, grid, u, v, src_u, src_v)
    if idx.size > 1:
        integrated = np.trapezoid(vals, times, axis=0)
    else:
        integrated = np.zeros(18)
    terms = {name: float(x) for name, x in zip(TERM_NAMES, integrated)}
    change = float(lhs[-1] - lhs[0])
    return EntropyBalanceTerms(window=float(times[-1]), terms=terms, lhs=change,
                               residual=change - float(np.sum(integrated)), snapshots=int(idx.size),
                               integrands=vals)


def exact_trajectory(proxy: ManufacturedProxy, grid: Grid, times) -> Trajectory:
    """Trajectory whose snapshots are the proxy's own cell-centre values."""
    times = np.asarray(times, dtype=float)
    traj = Trajectory(grid, times[0], proxy.field(grid, times[0]))
    for t in times[1:]:
        traj.append(t, proxy.field(grid, t), None)
    return traj


def observed_orders(errors, ratio: float = 2.0) -> np.ndarray:
    errors = np.asarray(errors, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / np.log(ratio)


def audit_refinement_study(spec, cut: CutoffSpec, proxy: ManufacturedProxy, cells, window: float,
                           steps, source: str = "exact", newton: NewtonOptions = NewtonOptions()):
    """Balance residuals on a ladder of grids.

    ``cells`` and ``steps`` are matched lists (cells per axis, time steps over
    the window).  ``source="exact"`` audits the proxy against itself;
    ``"solver"`` audits a forced simulation started from the proxy.
    Returns (residuals, orders, list of EntropyBalanceTerms).
    """
    results = []
    for nc, ns in zip(cells, steps):
        grid = Grid(proxy.extents, tuple([int(nc)] * len(proxy.extents)))
        times = np.linspace(0.0, window, int(ns) + 1)
        if source == "exact":
            traj = exact_trajectory(proxy, grid, times)
        elif source == "solver":
            traj = simulate(spec, grid, proxy.field(grid, 0.0), window, window / ns, newton,
                            proxy.forcing_on(grid))
        else:
            raise InputError(f"unknown audit source {source!r}")
        results.append(entropy_balance_terms(spec, cut, traj, proxy, window))
    res = np.array([abs(r.residual) for r in results])
    ratios = [cells[k + 1] / cells[k] for k in range(len(cells) - 1)]
    orders = np.array([np.log(res[k] / res[k + 1]) / np.log(ratios[k]) for k in range(len(ratios))])
    return res, orders, results


# --------------------------------------------------------------------------
# series


@dataclass
class EntropySeries:
    times: np.ndarray
    entropy: np.ndarray
    H_rel: np.ndarray
    H_KL: np.ndarray
    H_KepsML: np.ndarray
    mass: np.ndarray
    min_u: np.ndarray
    max_u: np.ndarray

    @property
    def dissipation(self) -> np.ndarray:
        """Per-step entropy decrease rate -(E_{k+1} - E_k) / (t_{k+1} - t_k)."""
        if self.times.size < 2:
            return np.zeros(0)
        return -np.diff(self.entropy) / np.diff(self.times)

    def __len__(self):
        return self.times.size


def relative_entropy_series(spec, cut: CutoffSpec, traj_u: Trajectory, proxy_v) -> EntropySeries:
    grid = traj_u.grid
    rows = []
    for k, t in enumerate(traj_u.times):
        u = traj_u[k]
        v = _proxy_snapshot(proxy_v, grid, t)
        rows.append((
            total_entropy(spec, u, grid),
            relative_entropy(spec, u, v, grid),
            cutoff_relative_entropy(spec, cut, u, v, grid),
            double_cutoff_relative_entropy(spec, cut, u, v, grid),
            u.mass(),
            float(u.data.min()),
            float(u.data.max()),
        ))
    cols = list(zip(*rows))
    return EntropySeries(
        times=traj_u.times,
        entropy=np.array(cols[0]),
        H_rel=np.array(cols[1]),
        H_KL=np.array(cols[2]),
        H_KepsML=np.array(cols[3]),
        mass=np.array(cols[4]),
        min_u=np.array(cols[5]),
        max_u=np.array(cols[6]),
    )


# --------------------------------------------------------------------------
# Gronwall


@dataclass
class GronwallResult:
    rate: float
    ok: bool
    margin: float
    branch: str  # "gronwall" or "uniqueness"
    degenerate: bool
    tolerance: float
    envelope_rate: float
    fit_residual: float


FLOOR = 1e-30


def gronwall_probe(times, values, tol_series: Optional[float] = None, tol0: Optional[float] = None,
                   newton_tol: float = 1e-10) -> GronwallResult:
    """Least-squares rate of log(H + 1e-30) against t and the envelope check.

    When H(0) <= tol0 the uniqueness branch applies and the check is
    H(t) <= tol_series throughout; otherwise H(t) <= H(0) exp(rate t) + tol_series.
    ``envelope_rate`` is the smallest rate for which the envelope holds.
    """
    t = np.asarray(times, dtype=float)
    h = np.asarray(values, dtype=float)
    if t.size < 3 or t.size != h.size:
        raise InputError("gronwall_probe needs at least 3 samples of (t, H)")
    if not np.all(np.isfinite(h)):
        raise InputError("H series must be finite")
    scale = 1.0 + float(np.max(np.abs(h)))
    if tol_series is None:
        tol_series = 10.0 * newton_tol * scale
    if tol0 is None:
        tol0 = tol_series
    if np.min(h) < -max(tol_series, 1e-14 * scale):
        raise InputError("H series must be nonnegative")
    h = np.maximum(h, 0.0)
    y = np.log(h + FLOOR)
    degenerate = bool(np.ptp(y) == 0.0 or np.all(h <= FLOOR))
    if degenerate:
        rate, fit_res = 0.0, 0.0
    else:
        coef, res, *_ = np.polyfit(t - t[0], y, 1, full=True)
        rate = float(coef[0])
        fit_res = float(np.sqrt(res[0] / t.size)) if res.size else 0.0
    dt = t - t[0]
    if h[0] <= tol0:
        branch = "uniqueness"
        margin = float(tol_series - np.max(h))
        env_rate = 0.0
    else:
        branch = "gronwall"
        env = h[0] * np.exp(rate * dt) + tol_series
        margin = float(np.min(env - h))
        later = dt > 0
        excess = np.maximum(h[later] - tol_series, FLOOR)
        env_rate = float(np.max(np.log(excess / h[0]) / dt[later])) if np.any(later) else 0.0
    return GronwallResult(rate=rate, ok=margin >= 0.0, margin=margin, branch=branch,
                          degenerate=degenerate, tolerance=float(tol_series),
                          envelope_rate=env_rate, fit_residual=fit_res)


# --------------------------------------------------------------------------
# Fischer bounds


@dataclass
class FischerResult:
    L: float
    ineq1_ok: bool
    ineq2_ok: bool
    margin1: float
    margin2: float
    C_L: float
    H_KL: float
    lhs1: float
    lhs2: float


DEFAULT_LADDER = tuple(2.0 ** k for k in range(0, 64))


def _coercivity_lower(spec, v_bounds):
    """Pieces of F(S), a lower bound of (integrand of H_K^L) - (1 + S)/2 on {sum u = S}."""
    c, C = v_bounds
    pi = spec.pi
    kappa = np.maximum(0.0, np.log(C) + spec.lam)
    beta = float(np.min(pi * (spec.lam - 1.0 - kappa)))
    pmin = float(pi.min())
    const = c * float(pi.sum()) - float(np.sum(pi - pmin)) / np.e - 0.5
    n = spec.n

    def F(S):
        return pmin * S * np.log(S / n) + (beta - 0.5) * S + const

    def dF(S):
        return pmin * (np.log(S / n) + 1.0) + beta - 0.5

    return F, dF


def fischer_threshold(spec, v_bounds, ladder=DEFAULT_LADDER) -> float:
    """Smallest ladder L such that the H_K^L integrand is >= (1 + sum u)/2 wherever sum u >= L.

    The test is uniform in u, in v in [c, C]^n and in the cutoff value: F is
    convex, so F(L) >= 0 and F'(L) >= 0 imply F >= 0 on [L, inf).
    """
    c, C = v_bounds
    if not (0 < c <= C):
        raise InputError("v bounds need 0 < c <= C")
    F, dF = _coercivity_lower(spec, v_bounds)
    for L in ladder:
        if F(L) >= 0.0 and dF(L) >= 0.0:
            return float(L)
    raise InputError("Fischer search ladder exhausted without a valid L")


def _ratio(uu, vv):
    # (u - v)^2 / (u log(u/v) - u + v), with the removable singularity at u = v
    d = uu - vv
    with np.errstate(divide="ignore", invalid="ignore"):
        ulog = np.where(uu > 0, uu * np.log(np.where(uu > 0, uu, 1.0) / vv), 0.0)
        den = ulog - uu + vv
        out = np.where(np.abs(d) > 1e-6 * vv, d * d / den, 2.0 * vv)
    return out


def fischer_constant(spec, L: float, v_bounds, resolution: int = 400) -> float:
    """Pointwise sup of sum_i |u_i - v_i|^2 / (integrand of H_K^L) on {sum u <= L}.

    On that set the cutoff is 1 and the integrand splits into per-species
    relative entropies, so the sup is max_i sup_{u in [0,L], v in [c,C]} ratio / pi_i.
    """
    c, C = v_bounds
    us = np.concatenate([np.linspace(0.0, L, resolution), np.geomspace(1e-9, L, resolution)])
    vs = np.linspace(c, C, resolution)
    grid_max = float(np.max(_ratio(us[:, None], vs[None, :])))
    # the ratio grows with u/v, so the edge u = L deserves a sharper look
    res = minimize_scalar(lambda vv: -float(_ratio(np.array(L), np.array(vv))), bounds=(c, C),
                          method="bounded", options={"xatol": 1e-12})
    best = max(grid_max, -float(res.fun), float(_ratio(np.array(L), np.array(c))),
               float(_ratio(np.array(L), np.array(C))))
    return best * (1.0 + 1e-9) / float(spec.pi.min())


def fischer_bounds_check(spec, cut: CutoffSpec, u, v, grid: Grid, v_bounds, ladder=DEFAULT_LADDER,
                         L: Optional[float] = None, C_L: Optional[float] = None) -> FischerResult:
    """Both coercivity bounds of the cut-off relative entropy at the searched L."""
    uu = values_on(u, grid)
    vv = values_on(v, grid)
    c, C = v_bounds
    if np.any(vv < c * (1 - 1e-12)) or np.any(vv > C * (1 + 1e-12)):
        raise InputError("v violates the supplied bounds")
    if L is None:
        L = fischer_threshold(spec, v_bounds, ladder)
    if C_L is None:
        C_L = fischer_constant(spec, L, v_bounds)
    cutL = CutoffSpec(K=cut.K, L=L, M=max(cut.M, 2 * L), eps=cut.eps, profile=cut.profile)
    H = cutoff_relative_entropy(spec, cutL, uu, vv, grid)
    total = uu.sum(axis=0)
    w = grid.cell_measure
    lhs1 = float(np.sum(np.where(total >= L, 1.0 + total, 0.0)) * w)
    lhs2 = float(np.sum(np.where(total <= L, np.sum((uu - vv) ** 2, axis=0), 0.0)) * w)
    slack = 1e-12 * (1.0 + abs(H))
    m1 = 2.0 * H - lhs1
    m2 = C_L * H - lhs2
    return FischerResult(L=float(L), ineq1_ok=m1 >= -slack, ineq2_ok=m2 >= -slack, margin1=float(m1),
                         margin2=float(m2), C_L=float(C_L), H_KL=H, lhs1=lhs1, lhs2=lhs2)


def fischer_ensemble(spec, cut: CutoffSpec, grid: Grid, v_bounds, count: int = 1000, seed: int = 0,
                     u_range=(1e-3, 1e3)):
    """Fischer check over random fields: u log-uniform per cell, v uniform in [c, C].

    Returns (L, C_L, results, observed max ratio of the second bound).
    """
    rng = np.random.default_rng(seed)
    L = fischer_threshold(spec, v_bounds)
    C_L = fischer_constant(spec, L, v_bounds)
    lo, hi = np.log(u_range[0]), np.log(u_range[1])
    out = []
    worst = 0.0
    for _ in range(count):
        u = np.exp(rng.uniform(lo, hi, size=(spec.n, grid.size)))
        v = rng.uniform(v_bounds[0], v_bounds[1], size=(spec.n, grid.size))
        r = fischer_bounds_check(spec, cut, u, v, grid, v_bounds, L=L, C_L=C_L)
        if r.H_KL > 0:
            worst = max(worst, r.lhs2 / r.H_KL)
        out.append(r)
    return L, C_L, out, worst


# --------------------------------------------------------------------------
# report and probe


@dataclass
class EntropyReport:
    series: EntropySeries
    gronwall: Optional[GronwallResult] = None
    fischer: Optional[FischerResult] = None
    hypotheses: Optional[HypothesisReport] = None
    tolerance: Optional[float] = None
    mode: str = ""
    dx: float = float("nan")
    dt: float = float("nan")
    balance: Optional[EntropyBalanceTerms] = None
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.gronwall is not None and self.gronwall.ok

    def to_csv(self, path):
        s = self.series
        n = s.mass.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "entropy", "H_rel", "H_KL", "H_KepsML"]
                       + [f"mass_{i + 1}" for i in range(n)] + ["min_u", "max_u"])
            for k in range(len(s)):
                row = [s.times[k], s.entropy[k], s.H_rel[k], s.H_KL[k], s.H_KepsML[k],
                       *s.mass[k], s.min_u[k], s.max_u[k]]
                w.writerow([format(float(x), ".17g") for x in row])

    def summary(self) -> str:
        lines = ["entropy report", f"mode = {self.mode}", f"snapshots = {len(self.series)}",
                 f"dx = {self.dx:.17g}", f"dt = {self.dt:.17g}"]
        if self.tolerance is not None:
            lines.append(f"tolerance = {self.tolerance:.17g}")
        lines.append(f"max H_KL = {float(np.max(self.series.H_KL)):.17g}")
        g = self.gronwall
        if g is not None:
            lines += [
                "gronwall:",
                f"  branch = {g.branch}",
                f"  rate = {g.rate:.17g}",
                f"  envelope_rate = {g.envelope_rate:.17g}",
                f"  degenerate_fit = {g.degenerate}",
                f"  margin = {g.margin:.17g}",
                f"  satisfied = {g.ok}",
            ]
        f = self.fischer
        if f is not None:
            lines += [
                "fischer:",
                f"  L = {f.L:.17g}",
                f"  C_L = {f.C_L:.17g}",
                f"  mass bound ok = {f.ineq1_ok} (margin {f.margin1:.6g})",
                f"  L2 bound ok = {f.ineq2_ok} (margin {f.margin2:.6g})",
            ]
        if self.hypotheses is not None:
            lines.append("hypotheses:")
            for e in self.hypotheses.entries.values():
                lines.append(f"  {e.name} = {e.status}")
            mg = self.hypotheses.mass_growth
            lines.append(f"  growth = {mg.status}")
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"


def default_tolerance(grid: Grid, dt: float, scale: float = 1.0) -> float:
    """A priori discretisation floor scale * (dx^2 + dt)^2 * |Omega| for the relative entropy."""
    dx = max(grid.dx)
    return float(scale * (dx * dx + dt) ** 2 * grid.measure)


def weak_strong_probe(spec, grid: Grid, refinement: int, cut: CutoffSpec, u0, T: float, dt: float,
                      mode: str = "fine-proxy", proxy: Optional[ManufacturedProxy] = None,
                      perturbation: float = 0.0, tolerance: Optional[float] = None,
                      newton: NewtonOptions = NewtonOptions(), sampling: Sampling = Sampling(),
                      require_hypotheses: bool = True) -> EntropyReport:
    """Run u on ``grid`` and a strong proxy v from the same (or perturbed) data.

    ``mode="fine-proxy"``: v is a run on ``grid.refine(refinement)`` from u0,
    restricted back to ``grid``.
    ``mode="manufactured"``: v is ``proxy`` (closed form); u0 defaults to
    v(., 0) at cell centres and u is solved with the proxy's forcing.

    ``perturbation`` multiplies u's initial data by (1 + perturbation) on the
    lower half of the first axis; v keeps the unperturbed data.  With
    identical data the Gronwall check runs in its uniqueness branch against
    ``tolerance`` (default ``default_tolerance`` plus the Newton floor).
    """
    if mode == "manufactured":
        if proxy is None:
            raise InputError("manufactured mode needs a proxy")
        base = proxy.field(grid, 0.0).data if u0 is None else values_on(u0, grid)
        forcing = proxy.forcing_on(grid)
    elif mode == "fine-proxy":
        if u0 is None:
            raise InputError("fine-proxy mode needs initial data u0")
        base = values_on(u0, grid)
        forcing = None
    else:
        raise InputError(f"unknown probe mode {mode!r}")

    start = base.copy()
    if perturbation:
        lower = grid.centers[0] < 0.5 * grid.extents[0]
        start[:, lower] *= 1.0 + perturbation

    hyp = validate_hypotheses(spec, sampling, u0=start)
    if require_hypotheses:
        core = [k for k in ("H1", "H2.i", "H2.ii", "H3", "H4") if not hyp.entries[k].ok]
        if core:
            raise HypothesisError(f"probe requires {', '.join(core)}; see hypothesis report")

    if mode == "manufactured":
        v_proxy = proxy
        bounds = proxy.bounds()
    else:
        v_proxy = fine_grid_proxy(spec, grid, refinement, Field(base, grid), T, dt, newton)
        bounds = v_proxy.bounds()

    traj = simulate(spec, grid, Field(start, grid), T, dt, newton, forcing)
    series = relative_entropy_series(spec, cut, traj, v_proxy)
    if tolerance is None:
        tolerance = default_tolerance(grid, dt) + 10.0 * newton.tol * (1.0 + float(np.max(series.H_KL)))
    notes = []
    if len(series) >= 3:
        # identical data: uniqueness branch regardless of roundoff in H(0)
        tol0 = np.inf if perturbation == 0 else None
        gw = gronwall_probe(series.times, series.H_KL, tol_series=tolerance, tol0=tol0,
                            newton_tol=newton.tol)
    else:
        gw = None
        notes.append("fewer than 3 snapshots; Gronwall probe skipped")
    fis = None
    v_final = _proxy_snapshot(v_proxy, grid, traj.times[-1])
    try:
        fis = fischer_bounds_check(spec, cut, traj.final, v_final, grid, bounds)
    except InputError as exc:
        notes.append(f"fischer check skipped: {exc}")
    if hyp.mass_growth.status != "H2.iii":
        notes.append(f"(H2.iii) not met; growth check reports {hyp.mass_growth.status}")
    return EntropyReport(series=series, gronwall=gw, fischer=fis, hypotheses=hyp, tolerance=tolerance,
                         mode=mode, dx=max(grid.dx), dt=dt, notes=notes)
