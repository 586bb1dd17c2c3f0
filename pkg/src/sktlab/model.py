"""Model coefficients, the cross-diffusion matrix, and the structural hypotheses.

The diffusion matrix of the n-species population system is

    A_ij(u) = delta_ij (a_i0 + sum_k a_ik u_k) + a_ij u_i,

and the system carries the entropy density
``h(u) = sum_i pi_i (u_i (log u_i - 1 + lambda_i) + exp(-lambda_i))``.
Parabolicity hinges on the entropy-weighted mobility A(u) h''(u)^{-1} being
positive semidefinite, which holds under either the weak cross-diffusion
condition (eta > 0, all pi_i = 1) or detailed balance
(pi_i a_ij = pi_j a_ji).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import reactions as rx
from .errors import HypothesisError, InputError
from .reactions import ReactionSpec, Sampling

#: relative tolerance under which detailed balance is considered to hold
DB_TOL = 1e-12


def _vec(x, n, name):
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.size != n:
        raise InputError(f"{name} must have {n} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModelSpec:
    """All coefficients of the reaction-cross-diffusion system.

    ``b`` is an (n, d) array of constant drift vectors, one row per species.
    ``lam`` holds the entropy shifts lambda_i.
    """

    n: int
    d: int
    a0: np.ndarray
    a: np.ndarray
    pi: np.ndarray
    lam: np.ndarray
    b: np.ndarray
    reaction: ReactionSpec
    b_bound: float = field(init=False)

    def __post_init__(self):
        n, d = int(self.n), int(self.d)
        if n < 1:
            raise InputError("n must be >= 1")
        if d not in (1, 2):
            raise InputError("d must be 1 or 2")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "d", d)
        a0 = _vec(self.a0, n, "a0")
        a = np.array(self.a, dtype=float)
        if a.shape != (n, n):
            raise InputError(f"a must be {n}x{n}, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InputError("a must be finite")
        a.setflags(write=False)
        if np.any(a0 < 0) or np.any(a < 0):
            raise InputError("diffusion coefficients a_i0, a_ij must be nonnegative")
        pi = _vec(self.pi, n, "pi")
        if np.any(pi <= 0):
            raise InputError("entropy weights pi_i must be positive")
        lam = _vec(self.lam, n, "lambda")
        b = np.array(self.b if self.b is not None else np.zeros((n, d)), dtype=float)
        b = b.reshape(n, d)
        if not np.all(np.isfinite(b)):
            raise InputError("drift b must be finite")
        b.setflags(write=False)
        if self.reaction.n != n:
            raise InputError("reaction species count does not match n")
        for name, value in (("a0", a0), ("a", a), ("pi", pi), ("lam", lam), ("b", b)):
            object.__setattr__(self, name, value)
        object.__setattr__(self, "b_bound", float(np.max(np.abs(b))) if b.size else 0.0)

    @classmethod
    def build(cls, a0, a, pi=None, lam=None, b=None, reaction=None, d=1) -> "ModelSpec":
        a0 = np.atleast_1d(np.asarray(a0, dtype=float))
        n = a0.size
        return cls(
            n=n,
            d=d,
            a0=a0,
            a=np.asarray(a, dtype=float).reshape(n, n),
            pi=np.ones(n) if pi is None else pi,
            lam=np.zeros(n) if lam is None else lam,
            b=np.zeros((n, d)) if b is None else b,
            reaction=reaction if reaction is not None else ReactionSpec.zero(n),
        )

    def replace(self, **changes) -> "ModelSpec":
        kw = dict(n=self.n, d=self.d, a0=self.a0, a=self.a, pi=self.pi, lam=self.lam,
                  b=self.b, reaction=self.reaction)
        kw.update(changes)
        return ModelSpec(**kw)

    def __eq__(self, other):
        if not isinstance(other, ModelSpec):
            return NotImplemented
        return (self.n == other.n and self.d == other.d and self.reaction == other.reaction
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("a0", "a", "pi", "lam", "b")))

    __hash__ = None


def _density_vector(spec, u, strict=False):
    u = np.asarray(u, dtype=float)
    if u.shape[0] != spec.n:
        raise InputError(f"expected {spec.n} densities, got leading dimension {u.shape[0]}")
    if not np.all(np.isfinite(u)):
        raise InputError("densities must be finite")
    if strict and np.any(u <= 0):
        raise InputError("densities must be strictly positive")
    if np.any(u < 0):
        raise InputError("densities must be nonnegative")
    return u


def diffusion_matrix(spec: ModelSpec, u) -> np.ndarray:
    """A(u) for u of shape (n,) or (n, ...); the result has shape (n, n, ...)."""
    u = _density_vector(spec, u)
    tail = u.shape[1:]
    expand = (1,) * len(tail)
    crowd = spec.a0.reshape((-1,) + expand) + np.tensordot(spec.a, u, axes=(1, 0))
    mat = spec.a.reshape(spec.a.shape + expand) * u[:, None]
    idx = np.arange(spec.n)
    mat[idx, idx] += crowd
    return mat


def entropy_mobility_form(spec: ModelSpec, u, z):
    """Quadratic form of A(u) h''(u)^{-1} and its structural lower bound.

    Returns ``(Q, bound)`` with ``Q = sum_ij A_ij(u) (u_j / pi_j) z_i z_j``
    and ``bound = alpha0 sum_i u_i z_i^2 + 2 eta0 sum_i u_i^2 z_i^2``.
    For pi = 1 this is ``sum_ij A_ij(u) u_j z_i z_j``.
    """
    alpha0, eta0, _ = structural_constants(spec)
    u = _density_vector(spec, u, strict=True)
    z = np.asarray(z, dtype=float)
    pi = spec.pi.reshape((-1,) + (1,) * (u.ndim - 1))
    mob = diffusion_matrix(spec, u) * (u / pi)[None]
    q = np.einsum("ij...,i...,j...->...", mob, z, z)
    bound = alpha0 * np.sum(u * z * z, axis=0) + 2.0 * eta0 * np.sum(u * u * z * z, axis=0)
    return q, bound


def weak_cross_diffusion_eta(spec: ModelSpec) -> float:
    root = np.sqrt(spec.a)
    gap = 0.25 * np.sum((root - root.T) ** 2, axis=1)
    return float(np.min(np.diag(spec.a) - gap))


def detailed_balance_residual(spec: ModelSpec) -> float:
    flux = spec.pi[:, None] * spec.a
    diff = np.abs(flux - flux.T)
    return float(diff.max()) if spec.n > 1 else 0.0


def _branches(spec):
    """Admissibility of the two (H4) branches plus the reason each fails."""
    eta = weak_cross_diffusion_eta(spec)
    scale = float(np.max(spec.pi[:, None] * spec.a)) if spec.a.size else 0.0
    db_res = detailed_balance_residual(spec)
    wcd_ok = eta > 0 and bool(np.all(spec.pi == 1.0))
    db_ok = db_res <= DB_TOL * max(scale, 1.0)
    reasons = {}
    if not wcd_ok:
        reasons["weak-cross-diffusion"] = (
            f"eta = {eta:.6g} <= 0" if eta <= 0 else "requires pi_i = 1 for all i")
    if not db_ok:
        reasons["detailed-balance"] = f"max |pi_i a_ij - pi_j a_ji| = {db_res:.6g}"
    return wcd_ok, db_ok, eta, reasons


def structural_constants(spec: ModelSpec):
    """(alpha0, eta0, branch) of the positive-semidefiniteness bound.

    Detailed balance wins when both branches hold.
    """
    if np.any(spec.a0 <= 0) or np.any(np.diag(spec.a) <= 0):
        raise HypothesisError("(H4) requires a_i0 > 0 and a_ii > 0 for all i")
    wcd_ok, db_ok, eta, reasons = _branches(spec)
    alpha0 = float(np.min(spec.a0 / spec.pi))
    if db_ok:
        return alpha0, float(np.min(np.diag(spec.a) / spec.pi)), "detailed-balance"
    if wcd_ok:
        return alpha0, eta, "weak-cross-diffusion"
    raise HypothesisError(
        "(H4) fails under both branches: "
        + "; ".join(f"{k}: {v}" for k, v in sorted(reasons.items())))


# --------------------------------------------------------------------------
# hypothesis report


@dataclass
class HypothesisStatus:
    name: str
    status: str  # pass | fail | pass-by-sampling | fail-by-sampling | n/a
    samples: int = 0
    worst: Optional[float] = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("pass", "pass-by-sampling")


@dataclass
class HypothesisReport:
    entries: dict
    branch: Optional[str]
    eta: float
    alpha0: Optional[float]
    eta0: Optional[float]
    mass_growth: rx.MassGrowthResult
    seed: int
    warnings: list = field(default_factory=list)

    REQUIRED = ("H1", "H2.i", "H2.ii", "H3", "H4")

    @property
    def required_ok(self) -> bool:
        """(H1), (H2.i-ii), (H3), (H4) pass and (H2.iii) or its growth alternative holds.

        Entries reported as n/a (H3 without initial data) do not count against it.
        """
        return not self.failures()

    def failures(self) -> list:
        out = [k for k in self.REQUIRED
               if k in self.entries and self.entries[k].status != "n/a" and not self.entries[k].ok]
        if self.mass_growth.status == "fail":
            out.append("H2.iii")
        return out

    def rows(self) -> list:
        """One dict per hypothesis, for tabular export."""
        return [
            {"hypothesis": e.name, "status": e.status, "samples": e.samples,
             "worst": "" if e.worst is None else e.worst, "detail": e.detail}
            for e in self.entries.values()
        ]

    def to_text(self) -> str:
        lines = ["hypothesis report", f"seed = {self.seed}"]
        for e in self.entries.values():
            extra = f" samples={e.samples}" if e.samples else ""
            worst = f" worst={e.worst:.17g}" if e.worst is not None else ""
            lines.append(f"  {e.name:<7} {e.status:<17}{extra}{worst}  {e.detail}".rstrip())
        lines.append(f"  branch  {self.branch or 'none'}")
        lines.append(f"  eta     {self.eta:.17g}")
        if self.alpha0 is not None:
            lines.append(f"  alpha0  {self.alpha0:.17g}")
            lines.append(f"  eta0    {self.eta0:.17g}")
        mg = self.mass_growth
        if mg.status == "H2.iii":
            lines.append(f"  growth  H2.iii with M0 = {mg.m0}")
        else:
            obs = "n/a" if mg.observed_exponent is None else f"{mg.observed_exponent:.4g}"
            lines.append(f"  growth  {mg.status} (p = {mg.p:.6g}, observed exponent {obs})")
        for w in self.warnings:
            lines.append(f"  warning: {w}")
        lines.append(f"  required hypotheses {'PASS' if self.required_ok else 'FAIL'}")
        return "\n".join(lines) + "\n"


def validate_hypotheses(spec: ModelSpec, sampling: Sampling = Sampling(), u0=None,
                        lipschitz_radius: float = 10.0, m0_max: int = 1000) -> HypothesisReport:
    """Check (H1)-(H4); failures become report entries, never exceptions.

    ``u0`` (optional, any shape with leading species axis) is checked for
    (H3); without it (H3) is reported as n/a.
    """
    entries = {}
    notes = []
    entries["H1"] = HypothesisStatus(
        "H1", "pass" if np.all(np.isfinite(spec.b)) else "fail",
        detail=f"|b|_inf = {spec.b_bound:.17g}")

    r = spec.reaction
    lip = rx.lipschitz_estimate(r, lipschitz_radius, sampling)
    entries["H2.i"] = HypothesisStatus(
        "H2.i", "pass-by-sampling" if np.isfinite(lip) else "fail-by-sampling",
        samples=sampling.count, worst=lip, detail=f"empirical Lipschitz constant on [0,{lipschitz_radius:g}]^n")

    diss = rx.entropy_dissipation_check(spec, sampling)
    entries["H2.ii"] = HypothesisStatus(
        "H2.ii", "pass-by-sampling" if diss.passed else "fail-by-sampling",
        samples=diss.samples, worst=diss.worst_value,
        detail="max sum_i pi_i f_i (log u_i + lambda_i)")
    if np.any(spec.lam <= 0):
        notes.append("some lambda_i <= 0; (H2.ii) is stated for lambda_i > 0")

    qp = rx.quasi_positivity_check(r, sampling)
    entries["quasi+"] = HypothesisStatus(
        "quasi+", "pass-by-sampling" if qp.passed else "fail-by-sampling", samples=qp.samples,
        worst=min((v["worst"] for v in qp.violations), default=None),
        detail="f_i(u) >= 0 where u_i = 0")

    mg = rx.mass_growth_check(r, sampling, m0_max=m0_max, d=spec.d)
    if mg.status == "H2.iii":
        entries["H2.iii"] = HypothesisStatus("H2.iii", "pass-by-sampling", samples=mg.samples,
                                             detail=f"M0 = {mg.m0}")
    else:
        entries["H2.iii"] = HypothesisStatus("H2.iii", "fail-by-sampling", samples=mg.samples,
                                             detail=f"growth alternative: {mg.status}")

    if u0 is None:
        entries["H3"] = HypothesisStatus("H3", "n/a", detail="no initial data supplied")
    else:
        u0 = np.asarray(u0, dtype=float)
        low = float(np.min(u0)) if u0.size else np.nan
        ok = bool(np.all(np.isfinite(u0)) and low > 0)
        entries["H3"] = HypothesisStatus("H3", "pass" if ok else "fail", worst=low,
                                         detail="min of initial data")

    wcd_ok, db_ok, eta, reasons = _branches(spec)
    alpha0 = eta0 = branch = None
    try:
        alpha0, eta0, branch = structural_constants(spec)
        entries["H4"] = HypothesisStatus("H4", "pass", detail=f"branch {branch}")
    except HypothesisError as exc:
        entries["H4"] = HypothesisStatus("H4", "fail", detail=str(exc))

    return HypothesisReport(entries=entries, branch=branch, eta=eta, alpha0=alpha0, eta0=eta0,
                            mass_growth=mg, seed=sampling.seed, warnings=notes)

