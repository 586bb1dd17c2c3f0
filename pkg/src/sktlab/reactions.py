"""Reaction terms f(u) and the sampling checks for the reaction hypotheses.

Three built-in families plus a user callback:

* ``zero``: f = 0.
* ``logistic``: f_i(u) = u_i (beta_i - sum_j gamma_ij u_j).
* ``relaxation``: f_i(u) = exp(-lambda_i) - u_i.
* ``user``: any callable mapping an (n, ...) array to an (n, ...) array.

All checks here are empirical. They sample the positive orthant and report
what they saw; they never claim an analytic result.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InputError

KINDS = ("zero", "logistic", "relaxation", "user")

#: absolute-plus-relative slack on sign conditions
SIGN_TOL = 1e-12


@dataclass(frozen=True)
class ReactionSpec:
    kind: str
    n: int
    beta: Optional[np.ndarray] = None
    gamma: Optional[np.ndarray] = None
    lam: Optional[np.ndarray] = None
    func: Optional[Callable] = field(default=None, compare=False)
    jac: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown reaction kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 1:
            raise InputError("reaction needs n >= 1")
        if self.kind == "logistic":
            beta = _frozen(self.beta, (self.n,), "beta")
            gamma = _frozen(self.gamma, (self.n, self.n), "gamma")
            if np.any(gamma < 0):
                raise InputError("logistic gamma must be nonnegative")
            object.__setattr__(self, "beta", beta)
            object.__setattr__(self, "gamma", gamma)
        elif self.kind == "relaxation":
            object.__setattr__(self, "lam", _frozen(self.lam, (self.n,), "lambda"))
        elif self.kind == "user" and not callable(self.func):
            raise InputError("user reaction needs a callable func")

    @classmethod
    def zero(cls, n: int) -> "ReactionSpec":
        return cls("zero", n)

    @classmethod
    def logistic(cls, beta, gamma) -> "ReactionSpec":
        beta = np.asarray(beta, dtype=float)
        return cls("logistic", beta.size, beta=beta, gamma=np.asarray(gamma, dtype=float))

    @classmethod
    def relaxation(cls, lam) -> "ReactionSpec":
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        return cls("relaxation", lam.size, lam=lam)

    @classmethod
    def user(cls, n: int, func: Callable, jac: Optional[Callable] = None) -> "ReactionSpec":
        """Register an embedding-code reaction.

        ``func`` receives an (n, m) array and must return an (n, m) array; it
        must be safe to call from several threads at once. ``jac``, if given,
        returns the (n, n, m) Jacobian; otherwise finite differences are used.
        """
        return cls("user", n, func=func, jac=jac)

    @property
    def params(self) -> dict:
        if self.kind == "logistic":
            return {"beta": self.beta.tolist(), "gamma": self.gamma.tolist()}
        return {}


def _frozen(x, shape, name):
    if x is None:
        raise InputError(f"missing reaction parameter {name}")
    arr = np.array(x, dtype=float)
    if arr.shape != shape:
        raise InputError(f"reaction parameter {name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"reaction parameter {name} must be finite")
    arr.setflags(write=False)
    return arr


def evaluate(r: ReactionSpec, u) -> np.ndarray:
    """f(u) for u of shape (n,) or (n, ...)."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] != r.n:
        raise InputError(f"expected {r.n} species, got leading dimension {u.shape[0]}")
    if not np.all(np.isfinite(u)):
        raise InputError("reaction input must be finite")
    if r.kind == "zero":
        return np.zeros_like(u)
    if r.kind == "logistic":
        crowd = np.tensordot(r.gamma, u, axes=(1, 0))
        return u * (r.beta.reshape((-1,) + (1,) * (u.ndim - 1)) - crowd)
    if r.kind == "relaxation":
        return np.exp(-r.lam).reshape((-1,) + (1,) * (u.ndim - 1)) - u
    flat = u.reshape(r.n, -1)
    out = np.asarray(r.func(flat), dtype=float)
    return out.reshape(u.shape)


def jacobian(r: ReactionSpec, u) -> np.ndarray:
    """df_i/du_j with shape (n, n, ...)."""
    u = np.asarray(u, dtype=float)
    n = r.n
    tail = u.shape[1:]
    if r.kind == "zero":
        return np.zeros((n, n) + tail)
    if r.kind == "relaxation":
        eye = np.eye(n).reshape((n, n) + (1,) * len(tail))
        return -np.broadcast_to(eye, (n, n) + tail).copy()
    if r.kind == "logistic":
        expand = (1,) * len(tail)
        crowd = np.tensordot(r.gamma, u, axes=(1, 0))
        jac = -r.gamma.reshape((n, n) + expand) * u[:, None]
        diag = r.beta.reshape((n,) + expand) - crowd
        idx = np.arange(n)
        jac[idx, idx] += diag
        return jac
    if r.jac is not None:
        flat = u.reshape(n, -1)
        return np.asarray(r.jac(flat), dtype=float).reshape((n, n) + tail)
    flat = u.reshape(n, -1)
    jac = np.empty((n, n, flat.shape[1]))
    for j in range(n):
        h = 1e-7 * (1.0 + np.abs(flat[j]))
        up, dn = flat.copy(), flat.copy()
        up[j] += h
        dn[j] = np.maximum(dn[j] - h, 0.0)
        jac[:, j] = (evaluate(r, up) - evaluate(r, dn)) / (up[j] - dn[j])
    return jac.reshape((n, n) + tail)


# --------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class Sampling:
    """Log-uniform sampling box for the empirical hypothesis checks."""

    count: int = 20000
    low: float = 1e-4
    high: float = 1e4
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise InputError("sampling count must be >= 1")
        if not (0.0 < self.low < self.high < np.inf):
            raise InputError("sampling range must satisfy 0 < low < high < inf")

    def draw(self, n: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """(n, count) samples, log-uniform per component."""
        rng = rng if rng is not None else np.random.default_rng(self.seed)
        logs = rng.uniform(np.log(self.low), np.log(self.high), size=(n, self.count))
        return np.exp(logs)


@dataclass
class DissipationResult:
    passed: bool
    worst_value: float
    worst_point: np.ndarray
    samples: int
    seed: int


def dissipation_density(spec, u) -> np.ndarray:
    """S(u) = sum_i pi_i f_i(u) (log u_i + lambda_i), per sample."""
    u = np.asarray(u, dtype=float)
    f = evaluate(spec.reaction, u)
    shape = (-1,) + (1,) * (u.ndim - 1)
    weights = spec.pi.reshape(shape)
    return np.sum(weights * f * (np.log(u) + spec.lam.reshape(shape)), axis=0)


def entropy_dissipation_check(spec, sampling: Sampling = Sampling()) -> DissipationResult:
    u = sampling.draw(spec.n)
    s = dissipation_density(spec, u)
    slack = SIGN_TOL * (1.0 + np.sum(u * u, axis=0))
    excess = s - slack
    k = int(np.argmax(excess))
    return DissipationResult(
        passed=bool(excess[k] <= 0.0),
        worst_value=float(s[k]),
        worst_point=u[:, k].copy(),
        samples=sampling.count,
        seed=sampling.seed,
    )


@dataclass
class QuasiPositivityResult:
    passed: bool
    violations: list
    samples: int
    seed: int


def quasi_positivity_check(r: ReactionSpec, sampling: Sampling = Sampling()) -> QuasiPositivityResult:
    """For each species i, check f_i(u) >= -tol on samples with u_i = 0."""
    rng = np.random.default_rng(sampling.seed)
    violations = []
    for i in range(r.n):
        u = sampling.draw(r.n, rng)
        u[i] = 0.0
        fi = evaluate(r, u)[i]
        bad = fi < -SIGN_TOL * (1.0 + np.sum(u * u, axis=0))
        if np.any(bad):
            k = int(np.argmin(fi))
            violations.append({"species": i, "count": int(bad.sum()), "worst": float(fi[k]),
                               "point": u[:, k].tolist()})
    return QuasiPositivityResult(not violations, violations, sampling.count * r.n, sampling.seed)


@dataclass
class MassGrowthResult:
    """Outcome of the total-growth check.

    ``status`` is exactly one of ``"H2.iii"`` (with ``m0``),
    ``"growth-alternative"`` (with ``p``, ``constant`` and the observed growth
    exponent) or ``"fail"``.
    """

    status: str
    m0: Optional[int] = None
    p: Optional[float] = None
    constant: Optional[float] = None
    observed_exponent: Optional[float] = None
    samples: int = 0
    seed: int = 0
    detail: str = ""


def mass_growth_check(r: ReactionSpec, sampling: Sampling = Sampling(), m0_max: int = 1000,
                      d: int = 1, min_support: int = 50) -> MassGrowthResult:
    u = sampling.draw(r.n)
    total = u.sum(axis=0)
    growth = evaluate(r, u).sum(axis=0)
    bad = growth < -SIGN_TOL * (1.0 + np.sum(u * u, axis=0))
    m0 = 0 if not np.any(bad) else int(np.floor(total[bad].max())) + 1
    support = int(np.count_nonzero(total >= m0))
    if m0 <= m0_max and support >= min(min_support, sampling.count):
        return MassGrowthResult("H2.iii", m0=m0, samples=sampling.count, seed=sampling.seed,
                                detail=f"{support} samples with sum(u) >= {m0}")

    p = 2.0 + 2.0 / d
    norm = np.sqrt(np.sum(u * u, axis=0))
    mag = np.abs(growth)
    constant = float(np.max(mag / (1.0 + norm ** p)))
    far = (norm >= 10.0) & (mag > 0.0)
    if np.count_nonzero(far) < 10:
        return MassGrowthResult("fail", p=p, constant=constant, samples=sampling.count,
                                seed=sampling.seed, detail="too few large samples for a growth fit")
    slope = float(np.polyfit(np.log(norm[far]), np.log(mag[far]), 1)[0])
    status = "growth-alternative" if slope <= p + 0.1 else "fail"
    return MassGrowthResult(status, p=p, constant=constant, observed_exponent=slope,
                            samples=sampling.count, seed=sampling.seed,
                            detail=f"sum f < 0 up to sum(u) = {m0 - 1}")


def lipschitz_estimate(r: ReactionSpec, radius: float, sampling: Sampling = Sampling()) -> float:
    """Largest sampled |f(u) - f(w)| / |u - w| over pairs in [0, radius]^n.

    Half of the pairs are close neighbours, which probes the local slope;
    the other half are independent points.
    """
    if not radius > 0:
        raise InputError("box radius must be positive")
    rng = np.random.default_rng(sampling.seed)
    m = sampling.count
    u = rng.uniform(0.0, radius, size=(r.n, m))
    w = rng.uniform(0.0, radius, size=(r.n, m))
    near = m // 2
    w[:, :near] = np.clip(u[:, :near] + 1e-3 * radius * rng.standard_normal((r.n, near)), 0.0, radius)
    dist = np.sqrt(np.sum((u - w) ** 2, axis=0))
    keep = dist > 1e-12 * radius
    df = np.sqrt(np.sum((evaluate(r, u[:, keep]) - evaluate(r, w[:, keep])) ** 2, axis=0))
    if not np.any(keep):
        return 0.0
    return float(np.max(df / dist[keep]))
