"""Brute-force reference computations for the test suite.

Nothing here calls the analytic formulas it is meant to check: derivatives
come from central differences, integrals from subdivided midpoint sums, and
the quadratic-form minimum from a direct search over the unit sphere with
its own assembly of the diffusion matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .model import ModelSpec


@dataclass(frozen=True)
class OracleConfig:
    """fd_step: relative step for gradients; hess_step: relative step for Hessians."""

    fd_step: float = 1e-6
    hess_step: float = 1e-2
    subdivision: int = 4
    ranges: dict = field(default_factory=lambda: dict(DEFAULT_RANGES))
    seed: int = 0

    def __post_init__(self):
        if not (self.fd_step > 0 and self.hess_step > 0):
            raise InputError("finite-difference steps must be positive")
        if int(self.subdivision) < 2:
            raise InputError("subdivision must be at least 2")


DEFAULT_RANGES = {
    "a0": (0.1, 2.0),
    "diag": (0.1, 2.0),
    "offdiag": (0.0, 1.0),
    "log2_pi": (-3, 3),
}


def _step(u, rel):
    return rel * (1.0 + float(np.max(np.abs(u))))


def _call(f, x):
    val = f(x)
    val = float(np.asarray(val, dtype=float).reshape(()))
    if not np.isfinite(val):
        raise InputError(f"function not finite at {x}")
    return val


def fd_gradient(f, u, step: float = None) -> np.ndarray:
    """Central-difference gradient of a scalar function of an n-vector."""
    u = np.asarray(u, dtype=float).reshape(-1)
    h = _step(u, OracleConfig.fd_step) if step is None else float(step)
    out = np.empty(u.size)
    for i in range(u.size):
        e = np.zeros(u.size)
        e[i] = h
        out[i] = (_call(f, u + e) - _call(f, u - e)) / (2.0 * h)
    return out


def _second_differences(f, u, h):
    n = u.size
    out = np.empty((n, n))
    f0 = _call(f, u)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        out[i, i] = (_call(f, u + ei) - 2.0 * f0 + _call(f, u - ei)) / (h * h)
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            val = (_call(f, u + ei + ej) - _call(f, u + ei - ej)
                   - _call(f, u - ei + ej) + _call(f, u - ei - ej)) / (4.0 * h * h)
            out[i, j] = out[j, i] = val
    return out


def fd_hessian(f, u, step: float = None, richardson: bool = True) -> np.ndarray:
    """Central-difference Hessian from function values only.

    Second differences lose two orders of magnitude to rounding, so the
    default step is the larger 1e-2 (1 + |u|_inf) and one Richardson
    extrapolation (steps h and h/2) lifts the truncation error to O(h^4).
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    h = _step(u, OracleConfig.hess_step) if step is None else float(step)
    coarse = _second_differences(f, u, h)
    if not richardson:
        return coarse
    fine = _second_differences(f, u, 0.5 * h)
    return (4.0 * fine - coarse) / 3.0


def dense_integral(expr, grid, subdivision: int = 4) -> float:
    """Midpoint sum of ``expr`` on every cell split into subdivision^dim pieces.

    ``expr(x)`` takes points of shape (dim, P) and returns P values (or an
    array whose last axis is P, which is summed over as well).
    """
    sub = int(subdivision)
    if sub < 1:
        raise InputError("subdivision must be positive")
    axes = []
    for k in range(grid.dim):
        h = grid.extents[k] / (grid.cells[k] * sub)
        axes.append((np.arange(grid.cells[k] * sub) + 0.5) * h)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh])
    vals = np.asarray(expr(pts), dtype=float)
    return float(np.sum(vals) * grid.cell_measure / sub ** grid.dim)


def _eta(a):
    n = a.shape[0]
    best = np.inf
    for i in range(n):
        gap = 0.0
        for j in range(n):
            gap += (np.sqrt(a[i, j]) - np.sqrt(a[j, i])) ** 2
        best = min(best, a[i, i] - 0.25 * gap)
    return best


def random_h4_spec(ranges: dict = None, branch: str = "weak-cross-diffusion", seed=0, n: int = 2,
                   d: int = 1, budget: int = 10000) -> ModelSpec:
    """A random spec satisfying the requested branch of (H4).

    Weak cross-diffusion: pi = 1 and rejection sampling until eta > 0.
    Detailed balance: pi_i = 2^k_i with integer k_i, a random upper triangle,
    and a_ji = pi_i a_ij / pi_j.  Powers of two make the balance exact in
    floating point.
    """
    r = dict(DEFAULT_RANGES)
    r.update(ranges or {})
    for key in ("a0", "diag"):
        if not r[key][0] > 0:
            raise InputError(f"range {key} must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    a0 = rng.uniform(*r["a0"], size=n)
    if branch == "weak-cross-diffusion":
        for _ in range(budget):
            a = rng.uniform(*r["offdiag"], size=(n, n))
            a[np.diag_indices(n)] = rng.uniform(*r["diag"], size=n)
            if _eta(a) > 0:
                return ModelSpec.build(a0, a, pi=np.ones(n), d=d)
        raise InputError("rejection budget exhausted; widen the diagonal range")
    if branch == "detailed-balance":
        lo, hi = r["log2_pi"]
        pi = 2.0 ** rng.integers(int(lo), int(hi) + 1, size=n)
        a = np.zeros((n, n))
        a[np.diag_indices(n)] = rng.uniform(*r["diag"], size=n)
        for i in range(n):
            for j in range(i + 1, n):
                a[i, j] = rng.uniform(*r["offdiag"])
                a[j, i] = pi[i] * a[i, j] / pi[j]
        return ModelSpec.build(a0, a, pi=pi, d=d)
    raise InputError(f"unknown branch {branch!r}")


def _sphere(n, resolution, rng):
    if n == 1:
        return np.array([[1.0, -1.0]])
    if n == 2:
        th = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)])
    if n == 3:
        k = np.arange(resolution) + 0.5
        polar = np.arccos(1.0 - 2.0 * k / resolution)
        azim = np.pi * (1.0 + 5 ** 0.5) * k
        return np.stack([np.cos(azim) * np.sin(polar), np.sin(azim) * np.sin(polar), np.cos(polar)])
    z = rng.standard_normal((n, resolution))
    return z / np.linalg.norm(z, axis=0)


def quadratic_form_min(spec: ModelSpec, u, resolution: int = 10000, seed: int = 0) -> float:
    """min over a unit-sphere grid of Q(u, z) - bound(u, z).

    Q = sum_ij A_ij(u) u_j / pi_j z_i z_j with A assembled entry by entry,
    and the bound alpha0 sum u_i z_i^2 + 2 eta0 sum u_i^2 z_i^2 with its
    constants recomputed from the coefficients.
    """
    n = spec.n
    if n > 4:
        raise InputError("quadratic_form_min supports n <= 4")
    u = np.asarray(u, dtype=float).reshape(-1)
    a, a0, pi = np.asarray(spec.a), np.asarray(spec.a0), np.asarray(spec.pi)
    A = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            A[i, j] = a[i, j] * u[i]
            if i == j:
                A[i, j] += a0[i] + sum(a[i, k] * u[k] for k in range(n))
    M = A * (u / pi)[None, :]
    balanced = all(abs(pi[i] * a[i, j] - pi[j] * a[j, i]) <= 1e-12 * max(1.0, abs(pi[i] * a[i, j]))
                   for i in range(n) for j in range(n))
    alpha0 = min(a0[i] / pi[i] for i in range(n))
    if balanced:
        eta0 = min(a[i, i] / pi[i] for i in range(n))
    else:
        eta0 = _eta(a)
    z = _sphere(n, int(resolution), np.random.default_rng(seed))
    q = np.einsum("ip,ij,jp->p", z, M, z)
    bound = alpha0 * np.einsum("i,ip->p", u, z * z) + 2.0 * eta0 * np.einsum("i,ip->p", u * u, z * z)
    return float(np.min(q - bound))
