"""Entropy densities, relative entropies and the double-logarithmic cutoff.

The cutoff weight of a density vector u with total S = sum_k u_k is

    phi_K^L(u) = phi( log(log(S + e) / log(L + e)) / log(K + 1) ),

equal to 1 while S <= L and to 0 once S + e >= (L + e)^(K + 1).  It only
depends on u through S, so every gradient component is the same and the
Hessian is a constant matrix times the all-ones matrix.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import GridMismatchError, InputError
from .grid import Grid, values_on

E = np.e

# arguments this close to 1 are treated as 1; floating point cannot resolve
# S + e = (L + e)^(K+1) any better, and every profile is flat to all orders there
_EDGE = 1e-12


class CutoffProfile:
    """Smooth nonincreasing phi with phi = 1 on (-inf, 0] and phi = 0 on [1, inf)."""

    name = "abstract"

    def _inner(self, x):  # pragma: no cover - overridden
        raise NotImplementedError

    def _evaluate(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape
        x = x.reshape(-1)
        inside = (x > 0.0) & (x < 1.0)
        val = np.where(x <= 0.0, 1.0, 0.0)
        d1 = np.zeros_like(x)
        d2 = np.zeros_like(x)
        if np.any(inside):
            v, p, q = self._inner(x[inside])
            val[inside] = v
            d1[inside] = p
            d2[inside] = q
        return val.reshape(shape), d1.reshape(shape), d2.reshape(shape)

    def value(self, x):
        return self._evaluate(x)[0]

    def d1(self, x):
        return self._evaluate(x)[1]

    def d2(self, x):
        return self._evaluate(x)[2]

    def all(self, x):
        """(phi, phi', phi'') at x."""
        return self._evaluate(x)

    def _sup(self, which):
        xs = np.linspace(0.0, 1.0, 20001)
        vals = np.abs(self._evaluate(xs)[which])
        k = int(np.argmax(vals))
        lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, xs.size - 1)]
        res = minimize_scalar(lambda t: -abs(float(self._evaluate(np.array([t]))[which][0])),
                              bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
        return max(float(vals[k]), -float(res.fun))

    @cached_property
    def sup_d1(self) -> float:
        return self._sup(1)

    @cached_property
    def sup_d2(self) -> float:
        return self._sup(2)

    def __repr__(self):
        return f"{type(self).__name__}()"


class BumpProfile(CutoffProfile):
    """C-infinity profile N(1-x) / (N(x) + N(1-x)) with N(t) = exp(-1/t)."""

    name = "bump"

    def _inner(self, x):
        with np.errstate(over="ignore", invalid="ignore"):
            s = 1.0 / (1.0 - x) - 1.0 / x
            ds = 1.0 / x ** 2 + 1.0 / (1.0 - x) ** 2
            dds = 2.0 / (1.0 - x) ** 3 - 2.0 / x ** 3
            phi = 1.0 / (1.0 + np.exp(s))
            # phi (1 - phi) without cancellation
            w = 1.0 / (4.0 * np.cosh(0.5 * s) ** 2)
            d1 = np.where(w > 0, -w * ds, 0.0)
            d2 = np.where(w > 0, -(1.0 - 2.0 * phi) * d1 * ds - w * dds, 0.0)
        return phi, d1, d2


class SmoothstepProfile(CutoffProfile):
    """C^2 quintic 1 - (10 x^3 - 15 x^4 + 6 x^5)."""

    name = "smoothstep"

    def _inner(self, x):
        phi = 1.0 - x ** 3 * (10.0 - 15.0 * x + 6.0 * x * x)
        d1 = -30.0 * x * x * (1.0 - x) ** 2
        d2 = -60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
        return phi, d1, d2


PROFILES = {"bump": BumpProfile(), "smoothstep": SmoothstepProfile()}


def get_profile(profile) -> CutoffProfile:
    if isinstance(profile, CutoffProfile):
        return profile
    try:
        return PROFILES[profile]
    except KeyError:
        raise InputError(f"unknown cutoff profile {profile!r}; choose from {sorted(PROFILES)}") from None


@dataclass(frozen=True)
class CutoffSpec:
    """Regularisation parameters: decay width K, plateau edges L < M, shift eps."""

    K: int = 3
    L: float = 10.0
    M: float = 100.0
    eps: float = 1e-3
    profile: str = "bump"

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 3:
            raise InputError("K must be an integer >= 3")
        object.__setattr__(self, "K", int(self.K))
        if not (self.L > 0 and np.isfinite(self.L)):
            raise InputError("L must be positive")
        if not (self.M > self.L and np.isfinite(self.M)):
            raise InputError("M must exceed L")
        if not (0.0 < self.eps < 0.5):
            raise InputError("eps must lie in (0, 1/2)")
        get_profile(self.profile)

    @property
    def phi(self) -> CutoffProfile:
        return get_profile(self.profile)


# --------------------------------------------------------------------------
# cutoff calculus


def _nonneg(u):
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or not np.all(np.isfinite(u)):
        raise InputError("cutoff arguments must be finite and nonnegative")
    return u


def cutoff_of_total(total, K, L, profile="bump"):
    """(phi, d phi/dS, d^2 phi/dS^2) as functions of the total density S."""
    prof = get_profile(profile)
    s = np.asarray(total, dtype=float)
    logk = np.log(K + 1.0)
    ls = np.log(s + E)
    z = np.log(ls / np.log(L + E)) / logk
    z = np.where(z >= 1.0 - _EDGE, 1.0, z)
    val, d1, d2 = prof.all(z)
    dz = 1.0 / (logk * (s + E) * ls)
    ddz = -dz * (1.0 + 1.0 / ls) / (s + E)
    return val, d1 * dz, d2 * dz * dz + d1 * ddz


def cutoff_argument(u, K, L) -> np.ndarray:
    s = _nonneg(u).sum(axis=0)
    return np.log(np.log(s + E) / np.log(L + E)) / np.log(K + 1.0)


def cutoff_value(u, K, L, profile="bump"):
    """phi_K^L(u) for u of shape (n,) or (n, ...)."""
    return cutoff_of_total(_nonneg(u).sum(axis=0), K, L, profile)[0]


def cutoff_grad(u, K, L, profile="bump"):
    """Gradient of phi_K^L, shape like u; all components coincide."""
    u = _nonneg(u)
    g = cutoff_of_total(u.sum(axis=0), K, L, profile)[1]
    return np.broadcast_to(g, u.shape).copy()


def cutoff_hess(u, K, L, profile="bump"):
    """Hessian of phi_K^L, shape (n, n, ...); every entry coincides."""
    u = _nonneg(u)
    hh = cutoff_of_total(u.sum(axis=0), K, L, profile)[2]
    n = u.shape[0]
    return np.broadcast_to(hh, (n, n) + u.shape[1:]).copy()


def cutoff_bound_constants(profile="bump"):
    """Constants C4, C5 with

    |d_j phi| * log(K+1) (S+e) log(S+e) <= C4 and
    |d_i d_j phi| * log(K+1) (S+e)^2 log(S+e) <= C5.
    """
    prof = get_profile(profile)
    return prof.sup_d1, prof.sup_d2 + 2.0 * prof.sup_d1


# --------------------------------------------------------------------------
# entropies


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def _species(spec, arr):
    return (-1,) + (1,) * (arr.ndim - 1)


def entropy_density(spec, u):
    """h(u) = sum_i pi_i (u_i (log u_i - 1 + lambda_i) + exp(-lambda_i)), per point."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] != spec.n:
        raise InputError(f"expected {spec.n} species")
    if np.any(u < 0) or not np.all(np.isfinite(u)):
        raise InputError("entropy density needs finite nonnegative densities")
    shape = _species(spec, u)
    lam = spec.lam.reshape(shape)
    terms = _xlogx(u) + u * (lam - 1.0) + np.exp(-lam)
    return np.sum(spec.pi.reshape(shape) * terms, axis=0)


def total_entropy(spec, u, grid: Grid) -> float:
    return float(np.sum(entropy_density(spec, values_on(u, grid))) * grid.cell_measure)


def _pair(u, v, grid):
    uu = values_on(u, grid)
    vv = values_on(v, grid)
    if uu.shape != vv.shape:
        raise GridMismatchError("u and v must have the same number of species and cells")
    if np.any(vv <= 0) or not np.all(np.isfinite(vv)):
        raise InputError("v must be strictly positive and finite")
    if np.any(uu < 0) or not np.all(np.isfinite(uu)):
        raise InputError("u must be finite and nonnegative")
    return uu, vv


def relative_entropy_density(spec, u, v):
    shape = _species(spec, u)
    terms = _xlogx(u) - u - u * np.log(v) + v
    return np.sum(spec.pi.reshape(shape) * terms, axis=0)


def relative_entropy(spec, u, v, grid: Grid) -> float:
    """H(u|v) = sum_i pi_i int (u_i log u_i - u_i - u_i log v_i + v_i) dx."""
    uu, vv = _pair(u, v, grid)
    return float(np.sum(relative_entropy_density(spec, uu, vv)) * grid.cell_measure)


def cutoff_relative_entropy_density(spec, cut: CutoffSpec, u, v):
    shape = _species(spec, u)
    lam = spec.lam.reshape(shape)
    phi = cutoff_value(u, cut.K, cut.L, cut.profile)
    terms = _xlogx(u) + u * (lam - 1.0) - phi * u * (np.log(v) + lam) + v
    return np.sum(spec.pi.reshape(shape) * terms, axis=0)


def cutoff_relative_entropy(spec, cut: CutoffSpec, u, v, grid: Grid) -> float:
    """H_K^L(u|v): entropy with the cross term u_i (log v_i + lambda_i) weighted by phi_K^L(u)."""
    uu, vv = _pair(u, v, grid)
    return float(np.sum(cutoff_relative_entropy_density(spec, cut, uu, vv)) * grid.cell_measure)


def double_cutoff_relative_entropy_density(spec, cut: CutoffSpec, u, v):
    shape = _species(spec, u)
    lam = spec.lam.reshape(shape)
    ue = u + cut.eps
    total = ue.sum(axis=0)
    phi_m = cutoff_of_total(total, cut.K, cut.M, cut.profile)[0]
    phi_l = cutoff_of_total(total, cut.K, cut.L, cut.profile)[0]
    terms = phi_m * ue * (np.log(ue) + lam - 1.0) - phi_l * ue * (np.log(v) + lam) + v
    return np.sum(spec.pi.reshape(shape) * terms, axis=0)


def double_cutoff_relative_entropy(spec, cut: CutoffSpec, u, v, grid: Grid) -> float:
    """H_{K,eps}^{M,L}(u|v).

    The entropy part of u + eps is weighted by phi_K^M(u + eps), the cross
    term by phi_K^L(u + eps).  The constants exp(-lambda_i) are not part of
    this functional; the balance audit adds them separately.
    """
    uu, vv = _pair(u, v, grid)
    dens = double_cutoff_relative_entropy_density(spec, cut, uu, vv)
    return float(np.sum(dens) * grid.cell_measure)


def log_gap_bounds(s):
    """(lower, log s - s + 1, 0) with lower = -(1 + 1/s)(s - 1)^2."""
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)):
        raise InputError("log_gap_bounds needs s > 0")
    d = s - 1.0
    # log1p keeps the sign right when s is within a few ulps of 1
    value = np.where(s < 0.5, np.log(s), np.log1p(d)) - d
    lower = -(1.0 + 1.0 / s) * d * d
    upper = np.zeros_like(value)
    if value.ndim == 0:
        return float(lower), float(value), 0.0
    return lower, value, upper
