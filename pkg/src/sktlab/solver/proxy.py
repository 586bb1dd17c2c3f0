"""Strong-solution stand-ins: closed-form manufactured fields and fine-grid runs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import reactions as rx
from ..errors import InputError
from ..grid import Field, Grid, transfer
from .fv import NewtonOptions, Trajectory, simulate


@dataclass(frozen=True)
class ManufacturedProxy:
    """v_i(x, t) = m_i + A_i exp(-t) prod_k cos(pi x_k / E_k) on [0, E_1] x ...

    The cosine product has zero normal derivative on the box boundary.  The
    forcing g makes v an exact solution of the forced system
    dt v - div(A(v) grad v - v b) = f(v) + g.
    """

    spec: object
    extents: tuple
    mean: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self):
        n = self.spec.n
        m = np.array(self.mean, dtype=float).reshape(-1)
        amp = np.array(self.amplitude, dtype=float).reshape(-1)
        if m.size != n or amp.size != n:
            raise InputError(f"mean and amplitude need {n} entries")
        if np.any(m - np.abs(amp) <= 0):
            raise InputError("amplitude too large: need m_i > |A_i| so that min v > 0")
        ext = tuple(float(e) for e in np.atleast_1d(self.extents))
        if len(ext) != self.spec.d:
            raise InputError("extents must match the model dimension")
        if np.any(self.spec.b != 0):
            raise InputError("manufactured proxy needs b = 0: a drift flux cannot vanish on the "
                             "boundary for a field with zero normal derivative")
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "amplitude", amp)

    # shape function and derivatives -------------------------------------

    def _psi(self, x):
        x = np.atleast_2d(x)
        k = np.pi / np.asarray(self.extents)[:, None]
        cos = np.cos(k * x)
        sin = np.sin(k * x)
        psi = np.prod(cos, axis=0)
        grad = np.empty_like(x)
        for ax in range(x.shape[0]):
            others = np.prod(np.delete(cos, ax, axis=0), axis=0) if x.shape[0] > 1 else 1.0
            grad[ax] = -k[ax] * sin[ax] * others
        lap = -np.sum(k[:, 0] ** 2) * psi
        return psi, grad, lap

    def value(self, x, t):
        psi = self._psi(x)[0]
        return self.mean[:, None] + self.amplitude[:, None] * np.exp(-t) * psi[None]

    def gradient(self, x, t):
        """(n, dim, points)."""
        grad = self._psi(x)[1]
        return self.amplitude[:, None, None] * np.exp(-t) * grad[None]

    def time_derivative(self, x, t):
        psi = self._psi(x)[0]
        return -self.amplitude[:, None] * np.exp(-t) * psi[None]

    def forcing(self, x, t):
        """g_i = dt v_i - div(sum_j A_ij(v) grad v_j - v_i b_i) - f_i(v).

        With the affine coefficients the diffusive flux of species i is
        a_i0 grad v_i + sum_k a_ik grad(v_i v_k), so its divergence is
        a_i0 lap v_i + sum_k a_ik (v_i lap v_k + v_k lap v_i + 2 grad v_i . grad v_k).
        """
        spec = self.spec
        psi, grad, lap = self._psi(x)
        decay = np.exp(-t)
        v = self.mean[:, None] + self.amplitude[:, None] * decay * psi[None]
        gv = self.amplitude[:, None, None] * decay * grad[None]
        lv = self.amplitude[:, None] * decay * lap[None]
        dot = np.einsum("idp,kdp->ikp", gv, gv)
        div = spec.a0[:, None] * lv + np.einsum(
            "ik,ikp->ip", spec.a, v[:, None] * lv[None] + v[None] * lv[:, None] + 2.0 * dot)
        drift = np.einsum("id,idp->ip", spec.b, gv)
        return -self.amplitude[:, None] * decay * psi[None] - div + drift - rx.evaluate(spec.reaction, v)

    # grid views -------------------------------------------------------------

    def field(self, grid: Grid, t: float) -> Field:
        """Point values at cell centres."""
        self._check(grid)
        return Field(self.value(grid.centers, t), grid)

    def forcing_on(self, grid: Grid):
        """Callable t -> (n, cells) forcing at cell centres, as the solver expects."""
        self._check(grid)
        centers = grid.centers
        return lambda t: self.forcing(centers, t)

    def _check(self, grid):
        if grid.extents != self.extents:
            raise InputError(f"grid extents {grid.extents} differ from proxy box {self.extents}")

    # certified bounds ----------------------------------------------------------

    @property
    def lower(self) -> float:
        """c in c <= v <= C: min_i (m_i - |A_i|)."""
        return float(np.min(self.mean - np.abs(self.amplitude)))

    @property
    def upper(self) -> float:
        """C bounding v, |dt v| and |grad v| for all t >= 0."""
        amp = np.abs(self.amplitude)
        k = np.pi / np.asarray(self.extents)
        grad = float(np.max(amp)) * float(np.sqrt(np.sum(k ** 2)))
        return float(max(np.max(self.mean + amp), np.max(amp), grad))

    def bounds(self):
        return self.lower, self.upper

    def snapshot(self, grid: Grid, t: float) -> Field:
        return self.field(grid, t)


def manufactured_strong(spec, extents, mean, amplitude) -> ManufacturedProxy:
    return ManufacturedProxy(spec, tuple(np.atleast_1d(extents)), mean, amplitude)


@dataclass
class FineGridProxy:
    """A run on a refined grid, compared after cell-average restriction."""

    refinement: int
    trajectory: Trajectory
    coarse: Grid

    def snapshot(self, grid: Grid, t: float) -> Field:
        if grid != self.coarse:
            raise InputError("fine-grid proxy is tied to its coarse grid")
        return transfer(self.trajectory.at_time(t), self.trajectory.grid, grid)

    def bounds(self):
        data = self.trajectory.data
        return float(data.min()), float(data.max())


def fine_grid_proxy(spec, coarse: Grid, refinement: int, u0, T: float, dt: float,
                    newton: NewtonOptions = NewtonOptions(), forcing=None) -> FineGridProxy:
    """Run on ``coarse.refine(refinement)`` from the prolonged initial data.

    The fine run uses the coarse step ``dt`` so that snapshot times coincide.
    """
    if int(refinement) < 1:
        raise InputError("refinement must be a positive integer")
    fine = coarse.refine(refinement)
    u0f = transfer(u0, coarse, fine)
    traj = simulate(spec, fine, u0f, T, dt, newton, forcing)
    return FineGridProxy(int(refinement), traj, coarse)
