"""Implicit Euler finite-volume solver in entropy variables."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .. import reactions as rx
from ..entropy import total_entropy
from ..errors import InputError, SolverError
from ..grid import Field, Grid, values_on
from . import kernels

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewtonOptions:
    tol: float = 1e-10
    max_iter: int = 25
    max_halvings: int = 10
    armijo: float = 1e-4
    min_damping: float = 2.0 ** -12


@dataclass(frozen=True)
class StepInfo:
    dt: float
    iterations: int
    residual: float
    halvings: int = 0


class Trajectory:
    """Snapshots (t_k, u(t_k)) on one grid with per-step metadata.

    ``steps[k]`` describes how snapshot k + 1 was reached from snapshot k.
    """

    def __init__(self, grid: Grid, t0: float, u0: Field):
        self.grid = grid
        self._times = [float(t0)]
        self._data = [values_on(u0, grid).copy()]
        self.steps: list = []

    def append(self, t: float, u, info: StepInfo):
        if not t > self._times[-1]:
            raise InputError("trajectory times must increase strictly")
        self._times.append(float(t))
        self._data.append(values_on(u, self.grid).copy())
        self.steps.append(info)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self._times)

    @property
    def data(self) -> np.ndarray:
        """(snapshots, n, cells)."""
        return np.stack(self._data)

    def __len__(self):
        return len(self._times)

    def __getitem__(self, k) -> Field:
        return Field(self._data[k], self.grid)

    @property
    def final(self) -> Field:
        return self[-1]

    def at_time(self, t: float, atol: float = 1e-12) -> Field:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self._times[k] - t) > atol * max(1.0, abs(t)):
            raise InputError(f"no snapshot at t = {t}")
        return self[k]

    def to_csv(self, path, cadence: int = 1):
        """Columns t, cell, x[, y], u_1..u_n; every ``cadence``-th snapshot plus the last."""
        n = self._data[0].shape[0]
        coords = self.grid.centers
        axes = ["x", "y"][: self.grid.dim]
        keep = sorted(set(range(0, len(self), max(1, int(cadence)))) | {len(self) - 1})
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "cell"] + axes + [f"u_{i + 1}" for i in range(n)])
            for k in keep:
                t = self._times[k]
                u = self._data[k]
                for p in range(self.grid.size):
                    w.writerow([_fmt(t), p] + [_fmt(c) for c in coords[:, p]]
                               + [_fmt(x) for x in u[:, p]])


def _fmt(x) -> str:
    return format(float(x), ".17g")


@lru_cache(maxsize=32)
def _pattern(n: int, grid: Grid):
    left, right, axis, inv_h = grid.faces
    rows, cols = kernels.jacobian_pattern(n, grid.size, left, right)
    return left, right, axis, inv_h, rows, cols


def _face_drift(spec, grid):
    _, _, axis, _ = grid.faces
    if spec.d != grid.dim:
        raise InputError(f"model dimension {spec.d} does not match grid dimension {grid.dim}")
    return np.ascontiguousarray(spec.b[:, axis])


def _forcing_values(forcing, t, grid, n):
    if forcing is None:
        return 0.0
    g = forcing(t) if callable(forcing) else forcing
    return values_on(g, grid).reshape(n, grid.size)


class _System:
    """Everything that stays fixed across the Newton iterations of one step."""

    def __init__(self, spec, grid, u_old, dt, g, kernel):
        self.spec = spec
        self.grid = grid
        self.u_old = np.ascontiguousarray(u_old)
        self.inv_dt = 1.0 / dt
        self.g = g
        left, right, _, inv_h, rows, cols = _pattern(spec.n, grid)
        self.left, self.right, self.inv_h = left, right, inv_h
        self.rows, self.cols = rows, cols
        self.bface = _face_drift(spec, grid)
        self.a0 = np.ascontiguousarray(spec.a0)
        self.a = np.ascontiguousarray(spec.a)
        self.kernel = kernel
        self.size = spec.n * grid.size

    def evaluate(self, w, with_jac):
        with np.errstate(over="ignore", invalid="ignore"):
            u = np.exp(w)
        if not np.all(np.isfinite(u)):
            return None, None, u
        src = rx.evaluate(self.spec.reaction, u) + self.g
        src = np.ascontiguousarray(np.broadcast_to(src, u.shape))
        dsrc = rx.jacobian(self.spec.reaction, u) if with_jac else np.zeros((1, 1, 1))
        res, data = self.kernel(u, w, self.u_old, self.inv_dt, self.left, self.right, self.inv_h,
                                self.bface, self.a0, self.a, src, np.ascontiguousarray(dsrc), with_jac)
        return res, data, u

    def matrix(self, data):
        return sp.csc_matrix((data, (self.rows, self.cols)), shape=(self.size, self.size))


def fv_residual(spec, grid: Grid, u_new, u_old, dt: float, forcing=None, kernel=None) -> np.ndarray:
    """Implicit Euler residual (u_new - u_old)/dt - div_h F(u_new) - f(u_new) - g.

    ``forcing`` is an (n, cells) array or None.  Returns an (n, cells) array.
    """
    un = values_on(u_new, grid)
    uo = values_on(u_old, grid)
    if np.any(un <= 0):
        raise InputError("u_new must be strictly positive (entropy variables need log u)")
    if not dt > 0:
        raise InputError("dt must be positive")
    system = _System(spec, grid, uo, dt, _forcing_values(forcing, None, grid, spec.n),
                     kernel or kernels.fv_system)
    res, _, _ = system.evaluate(np.log(un), with_jac=False)
    return res


def fv_operator(spec, grid: Grid, u, forcing=None) -> np.ndarray:
    """Spatial part div_h F(u) + f(u) + g, i.e. the discrete right-hand side."""
    uu = values_on(u, grid)
    # with u_old = u and unit dt the time derivative vanishes
    return -fv_residual(spec, grid, uu, uu, 1.0, forcing)


def _scaled_norm(res, dt, scale):
    return float(np.max(np.abs(res))) * dt / scale


def _newton(system, w0, dt, opts, scale):
    w = w0.copy()
    res, data, u = system.evaluate(w, with_jac=True)
    norm = _scaled_norm(res, dt, scale)
    history = [norm]
    it = 0
    polished = False
    while True:
        if norm <= opts.tol:
            if polished or norm == 0.0:
                return w, it, norm, history
            polished = True
        elif it >= opts.max_iter:
            return None, it, norm, history
        try:
            step = spla.spsolve(system.matrix(data), -res.T.reshape(-1))
        except RuntimeError:
            return None, it, norm, history
        step = step.reshape(-1, w.shape[0]).T
        if not np.all(np.isfinite(step)):
            return None, it, norm, history
        it += 1
        damping = 1.0
        while True:
            trial = w + damping * step
            r_try, d_try, _ = system.evaluate(trial, with_jac=True)
            n_try = np.inf if r_try is None else _scaled_norm(r_try, dt, scale)
            if polished:
                # final undamped sweep toward roundoff; keep it only if it helps
                if n_try < norm:
                    w, res, data, norm = trial, r_try, d_try, n_try
                history.append(norm)
                return w, it, norm, history
            if n_try <= (1.0 - opts.armijo * damping) * norm:
                w, res, data, norm = trial, r_try, d_try, n_try
                break
            damping *= 0.5
            if damping < opts.min_damping:
                return None, it, norm, history
        history.append(norm)


def step_implicit(spec, grid: Grid, u_old, dt: float, newton: NewtonOptions = NewtonOptions(),
                  forcing=None, t_old: float = 0.0, kernel=None):
    """One accepted implicit Euler step, halving dt on Newton stagnation.

    ``forcing`` may be an array or a callable of time evaluated at the new
    time level.  Returns ``(Field, StepInfo)``; ``StepInfo.dt`` is the step
    actually taken.
    """
    uo = values_on(u_old, grid)
    if np.any(uo <= 0):
        raise InputError("u_old must be strictly positive")
    if not dt > 0:
        raise InputError("dt must be positive")
    kernel = kernel or kernels.fv_system
    scale = max(1.0, float(np.max(uo)))
    w0 = np.log(uo)
    tried = []
    h = dt
    for halving in range(newton.max_halvings + 1):
        g = _forcing_values(forcing, t_old + h, grid, spec.n)
        system = _System(spec, grid, uo, h, g, kernel)
        w, its, norm, history = _newton(system, w0, h, newton, scale)
        if w is not None:
            return Field(np.exp(w), grid), StepInfo(h, its, norm, halving)
        tried.append({"dt": h, "iterations": its, "residual": norm, "history": history})
        log.debug("newton stalled at dt=%g (residual %.3e); halving", h, norm)
        h *= 0.5
    raise SolverError(f"Newton failed after {newton.max_halvings} step halvings",
                      diagnostics={"attempts": tried})


def simulate(spec, grid: Grid, u0, T: float, dt: float, newton: NewtonOptions = NewtonOptions(),
             forcing=None, callback: Optional[Callable] = None, kernel=None) -> Trajectory:
    """Integrate from t = 0 to T; every accepted step becomes a snapshot.

    ``callback(t, field, info)`` runs after each accepted step.  On solver
    failure the partial trajectory rides on the raised ``SolverError``.
    """
    field0 = u0 if isinstance(u0, Field) else Field(u0, grid)
    if field0.grid != grid:
        raise InputError("initial field lives on a different grid")
    if np.any(field0.data <= 0):
        raise InputError("initial data must be strictly positive")
    if T < 0 or not dt > 0:
        raise InputError("need T >= 0 and dt > 0")
    traj = Trajectory(grid, 0.0, field0)
    t = 0.0
    u = field0
    slack = 1e-12 * max(1.0, T)
    while T - t > slack:
        h = min(dt, T - t)
        if T - (t + h) <= slack:
            h = T - t
        try:
            u, info = step_implicit(spec, grid, u, h, newton, forcing, t_old=t, kernel=kernel)
        except SolverError as exc:
            exc.trajectory = traj
            raise
        t = T if info.dt == h and h == T - t else t + info.dt
        traj.append(t, u, info)
        if callback is not None:
            callback(t, u, info)
    return traj


def discrete_entropy(spec, traj: Trajectory) -> np.ndarray:
    return np.array([total_entropy(spec, traj[k], traj.grid) for k in range(len(traj))])
