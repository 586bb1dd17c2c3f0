"""Time the finite-volume residual/Jacobian kernel: compiled loops versus numpy.

    python3 benchmarks/bench_kernels.py [--cells 64 256 1024] [--species 2] [--repeat 50]

Also times a short implicit run with each kernel.  The numba path is
compiled once before timing.  Setting SKTLAB_DISABLE_NUMBA=1 only changes the
library default; this script always times both kernels explicitly.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from sktlab.grid import Grid
from sktlab.model import ModelSpec
from sktlab.reactions import ReactionSpec
from sktlab.solver import kernels
from sktlab.solver.fv import _System, simulate


def _setup(n, cells, dim):
    rng = np.random.default_rng(0)
    a = rng.uniform(0.1, 1.0, (n, n))
    a[np.diag_indices(n)] += n
    spec = ModelSpec.build(np.ones(n), a, lam=np.ones(n), reaction=ReactionSpec.relaxation(np.ones(n)),
                           d=dim)
    grid = Grid((1.0,) * dim, (cells,) * dim)
    u = rng.uniform(0.5, 2.0, (n, grid.size))
    return spec, grid, u


def _time(fn, repeat):
    fn()
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def bench_kernel(n, cells, dim, repeat):
    spec, grid, u = _setup(n, cells, dim)
    out = {}
    for name, kern in (("numpy", kernels.fv_system_numpy), ("numba", kernels.fv_system_numba)):
        system = _System(spec, grid, u, 1e-3, 0.0, kern)
        w = np.log(u)
        out[name] = _time(lambda: system.evaluate(w, True), repeat)
    return out


def bench_run(n, cells, steps):
    spec, grid, u = _setup(n, cells, 1)
    out = {}
    for name, kern in (("numpy", kernels.fv_system_numpy), ("numba", kernels.fv_system_numba)):
        simulate(spec, grid, u, 1e-3, 1e-3, kernel=kern)
        start = time.perf_counter()
        simulate(spec, grid, u, steps * 1e-3, 1e-3, kernel=kern)
        out[name] = time.perf_counter() - start
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--cells", type=int, nargs="+", default=[64, 256, 1024])
    p.add_argument("--species", type=int, default=2)
    p.add_argument("--repeat", type=int, default=50)
    p.add_argument("--steps", type=int, default=20)
    args = p.parse_args(argv)

    print(f"{'case':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for dim in (1, 2):
        for cells in args.cells:
            if dim == 2 and cells > 128:
                continue
            t = bench_kernel(args.species, cells, dim, args.repeat)
            label = f"kernel {dim}D N={cells}"
            print(f"{label:<18}{1e3 * t['numpy']:>12.3f}{1e3 * t['numba']:>12.3f}"
                  f"{t['numpy'] / t['numba']:>10.2f}")
    for cells in args.cells:
        t = bench_run(args.species, cells, args.steps)
        label = f"run 1D N={cells}"
        print(f"{label:<18}{1e3 * t['numpy']:>12.1f}{1e3 * t['numba']:>12.1f}"
              f"{t['numpy'] / t['numba']:>10.2f}")


if __name__ == "__main__":
    main()
