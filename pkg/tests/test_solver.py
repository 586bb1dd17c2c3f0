import numpy as np
import pytest

from sktlab.entropy import total_entropy
from sktlab.errors import InputError, SolverError
from sktlab.grid import Field, Grid
from sktlab.model import ModelSpec
from sktlab.reactions import ReactionSpec
from sktlab.solver import (NewtonOptions, discrete_entropy, fine_grid_proxy,
                           fv_operator, fv_residual, kernels, manufactured_strong, simulate,
                           step_implicit)
from sktlab.solver.fv import _pattern, _System
from sktlab.grid import transfer

from conftest import relaxation_spec

KERNELS = [pytest.param(kernels.fv_system_numpy, id="numpy"),
           pytest.param(kernels.fv_system_numba, id="numba")]


def bumpy(grid, n=2):
    x = grid.centers[0]
    rows = [1.0 + 0.5 * np.cos(np.pi * x), 1.2 - 0.3 * np.cos(2 * np.pi * x), 0.8 + 0.2 * np.sin(3 * x)]
    return Field(np.vstack(rows[:n]), grid)


def test_residual_constant_field(sym2):
    g = Grid((1.0,), (8,))
    u = np.full((2, 8), 1.3)
    np.testing.assert_array_equal(fv_residual(sym2, g, u, u, 0.1), 0.0)


@pytest.mark.parametrize("kernel", KERNELS)
def test_residual_telescopes(sym2, kernel):
    g = Grid((1.0, 0.5), (6, 4))
    spec = sym2.replace(d=2, b=np.array([[0.3, -0.1], [0.0, 0.7]]))
    rng = np.random.default_rng(0)
    un = rng.uniform(0.5, 2.0, (2, g.size))
    uo = rng.uniform(0.5, 2.0, (2, g.size))
    res = fv_residual(spec, g, un, uo, 0.05, kernel=kernel)
    np.testing.assert_allclose(res.sum(axis=1) * g.cell_measure,
                               (un - uo).sum(axis=1) * g.cell_measure / 0.05, rtol=1e-12)


def test_residual_rejects_nonpositive(sym2):
    g = Grid((1.0,), (4,))
    with pytest.raises(InputError):
        fv_residual(sym2, g, np.zeros((2, 4)), np.ones((2, 4)), 0.1)


@pytest.mark.parametrize("dim", [1, 2])
def test_kernels_agree(dim):
    g = Grid((1.0,) * dim, (7,) * dim)
    rng = np.random.default_rng(dim)
    spec = ModelSpec.build([1.0, 0.4, 0.9], rng.uniform(0.1, 1.0, (3, 3)), d=dim,
                           b=rng.uniform(-1, 1, (3, dim)),
                           reaction=ReactionSpec.logistic([1, 0.5, 0.2], rng.uniform(0, 1, (3, 3))))
    u = rng.uniform(0.3, 3.0, (3, g.size))
    uo = rng.uniform(0.3, 3.0, (3, g.size))
    s_np = _System(spec, g, uo, 0.01, 0.0, kernels.fv_system_numpy)
    s_nb = _System(spec, g, uo, 0.01, 0.0, kernels.fv_system_numba)
    r1, d1, _ = s_np.evaluate(np.log(u), True)
    r2, d2, _ = s_nb.evaluate(np.log(u), True)
    np.testing.assert_allclose(r1, r2, rtol=1e-12, atol=1e-10)
    np.testing.assert_allclose(d1, d2, rtol=1e-11, atol=1e-9)


@pytest.mark.parametrize("kernel", KERNELS)
def test_jacobian_matches_finite_differences(kernel):
    g = Grid((1.0,), (6,))
    spec = ModelSpec.build([1.0, 0.5], [[1.0, 0.5], [2.0, 1.0]], b=[[0.4], [-0.2]],
                           reaction=ReactionSpec.logistic([1, 1], np.ones((2, 2))))
    rng = np.random.default_rng(4)
    u = rng.uniform(0.5, 2.0, (2, g.size))
    system = _System(spec, g, u * 0.9, 0.01, 0.0, kernel)
    w = np.log(u)
    res, data, _ = system.evaluate(w, True)
    jac = system.matrix(data).toarray()
    n = spec.n
    fd = np.empty_like(jac)
    h = 1e-7
    for p in range(g.size):
        for i in range(n):
            e = np.zeros_like(w)
            e[i, p] = h
            rp = system.evaluate(w + e, False)[0]
            rm = system.evaluate(w - e, False)[0]
            fd[:, p * n + i] = ((rp - rm) / (2 * h)).T.reshape(-1)
    assert np.max(np.abs(jac - fd)) <= 1e-6 * np.max(np.abs(jac))


def test_pattern_cached():
    g = Grid((1.0,), (5,))
    assert _pattern(2, g) is _pattern(2, g)


@pytest.mark.parametrize("kernel", KERNELS)
def test_step_constant_field_is_fixed_point(sym2, kernel):
    g = Grid((1.0,), (8,))
    u = Field(np.full((2, 8), 0.7), g)
    new, info = step_implicit(sym2, g, u, 0.1, kernel=kernel)
    np.testing.assert_allclose(new.data, u.data, rtol=1e-14)
    assert info.iterations <= 1


def test_step_relaxation_equilibrium():
    spec = relaxation_spec(lam=(0.5, 2.0))
    g = Grid((1.0,), (8,))
    u = Field(np.repeat(np.exp(-spec.lam)[:, None], 8, axis=1), g)
    new, _ = step_implicit(spec, g, u, 0.3)
    np.testing.assert_allclose(new.data, u.data, rtol=1e-14)


def test_step_single_species_entropy_decreases():
    spec = ModelSpec.build([0.5], [[1.0]])
    g = Grid((1.0,), (32,))
    u = Field(1.0 + 1e-3 * np.cos(np.pi * g.centers), g)
    new, _ = step_implicit(spec, g, u, 0.01)
    assert total_entropy(spec, new, g) <= total_entropy(spec, u, g)


def test_simulate_zero_horizon(sym2):
    g = Grid((1.0,), (8,))
    traj = simulate(sym2, g, bumpy(g), 0.0, 0.1)
    assert len(traj) == 1


@pytest.mark.parametrize("kernel", KERNELS)
def test_simulate_mass_positivity_entropy(sym2, kernel):
    g = Grid((1.0,), (48,))
    traj = simulate(sym2, g, bumpy(g), 0.2, 0.01, kernel=kernel)
    masses = np.array([traj[k].mass() for k in range(len(traj))])
    assert np.max(np.abs(np.diff(masses, axis=0)) / masses[:-1]) <= 1e-12
    assert np.all(traj.data > 0)
    ent = discrete_entropy(sym2, traj)
    assert np.all(np.diff(ent) <= 10 * 1e-10 * (1 + np.abs(ent[:-1])))


def test_simulate_with_drift_conserves_mass():
    spec = ModelSpec.build([1.0, 1.0], [[1.0, 0.5], [0.5, 1.0]], b=[[2.0], [-1.0]])
    g = Grid((1.0,), (32,))
    traj = simulate(spec, g, bumpy(g), 0.1, 0.01)
    m = np.array([traj[k].mass() for k in range(len(traj))])
    assert np.max(np.abs(m - m[0]) / m[0]) <= 1e-12


def test_simulate_deterministic(sym2):
    g = Grid((1.0,), (16,))
    a = simulate(sym2, g, bumpy(g), 0.05, 0.01)
    b = simulate(sym2, g, bumpy(g), 0.05, 0.01)
    assert np.array_equal(a.data, b.data) and np.array_equal(a.times, b.times)


def test_simulate_2d(sym2):
    spec = sym2.replace(d=2, b=np.zeros((2, 2)))
    g = Grid((1.0, 1.0), (8, 8))
    x, y = g.centers
    u0 = Field(np.vstack([1 + 0.3 * np.cos(np.pi * x) * np.cos(np.pi * y), 1 + 0.2 * np.cos(np.pi * y)]), g)
    traj = simulate(spec, g, u0, 0.05, 0.01)
    ent = discrete_entropy(spec, traj)
    assert np.all(np.diff(ent) <= 1e-9)


def test_solver_failure_carries_partial_trajectory(sym2):
    g = Grid((1.0,), (8,))
    opts = NewtonOptions(max_iter=1, max_halvings=1, tol=1e-300)
    with pytest.raises(SolverError) as exc:
        simulate(sym2, g, bumpy(g), 0.1, 0.05, opts)
    assert exc.value.trajectory is not None and len(exc.value.trajectory) >= 1
    assert exc.value.diagnostics["attempts"]


def test_trajectory_csv(sym2, tmp_path):
    g = Grid((1.0,), (4,))
    traj = simulate(sym2, g, bumpy(g), 0.03, 0.01)
    path = tmp_path / "t.csv"
    traj.to_csv(path, cadence=2)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,cell,x,u_1,u_2"
    # snapshots 0, 2 and the final one
    assert len(lines) == 1 + 3 * 4


def test_manufactured_constant_amplitude():
    spec = relaxation_spec()
    px = manufactured_strong(spec, (1.0,), [2.0, 1.5], [0.0, 0.0])
    g = Grid((1.0,), (8,))
    expected = -(np.exp(-spec.lam) - px.mean)
    np.testing.assert_allclose(px.forcing_on(g)(0.3), np.repeat(expected[:, None], 8, 1))


def test_manufactured_bounds_and_validation():
    spec = relaxation_spec()
    px = manufactured_strong(spec, (2.0,), [2.0, 1.5], [0.5, -0.4])
    assert px.lower == pytest.approx(1.1)
    g = Grid((2.0,), (64,))
    vals = px.field(g, 0.0).data
    assert vals.min() >= px.lower and vals.max() <= px.upper
    with pytest.raises(InputError):
        manufactured_strong(spec, (1.0,), [1.0, 1.0], [1.0, 0.1])
    with pytest.raises(InputError):
        manufactured_strong(spec.replace(b=np.ones((2, 1))), (1.0,), [2, 2], [0.1, 0.1])


def test_manufactured_forcing_spatial_order():
    spec = ModelSpec.build([1.0, 0.5], [[1.0, 0.5], [2.0, 1.0]],
                           reaction=ReactionSpec.logistic([1, 1], np.ones((2, 2))))
    px = manufactured_strong(spec, (1.0,), [2.0, 1.5], [0.5, -0.4])
    errs = []
    for n in (16, 32, 64, 128):
        g = Grid((1.0,), (n,))
        v = px.field(g, 0.2).data
        lhs = px.time_derivative(g.centers, 0.2)
        rhs = fv_operator(spec, g, v, px.forcing_on(g)(0.2))
        errs.append(np.sqrt(np.sum((lhs - rhs) ** 2) * g.cell_measure))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 1.8)


def test_fine_grid_proxy_refinement_one_is_identity(sym2):
    g = Grid((1.0,), (16,))
    proxy = fine_grid_proxy(sym2, g, 1, bumpy(g), 0.05, 0.01)
    traj = simulate(sym2, g, bumpy(g), 0.05, 0.01)
    np.testing.assert_array_equal(proxy.snapshot(g, 0.05).data, traj.final.data)


def test_fine_grid_proxy_restricts(sym2):
    g = Grid((1.0,), (16,))
    proxy = fine_grid_proxy(sym2, g, 2, bumpy(g), 0.02, 0.01)
    snap = proxy.snapshot(g, 0.02)
    fine_final = proxy.trajectory.final
    np.testing.assert_allclose(snap.data, transfer(fine_final, g.refine(2), g).data)
