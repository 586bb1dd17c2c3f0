import numpy as np
import pytest

from sktlab.errors import InputError
from sktlab.grid import Grid
from sktlab.model import ModelSpec, detailed_balance_residual, weak_cross_diffusion_eta
from sktlab.oracle import (OracleConfig, dense_integral, fd_gradient, fd_hessian, quadratic_form_min,
                           random_h4_spec)


def test_fd_gradient_linear_is_exact():
    np.testing.assert_allclose(fd_gradient(np.sum, np.array([0.3, 2.0, 5.0])), np.ones(3), rtol=1e-9)


def test_fd_hessian_quadratic():
    M = np.array([[2.0, 0.5], [0.5, 1.0]])
    h = fd_hessian(lambda x: 0.5 * x @ M @ x, np.array([1.0, -2.0]))
    np.testing.assert_allclose(h, M, rtol=1e-9)


def test_fd_rejects_nonfinite():
    with pytest.raises(InputError), np.errstate(invalid="ignore"):
        fd_gradient(lambda x: np.log(x[0]), np.array([0.0]), step=1e-3)


def test_dense_integral_polynomials():
    g = Grid((1.0, 2.0), (3, 5))
    assert dense_integral(lambda x: np.ones(x.shape[1]), g) == pytest.approx(2.0, rel=1e-14)
    # midpoint rule is exact for linear functions
    assert dense_integral(lambda x: x[0] + x[1], g) == pytest.approx(1.0 + 2.0, rel=1e-13)
    val = dense_integral(lambda x: np.cos(np.pi * x[0]) ** 2, Grid((1.0,), (16,)), subdivision=8)
    assert val == pytest.approx(0.5, abs=1e-12)


def test_config_validation():
    with pytest.raises(InputError):
        OracleConfig(fd_step=0)
    with pytest.raises(InputError):
        OracleConfig(subdivision=1)


@pytest.mark.parametrize("seed", range(5))
def test_random_detailed_balance_is_exact(seed):
    spec = random_h4_spec(branch="detailed-balance", seed=seed, n=3)
    assert detailed_balance_residual(spec) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_random_weak_cross_diffusion(seed):
    spec = random_h4_spec(branch="weak-cross-diffusion", seed=seed, n=3)
    assert weak_cross_diffusion_eta(spec) > 0 and np.all(spec.pi == 1)


def test_random_spec_reproducible_and_validated():
    a = random_h4_spec(seed=7, n=4)
    b = random_h4_spec(seed=7, n=4)
    np.testing.assert_array_equal(a.a, b.a)
    with pytest.raises(InputError):
        random_h4_spec(branch="other")
    with pytest.raises(InputError):
        random_h4_spec(ranges={"a0": (0.0, 1.0)})


def test_single_species_minimum_is_zero():
    # n = 1: Q = (a0 + 2 a u) u / pi z^2 equals the bound exactly
    spec = ModelSpec.build([0.7], [[1.3]], pi=[2.0])
    assert quadratic_form_min(spec, [0.4]) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("branch", ["weak-cross-diffusion", "detailed-balance"])
def test_quadratic_form_min_nonnegative_and_stable(branch):
    spec = random_h4_spec(branch=branch, seed=3, n=2)
    u = np.array([0.5, 3.0])
    coarse = quadratic_form_min(spec, u, resolution=10000)
    fine = quadratic_form_min(spec, u, resolution=20000)
    assert coarse >= -1e-12
    assert abs(coarse - fine) <= 1e-3 * (1 + abs(fine))


def test_quadratic_form_min_limits_n():
    with pytest.raises(InputError):
        quadratic_form_min(random_h4_spec(n=5), np.ones(5))
