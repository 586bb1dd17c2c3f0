import numpy as np
import pytest

from sktlab.errors import InputError
from sktlab.model import ModelSpec
from sktlab.reactions import (ReactionSpec, Sampling, dissipation_density, entropy_dissipation_check,
                              evaluate, jacobian, lipschitz_estimate, mass_growth_check,
                              quasi_positivity_check)
from sktlab import oracle

SMALL = Sampling(count=5000, seed=7)


def test_zero_reaction():
    r = ReactionSpec.zero(3)
    np.testing.assert_array_equal(evaluate(r, [1.0, 2.0, 3.0]), np.zeros(3))
    assert lipschitz_estimate(r, 5.0, SMALL) == 0.0
    assert mass_growth_check(r, SMALL).status == "H2.iii"
    assert quasi_positivity_check(r, SMALL).passed


def test_logistic_value():
    r = ReactionSpec.logistic([1, 1], np.ones((2, 2)))
    np.testing.assert_allclose(evaluate(r, [2.0, 0.1]), [-2.2, -0.11])


def test_relaxation_equilibrium():
    r = ReactionSpec.relaxation([0.0])
    assert evaluate(r, [1.0])[0] == 0.0


def test_bad_inputs():
    with pytest.raises(InputError):
        evaluate(ReactionSpec.zero(2), [np.nan, 1.0])
    with pytest.raises(InputError):
        ReactionSpec.logistic([1, 1], -np.ones((2, 2)))
    with pytest.raises(InputError):
        ReactionSpec("bogus", 2)


@pytest.mark.parametrize("r", [ReactionSpec.logistic([1.0, 0.5], [[1.0, 2.0], [0.3, 1.0]]),
                               ReactionSpec.relaxation([0.5, 2.0]),
                               ReactionSpec.user(2, lambda u: np.stack([u[0] * u[1], -u[0] ** 2]))])
def test_jacobian_matches_finite_differences(r):
    u = np.array([0.7, 1.9])
    jac = jacobian(r, u)
    for i in range(2):
        fd = oracle.fd_gradient(lambda x: evaluate(r, x)[i], u)
        np.testing.assert_allclose(jac[i], fd, rtol=1e-6, atol=1e-8)


def test_logistic_dissipation_sample_value():
    spec = ModelSpec.build([1, 1], [[1, 0], [0, 1]],
                           reaction=ReactionSpec.logistic([1, 1], np.ones((2, 2))))
    s = dissipation_density(spec, np.array([2.0, 0.1]))
    assert s == pytest.approx(-2.2 * np.log(2) - 0.11 * np.log(0.1))
    assert s < 0


def test_relaxation_dissipates_on_every_sample():
    lam = np.array([0.5, 2.0])
    spec = ModelSpec.build([1, 1], np.eye(2), lam=lam, reaction=ReactionSpec.relaxation(lam))
    res = entropy_dissipation_check(spec, SMALL)
    assert res.passed and res.worst_value <= 0.0
    u = SMALL.draw(2)
    assert np.all(dissipation_density(spec, u) <= 0.0)


def test_logistic_fails_dissipation():
    spec = ModelSpec.build([1, 1], np.eye(2), reaction=ReactionSpec.logistic([1, 1], np.ones((2, 2))))
    res = entropy_dissipation_check(spec, SMALL)
    assert not res.passed
    assert dissipation_density(spec, res.worst_point) > 0


@pytest.mark.parametrize("r", [ReactionSpec.logistic([1, 1], np.ones((2, 2))), ReactionSpec.relaxation([0, 0])])
def test_quasi_positivity_builtin(r):
    assert quasi_positivity_check(r, SMALL).passed


def test_quasi_positivity_detects_violation():
    r = ReactionSpec.user(2, lambda u: np.stack([-1.0 - u[1], np.zeros_like(u[1])]))
    res = quasi_positivity_check(r, SMALL)
    assert not res.passed and res.violations[0]["species"] == 0


def test_mass_growth_logistic_d2():
    res = mass_growth_check(ReactionSpec.logistic([1, 1], np.ones((2, 2))), SMALL, d=2)
    assert res.status == "growth-alternative"
    assert res.p == 3.0
    assert res.observed_exponent == pytest.approx(2.0, abs=0.1)


def test_mass_growth_relaxation_linear():
    res = mass_growth_check(ReactionSpec.relaxation([0.0, 0.0]), SMALL)
    assert res.status == "growth-alternative"
    assert res.observed_exponent == pytest.approx(1.0, abs=0.1)


def test_mass_growth_superpolynomial_fails():
    r = ReactionSpec.user(1, lambda u: -u ** 6)
    assert mass_growth_check(r, SMALL).status == "fail"


def test_lipschitz_relaxation_is_one():
    assert lipschitz_estimate(ReactionSpec.relaxation([0, 1]), 3.0, SMALL) == pytest.approx(1.0)


def test_lipschitz_logistic_grows_with_box():
    r = ReactionSpec.logistic([1, 1], np.ones((2, 2)))
    small, big = lipschitz_estimate(r, 1.0, SMALL), lipschitz_estimate(r, 10.0, SMALL)
    assert np.isfinite(small) and big > small
    assert big <= 1 + 2 * 10.0 * 2 * np.sqrt(2)
