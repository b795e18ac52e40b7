import math

import numpy as np
import pytest

from cknlab.errors import DomainError, FitFailed
from cknlab.liouville import (LiouvilleParams, eta_family, eta_grid, fit_rho, kappa_exact, mass, residual,
                              residual_profile)
from cknlab.quadrature import GridFunction


def test_standard_profile():
    x = np.linspace(-4, 4, 9)
    assert np.allclose(eta_family(LiouvilleParams(1.0, 0.0), x), np.log(2 / (1 + x * x)), rtol=0, atol=1e-15)


@pytest.mark.parametrize("rho, b", [(0.5, 0.0), (1.3, 0.4), (2.0, -0.5), (0.7, 0.75)])
def test_value_at_origin(rho, b):
    expected = math.log(2 * (1 - b) * math.cos(math.pi * b / 2) / rho)
    assert eta_family(LiouvilleParams(rho, b), 0.0) == pytest.approx(expected, abs=1e-14)


def test_rho_two_vanishes_at_origin():
    assert eta_family(LiouvilleParams(2.0, 0.0), 0.0) == 0.0


def test_params_validation():
    with pytest.raises(DomainError):
        LiouvilleParams(0.0, 0.0)
    with pytest.raises(DomainError):
        LiouvilleParams(1.0, 1.0)


@pytest.mark.parametrize("b, expected", [(0.0, 2 * math.pi), (0.5, math.pi)])
def test_mass_examples(b, expected):
    assert mass(LiouvilleParams(1.0, b)).kappa == pytest.approx(expected, rel=1e-8)
    assert kappa_exact(b) == pytest.approx(expected)


def test_mass_negative_b():
    r = mass(LiouvilleParams(1.5, -0.5))
    assert r.rel_err <= 1e-6


def test_residual_standard_case():
    assert residual(LiouvilleParams(1.0, 0.0)) <= 1e-3


def test_residual_singular_case_refines():
    lp = LiouvilleParams(1.0, 0.5)
    r16, r32 = residual(lp), residual(lp, per_decade=32)
    assert r32 < r16 <= 1e-3


def test_residual_rejects_origin():
    with pytest.raises(DomainError):
        residual(LiouvilleParams(1.0, 0.0), check_nodes=[0.0, 1.0])


def test_residual_profile_shape():
    x = np.array([-2.0, 0.5, 3.0])
    assert residual_profile(LiouvilleParams(1.0, 0.0), x).shape == x.shape


def test_self_fit():
    fit = fit_rho(eta_grid(LiouvilleParams(1.7, 0.3)), 0.3)
    assert fit.params.rho == pytest.approx(1.7, rel=1e-6)
    assert fit.error < 1e-8


def test_noisy_fit_within_two_percent():
    g = eta_grid(LiouvilleParams(1.0, 0.0))
    rng = np.random.default_rng(0)
    noisy = g.with_values(g.values + 0.01 * rng.standard_normal(g.values.size), even=False)
    assert fit_rho(noisy, 0.0).params.rho == pytest.approx(1.0, rel=0.02)


def test_fit_threshold_raises():
    g = eta_grid(LiouvilleParams(1.0, 0.0))
    with pytest.raises(FitFailed):
        fit_rho(g.with_values(g.values + 5.0), 0.0, threshold=0.1)


def test_fit_needs_samples_in_window():
    nodes = np.concatenate([-np.logspace(3, 2, 4), np.logspace(2, 3, 4)])
    with pytest.raises(FitFailed):
        fit_rho(GridFunction(nodes, np.zeros(8), True), 0.0, window=5.0)
