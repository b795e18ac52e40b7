import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from cknlab.liouville import LiouvilleParams, eta_family
from cknlab.limit import ScheduleParams
from cknlab.onofri import smoothstep
from cknlab.operators import c_gamma_alpha, c_hardy, sigma_gamma
from cknlab.quadrature import GridFunction, geometric_nodes, integrate_line, pv_integrate

gammas = st.floats(0.02, 0.48)


@given(st.floats(0.0, 0.8), st.floats(1e-3, 0.1))
def test_schedule_relations(b, eps):
    assume(b + eps < 0.9)
    s = ScheduleParams(b, eps)
    assert s.p_eps == pytest.approx(1 / eps)
    assert s.beta_eps * s.p_eps == pytest.approx(b + eps)
    assert s.alpha_eps == pytest.approx(s.beta_eps / 2)
    assert 0 < s.alpha_eps < min(s.beta_eps, (1 - 2 * s.gamma_eps) / 2)
    assert s.params.p == pytest.approx(s.p_eps, rel=1e-9)


@given(st.floats(-0.9, 0.9), st.floats(0.05, 20.0), st.floats(-50.0, 50.0))
def test_liouville_dilation(b, rho, x):
    assume(x != 0.0)
    lam = rho ** (1 / (1 - b))
    lhs = eta_family(LiouvilleParams(rho, b), x)
    rhs = eta_family(LiouvilleParams(1.0, b), x / lam) - math.log(rho)
    assert lhs == pytest.approx(rhs, abs=1e-10)


@given(st.floats(0.0, 0.9), st.floats(0.05, 20.0), st.floats(1e-3, 1e3), st.floats(1.01, 10.0))
def test_liouville_decreasing_for_nonnegative_b(b, rho, x, factor):
    lp = LiouvilleParams(rho, b)
    assert eta_family(lp, x * factor) < eta_family(lp, x)
    assert eta_family(lp, -x) == eta_family(lp, x)


@given(st.floats(0.0, 1.0), st.integers(1, 4))
def test_smoothstep_symmetry(t, order):
    assert smoothstep(1 - t, order) == pytest.approx(1 - smoothstep(t, order), abs=1e-12)
    assert 0.0 <= smoothstep(t, order) <= 1.0


@given(gammas)
def test_sigma_and_hardy_ranges(g):
    assert sigma_gamma(1, g) > 0
    assert 0 < c_hardy(1, g) < 1


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 0.4), st.floats(0.05, 0.95))
def test_c_gamma_alpha_reflection(g, frac):
    a = frac * (1 - 2 * g)
    assert c_gamma_alpha(1, g, a) == pytest.approx(c_gamma_alpha(1, g, 1 - 2 * g - a), rel=1e-8, abs=1e-12)


@settings(deadline=None)
@given(st.floats(0.0, 0.9))
def test_line_power_singularity(s):
    r = integrate_line(lambda x: x ** -s, (0.0, 1.0), (s, 0.0))
    assert r.value == pytest.approx(1 / (1 - s), rel=1e-8)


@settings(deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_pv_linear_over_pole(c0, c1):
    r = pv_integrate(lambda x: (c0 + c1 * x) / x, (-1.0, 1.0), 0.0)
    assert r.value == pytest.approx(2 * c1, abs=1e-10)


@settings(deadline=None)
@given(st.floats(0.1, 5.0), st.floats(-10.0, 10.0))
def test_even_grid_functions_are_even(scale, x):
    nodes = geometric_nodes(1e-4, 1e4, 8)
    u = GridFunction.from_function(lambda t: np.exp(-(t - 0.3) ** 2 / scale), nodes, even=True)
    assert u(x) == pytest.approx(u(-x), rel=1e-13, abs=1e-300)
