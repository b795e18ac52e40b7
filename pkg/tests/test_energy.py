import math

import numpy as np
import pytest

from cknlab.energy import test_profile as sampled_profile
from cknlab.energy import (SolverKnobs, delta_for, delta_from_schedule, energy, energy_tilde, exponent_p,
                           f_envelope, max_on_ball, minimize, minimize_multistart,
                           upper_bound_test_function)
from cknlab.errors import DomainError, WindowViolation, ZeroDenominator
from cknlab.limit import ScheduleParams
from cknlab.onofri import plateau
from cknlab.operators import CknParams
from cknlab.quadrature import GridFunction, geometric_nodes

from conftest import cubic_bump

P = CknParams(0.4, 0.05, 0.07)


def test_exponent_p_example():
    assert exponent_p(1, 0.45, 0.02, 0.05) == pytest.approx(12.5, rel=1e-14)


def test_exponent_p_sobolev_case():
    assert exponent_p(1, 0.3, 0.1, 0.1) == pytest.approx(2.0 / (1.0 - 0.6), rel=1e-14)


def test_exponent_p_rejects_bad_denominator():
    with pytest.raises(DomainError):
        exponent_p(1, 0.6, 0.2, 0.0)


def test_energy_scale_invariance(nodes16, cfg):
    u = GridFunction.from_function(lambda x: (1 + x * x) ** -0.3, nodes16, even=True, decay_exponent=0.6)
    a = energy(u, P, cfg, residual=False).ratio
    for c in (0.1, 3.0, 250.0):
        assert energy(u.with_values(c * u.values), P, cfg, residual=False).ratio == pytest.approx(a, rel=1e-10)


def test_energy_zero_function_raises(nodes16):
    with pytest.raises(ZeroDenominator):
        energy(GridFunction(nodes16, np.zeros_like(nodes16), True), P, residual=False)


def test_energy_tilde_matches_energy_away_from_origin(nodes16, cfg):
    # u = |x|^alpha u~ exactly, through the grid function's power prefactor
    ut = GridFunction.from_function(cubic_bump(2.0, 1.0), nodes16)
    u = GridFunction(nodes16, ut.values, prefactor=P.alpha)
    assert energy_tilde(ut, P, cfg).ratio == pytest.approx(energy(u, P, cfg, residual=False).ratio, rel=1e-5)


def test_energy_tilde_alpha_zero_is_plain_quotient(nodes16, cfg):
    q = CknParams(0.3, 0.0, 0.05)
    u = GridFunction.from_function(lambda x: (1 + x * x) ** -0.25, nodes16, even=True, decay_exponent=0.5)
    assert energy_tilde(u, q, cfg).ratio == pytest.approx(energy(u, q, cfg, residual=False).ratio, rel=1e-8)


def test_energy_tilde_quarter_profile_is_finite(nodes16, cfg):
    u = GridFunction.from_function(lambda x: (1 + x * x) ** -0.25, nodes16, even=True, decay_exponent=0.5)
    r = energy_tilde(u, P, cfg)
    assert all(math.isfinite(v) for v in (r.numerator, r.denominator, r.ratio))


def test_delta_example_schedule():
    s = ScheduleParams(0.0, 0.1)
    d = delta_from_schedule(s)
    assert 1 / s.p_eps < d < (4 - s.b) / (2 * s.p_eps)
    assert 2 * d == pytest.approx((3 - s.p_eps * s.beta_eps) / s.p_eps, rel=1e-12)


def test_delta_nonpositive_raises():
    with pytest.raises(DomainError):
        delta_for(100.0, 0.49, 0.2)
    with pytest.raises(DomainError):
        upper_bound_test_function(0.0)


def test_upper_bound_profile():
    phi = upper_bound_test_function(0.25)
    assert phi(0.0) == 1.0
    assert phi(3.0) == pytest.approx(10 ** -0.25)


def test_test_profile_denominator_bounded():
    dens = []
    for e in (0.2, 0.1, 0.05):
        s = ScheduleParams(0.0, e)
        dens.append(energy(sampled_profile(delta_from_schedule(s)), s.params, residual=False).denominator)
    assert 0.2 < min(dens) and max(dens) < 5.0


def test_f_envelope_positive_and_decaying():
    s = ScheduleParams(0.0, 0.1)
    d = delta_from_schedule(s)
    vals = [f_envelope(x, d, s.gamma_eps, s.alpha_eps) for x in (0.5, 5.0, 500.0)]
    assert all(v > 0 for v in vals)
    assert vals[2] < vals[1]


def test_minimize_rejects_parameters_outside_window():
    with pytest.raises(WindowViolation):
        minimize(CknParams(0.3, 0.3, 0.1))


@pytest.mark.parametrize("fixture", ["rung02", "rung01"])
def test_minimizer_properties(fixture, request):
    sched, m = request.getfixturevalue(fixture)
    a = sched.alpha_eps
    u = m.u
    assert m.converged
    assert m.report.el_residual <= 1e-4
    assert np.array_equal(u.values, u.values[::-1])
    assert max_on_ball(u, 1.0) == 1.0
    pos = u.nodes > 0
    x, v = u.nodes[pos], u.values[pos]
    assert np.all(np.diff(x ** -a * v) <= 0)
    out = x >= 1
    assert np.all(v[out] <= x[out] ** a)


def test_minimizer_lp_mass_bounded(rung02, rung01):
    masses = [rung02[1].report.lp_mass, rung01[1].report.lp_mass]
    assert all(0 < v < 100 for v in masses)


def test_descent_of_flow():
    s = ScheduleParams(0.0, 0.2)
    m = minimize(s.params, knobs=SolverKnobs(per_decade=8, newton=False))
    ratios = np.array([row[1] for row in m.trace])
    assert ratios.size > 2
    assert np.all(np.diff(ratios) <= 1e-12 * ratios[:-1])


def test_el_residual_decreases_under_refinement(rung02):
    s, fine = rung02
    coarse = minimize(s.params, knobs=SolverKnobs(per_decade=8))
    assert fine.report.el_residual < coarse.report.el_residual


def test_multistart_picks_lowest(nodes16):
    s = ScheduleParams(0.0, 0.2)
    knobs = SolverKnobs(per_decade=8)
    inits = [GridFunction.from_function(upper_bound_test_function(d), nodes16, even=True) for d in (0.2, 0.6)]
    best, runs = minimize_multistart(s.params, inits, knobs)
    assert len(runs) == 2
    assert best.report.ratio == min(r.report.ratio for r in runs)
    # the extremal does not depend on the start
    assert runs[0].report.ratio == pytest.approx(runs[1].report.ratio, rel=1e-6)


@pytest.mark.slow
def test_minimality_against_bump_battery(rung02):
    s, m = rung02
    P0 = s.params
    e0 = energy(m.u, P0, residual=False).ratio
    rng = np.random.default_rng(1)
    worst = math.inf
    for i in range(10):
        c, w, h = rng.uniform(0.2, 3.0), rng.uniform(0.3, 2.0), rng.uniform(-1, 1)
        v = h * plateau(m.u.nodes / c, 0.5, 1.0) if i % 2 else plateau(m.u.nodes / w, 0.5, 1.0)
        for t in (1e-2, -1e-2, 1e-3, -1e-3):
            w_t = m.u.with_values(m.u.values * (1 + t * v))
            worst = min(worst, (energy(w_t, P0, residual=False).ratio - e0) / e0)
    assert worst >= -1e-8
