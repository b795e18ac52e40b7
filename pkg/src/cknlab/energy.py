"""Weighted energy quotients, the normalized extremal solver and test profiles.

The quotient is

    E[u] = ||u||^2 / (int |x|^(-beta p) |u|^p dx)^(2/p),

with ``||u||^2 = iint (u(x)-u(y))^2 G(x,y)``.  It is invariant under
``u -> c u`` and under dilations ``u -> u(R .)``, so its minimizers form a
two-parameter family; :func:`minimize` picks the member solving

    L u = (1/p) |x|^(-beta p) u^(p-1),   max_{|x| <= 1} u = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from . import assembly
from .errors import DomainError, NotConverged, PositivityLost, ZeroDenominator
from .operators import (CknParams, apply_L, c_gamma_alpha, grid_integral, weighted_norm_sq_result)
from .assembly import Kernel
from .quadrature import GridFunction, QuadratureConfig, geometric_nodes, integrate_line

__all__ = [
    "EnergyReport",
    "MinimizerResult",
    "SolverKnobs",
    "exponent_p",
    "energy",
    "energy_tilde",
    "el_residual",
    "check_nodes",
    "minimize",
    "minimize_multistart",
    "rescale_extremal",
    "max_on_ball",
    "upper_bound_test_function",
    "test_profile",
    "delta_for",
    "delta_from_schedule",
    "f_envelope",
    "tail_exponent",
]


@dataclass(frozen=True)
class EnergyReport:
    numerator: float
    denominator: float
    ratio: float
    lp_mass: float
    el_residual: float
    error: float = 0.0


@dataclass(frozen=True)
class SolverKnobs:
    """Controls of :func:`minimize`.

    ``per_decade`` and ``span`` define the working grid; the flow stops when
    the relative decrease of the discrete quotient drops below ``flow_tol``,
    when the nodal equation defect falls below ``switch_tol`` (relative), or
    when the inverse-iteration direction stops being a descent direction,
    after which ``newton_iter`` Gauss-Newton steps polish the collocation
    equation.  ``el_tol`` is relative to ``(1/p) max |x|^-beta p u^(p-1)``.
    """

    per_decade: int = 16
    span: Tuple[float, float] = (1e-6, 1e6)
    max_iter: int = 50_000
    flow_tol: float = 1e-12
    switch_tol: float = 1e-6
    armijo: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-12
    rearrange: bool = True
    newton: bool = True
    newton_iter: int = 20
    el_tol: float = 1e-4
    trace_path: Optional[str] = None

    def __post_init__(self):
        if self.per_decade < 2:
            raise DomainError("per_decade must be at least 2")
        if not 0.0 < self.span[0] < 1.0 < self.span[1]:
            raise DomainError("span must bracket 1")
        if not 0.0 < self.backtrack < 1.0:
            raise DomainError("backtrack must lie in (0, 1)")
        if self.max_iter < 1:
            raise DomainError("max_iter must be positive")


@dataclass(frozen=True)
class MinimizerResult:
    u: GridFunction
    report: EnergyReport
    iterations: int
    converged: bool
    params: CknParams = None
    dilation: float = 1.0
    trace: List[Tuple[int, float, float, float]] = field(default_factory=list, repr=False)


def exponent_p(n: int, gamma: float, alpha: float, beta: float) -> float:
    den = n - 2.0 * gamma + 2.0 * (beta - alpha)
    if not den > 0.0:
        raise DomainError("n - 2 gamma + 2 (beta - alpha) must be positive")
    return 2.0 * n / den


def tail_exponent(params: CknParams) -> float:
    """Decay rate of the extremals: ``u ~ |x|^-(1 - 2 gamma - 2 alpha)``."""
    return 1.0 - 2.0 * params.gamma - 2.0 * params.alpha


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def check_nodes(u: GridFunction, margin: float = 100.0) -> np.ndarray:
    """Geometric midpoints of the grid, ``margin`` away from both truncations."""
    x = u.nodes[u.half:]
    mid = np.sqrt(x[:-1] * x[1:])
    mid = mid[(mid > x[0] * margin) & (mid < x[-1] / margin)]
    if mid.size == 0:
        raise DomainError("grid too short for check nodes")
    return mid if u.even_flag else np.concatenate([-mid[::-1], mid])


def _lp_mass(u: GridFunction, weight_exponent: float, p: float, cfg) -> Tuple[float, float]:
    r = grid_integral(u, lambda x: np.abs(u(x)) ** p * np.abs(x) ** (-weight_exponent), cfg)
    return r.value, r.error


def el_residual(u: GridFunction, params: CknParams, multiplier: Optional[float] = None,
                nodes=None, cfg: Optional[QuadratureConfig] = None) -> float:
    """``sup |L u - mu |x|^-beta p u^(p-1)|`` over check nodes (``mu = 1/p`` by default)."""
    p = params.p
    mu = 1.0 / p if multiplier is None else multiplier
    x = check_nodes(u) if nodes is None else np.asarray(nodes, dtype=float)
    lhs = apply_L(u, params, x, cfg)
    rhs = mu * np.abs(x) ** (-params.beta * p) * np.abs(u(x)) ** (p - 2.0) * u(x)
    return float(np.max(np.abs(lhs - rhs)))


def energy(u: GridFunction, params: CknParams, cfg: Optional[QuadratureConfig] = None,
           multiplier: Optional[float] = None, residual: bool = True) -> EnergyReport:
    """Quotient ``E[u]`` with its parts.

    ``el_residual`` uses ``multiplier`` when given and otherwise the natural
    Lagrange multiplier ``||u||^2 / (2 int |x|^-beta p |u|^p)``.
    """
    p = params.p
    num = weighted_norm_sq_result(u, params, cfg)
    mass, mass_err = _lp_mass(u, params.beta * p, p, cfg)
    if not mass > 0.0:
        raise ZeroDenominator("the weighted p-mass vanishes")
    den = mass ** (2.0 / p)
    mu = num.value / (2.0 * mass) if multiplier is None else multiplier
    res = el_residual(u, params, mu, cfg=cfg) if residual else 0.0
    ratio = num.value / den
    err = num.error / den + ratio * (2.0 / p) * mass_err / mass
    return EnergyReport(float(num.value), float(den), float(ratio), float(mass), res, float(err))


def energy_tilde(u_tilde: GridFunction, params: CknParams, cfg: Optional[QuadratureConfig] = None) -> EnergyReport:
    """Quotient in the variable ``u_tilde = |x|^-alpha u``.

    Numerator: ``iint (u~(x)-u~(y))^2 / |x-y|^(1+2gamma) + 2 C_{gamma,alpha} int u~^2 |x|^-2gamma``;
    denominator: ``(int |u~|^p |x|^((alpha-beta) p))^(2/p)``.  ``el_residual`` is
    not defined in this variable and is reported as 0.
    """
    p = params.p
    g, a = params.gamma, params.alpha
    gag = weighted_norm_sq_result(u_tilde, Kernel(g, 0.0), cfg)
    hardy = grid_integral(u_tilde, lambda x: u_tilde(x) ** 2 * np.abs(x) ** (-2.0 * g), cfg)
    c = c_gamma_alpha(1, g, a) if a != 0.0 else 0.0
    num = gag.value + 2.0 * c * hardy.value
    mass, mass_err = _lp_mass(u_tilde, (params.beta - a) * p, p, cfg)
    if not mass > 0.0:
        raise ZeroDenominator("the weighted p-mass vanishes")
    den = mass ** (2.0 / p)
    err = (gag.error + 2.0 * abs(c) * hardy.error) / den + abs(num / den) * (2.0 / p) * mass_err / mass
    return EnergyReport(float(num), float(den), float(num / den), float(mass), 0.0, float(err))


# ---------------------------------------------------------------------------
# test profiles
# ---------------------------------------------------------------------------

def delta_for(p: float, gamma: float, alpha: float) -> float:
    """``delta`` with ``2 gamma + 2 alpha + 4 delta = 1 + 4/p``."""
    d = (1.0 + 4.0 / p - 2.0 * gamma - 2.0 * alpha) / 4.0
    if not d > 0.0:
        raise DomainError("delta = %.6g is not positive" % d)
    return d


def delta_from_schedule(sched) -> float:
    return delta_for(sched.p_eps, sched.gamma_eps, sched.alpha_eps)


def upper_bound_test_function(delta: float) -> Callable:
    """``x -> (1 + x^2)^-delta``."""
    if not delta > 0.0:
        raise DomainError("delta must be positive")
    return lambda x: (1.0 + np.asarray(x, dtype=float) ** 2) ** (-delta)


def test_profile(delta: float, per_decade: int = 16, span=(1e-6, 1e6)) -> GridFunction:
    nodes = geometric_nodes(span[0], span[1], per_decade)
    return GridFunction.from_function(upper_bound_test_function(delta), nodes, even=True,
                                      decay_exponent=2.0 * delta)


def f_envelope(x: float, delta: float, gamma: float, alpha: float,
               cfg: Optional[QuadratureConfig] = None) -> float:
    """``int_0^inf (phi(x)-phi(y))^2 |x-y|^(-1-2gamma) |y|^-alpha dy`` for ``phi = (1+y^2)^-delta``."""
    x = abs(float(x))
    if x == 0.0:
        raise DomainError("x must be nonzero")
    phi = upper_bound_test_function(delta)
    fx = float(phi(x))

    def f(y):
        return (fx - phi(y)) ** 2 * np.abs(x - y) ** (-1.0 - 2.0 * gamma) * np.abs(y) ** (-alpha)

    base = cfg or QuadratureConfig()
    inner = integrate_line(f, (0.0, x), (alpha, -(1.0 - 2.0 * gamma)), base)
    tail_cfg = replace(base, tail_order=1.0 + 2.0 * gamma + alpha, r_max=max(base.r_max, 10.0 * x))
    outer = integrate_line(f, (x, math.inf), (-(1.0 - 2.0 * gamma), 0.0), tail_cfg)
    return inner.value + outer.value


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def max_on_ball(u: GridFunction, radius: float) -> float:
    """Largest value of ``u`` over ``[-radius, radius]`` (nodes, the ends and the origin)."""
    x = u.nodes
    inside = np.abs(x) <= radius
    vals = [float(np.max(u.values[inside]))] if np.any(inside) else []
    vals += [float(u(radius)), float(u(-radius)), float(u(0.0 if u.origin_exponent == 0.0 else x[u.half]))]
    return max(vals)


def rescale_extremal(u: GridFunction, params: CknParams, multiplier: float) -> Tuple[GridFunction, float]:
    """Map a solution of ``L u = mu w u^(p-1)`` to ``L v = (1/p) w v^(p-1)``, ``max_{B_1} v = 1``.

    ``v(x) = c u(R x)`` solves the equation with ``mu c^(2-p) R^e`` where
    ``e = 2 gamma + 2 alpha - beta p > 0``; ``c = 1 / max_{B_R} u`` and ``R`` is
    found by root bracketing.  Returns ``(v, R)``; the dilation is exact
    because the grid moves with it (nodes ``x_i / R``).
    """
    p = params.p
    e = 2.0 * params.gamma + 2.0 * params.alpha - params.beta * p
    if not e > 0.0:
        raise DomainError("dilation exponent must be positive")
    if not multiplier > 0.0:
        raise PositivityLost("Lagrange multiplier is not positive")

    def h(log_r):
        r = math.exp(log_r)
        return (math.log(multiplier) + (p - 2.0) * math.log(max_on_ball(u, r)) + e * log_r
                - math.log(1.0 / p))

    lo, hi = -5.0, 5.0
    while h(lo) > 0.0:
        lo -= 5.0
        if lo < -200:
            raise DomainError("no admissible dilation")
    while h(hi) < 0.0:
        hi += 5.0
        if hi > 200:
            raise DomainError("no admissible dilation")
    log_r = brentq(h, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    R = math.exp(log_r)
    c = 1.0 / max_on_ball(u, R)
    nodes = u.nodes / R
    v = GridFunction(nodes, c * u.values, u.even_flag, u.decay_exponent, u.origin_exponent, u.prefactor, u.center / R)
    # remove the last rounding so the maximum over the unit ball is exactly 1
    v = v.with_values(v.values / max_on_ball(v, 1.0))
    return v, R


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

class _Discrete:
    """Collocation of ``L`` at the positive nodes acting on even nodal vectors."""

    def __init__(self, template: GridFunction, params: CknParams, cfg: QuadratureConfig):
        m = template.half
        self.x = template.nodes[m:]
        A = assembly.matrix_at(template, params.kernel, self.x, cfg)
        self.A = A[:, m:] + A[:, :m][:, ::-1]
        self.w = self.x ** (-params.beta * params.p)
        self.p = params.p
        # trapezoid weights in log|x| for nodal quadrature on both half-lines
        s = np.log(self.x)
        om = np.zeros_like(s)
        om[1:] += 0.5 * np.diff(s)
        om[:-1] += 0.5 * np.diff(s)
        self.omega = 2.0 * om * self.x

    def parts(self, v):
        Av = self.A @ v
        num = 2.0 * float(np.sum(self.omega * v * Av))
        mass = float(np.sum(self.omega * self.w * v ** self.p))
        return Av, num, mass

    def log_ratio(self, v):
        _, num, mass = self.parts(v)
        if not (num > 0.0 and mass > 0.0):
            return math.inf
        return math.log(num) - (2.0 / self.p) * math.log(mass)

    def gradient(self, v):
        Av, num, mass = self.parts(v)
        g_num = 2.0 * (self.omega * Av + self.A.T @ (self.omega * v))
        g_mass = self.p * self.omega * self.w * v ** (self.p - 1.0)
        return g_num / num - (2.0 / self.p) * g_mass / mass, num, mass

    def nodal_residual(self, v, mu):
        return float(np.max(np.abs(self.A @ v - mu * self.w * v ** (self.p - 1.0))))


def _project(v: np.ndarray, x: np.ndarray, alpha: float, rearrange: bool) -> np.ndarray:
    v = np.maximum(v, 1e-300)
    if rearrange:
        t = x ** (-alpha) * v
        v = np.sort(t)[::-1] * x ** alpha
    return v / np.max(v)


def _write_trace(path, trace) -> None:
    from .io import write_csv

    write_csv(path, ["iter", "ratio", "el_residual", "step"], trace)


def minimize(params: CknParams, init: Optional[GridFunction] = None, knobs: Optional[SolverKnobs] = None,
             cfg: Optional[QuadratureConfig] = None) -> MinimizerResult:
    """Normalized extremal of ``E`` for parameters in the core window.

    Phase one is a projected gradient flow on the discrete ``log E`` in the
    metric of the collocated operator (its unit step is the normalized
    inverse iteration ``v -> A^-1 (w v^(p-1))``), with Armijo backtracking;
    iterates are kept even, positive, with ``|x|^-alpha v`` nonincreasing,
    and scaled to ``max v = 1``.  Phase two polishes the collocation equation
    ``A v = mu w v^(p-1)`` with minimum-norm Gauss-Newton steps (the
    dilation family makes the Jacobian nearly singular).  Finally the
    two-parameter rescaling fixes ``mu = 1/p`` and ``max_{B_1} u = 1``.
    """
    params.require_core_window()
    knobs = knobs or SolverKnobs()
    cfg = cfg or QuadratureConfig()
    p = params.p
    nodes = geometric_nodes(knobs.span[0], knobs.span[1], knobs.per_decade)
    decay = tail_exponent(params)
    if init is None:
        delta = delta_for(p, params.gamma, params.alpha)
        init = GridFunction.from_function(upper_bound_test_function(delta), nodes, even=True)
    vals = init(nodes + init.center) if not np.array_equal(init.nodes, nodes) else init.values
    template = GridFunction(nodes, np.ones_like(nodes), True, decay, 0.0)
    disc = _Discrete(template, params, cfg)
    m = template.half
    x = disc.x
    v = _project(0.5 * (vals[m:] + vals[:m][::-1]), x, params.alpha, knobs.rearrange)

    trace: List[Tuple[int, float, float, float]] = []
    f = disc.log_ratio(v)
    it = 0
    step = 1.0
    for it in range(1, knobs.max_iter + 1):
        g, num, mass = disc.gradient(v)
        mu = num / (2.0 * mass)
        rhs = disc.w * v ** (p - 1.0)
        if disc.nodal_residual(v, mu) <= knobs.switch_tol * mu * float(np.max(rhs)):
            break
        y = np.linalg.solve(disc.A, rhs)
        d = y / np.max(y) - v
        slope = float(g @ d)
        if not slope < 0.0:
            # the nodal quotient and the collocated equation disagree at this
            # resolution; the remaining work is the Newton polish
            break
        t = min(1.0, step / knobs.backtrack)
        while True:
            trial = _project(v + t * d, x, params.alpha, knobs.rearrange)
            ft = disc.log_ratio(trial)
            if ft <= f + knobs.armijo * t * slope:
                break
            t *= knobs.backtrack
            if t < knobs.min_step:
                break
        if t < knobs.min_step:
            break
        change = f - ft
        v, f, step = trial, ft, t
        trace.append((it, math.exp(f), disc.nodal_residual(v, mu), t))
        if change <= knobs.flow_tol * max(abs(f), 1.0):
            break
    flow_iters = it

    _, num, mass = disc.parts(v)
    mu = num / (2.0 * mass)
    c = (mu * p) ** (1.0 / (p - 2.0))
    v = c * v
    if knobs.newton:
        for k in range(knobs.newton_iter):
            F = disc.A @ v - disc.w * v ** (p - 1.0) / p
            J = disc.A - np.diag((p - 1.0) / p * disc.w * v ** (p - 2.0))
            dv = np.linalg.lstsq(J, -F, rcond=1e-12)[0]
            lam = 1.0
            while np.any(v + lam * dv <= 0.0) and lam > 1e-8:
                lam *= 0.5
            v = v + lam * dv
            res = disc.nodal_residual(v, 1.0 / p)
            trace.append((flow_iters + k + 1, math.exp(disc.log_ratio(v)), res, lam))
            if np.max(np.abs(dv)) <= 1e-14 * np.max(np.abs(v)):
                break
        mu = 1.0 / p
    if np.any(v <= 0.0):
        raise PositivityLost("iterate lost positivity")
    u = GridFunction(nodes, np.concatenate([v[::-1], v]), True, decay, 0.0)
    u, R = rescale_extremal(u, params, mu)
    report = energy(u, params, cfg, multiplier=1.0 / p)
    wmax = float(np.max(np.abs(check_nodes(u)) ** (-params.beta * p) * u(check_nodes(u)) ** (p - 1.0))) / p
    converged = report.el_residual <= knobs.el_tol * wmax
    if knobs.trace_path:
        _write_trace(knobs.trace_path, trace)
    return MinimizerResult(u, report, len(trace), converged, params, R, trace)


def minimize_multistart(params: CknParams, inits: Sequence[GridFunction], knobs: Optional[SolverKnobs] = None,
                        cfg: Optional[QuadratureConfig] = None) -> Tuple[MinimizerResult, List[MinimizerResult]]:
    """Run :func:`minimize` from several starts; return the lowest ratio and all runs."""
    runs = [minimize(params, u0, knobs, cfg) for u0 in inits]
    best = min(runs, key=lambda r: r.report.ratio)
    return best, runs
