"""The limiting Onofri-type inequality on the line.

For ``dm_b = |x|^-b e^eta dx`` with ``eta`` a classified Liouville solution
and ``kappa_b = 2 pi (1-b)`` the inequality reads

    log((1/kappa_b) int e^v dm_b)
        <= (1/(2 kappa_b)) int v (-Delta)^(1/2) v dx + (1/kappa_b) int v dm_b.

This module evaluates both sides with error bars, builds the constant
sequence ``psi_k`` and the ``b < 0`` counterexample ``v_t``, and checks the
second-order expansion of the energy around a discrete extremal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import comb

from .assembly import Kernel
from .energy import MinimizerResult
from .errors import DomainError, UnsupportedSupport
from .liouville import LiouvilleParams, eta_family, kappa_exact
from .operators import (CknParams, grid_integral, multiply, operator_pairing, product_defect,
                        sigma_gamma, weighted_norm_sq_result)
from .quadrature import GridFunction, QuadratureConfig, geometric_nodes

__all__ = [
    "GapReport",
    "smoothstep",
    "plateau",
    "bump_grid",
    "bump",
    "onofri_constants",
    "onofri_gap",
    "stereographic_gap",
    "main_inequality_gap",
    "bump_battery",
    "constant_sequence_psi",
    "quarter_norm_sq",
    "mass_defect",
    "counterexample_family",
    "counterexample_gap",
    "exponential_mass",
    "PerturbationRecord",
    "perturbation_expansion_check",
]

HALF_LAPLACIAN = Kernel(0.5, 0.0)


@dataclass(frozen=True)
class GapReport:
    lhs: float
    quad_term: float
    mean_term: float
    gap: float
    error_bar: float
    quad_term_double: float = math.nan
    b: float = 0.0
    rho: float = 1.0

    def row(self, v_id) -> list:
        return [v_id, self.b, self.rho, self.lhs, self.quad_term, self.mean_term, self.gap, self.error_bar]


CSV_COLUMNS = ("v_id", "b", "rho", "lhs", "quad_term", "mean_term", "gap", "error_bar")


# ---------------------------------------------------------------------------
# cutoffs and test functions
# ---------------------------------------------------------------------------

def smoothstep(t, order: int = 2):
    """Polynomial ramp from 0 (t <= 0) to 1 (t >= 1) with ``order`` continuous derivatives."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    n = int(order)
    if n < 1:
        raise DomainError("smoothstep order must be >= 1")

    def ramp(t):
        poly = sum(comb(n + k, k, exact=True) * comb(2 * n + 1, n - k, exact=True) * (-t) ** k for k in range(n + 1))
        return t ** (n + 1) * poly

    # the ramp is point-symmetric about 1/2; evaluating the upper half through
    # the lower one keeps the result inside [0, 1] and exactly symmetric
    return np.where(t <= 0.5, ramp(t), 1.0 - ramp(1.0 - t))


def plateau(x, inner: float, outer: float, order: int = 2):
    """Even cutoff: 1 on ``|x| <= inner``, 0 on ``|x| >= outer``."""
    if not 0.0 <= inner < outer:
        raise DomainError("plateau needs 0 <= inner < outer")
    return 1.0 - smoothstep((np.abs(np.asarray(x, dtype=float)) - inner) / (outer - inner), order)


def bump_grid(per_decade: int = 24, span: Sequence[float] = (1e-3, 1e2)) -> np.ndarray:
    return geometric_nodes(span[0], span[1], per_decade)


def bump(height: float = 1.0, width: float = 1.0, shift: float = 0.0, order: int = 2,
         nodes: Optional[np.ndarray] = None) -> GridFunction:
    """``height * plateau((x - shift)/width, 1/2, 1)`` sampled on a grid centered at 0."""
    nodes = bump_grid() if nodes is None else nodes
    f = lambda x: height * plateau((x - shift) / width, 0.5, 1.0, order)
    return GridFunction.from_function(f, nodes, even=(shift == 0.0))


# ---------------------------------------------------------------------------
# the gap
# ---------------------------------------------------------------------------

def onofri_constants(b: float):
    """``(1/(2 kappa_b), 1/kappa_b, kappa_b)``."""
    k = kappa_exact(b)
    return 1.0 / (2.0 * k), 1.0 / k, k


def _density(lp: LiouvilleParams):
    return lambda x: np.abs(x) ** (-lp.b) * np.exp(eta_family(lp, x))


def _check_support(v: GridFunction) -> None:
    if not v.is_compactly_supported():
        raise UnsupportedSupport("v does not vanish at the ends of its grid")


def _measure_kernel(v: GridFunction, b: float) -> Kernel:
    # grade the origin panels for the |x|^-b weight when it sits at the grid center
    return Kernel(0.5, b if (b > 0.0 and v.center == 0.0) else 0.0)


def _sides(v: GridFunction, density, b: float, cfg: QuadratureConfig):
    """``int (e^v - 1) dm`` and ``int v dm`` with their error estimates."""
    kern = _measure_kernel(v, b)
    ex = grid_integral(v, lambda x: np.expm1(v(x)) * density(x), cfg, kern)
    mean = grid_integral(v, lambda x: v(x) * density(x), cfg, kern)
    return ex, mean


def _quad_routes(v: GridFunction, cfg: QuadratureConfig):
    """``int v (-Delta)^(1/2) v`` by the operator and by the double integral."""
    s = sigma_gamma(1, 0.5)
    op = operator_pairing(v, v, HALF_LAPLACIAN, cfg)
    dbl = weighted_norm_sq_result(v, HALF_LAPLACIAN, cfg, route="double")
    return s * op.value, s * op.error, 0.5 * s * dbl.value


def _assemble(ex, mean, quad, quad_err, quad_dbl, kappa, c_quad, c_mean, b, rho) -> GapReport:
    # the total mass kappa is exact, so only the defect int (e^v - 1) dm is integrated
    lhs = math.log1p(ex.value / kappa)
    q = c_quad * quad
    mt = c_mean * mean.value
    err_lhs = abs(ex.error) / max(kappa + ex.value, 1e-300)
    err_q = c_quad * (abs(quad_err) + abs(quad - quad_dbl))
    err_m = c_mean * abs(mean.error)
    return GapReport(float(lhs), float(q), float(mt), float(q + mt - lhs), float(err_lhs + err_q + err_m),
                     float(c_quad * quad_dbl), float(b), float(rho))


def onofri_gap(v: GridFunction, lp: LiouvilleParams, cfg: Optional[QuadratureConfig] = None) -> GapReport:
    """Both sides of the inequality for ``v`` and the measure fixed by ``lp``.

    ``error_bar`` adds the three quadrature error estimates and the
    disagreement between the operator and double-integral routes.
    """
    cfg = cfg or QuadratureConfig()
    _check_support(v)
    c_quad, c_mean, kappa = onofri_constants(lp.b)
    ex, mean = _sides(v, _density(lp), lp.b, cfg)
    quad, quad_err, quad_dbl = _quad_routes(v, cfg)
    return _assemble(ex, mean, quad, quad_err, quad_dbl, kappa, c_quad, c_mean, lp.b, lp.rho)


def stereographic_gap(v: GridFunction, cfg: Optional[QuadratureConfig] = None) -> GapReport:
    """The classical form with ``dm = 2/(1+x^2) dx``, constants ``1/(4 pi)`` and ``1/(2 pi)``."""
    cfg = cfg or QuadratureConfig()
    _check_support(v)
    ex, mean = _sides(v, lambda x: 2.0 / (1.0 + x * x), 0.0, cfg)
    quad, quad_err, quad_dbl = _quad_routes(v, cfg)
    return _assemble(ex, mean, quad, quad_err, quad_dbl, 2.0 * math.pi,
                     1.0 / (4.0 * math.pi), 1.0 / (2.0 * math.pi), 0.0, 1.0)


def main_inequality_gap(v: GridFunction, lp: LiouvilleParams, a: float = 1.0,
                        cfg: Optional[QuadratureConfig] = None) -> GapReport:
    """The unshifted form for ``a v``: ``eta_0 = eta + log pi``, ``L_{1/2,0}`` and ``kappa_bar = pi kappa_b``."""
    cfg = cfg or QuadratureConfig()
    _check_support(v)
    av = v.with_values(a * v.values)
    shift = -math.log(sigma_gamma(1, 0.5))
    dens0 = lambda x: np.abs(x) ** (-lp.b) * np.exp(eta_family(lp, x) + shift)
    kbar = math.exp(shift) * kappa_exact(lp.b)
    ex, mean = _sides(av, dens0, lp.b, cfg)
    op = operator_pairing(av, av, HALF_LAPLACIAN, cfg)
    dbl = weighted_norm_sq_result(av, HALF_LAPLACIAN, cfg, route="double")
    return _assemble(ex, mean, op.value, op.error, 0.5 * dbl.value, kbar,
                     1.0 / (2.0 * kbar), 1.0 / kbar, lp.b, lp.rho)


def bump_battery(count: int = 20, seed: int = 0, nodes: Optional[np.ndarray] = None) -> List[GridFunction]:
    """Bumps, dilates and translates with heights in [-3, 3]; reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        kind = i % 3
        h = float(rng.uniform(-3.0, 3.0))
        w = float(rng.uniform(0.5, 4.0)) if kind >= 1 else 1.0
        c = float(rng.uniform(-2.0, 2.0)) if kind == 2 else 0.0
        out.append(bump(h, w, c, nodes=nodes))
    return out


# ---------------------------------------------------------------------------
# constants as limits of psi_k
# ---------------------------------------------------------------------------

def constant_sequence_psi(k: int, order: int = 2, per_decade: int = 24) -> GridFunction:
    """``psi_k = (1/k) sum_{j=1..k} phi(x / 5^j)``, ``phi`` = 1 on ``B_1``, supported in ``B_2``."""
    if int(k) != k or k < 1:
        raise DomainError("k must be a positive integer")
    nodes = geometric_nodes(1e-3, 10.0 * 5.0 ** k, per_decade)
    f = lambda x: sum(plateau(x / 5.0 ** j, 1.0, 2.0, order) for j in range(1, k + 1)) / k
    return GridFunction.from_function(f, nodes, even=True)


def quarter_norm_sq(psi: GridFunction, cfg: Optional[QuadratureConfig] = None) -> float:
    """``int |(-Delta)^(1/4) psi|^2 = int psi (-Delta)^(1/2) psi``."""
    return sigma_gamma(1, 0.5) * operator_pairing(psi, psi, HALF_LAPLACIAN, cfg).value


def mass_defect(psi: GridFunction, lp: LiouvilleParams, cfg: Optional[QuadratureConfig] = None) -> float:
    """``int |1 - psi| dm_b`` over the grid of ``psi``."""
    dens = _density(lp)
    a = psi.nodes[-1]
    f = lambda x: np.where(np.abs(x) <= a, np.abs(1.0 - psi(x)), 0.0) * dens(x)
    return grid_integral(psi, f, cfg, _measure_kernel(psi, lp.b)).value


# ---------------------------------------------------------------------------
# the b < 0 counterexample
# ---------------------------------------------------------------------------

def _counterexample_profile(s, t: float, order: int):
    """``sqrt(pi) log(1/t)^(1/2) v_t`` as a function of ``s = |x|``."""
    s = np.abs(np.asarray(s, dtype=float))
    L = math.log(1.0 / t)
    phi2 = plateau(s / t, 1.0, 2.0, order)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(s > 0.0, np.log(1.0 / np.where(s > 0.0, s, 1.0)), 0.0)
    psi = np.where(s <= 0.5, 1.0 - phi2, plateau(s, 0.75, 1.0, order))
    return phi2 * L + psi * logs


def counterexample_family(b: float, t: float, order: int = 2, per_decade: int = 24) -> GridFunction:
    """``v~_t(x) = 2 (1-b) sqrt(pi) log(1/t)^(1/2) v_t(x - 1)`` on a grid centered at 1."""
    if not -1.0 < b < 0.0:
        raise DomainError("the counterexample needs -1 < b < 0")
    if not 0.0 < t <= 0.1:
        raise DomainError("the counterexample needs 0 < t <= 0.1")
    nodes = geometric_nodes(t * 1e-2, 4.0, per_decade)
    vals = 2.0 * (1.0 - b) * _counterexample_profile(nodes, t, order)
    return GridFunction(nodes, vals, True, 0.0, 0.0, 0.0, 1.0)


def counterexample_gap(b: float, t: float, lp: Optional[LiouvilleParams] = None,
                       cfg: Optional[QuadratureConfig] = None, order: int = 2) -> GapReport:
    lp = lp or LiouvilleParams(1.0, b)
    if lp.b != b:
        raise DomainError("lp.b must equal b")
    return onofri_gap(counterexample_family(b, t, order), lp, cfg)


def exponential_mass(b: float, t: float, lp: Optional[LiouvilleParams] = None,
                     cfg: Optional[QuadratureConfig] = None) -> float:
    """``int e^(v~_t) dm_b``; grows like ``t^-(1-2b)``."""
    lp = lp or LiouvilleParams(1.0, b)
    v = counterexample_family(b, t)
    ex, _ = _sides(v, _density(lp), b, cfg or QuadratureConfig())
    return kappa_exact(b) + ex.value


# ---------------------------------------------------------------------------
# second-order expansion around an extremal
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationRecord:
    eps: float
    direct: float
    decomposed: float
    difference: float
    lam: float
    I1: float
    I1_direct: float
    I21: float
    I22: float
    I23: float
    I2: float
    limit_form: float


def perturbation_expansion_check(m: MinimizerResult, v: GridFunction, eps: float,
                                 cfg: Optional[QuadratureConfig] = None) -> PerturbationRecord:
    """``int w L w`` for ``w = (1 + eps v) u`` directly and as ``lambda + 2 eps I1 + eps^2 I2``.

    ``v`` is resampled on the extremal's grid; ``I1`` and ``I21`` use the
    Euler-Lagrange equation ``L u = (1/p) |x|^(-beta p) u^(p-1)``.
    """
    cfg = cfg or QuadratureConfig()
    u, params = m.u, m.params
    if not isinstance(params, CknParams):
        raise DomainError("the minimizer must carry CknParams")
    p, bp = params.p, params.beta * params.p
    vg = GridFunction.from_function(v, u.nodes, even=v.even_flag)
    _check_support(vg)
    w = u.with_values(u.values * (1.0 + eps * vg.values), even=u.even_flag and vg.even_flag)
    direct = 0.5 * weighted_norm_sq_result(w, params, cfg, route="double").value
    lam = operator_pairing(u, u, params, cfg).value
    el = lambda x: np.abs(x) ** (-bp) * np.abs(u(x)) ** p / p
    I1 = grid_integral(u, lambda x: vg(x) * el(x), cfg, params.kernel).value
    I1_direct = operator_pairing(u, multiply(u, vg), params, cfg).value
    I21 = grid_integral(u, lambda x: vg(x) ** 2 * el(x), cfg, params.kernel).value
    uuv = multiply(multiply(u, u), vg)
    I22 = operator_pairing(vg, uuv, params, cfg).value
    uv = multiply(u, vg)
    I23 = grid_integral(u, lambda x: uv(x) * product_defect(u, vg, params, x, cfg), cfg, params.kernel).value
    I2 = I21 + I22 - I23
    limit = operator_pairing(vg, vg, Kernel(0.5, 0.0), cfg).value
    dec = lam + 2.0 * eps * I1 + eps * eps * I2
    vals = (eps, direct, dec, direct - dec, lam, I1, I1_direct, I21, I22, I23, I2, limit)
    return PerturbationRecord(*(float(a) for a in vals))
