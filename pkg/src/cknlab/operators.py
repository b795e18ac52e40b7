"""Weighted nonlocal operators, constants and Kelvin inversion in one dimension.

The central object is the operator

    L_{gamma,alpha} u(x) = PV int (u(x) - u(y)) G(x, y) dy,
    G(x, y) = 1 / (|x - y|**(1+2 gamma) |x|**alpha |y|**alpha),

together with the weighted energy ``||u||^2 = iint (u(x)-u(y))**2 G``, the
fractional Laplacian ``(-Delta)^gamma = sigma_gamma * L_{gamma,0}`` and the
Hardy-type constant ``C_{gamma,alpha}`` of the ground-state substitution
``u = |x|**alpha * u_tilde``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import assembly
from .assembly import Kernel, layout_for, outer_integral, outer_points
from .errors import DomainError, WindowViolation
from .quadrature import (GridFunction, QuadratureConfig, QuadResult, integrate_line,
                         integrate_plane_offdiag)

__all__ = [
    "CknParams",
    "ConstantsReport",
    "sigma_gamma",
    "c_gamma_alpha",
    "c_gamma_alpha_result",
    "c_hardy",
    "c_hardy_quadrature",
    "constants_report",
    "apply_L",
    "apply_frac_laplacian",
    "weighted_norm_sq",
    "weighted_norm_sq_result",
    "multiply",
    "ProductFunction",
    "operator_pairing",
    "product_defect",
    "seminorm_sq",
    "weighted_measure",
    "tail",
    "kelvin_invert",
    "l1q_norm",
    "grid_integral",
    "window_sweep",
    "write_constants_csv",
]


@dataclass(frozen=True)
class CknParams:
    """Exponents ``(n, gamma, alpha, beta)``; ``p`` is derived."""

    gamma: float
    alpha: float
    beta: float
    n: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("dimension must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise DomainError("gamma must lie in (0, 1)")
        if self.n - 2 * self.gamma + 2 * (self.beta - self.alpha) <= 0:
            raise DomainError("n - 2 gamma + 2 (beta - alpha) must be positive")

    @property
    def p(self) -> float:
        return 2.0 * self.n / (self.n - 2.0 * self.gamma + 2.0 * (self.beta - self.alpha))

    @property
    def kernel(self) -> Kernel:
        return Kernel(self.gamma, self.alpha)

    def core_window_violations(self) -> List[str]:
        """Constraints of the minimization window that fail (empty when admissible)."""
        bad = []
        if self.n != 1:
            bad.append("n = 1 required")
        if not self.gamma < 0.5:
            bad.append("gamma < 1/2")
        if not self.alpha > 0.0:
            bad.append("alpha > 0")
        if not self.alpha < self.beta:
            bad.append("alpha < beta")
        if not self.alpha < (self.n - 2.0 * self.gamma) / 2.0:
            bad.append("alpha < (n - 2 gamma)/2")
        if not self.beta < self.alpha + self.gamma:
            bad.append("beta < alpha + gamma")
        return bad

    def require_core_window(self) -> None:
        bad = self.core_window_violations()
        if bad:
            raise WindowViolation("outside the core window: " + ", ".join(bad))

    def inverted(self) -> "CknParams":
        """Parameters after ``x -> x/|x|^2``: alpha -> n-2gamma-alpha, beta p -> 2n - beta p."""
        p = self.p
        alpha_bar = self.n - 2.0 * self.gamma - self.alpha
        beta_bar = (2.0 * self.n - self.beta * p) / p
        return CknParams(self.gamma, alpha_bar, beta_bar, self.n)


@dataclass(frozen=True)
class ConstantsReport:
    n: int
    gamma: float
    alpha: float
    sigma_gamma: float
    c_gamma_alpha: float
    c_hardy: float
    c_ckn: float
    quadrature_error: float


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def sigma_gamma(n: int, gamma: float) -> float:
    """Normalising constant of the fractional Laplacian kernel."""
    if not 0.0 < gamma < 1.0:
        raise DomainError("gamma must lie in (0, 1)")
    return (math.pi ** (-n / 2.0) * 2.0 ** (2.0 * gamma) * math.gamma(n / 2.0 + gamma)
            / math.gamma(1.0 - gamma) * gamma)


def c_hardy(n: int, gamma: float) -> float:
    """Sharp constant of the fractional Hardy inequality (closed form)."""
    if not 0.0 < 2.0 * gamma < n:
        raise DomainError("need 0 < 2 gamma < n")
    return 2.0 ** (2.0 * gamma) * (math.gamma((n + 2.0 * gamma) / 4.0) / math.gamma((n - 2.0 * gamma) / 4.0)) ** 2


def _folded_integrand(gamma: float, alpha: float):
    power = -1.0 + 2.0 * gamma + alpha

    def f(z):
        a = np.abs(z)
        return (a ** (-alpha) - 1.0) * (1.0 - a ** power) / np.abs(1.0 - z) ** (1.0 + 2.0 * gamma)

    return f


def c_gamma_alpha_result(n: int, gamma: float, alpha: float,
                         cfg: Optional[QuadratureConfig] = None) -> QuadResult:
    """``C_{gamma,alpha}`` with its quadrature error estimate.

    The principal-value integral ``PV int (|z|^-alpha - 1)/|1-z|^(1+2gamma)`` is
    folded onto ``(-1, 1)`` by ``z -> 1/z``, giving the absolutely integrable
    form ``int (|z|^-alpha - 1)(1 - |z|^(-1+2gamma+alpha)) / |1-z|^(1+2gamma)``.
    """
    if n != 1:
        raise DomainError("quadrature of C_{gamma,alpha} is implemented for n = 1 only")
    if not 0.0 < gamma < 0.5:
        raise DomainError("gamma must lie in (0, 1/2) for n = 1")
    if alpha == 0.0:
        return QuadResult(0.0, 0.0)
    cfg = cfg or QuadratureConfig()
    f = _folded_integrand(gamma, alpha)
    # near z = 1 the integrand vanishes like (1-z)^(1-2gamma); near 0 it blows up
    # like |z|^(-1+2gamma) (or |z|^-alpha, whichever is stronger)
    e0 = max(1.0 - 2.0 * gamma, alpha)
    return integrate_line(f, (-1.0, 1.0), (0.0, -(1.0 - 2.0 * gamma)), cfg, interior=[(0.0, e0)])


def c_gamma_alpha(n: int, gamma: float, alpha: float, cfg: Optional[QuadratureConfig] = None) -> float:
    return float(c_gamma_alpha_result(n, gamma, alpha, cfg).value)


def c_hardy_quadrature(n: int, gamma: float, cfg: Optional[QuadratureConfig] = None) -> QuadResult:
    """Hardy constant from quadrature: ``-sigma_gamma * C_{gamma,(n-2gamma)/2}``."""
    r = c_gamma_alpha_result(n, gamma, (n - 2.0 * gamma) / 2.0, cfg)
    s = sigma_gamma(n, gamma)
    return QuadResult(-s * r.value, s * r.error)


def constants_report(n: int, gamma: float, alpha: float, cfg: Optional[QuadratureConfig] = None) -> ConstantsReport:
    s = sigma_gamma(n, gamma)
    c = c_gamma_alpha_result(n, gamma, alpha, cfg)
    return ConstantsReport(n, gamma, alpha, s, float(c.value), c_hardy(n, gamma), -s * float(c.value),
                           float(s * c.error))


def window_sweep(gammas: Iterable[float], points: int = 6,
                 cfg: Optional[QuadratureConfig] = None) -> Tuple[List[ConstantsReport], List[str]]:
    """Check ``0 < c_ckn < c_hardy`` across core-window alphas; returns (reports, violations)."""
    reports, bad = [], []
    for g in gammas:
        top = (1.0 - 2.0 * g) / 2.0
        for a in np.linspace(0.0, top, points + 1)[1:-1]:
            r = constants_report(1, float(g), float(a), cfg)
            reports.append(r)
            if not 0.0 < r.c_ckn < r.c_hardy:
                bad.append("gamma=%.6g alpha=%.6g: c_ckn=%.6g c_hardy=%.6g" % (g, a, r.c_ckn, r.c_hardy))
    return reports, bad


def write_constants_csv(reports: Sequence[ConstantsReport], path) -> None:
    from .io import write_csv

    cols = ["n", "gamma", "alpha", "sigma_gamma", "c_gamma_alpha", "c_hardy", "c_ckn", "quadrature_error"]
    write_csv(path, cols, [[getattr(r, c) for c in cols] for r in reports])


# ---------------------------------------------------------------------------
# operators on grid functions
# ---------------------------------------------------------------------------

def _params_kernel(params) -> Kernel:
    if isinstance(params, CknParams):
        if params.n != 1:
            raise DomainError("operators are implemented for n = 1 only")
        return params.kernel
    return params


def apply_L(u: GridFunction, params: CknParams, x, cfg: Optional[QuadratureConfig] = None):
    """``L_{gamma,alpha} u`` at ``x`` (scalar or array, never 0)."""
    cfg = cfg or QuadratureConfig()
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    kernel = _params_kernel(params)
    if kernel.alpha != 0.0 and np.any(xa == 0.0):
        raise DomainError("L is evaluated away from the origin")
    out = assembly.apply_at(u, kernel, xa, cfg)
    return float(out[0]) if np.ndim(x) == 0 else out


def apply_frac_laplacian(u: GridFunction, gamma: float, x, cfg: Optional[QuadratureConfig] = None):
    """``(-Delta)^gamma u(x) = sigma_gamma * PV int (u(x)-u(y))/|x-y|^(1+2gamma) dy``."""
    s = sigma_gamma(1, gamma)
    out = apply_L(u, Kernel(gamma, 0.0), x, cfg)
    return s * out


def grid_integral(u: GridFunction, f, cfg: Optional[QuadratureConfig] = None,
                  kernel: Optional[Kernel] = None) -> QuadResult:
    """``int f(x) dx`` on the cells of ``u``'s grid, closed algebraically at its center and infinity.

    ``f`` is called with the array of quadrature points.
    """
    cfg = cfg or QuadratureConfig()
    lay = layout_for(u, kernel or Kernel(0.5, 0.0), cfg)
    xo, _ = outer_points(lay)
    vals = np.asarray(f(xo + u.center), dtype=float)
    value, err = outer_integral(lay, vals)
    return QuadResult(value, err)


def _outer_values(u: GridFunction, kernel: Kernel, cfg: QuadratureConfig, fn):
    lay = layout_for(u, kernel, cfg)
    xo, _ = outer_points(lay)
    return lay, xo, fn(lay, xo)


def operator_pairing(u: GridFunction, v: GridFunction, params, cfg: Optional[QuadratureConfig] = None) -> QuadResult:
    """``int v(x) L u(x) dx``; points where ``v`` vanishes are skipped."""
    cfg = cfg or QuadratureConfig()
    kernel = _params_kernel(params)
    lay = layout_for(u, kernel, cfg)
    xo, _ = outer_points(lay)
    vx = assembly._shift(v)(xo) if v.center == u.center else v(xo + u.center)
    vals = np.zeros_like(xo)
    live = vx != 0.0
    if np.any(live):
        vals[live] = vx[live] * assembly.apply_at(u, kernel, xo[live], cfg, lay, relative=True)
    value, err = outer_integral(lay, vals)
    return QuadResult(value, err)


def weighted_norm_sq(u: GridFunction, params, cfg: Optional[QuadratureConfig] = None,
                     route: str = "double") -> float:
    """``iint (u(x)-u(y))^2 G(x,y) dx dy``.

    ``route="double"`` integrates the inner ``y``-integral of the squared
    difference at every outer point; ``route="operator"`` evaluates
    ``2 int u L u``.  The two routes share only the cell layout.
    """
    return weighted_norm_sq_result(u, params, cfg, route).value


def weighted_norm_sq_result(u: GridFunction, params, cfg: Optional[QuadratureConfig] = None,
                            route: str = "double") -> QuadResult:
    cfg = cfg or QuadratureConfig()
    kernel = _params_kernel(params)
    if route not in ("double", "operator"):
        raise DomainError("route must be 'double' or 'operator'")
    if u.prefactor == 0.0 and np.ptp(u.values) == 0.0:
        # the difference kernel annihilates constants exactly
        return QuadResult(0.0, 0.0)
    if route == "operator":
        r = operator_pairing(u, u, kernel, cfg)
        return QuadResult(2.0 * r.value, 2.0 * r.error)
    lay = layout_for(u, kernel, cfg)
    xo, _ = outer_points(lay)
    vals = assembly.bilinear_at(u, u, kernel, xo, cfg, lay, relative=True)
    value, err = outer_integral(lay, vals)
    return QuadResult(value, err)


def product_defect(u: GridFunction, v: GridFunction, params, x, cfg: Optional[QuadratureConfig] = None):
    """``int (u(x)-u(y)) (v(x)-v(y)) G(x,y) dy`` at ``x``."""
    cfg = cfg or QuadratureConfig()
    kernel = _params_kernel(params)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    out = assembly.bilinear_at(u, v, kernel, xa, cfg)
    return float(out[0]) if np.ndim(x) == 0 else out


@dataclass(frozen=True, eq=False)
class ProductFunction(GridFunction):
    """Pointwise product of two grid functions on a shared grid.

    Nodal values are the products of the factors' values, but evaluation
    multiplies the factors' interpolants, so the product is the exact
    product of the two functions rather than a re-interpolation of it.
    """

    factors: Tuple[GridFunction, GridFunction] = None

    def __call__(self, x):
        u, v = self.factors
        return u(x) * v(x)

    def derivative(self, x, nu: int = 1):
        u, v = self.factors
        if nu == 1:
            return u.derivative(x, 1) * v(x) + u(x) * v.derivative(x, 1)
        if nu == 2:
            return (u.derivative(x, 2) * v(x) + 2.0 * u.derivative(x, 1) * v.derivative(x, 1)
                    + u(x) * v.derivative(x, 2))
        raise DomainError("derivatives up to order 2 only")

    def basis(self, x, nu: int = 0):
        raise DomainError("a product of grid functions has no nodal basis")


def multiply(u: GridFunction, v: GridFunction, exact: bool = True) -> GridFunction:
    """Product on a shared grid (exponents add).

    With ``exact=False`` the nodal products are re-interpolated, which is
    cheaper downstream but only accurate to the interpolation error.
    """
    if not np.array_equal(u.nodes, v.nodes) or u.center != v.center:
        raise DomainError("grid functions live on different grids")
    if u.prefactor or v.prefactor:
        raise DomainError("products of prefactored profiles are not supported")
    args = (u.nodes, u.values * v.values, u.even_flag and v.even_flag,
            u.decay_exponent + v.decay_exponent, u.origin_exponent + v.origin_exponent, 0.0, u.center)
    if not exact:
        return GridFunction(*args)
    return ProductFunction(*args, factors=(u, v))


# ---------------------------------------------------------------------------
# local quantities
# ---------------------------------------------------------------------------

def _intervals(S) -> List[Tuple[float, float]]:
    if len(S) == 2 and np.isscalar(S[0]):
        S = [S]
    out = [(float(a), float(b)) for a, b in S]
    for a, b in out:
        if not a < b or not (math.isfinite(a) and math.isfinite(b)):
            raise DomainError("S must be a union of bounded intervals")
    return out


def weighted_measure(S, alpha: float, cfg: Optional[QuadratureConfig] = None) -> float:
    """``int_S |x|^-alpha dx`` for a union of bounded intervals ``S``."""
    cfg = cfg or QuadratureConfig()
    total = 0.0
    for a, b in _intervals(S):
        f = lambda x: np.abs(x) ** (-alpha)
        ea = alpha if a == 0.0 else 0.0
        eb = alpha if b == 0.0 else 0.0
        inner = [(0.0, alpha)] if a < 0.0 < b else []
        total += integrate_line(f, (a, b), (ea, eb), cfg, interior=inner).value
    return total


def seminorm_sq(u: GridFunction, S, params, cfg: Optional[QuadratureConfig] = None) -> float:
    """``iint_{S x S} G(x,y) |u(x)-u(y)|^2`` for a union of bounded intervals ``S``."""
    cfg = cfg or QuadratureConfig(rel_tol=1e-6)
    kernel = _params_kernel(params)
    g, al = kernel.gamma, kernel.alpha

    def F(x, y):
        d = np.abs(x - y)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (u(x) - u(y)) ** 2 * d ** (-(1.0 + 2.0 * g)) * np.abs(x) ** (-al) * np.abs(y) ** (-al)
        return np.where(d > 0, val, 0.0)

    pieces = []
    for a, b in _intervals(S):
        cuts = [a] + ([0.0] if a < 0.0 < b else []) + [b]
        pieces += list(zip(cuts[:-1], cuts[1:]))
    total = 0.0
    for p in pieces:
        for q in pieces:
            ax = (al if 0.0 in p else 0.0, al if 0.0 in q else 0.0)
            total += integrate_plane_offdiag(F, (p, q), -(1.0 - 2.0 * g), ax, cfg).value
    return total


def tail(u: GridFunction, x0: float, R: float, params, cfg: Optional[QuadratureConfig] = None) -> float:
    """``R^(2gamma+alpha) int_{|x-x0|>R} |u| |x-x0|^(-1-2gamma) |x|^-alpha dx``."""
    if not R > 0:
        raise DomainError("R must be positive")
    kernel = _params_kernel(params)
    g, al = kernel.gamma, kernel.alpha
    base = cfg or QuadratureConfig()
    decay = 1.0 + 2.0 * g + al + u.decay_exponent - u.prefactor
    from dataclasses import replace

    cfg = replace(base, tail_order=decay, r_max=max(base.r_max, 10.0 * (abs(x0) + R)))

    def f(x):
        return np.abs(u(x)) * np.abs(x - x0) ** (-(1.0 + 2.0 * g)) * np.abs(x) ** (-al)

    total = 0.0
    for lo, hi in ((-math.inf, x0 - R), (x0 + R, math.inf)):
        inner = [(0.0, al)] if lo < 0.0 < hi and al else []
        ea = al if lo == 0.0 else 0.0
        eb = al if hi == 0.0 else 0.0
        total += integrate_line(f, (lo, hi), (ea, eb), cfg, interior=inner).value
    return R ** (2.0 * g + al) * total


def l1q_norm(u: GridFunction, q: float, cfg: Optional[QuadratureConfig] = None) -> float:
    """``int |u(x)| / (1 + |x|^q) dx``."""
    if not q > 1.0:
        raise DomainError("q must exceed 1")
    r = grid_integral(u, lambda x: np.abs(u(x)) / (1.0 + np.abs(x) ** q), cfg)
    return r.value


# ---------------------------------------------------------------------------
# Kelvin inversion
# ---------------------------------------------------------------------------

def kelvin_invert(u: GridFunction, params: CknParams) -> Tuple[GridFunction, CknParams]:
    """``u_bar(x) = u(x/|x|^2)`` on the inverted grid, with the inverted parameters.

    The spline lives in ``log|x|``, so reflecting the node values reproduces
    ``u`` composed with the inversion exactly; the tail and origin power laws
    swap roles with opposite signs.
    """
    if u.center != 0.0:
        raise DomainError("inversion is about the origin")
    m = u.half
    pos = 1.0 / u.nodes[m:][::-1]
    nodes = np.concatenate([-pos[::-1], pos])
    # node order: -1/x_1 < ... < -1/x_M < 1/x_M < ... < 1/x_1
    neg_part = u.values[:m][::-1]      # values at -x_1, ..., -x_M mapped to -1/x_1, ..., -1/x_M
    pos_part = u.values[m:][::-1]      # values at x_M, ..., x_1 mapped to 1/x_M, ..., 1/x_1
    values = np.concatenate([neg_part, pos_part])
    if u.origin_exponent == 0.0 and u.values[m] != u.values[m - 1]:
        raise DomainError("inversion needs a power law (or an even profile) at the origin")
    out = GridFunction(nodes, values, u.even_flag, -u.origin_exponent, -u.decay_exponent, -u.prefactor)
    return out, params.inverted()
