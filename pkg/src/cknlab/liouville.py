"""Explicit solutions of the singular Liouville equation on the line.

For ``-1 < b < 1`` and ``rho > 0`` the functions

    eta_rho(x) = log( 2 (1-b) rho cos(pi b/2)
                      / (|x|^(2(1-b)) + 2 rho |x|^(1-b) sin(pi b/2) + rho^2) )

solve ``(-Delta)^(1/2) eta = |x|^-b e^eta`` and carry the mass
``int |x|^-b e^eta = 2 pi (1-b)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, FitFailed
from .operators import apply_frac_laplacian
from .quadrature import GridFunction, QuadratureConfig, geometric_nodes, integrate_line

__all__ = [
    "LiouvilleParams",
    "MassReport",
    "FitResult",
    "eta_family",
    "eta_grid",
    "kappa_exact",
    "mass",
    "residual",
    "residual_profile",
    "fit_rho",
]

RESIDUAL_GRID = (1e-12, 1e12)


@dataclass(frozen=True)
class LiouvilleParams:
    rho: float
    b: float = 0.0

    def __post_init__(self):
        if not self.rho > 0.0:
            raise DomainError("rho must be positive")
        if not -1.0 < self.b < 1.0:
            raise DomainError("b must lie in (-1, 1)")


@dataclass(frozen=True)
class MassReport:
    kappa: float
    kappa_exact: float
    rel_err: float
    error: float = 0.0


class FitResult(NamedTuple):
    params: LiouvilleParams
    error: float


def kappa_exact(b: float) -> float:
    return 2.0 * math.pi * (1.0 - b)


def eta_family(lp: LiouvilleParams, x):
    """The family member ``eta_rho`` at ``x`` (finite at 0 for every ``b``)."""
    a = np.abs(np.asarray(x, dtype=float))
    b, rho = lp.b, lp.rho
    t = a ** (1.0 - b)
    num = 2.0 * (1.0 - b) * rho * math.cos(math.pi * b / 2.0)
    den = t * t + 2.0 * rho * t * math.sin(math.pi * b / 2.0) + rho * rho
    out = np.log(num / den)
    return float(out) if np.ndim(x) == 0 else out


def eta_grid(lp: LiouvilleParams, per_decade: int = 16, span: Sequence[float] = RESIDUAL_GRID) -> GridFunction:
    """``eta_rho`` sampled on a geometric grid (logarithmic growth is far beyond the grid)."""
    nodes = geometric_nodes(span[0], span[1], per_decade)
    return GridFunction.from_function(lambda x: eta_family(lp, x), nodes, even=True)


def _density(lp: LiouvilleParams):
    return lambda x: np.abs(x) ** (-lp.b) * np.exp(eta_family(lp, x))


def mass(lp: LiouvilleParams, cfg: Optional[QuadratureConfig] = None) -> MassReport:
    """``int |x|^-b e^eta dx`` by graded quadrature with an algebraic tail."""
    base = cfg or QuadratureConfig()
    cfg = QuadratureConfig(**{**base.__dict__, "tail_order": 2.0 - lp.b})
    # even integrand: twice the half-line; singular like |x|^-b at 0 when b > 0
    r = integrate_line(_density(lp), (0.0, math.inf), (max(lp.b, 0.0), 0.0), cfg)
    kappa = 2.0 * r.value
    exact = kappa_exact(lp.b)
    return MassReport(kappa, exact, abs(kappa - exact) / exact, 2.0 * r.error)


def residual_profile(lp: LiouvilleParams, x, cfg: Optional[QuadratureConfig] = None,
                     per_decade: int = 16) -> np.ndarray:
    """``(-Delta)^(1/2) eta - |x|^-b e^eta`` at ``x`` for the sampled ``eta``."""
    x = np.asarray(x, dtype=float)
    eta = eta_grid(lp, per_decade)
    lhs = apply_frac_laplacian(eta, 0.5, x, cfg)
    return lhs - _density(lp)(x)


def residual(lp: LiouvilleParams, check_nodes=None, cfg: Optional[QuadratureConfig] = None,
             per_decade: int = 16, exclusion: float = 1e-3, window: Sequence[float] = (1e-2, 1e2)) -> float:
    """Largest equation defect over the check nodes.

    By default the check nodes are the grid nodes with ``|x|`` in ``window``;
    nodes closer to 0 than ``exclusion`` are dropped when ``b > 0`` (the right
    side is unbounded there).
    """
    if check_nodes is None:
        nodes = geometric_nodes(RESIDUAL_GRID[0], RESIDUAL_GRID[1], per_decade)
        a = np.abs(nodes)
        check_nodes = nodes[(a >= window[0] * (1 - 1e-12)) & (a <= window[1] * (1 + 1e-12))]
    x = np.asarray(check_nodes, dtype=float)
    if np.any(x == 0.0):
        raise DomainError("check nodes must avoid 0")
    if lp.b > 0.0:
        x = x[np.abs(x) >= exclusion]
    return float(np.max(np.abs(residual_profile(lp, x, cfg, per_decade))))


def fit_rho(eta_samples: GridFunction, b: float, window: float = 5.0, threshold: float = 1.0,
            rho_range: Sequence[float] = (1e-3, 1e3)) -> FitResult:
    """``rho`` minimising the sup-distance between samples and ``eta_rho`` on ``|x| <= window``."""
    x = eta_samples.nodes + eta_samples.center
    keep = np.abs(x) <= window
    if np.count_nonzero(keep) < 2:
        raise FitFailed("no samples inside the fit window")
    x, y = x[keep], eta_samples.values[keep]

    def err(log_rho):
        return float(np.max(np.abs(y - eta_family(LiouvilleParams(math.exp(log_rho), b), x))))

    lo, hi = math.log(rho_range[0]), math.log(rho_range[1])
    grid = np.linspace(lo, hi, 121)
    vals = [err(t) for t in grid]
    k = int(np.argmin(vals))
    a, c = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = minimize_scalar(err, bounds=(a, c), method="bounded", options={"xatol": 1e-10})
    best = res.x if res.fun <= vals[k] else grid[k]
    e = min(float(res.fun), vals[k])
    if not e <= threshold:
        raise FitFailed("best sup-distance %.3g exceeds threshold %.3g" % (e, threshold))
    return FitResult(LiouvilleParams(math.exp(best), b), e)
