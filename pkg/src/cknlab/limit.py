"""The epsilon ladder: extremals along a parameter schedule and their Liouville limit.

Along the schedule ``p = 1/eps``, ``beta = eps (b + eps)``, ``alpha = beta/2``,
``gamma = 1/2 - eps (1 - (b + eps)/2)`` the normalized extremals ``u_eps``
give ``eta_eps = p (u_eps - 1)``, which after the shift ``log(1/pi)`` is
compared with the explicit solutions of ``(-Delta)^(1/2) eta = |x|^-b e^eta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .energy import MinimizerResult, SolverKnobs, minimize
from .errors import CknError, InvalidSchedule
from .liouville import fit_rho, kappa_exact, mass
from .operators import CknParams, apply_L, l1q_norm, sigma_gamma
from .quadrature import GridFunction, QuadratureConfig

__all__ = [
    "ScheduleParams",
    "RungRecord",
    "LadderReport",
    "make_schedule",
    "eta_from_minimizer",
    "shift_constant",
    "equation_defect",
    "run_ladder",
]


def shift_constant() -> float:
    """``log sigma_{1/2} = log(1/pi)``: turns ``L_{1/2,0}`` into ``(-Delta)^(1/2)``."""
    return math.log(sigma_gamma(1, 0.5))


@dataclass(frozen=True)
class ScheduleParams:
    """One rung of the ladder; ``experimental`` marks hand-made exponents."""

    b: float
    epsilon: float
    p_eps: float = None
    beta_eps: float = None
    alpha_eps: float = None
    gamma_eps: float = None
    experimental: bool = False

    def __post_init__(self):
        eps, b = self.epsilon, self.b
        if not eps > 0.0:
            raise InvalidSchedule("epsilon must be positive")
        if not self.experimental:
            if not 0.0 <= b < 1.0:
                raise InvalidSchedule("b must lie in [0, 1)")
            object.__setattr__(self, "p_eps", 1.0 / eps)
            object.__setattr__(self, "beta_eps", eps * (b + eps))
            object.__setattr__(self, "alpha_eps", eps * (b + eps) / 2.0)
            object.__setattr__(self, "gamma_eps", 0.5 - eps * (1.0 - (b + eps) / 2.0))
        bad = self.violations()
        if bad:
            raise InvalidSchedule("epsilon=%g, b=%g violates: %s" % (eps, b, "; ".join(bad)))

    @classmethod
    def custom(cls, b: float, epsilon: float, p: float, beta: float, alpha: float, gamma: float) -> "ScheduleParams":
        """A schedule point with explicit exponents (only ``beta p -> b`` is expected)."""
        return cls(b, epsilon, p, beta, alpha, gamma, experimental=True)

    def violations(self) -> List[str]:
        a, be, g = self.alpha_eps, self.beta_eps, self.gamma_eps
        bad = []
        if not 0.0 < g < 0.5:
            bad.append("0 < gamma < 1/2")
        if not a > 0.0:
            bad.append("alpha > 0")
        if not a < be:
            bad.append("alpha < beta")
        if not a < (1.0 - 2.0 * g) / 2.0:
            bad.append("alpha < (1 - 2 gamma)/2")
        if not be < a + g:
            bad.append("beta < alpha + gamma")
        if not self.experimental:
            p = CknParams(g, a, be).p
            if abs(p - self.p_eps) > 1e-9 * self.p_eps:
                bad.append("p = 1/epsilon")
        return bad

    @property
    def params(self) -> CknParams:
        return CknParams(self.gamma_eps, self.alpha_eps, self.beta_eps)


def make_schedule(b: float, epsilons: Sequence[float]) -> List[ScheduleParams]:
    eps = [float(e) for e in epsilons]
    if any(e2 >= e1 for e1, e2 in zip(eps[:-1], eps[1:])):
        raise InvalidSchedule("epsilons must be strictly decreasing")
    return [ScheduleParams(b, e) for e in eps]


def eta_from_minimizer(m: MinimizerResult, sched: ScheduleParams) -> GridFunction:
    """``eta_eps = p (u_eps - 1)`` on the minimizer's grid (tends to ``-p`` at infinity)."""
    u = m.u
    return GridFunction(u.nodes, sched.p_eps * (u.values - 1.0), u.even_flag, 0.0, 0.0, 0.0, u.center)


def equation_defect(eta: GridFunction, sched: ScheduleParams, r: float = 10.0, per_decade: int = 8,
                    cfg: Optional[QuadratureConfig] = None) -> float:
    """``sup_{1/r <= |x| <= r} | |x|^(beta p) L eta - (1 + eta/p)^(p-1) |``."""
    p = sched.p_eps
    x = np.logspace(-math.log10(r), math.log10(r), int(2 * per_decade * math.log10(r)) + 1)
    lhs = x ** (sched.beta_eps * p) * apply_L(eta, sched.params, x, cfg)
    rhs = np.abs(1.0 + eta(x) / p) ** (p - 1.0)
    return float(np.max(np.abs(lhs - rhs)))


@dataclass
class RungRecord:
    epsilon: float
    schedule: ScheduleParams
    ratio: float = math.nan
    el_residual: float = math.nan
    converged: bool = False
    lp_mass: float = math.nan
    kappa_bar: float = math.nan
    eta_max_ball: float = math.nan
    l1q: float = math.nan
    sup_diff: float = math.nan
    rho_fit: float = math.nan
    fit_err: float = math.nan
    mass_fit: float = math.nan
    error: str = ""
    minimizer: Optional[MinimizerResult] = field(default=None, repr=False)
    eta: Optional[GridFunction] = field(default=None, repr=False)

    def summary(self) -> dict:
        keys = ["epsilon", "ratio", "el_residual", "converged", "lp_mass", "kappa_bar", "eta_max_ball",
                "l1q", "sup_diff", "rho_fit", "fit_err", "mass_fit", "error"]
        out = {k: getattr(self, k) for k in keys}
        s = self.schedule
        out["schedule"] = {"b": s.b, "epsilon": s.epsilon, "p": s.p_eps, "beta": s.beta_eps,
                           "alpha": s.alpha_eps, "gamma": s.gamma_eps}
        return out


@dataclass
class LadderReport:
    b: float
    window: float
    rungs: List[RungRecord]
    samples: np.ndarray = field(default=None, repr=False)

    CSV_COLUMNS = ("epsilon", "ratio", "el_residual", "sup_diff", "rho_fit", "fit_err", "mass_fit")

    def csv_rows(self) -> list:
        return [[getattr(r, c) for c in self.CSV_COLUMNS] for r in self.rungs]

    def document(self, include_samples: bool = True) -> dict:
        doc = {"b": self.b, "window": self.window, "kappa_exact": kappa_exact(self.b),
               "kappa_bar_extrapolated": self.kappa_bar_extrapolated(), "shift": shift_constant(), "rungs": []}
        for r in self.rungs:
            item = r.summary()
            if include_samples and r.eta is not None and self.samples is not None:
                item["eta_shifted_samples"] = (r.eta(self.samples) + shift_constant()).tolist()
            doc["rungs"].append(item)
        if include_samples and self.samples is not None:
            doc["sample_points"] = self.samples.tolist()
        return doc

    def sup_diffs(self) -> List[float]:
        return [r.sup_diff for r in self.rungs[1:]]

    def kappa_bar_extrapolated(self) -> float:
        """Linear-in-epsilon extrapolation of ``kappa_bar`` from the last two solved rungs."""
        ok = [r for r in self.rungs if not r.error]
        if len(ok) < 2:
            return math.nan
        r1, r2 = ok[-2], ok[-1]
        return (r1.epsilon * r2.kappa_bar - r2.epsilon * r1.kappa_bar) / (r1.epsilon - r2.epsilon)


def run_ladder(b: float, epsilons: Sequence[float], knobs: Optional[SolverKnobs] = None,
               cfg: Optional[QuadratureConfig] = None, window: float = 5.0, samples: int = 201) -> LadderReport:
    """Solve every rung, extract the shifted ``eta`` and compare rungs on ``[-window, window]``.

    A failing rung is recorded with its error message and the ladder moves on.
    """
    schedule = make_schedule(b, epsilons)
    xs = np.linspace(-window, window, samples)
    xs = xs[xs != 0.0]
    shift = shift_constant()
    rungs: List[RungRecord] = []
    prev = None
    for sched in schedule:
        rec = RungRecord(sched.epsilon, sched)
        try:
            m = minimize(sched.params, knobs=knobs, cfg=cfg)
            rec.minimizer = m
            rec.ratio = m.report.ratio
            rec.el_residual = m.report.el_residual
            rec.converged = m.converged
            rec.lp_mass = m.report.lp_mass
            rec.kappa_bar = m.report.lp_mass / math.pi
            eta = eta_from_minimizer(m, sched)
            rec.eta = eta
            ball = np.abs(eta.nodes) <= 1.0
            rec.eta_max_ball = float(np.max(eta.values[ball]))
            rec.l1q = float(l1q_norm(eta, 1.0 + 2.0 * sched.gamma_eps + sched.alpha_eps, cfg))
            shifted = GridFunction(eta.nodes, eta.values + shift, True, 0.0, 0.0)
            fit = fit_rho(shifted, b, window=window, threshold=math.inf)
            rec.rho_fit = fit.params.rho
            rec.fit_err = fit.error
            rec.mass_fit = float(mass(fit.params, cfg).kappa)
            cur = shifted(xs)
            if prev is not None:
                rec.sup_diff = float(np.max(np.abs(cur - prev)))
            prev = cur
        except CknError as exc:
            rec.error = "%s: %s" % (type(exc).__name__, exc)
            prev = None
        rungs.append(rec)
    return LadderReport(b, window, rungs, xs)
