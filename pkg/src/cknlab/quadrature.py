"""Composite Gauss-Legendre quadrature on geometrically graded panels.

Every integrand handled by the package has power-type singularities at the
origin, on the diagonal ``x = y`` or at infinity.  Panels are therefore
graded geometrically toward each singular point, the innermost sliver is
closed with the declared power law, and the error is estimated by comparing
two refinement levels (``n_cells`` and ``2 * n_cells``).

The module also defines :class:`GridFunction`, the sampled representation of
a real function on a symmetric, geometrically graded grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, NonConvergent, SingularityTooStrong, UnsupportedSupport

__all__ = [
    "QuadratureConfig",
    "QuadResult",
    "GridFunction",
    "geometric_nodes",
    "gauss_legendre",
    "integrate_line",
    "pv_integrate",
    "integrate_plane_offdiag",
]


@dataclass(frozen=True)
class QuadratureConfig:
    """Truncation, grading and tolerance policy for singular integrals.

    ``n_cells`` is the number of panels per decade on graded stretches (and
    the number of uniform panels on regular ones); ``grading`` is the factor
    by which the distance to a singular point shrinks every ``n_cells``
    panels, so the default ``grading=10`` means panels per decade.
    ``order`` is the Gauss-Legendre order used on every panel.
    """

    r_max: float = 1.0e4
    n_cells: int = 8
    grading: float = 10.0
    pv_exclusion: float = 0.01
    abs_tol: float = 1.0e-10
    rel_tol: float = 1.0e-8
    tail_order: float = 2.0
    order: int = 8
    max_refine: int = 5

    def __post_init__(self):
        if not (math.isfinite(self.r_max) and self.r_max > 0):
            raise DomainError("r_max must be finite and positive")
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise DomainError("n_cells must be a positive integer")
        if not self.grading >= 1.0:
            raise DomainError("grading must be >= 1")
        if not 0.0 < self.pv_exclusion < 1.0:
            raise DomainError("pv_exclusion must lie in (0, 1)")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.order < 1:
            raise DomainError("order must be positive")
        if self.max_refine < 0:
            raise DomainError("max_refine must be >= 0")

    @property
    def ratio(self) -> float:
        """Ratio between the distances of consecutive graded breakpoints."""
        if self.grading == 1.0:
            return 2.0 ** (1.0 / self.n_cells)
        return self.grading ** (1.0 / self.n_cells)

    def refined(self, factor: int = 2) -> "QuadratureConfig":
        return replace(self, n_cells=int(self.n_cells * factor))

    def tolerance(self, value: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))


class QuadResult(NamedTuple):
    value: float
    error: float


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def panel_rule(breaks: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite rule on consecutive panels ``[breaks[i], breaks[i+1]]``."""
    breaks = np.asarray(breaks, dtype=float)
    t, w = gauss_legendre(order)
    lo = breaks[:-1, None]
    h = np.diff(breaks)[:, None]
    return (lo + h * t).ravel(), (h * w).ravel()


def _call(f: Callable, x: np.ndarray) -> np.ndarray:
    y = np.asarray(f(x), dtype=float)
    if y.shape != x.shape:
        y = np.array([float(f(xi)) for xi in x.ravel()]).reshape(x.shape)
    return y


def _depth_decades(exponent: float, rel: float) -> int:
    """Decades of grading after which the skipped sliver is below ``rel``.

    The sliver is closed with the leading power law, but integrands such as
    ``|z|**-a - |z|**-b`` carry weaker powers that the closure gets wrong,
    so the depth is chosen as if the closure were absent.
    """
    return int(math.ceil(math.log10(1.0 / rel) / max(1.0 - exponent, 0.05))) + 1


def _graded_distances(length: float, cfg: QuadratureConfig, n_cells: int, depth: int) -> np.ndarray:
    """Decreasing distances ``length * r**-k`` down to ``length * 10**-depth``."""
    ratio = cfg.grading ** (1.0 / n_cells) if cfg.grading > 1.0 else 2.0 ** (1.0 / n_cells)
    count = int(math.ceil(depth * math.log(10.0) / math.log(ratio)))
    return length * ratio ** (-np.arange(count + 1, dtype=float))


class _Segment(NamedTuple):
    x: np.ndarray
    w: np.ndarray
    closures: list  # (point, factor, decade_last, decade_prev) per graded endpoint


def _segment(a: float, b: float, ea: Optional[float], eb: Optional[float], cfg: QuadratureConfig,
             n_cells: int) -> _Segment:
    """Rule on [a, b]; ``ea``/``eb`` are endpoint exponents or ``None`` when regular."""
    order = cfg.order
    rel = min(cfg.rel_tol, 1e-6) * 1e-2
    if ea is None and eb is None:
        if a * b > 0 and max(abs(a), abs(b)) > 10.0 * min(abs(a), abs(b)):
            lo, hi = sorted((abs(a), abs(b)))
            count = int(math.ceil(n_cells * math.log10(hi / lo)))
            breaks = np.sign(a) * lo * (hi / lo) ** (np.arange(count + 1) / count)
            x, w = panel_rule(np.sort(breaks), order)
        else:
            x, w = panel_rule(np.linspace(a, b, n_cells + 1), order)
        return _Segment(x, w, [])
    if ea is not None and eb is not None:
        m = 0.5 * (a + b)
        left = _segment(a, m, ea, None, cfg, n_cells)
        right = _segment(m, b, None, eb, cfg, n_cells)
        return _Segment(np.concatenate([left.x, right.x]), np.concatenate([left.w, right.w]),
                        left.closures + right.closures)
    if ea is not None:
        e, anchor, sign, length = ea, a, 1.0, b - a
    else:
        e, anchor, sign, length = eb, b, -1.0, b - a
    # depth is counted from min(length, 1) so long segments reach small scales too
    depth = _depth_decades(e, rel) + max(0, int(math.ceil(math.log10(length))))
    if anchor != 0.0:
        # offsets below the anchor's float spacing collapse onto the anchor;
        # the power-law closure covers what the grading cannot resolve
        floor = 1e3 * np.finfo(float).eps * abs(anchor)
        depth = max(1, min(depth, int(math.floor(math.log10(length / floor)))))
    dist = _graded_distances(length, cfg, n_cells, depth)
    breaks = np.sort(anchor + sign * dist)
    x, w = panel_rule(breaks, order)
    delta = dist[-1]
    per_decade = max(1, int(round(len(dist) / depth)))
    closures = [(anchor + sign * delta, delta / (1.0 - e), sign, anchor, delta, per_decade)]
    return _Segment(x, w, closures)


def _apply_segment(f: Callable, seg: _Segment, cfg: QuadratureConfig) -> float:
    vals = _call(f, seg.x)
    total = float(np.sum(vals * seg.w))
    for point, factor, sign, anchor, delta, _ in seg.closures:
        total += float(_call(f, np.array([point]))[0]) * factor
        _check_decay(f, anchor, sign, delta, cfg)
    return total


def _check_decay(f: Callable, anchor: float, sign: float, delta: float, cfg: QuadratureConfig) -> None:
    """Flag integrands whose innermost decades do not shrink (non-integrable)."""
    t, w = gauss_legendre(cfg.order)
    parts = []
    for k in range(2):
        lo, hi = delta * 10.0 ** k, delta * 10.0 ** (k + 1)
        s = np.log(lo) + (np.log(hi) - np.log(lo)) * t
        r = np.exp(s)
        vals = _call(f, anchor + sign * r)
        parts.append(abs(float(np.sum(vals * r * w)) * (np.log(hi) - np.log(lo))))
    inner, outer = parts
    if outer > 0 and inner >= 0.9 * outer and inner > 1e-300:
        raise NonConvergent(
            "innermost decades near %.6g do not decay; the declared singularity is too weak" % anchor)


def _tail_integral(f: Callable, start: float, sign: float, cfg: QuadratureConfig) -> float:
    """Integral of f over [start, inf) (sign=+1) or (-inf, -start] (sign=-1).

    Decade panels are added until the value closed with the algebraic decay
    ``cfg.tail_order`` stabilises.
    """
    q = cfg.tail_order
    if not q > 1.0:
        raise DomainError("tail_order must exceed 1 to close an infinite interval")
    t, w = gauss_legendre(cfg.order)
    total = 0.0
    lo = abs(start)
    closed_prev = None
    for _ in range(400):
        hi = lo * 10.0
        r = np.exp(np.log(lo) + math.log(10.0) * t)
        total += float(np.sum(_call(f, sign * r) * r * w)) * math.log(10.0)
        closed = total + float(_call(f, np.array([sign * hi]))[0]) * hi / (q - 1.0)
        if closed_prev is not None and abs(closed - closed_prev) <= 1e-2 * cfg.tolerance(closed):
            return closed
        closed_prev = closed
        lo = hi
    raise NonConvergent("tail closure did not stabilise; is tail_order correct?")


def _line_once(f, a, b, ea, eb, cfg, n_cells):
    if math.isinf(a) or math.isinf(b):
        r = cfg.r_max
        total = 0.0
        if math.isinf(a):
            total += _tail_integral(f, r, -1.0, cfg)
            a, ea = -r, None
        if math.isinf(b):
            total += _tail_integral(f, r, 1.0, cfg)
            b, eb = r, None
        # long finite stretches are graded geometrically toward 0
        if a < 0.0 < b:
            return (total + _line_once(f, a, 0.0, ea, 0.0, cfg, n_cells)
                    + _line_once(f, 0.0, b, 0.0, eb, cfg, n_cells))
        if a == 0.0 and ea is None:
            ea = 0.0
        if b == 0.0 and eb is None:
            eb = 0.0
        return total + _line_once(f, a, b, ea, eb, cfg, n_cells)
    return _apply_segment(f, _segment(a, b, ea, eb, cfg, n_cells), cfg)


def _refine(compute: Callable[[int], float], cfg: QuadratureConfig, what: str) -> QuadResult:
    n = cfg.n_cells
    prev = compute(n)
    if cfg.max_refine == 0:
        # a single fixed rule: no refinement, so no error estimate
        return QuadResult(prev, math.inf)
    err = math.inf
    for _ in range(cfg.max_refine):
        n *= 2
        cur = compute(n)
        err = abs(cur - prev)
        if err <= cfg.tolerance(cur):
            return QuadResult(cur, err)
        prev = cur
    raise NonConvergent("%s: refinement stalled (last change %.3g)" % (what, err))


def integrate_line(f: Callable, interval: Sequence[float], singular_exponents: Sequence[float] = (0.0, 0.0),
                   cfg: Optional[QuadratureConfig] = None,
                   interior: Sequence[Tuple[float, float]] = ()) -> QuadResult:
    """Integrate ``f`` over ``interval`` with power singularities at the endpoints.

    ``singular_exponents[i]`` is ``s`` when ``|f| ~ dist**-s`` at the i-th
    endpoint; a zero exponent means the endpoint is regular.  ``interior``
    lists further ``(point, exponent)`` pairs inside the interval, which are
    treated as endpoints of sub-intervals.  Infinite endpoints are closed
    with the algebraic decay ``cfg.tail_order``.
    """
    cfg = cfg or QuadratureConfig()
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise DomainError("interval must satisfy a < b")
    pts = [(a, float(singular_exponents[0]))]
    pts += sorted((float(p), float(e)) for p, e in interior if a < p < b)
    pts.append((b, float(singular_exponents[1])))
    for _, e in pts:
        if e >= 1.0:
            raise DomainError("exponent %.3g is not integrable" % e)
    pieces = []
    for (p0, e0), (p1, e1) in zip(pts[:-1], pts[1:]):
        ea = e0 if e0 != 0.0 and math.isfinite(p0) else None
        eb = e1 if e1 != 0.0 and math.isfinite(p1) else None
        pieces.append((p0, p1, ea, eb))

    def compute(n):
        return sum(_line_once(f, p0, p1, ea, eb, cfg, n) for p0, p1, ea, eb in pieces)

    return _refine(compute, cfg, "integrate_line")


def _away_breaks(c: float, d: float, p: float, cfg: QuadratureConfig, n_cells: int) -> np.ndarray:
    """Breakpoints on [c, d] graded toward the external point ``p``."""
    ratio = cfg.grading ** (1.0 / n_cells) if cfg.grading > 1.0 else 2.0 ** (1.0 / n_cells)
    if p <= c:
        d0, d1 = c - p, d - p
        sign = 1.0
    else:
        d0, d1 = p - d, p - c
        sign = -1.0
    if d0 <= 0.0:
        raise DomainError("grading point must lie outside the segment")
    count = max(1, int(math.ceil(math.log(d1 / d0) / math.log(ratio))))
    dist = d0 * (d1 / d0) ** (np.arange(count + 1) / count)
    dist = np.concatenate([dist, [d1]])
    dist = np.unique(dist)
    return np.sort(p + sign * dist)


def _pv_once(g, a, b, x0, cfg, n_cells, exclusion):
    order = cfg.order
    half = min(x0 - a, b - x0)
    # the symmetric sum is smooth for a simple pole; a few decades of grading
    # absorb weaker singular parts without amplifying cancellation error
    dist = _graded_distances(half, cfg, n_cells, 3)
    band = exclusion * (dist[-2] - dist[-1])
    dist = np.concatenate([dist, [band]])
    t, w = panel_rule(np.sort(dist), order)
    sym = _call(g, x0 + t) + _call(g, x0 - t)
    total = float(np.sum(sym * w))
    # first-order Taylor closure of the excluded band: the symmetric sum is even in t
    edge = float(_call(g, np.array([x0 + band]))[0] + _call(g, np.array([x0 - band]))[0])
    total += band * edge
    if x0 - a > half * (1 + 1e-15):
        x, w2 = panel_rule(_away_breaks(a, x0 - half, x0, cfg, n_cells), order)
        total += float(np.sum(_call(g, x) * w2))
    elif b - x0 > half * (1 + 1e-15):
        x, w2 = panel_rule(_away_breaks(x0 + half, b, x0, cfg, n_cells), order)
        total += float(np.sum(_call(g, x) * w2))
    return total


def pv_integrate(g: Callable, interval: Sequence[float], x0: float,
                 cfg: Optional[QuadratureConfig] = None) -> QuadResult:
    """Principal value of the integral of ``g`` over ``interval`` with a simple pole at ``x0``.

    The symmetric sum ``g(x0+t) + g(x0-t)`` is integrated on panels graded
    toward ``t = 0``; the excluded band ``t < pv_exclusion * h`` (``h`` the
    innermost panel width) is closed by a first-order Taylor correction.
    """
    cfg = cfg or QuadratureConfig()
    a, b = float(interval[0]), float(interval[1])
    if not a < x0 < b:
        raise DomainError("pole must lie strictly inside the interval")
    return _refine(lambda n: _pv_once(g, a, b, float(x0), cfg, n, cfg.pv_exclusion), cfg, "pv_integrate")


def _plane_once(F, ab, cd, diag_e, ax_e, cfg, n_cells):
    a, b = ab
    c, d = cd
    order = cfg.order
    # outer rule: graded toward both ends (the inner integral has endpoint cusps)
    e_a = ax_e[0] if a == 0.0 else 0.0
    e_b = ax_e[0] if b == 0.0 else 0.0
    outer = _segment(a, b, e_a, e_b, cfg, n_cells)
    xs = list(outer.x) + [cl[0] for cl in outer.closures]
    ws = list(outer.w) + [cl[1] for cl in outer.closures]
    total = 0.0
    last = prev = 0.0
    t, w = gauss_legendre(order)
    for xi, wi in zip(xs, ws):
        inner_total = 0.0
        if c < xi < d:
            pieces = [(c, xi, None, diag_e), (xi, d, diag_e, None)]
        else:
            pieces = [(c, d, None, None)]
        pts, wts = [], []
        for lo, hi, el, er in pieces:
            if lo == 0.0 and ax_e[1] != 0.0:
                el = ax_e[1] if el is None else max(el, ax_e[1])
            if hi == 0.0 and ax_e[1] != 0.0:
                er = ax_e[1] if er is None else max(er, ax_e[1])
            seg = _segment(lo, hi, el, er, cfg, n_cells)
            pts.append(seg.x)
            wts.append(seg.w)
            for point, factor, sign, anchor, delta, _ in seg.closures:
                pts.append(np.array([point]))
                wts.append(np.array([factor]))
                if anchor == xi:
                    for k in range(2):
                        lo_r, hi_r = delta * 10.0 ** k, delta * 10.0 ** (k + 1)
                        r = lo_r + (hi_r - lo_r) * t
                        v = np.asarray(F(np.full_like(r, xi), anchor + sign * r), dtype=float)
                        contrib = abs(float(np.sum(v * w)) * (hi_r - lo_r)) * abs(wi)
                        if k == 0:
                            last += contrib
                        else:
                            prev += contrib
        y = np.concatenate(pts)
        wy = np.concatenate(wts)
        vals = np.asarray(F(np.full_like(y, xi), y), dtype=float)
        inner_total += float(np.sum(vals * wy))
        total += wi * inner_total
    if prev > 0 and last >= 0.9 * prev:
        raise SingularityTooStrong("diagonal contributions do not decay; declared exponent %.3g" % diag_e)
    return total


def integrate_plane_offdiag(F: Callable, square: Sequence[Sequence[float]], diagonal_exponent: float,
                            axis_exponents: Sequence[float] = (0.0, 0.0),
                            cfg: Optional[QuadratureConfig] = None) -> QuadResult:
    """Integrate ``F(x, y)`` over a rectangle with a power singularity on the diagonal.

    ``diagonal_exponent`` is the effective strength ``e`` of ``|F| ~ |x-y|**-e``
    after any cancellation in the numerator; ``axis_exponents`` are the
    strengths at ``x = 0`` and ``y = 0``.  The rule is symmetrised in the
    two variables, so exchanging the arguments of a symmetric ``F`` leaves
    the result unchanged to the last bit.
    """
    cfg = cfg or QuadratureConfig(rel_tol=1e-6)
    ab = (float(square[0][0]), float(square[0][1]))
    cd = (float(square[1][0]), float(square[1][1]))
    if diagonal_exponent >= 1.0 or max(axis_exponents) >= 1.0:
        raise SingularityTooStrong("declared singularity is not integrable")
    ax = (float(axis_exponents[0]), float(axis_exponents[1]))

    def swapped(x, y):
        return F(y, x)

    def compute(n):
        q1 = _plane_once(F, ab, cd, diagonal_exponent, ax, cfg, n)
        q2 = _plane_once(swapped, cd, ab, diagonal_exponent, (ax[1], ax[0]), cfg, n)
        return 0.5 * (q1 + q2)

    return _refine(compute, cfg, "integrate_plane_offdiag")


# ---------------------------------------------------------------------------
# Grid functions
# ---------------------------------------------------------------------------

def geometric_nodes(x_min: float, x_max: float, per_decade: int) -> np.ndarray:
    """Symmetric nodes ``+-x_min * 10**(k/per_decade)`` up to (at least) ``x_max``."""
    if not 0 < x_min < x_max:
        raise DomainError("need 0 < x_min < x_max")
    count = int(math.ceil(round(math.log10(x_max / x_min) * per_decade, 9)))
    pos = x_min * 10.0 ** (np.arange(count + 1) / per_decade)
    return np.concatenate([-pos[::-1], pos])


class _Interpolant:
    """Cubic spline in ``log|x|`` on each half-line, power laws beyond the grid.

    On ``|x| < x_1`` the interpolant is linear across the origin when the
    origin exponent is zero and a pure power ``|x|**-origin_exponent``
    otherwise; beyond ``x_M`` it decays like ``|x|**-decay_exponent``.  The
    whole construction is linear in the nodal values and commutes with the
    dilations ``x -> c x`` and with the inversion ``x -> 1/x`` of a grid
    that is itself inversion symmetric.
    """

    def __init__(self, pos_nodes: np.ndarray, decay: float, origin: float, prefactor: float):
        self.xp = pos_nodes
        self.s = np.log(pos_nodes)
        self.m = len(pos_nodes)
        self.decay = decay
        self.origin = origin
        self.prefactor = prefactor

    def _split(self, values: np.ndarray):
        m = self.m
        pos = values[m:]
        neg = values[:m][::-1]
        return pos, neg

    def evaluate(self, values: np.ndarray, x: np.ndarray, nu: int = 0) -> np.ndarray:
        """Interpolant (``nu=0``) or its x-derivatives (``nu=1,2``) at ``x``.

        ``values`` has shape ``(2M,)`` or ``(2M, K)``.
        """
        values = np.asarray(values, dtype=float)
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        extra = values.shape[1:]
        pos, neg = self._split(values)
        a = np.abs(flat)
        right = flat > 0
        out = np.zeros((flat.size,) + extra)
        x1, xm = self.xp[0], self.xp[-1]
        inner = a < x1
        outer = a > xm
        mid = ~(inner | outer)
        if np.any(mid):
            both = np.concatenate([pos, neg], axis=1) if values.ndim == 2 else np.stack([pos, neg], axis=1)
            spline = _cached_spline(self.s.tobytes(), both.tobytes(), both.shape)
            sm = np.log(a[mid])
            d0 = spline(sm)
            k = values.shape[1] if values.ndim == 2 else 1
            if nu == 0:
                vals = d0
            else:
                d1 = spline(sm, 1)
                if nu == 1:
                    vals = d1 / a[mid][:, None]
                else:
                    d2 = spline(sm, 2)
                    vals = (d2 - d1) / (a[mid] ** 2)[:, None]
            rm = right[mid]
            pick = np.where(rm[:, None], vals[:, :k], vals[:, k:])
            if nu == 1:
                pick = pick * np.where(rm, 1.0, -1.0)[:, None]
            out[mid] = pick if values.ndim == 2 else pick[:, 0]
        if np.any(inner):
            ai = a[inner]
            xi = flat[inner]
            if self.origin == 0.0:
                lo, hi = neg[0], pos[0]
                slope = (hi - lo) / (2 * x1)
                if nu == 0:
                    out[inner] = lo + np.multiply.outer(xi + x1, slope) if values.ndim == 2 else lo + (xi + x1) * slope
                elif nu == 1:
                    out[inner] = np.broadcast_to(slope, out[inner].shape)
                else:
                    out[inner] = 0.0
            else:
                e = -self.origin
                base = np.where(right[inner][:, None] if values.ndim == 2 else right[inner],
                                pos[0], neg[0])
                factor = self._power(ai, x1, e, nu, right[inner])
                out[inner] = base * (factor[:, None] if values.ndim == 2 else factor)
        if np.any(outer):
            ao = a[outer]
            base = np.where(right[outer][:, None] if values.ndim == 2 else right[outer],
                            pos[-1], neg[-1])
            factor = self._power(ao, xm, -self.decay, nu, right[outer])
            out[outer] = base * (factor[:, None] if values.ndim == 2 else factor)
        if self.prefactor != 0.0:
            out = self._apply_prefactor(values, flat, out, nu)
        return out.reshape(x.shape + extra)

    @staticmethod
    def _power(a, ref, e, nu, right):
        base = (a / ref) ** e
        if nu == 0:
            return base
        sign = np.where(right, 1.0, -1.0)
        if nu == 1:
            return sign * e * base / a
        return e * (e - 1.0) * base / a ** 2

    def _apply_prefactor(self, values, flat, out, nu):
        w = self.prefactor
        a = np.abs(flat)
        sign = np.where(flat > 0, 1.0, -1.0)
        pw = a ** w
        shape = (-1,) + (1,) * (out.ndim - 1)
        if nu == 0:
            return out * pw.reshape(shape)
        u0 = self.evaluate_raw(values, flat, 0)
        dpw = (sign * w * a ** (w - 1.0)).reshape(shape)
        if nu == 1:
            return out * pw.reshape(shape) + u0 * dpw
        u1 = self.evaluate_raw(values, flat, 1)
        d2pw = (w * (w - 1.0) * a ** (w - 2.0)).reshape(shape)
        return out * pw.reshape(shape) + 2.0 * u1 * dpw + u0 * d2pw

    def evaluate_raw(self, values, flat, nu):
        saved = self.prefactor
        self.prefactor = 0.0
        try:
            return self.evaluate(values, flat, nu)
        finally:
            self.prefactor = saved


_SPLINE_CACHE: dict = {}


def _cached_spline(s_bytes: bytes, v_bytes: bytes, shape) -> CubicSpline:
    key = (s_bytes, v_bytes, shape)
    sp = _SPLINE_CACHE.get(key)
    if sp is None:
        s = np.frombuffer(s_bytes, dtype=float)
        v = np.frombuffer(v_bytes, dtype=float).reshape(shape)
        if v.ndim == 3:
            v = v.reshape(shape[0], -1)
        sp = CubicSpline(s, v, axis=0, bc_type="not-a-knot")
        if len(_SPLINE_CACHE) > 32:
            _SPLINE_CACHE.clear()
        _SPLINE_CACHE[key] = sp
    return sp


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A real function sampled on a symmetric, geometrically graded grid.

    ``nodes`` never contains 0 and satisfies ``nodes == -nodes[::-1]``.
    Between nodes the function is a cubic spline in ``log|x|``; inside
    ``(-x_1, x_1)`` and beyond ``x_M`` it follows the declared power laws
    ``|x|**-origin_exponent`` and ``|x|**-decay_exponent``.  ``prefactor``
    multiplies the interpolant by ``|x|**prefactor`` (used for the
    ground-state substitution) and ``center`` translates the whole profile.
    """

    nodes: np.ndarray
    values: np.ndarray
    even_flag: bool = False
    decay_exponent: float = 0.0
    origin_exponent: float = 0.0
    prefactor: float = 0.0
    center: float = 0.0
    _interp: _Interpolant = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.size < 8 or nodes.size % 2:
            raise DomainError("nodes must be a 1-D array with an even number (>= 8) of entries")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("nodes must be strictly increasing")
        if np.any(nodes == 0.0):
            raise DomainError("0 is never a grid node")
        if not np.array_equal(nodes, -nodes[::-1]):
            raise DomainError("nodes must be symmetric under x -> -x")
        if values.shape != nodes.shape:
            raise DomainError("one value per node is required")
        if self.even_flag and not np.array_equal(values, values[::-1]):
            raise DomainError("even_flag set but values are not symmetric")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        m = nodes.size // 2
        object.__setattr__(self, "_interp", _Interpolant(nodes[m:], float(self.decay_exponent),
                                                         float(self.origin_exponent), float(self.prefactor)))

    # -- construction -----------------------------------------------------
    @classmethod
    def from_function(cls, f: Callable, nodes: np.ndarray, even: bool = False, decay_exponent: float = 0.0,
                      origin_exponent: float = 0.0, center: float = 0.0) -> "GridFunction":
        nodes = np.asarray(nodes, dtype=float)
        vals = _call(f, nodes + center)
        if even:
            vals = 0.5 * (vals + vals[::-1])
        return cls(nodes, vals, even, decay_exponent, origin_exponent, 0.0, center)

    def with_values(self, values: np.ndarray, even: Optional[bool] = None) -> "GridFunction":
        even = self.even_flag if even is None else even
        return GridFunction(self.nodes, values, even, self.decay_exponent, self.origin_exponent,
                            self.prefactor, self.center)

    # -- evaluation -------------------------------------------------------
    @property
    def half(self) -> int:
        return self.nodes.size // 2

    @property
    def interp(self) -> _Interpolant:
        return self._interp

    def __call__(self, x) -> np.ndarray:
        return self._interp.evaluate(self.values, np.asarray(x, dtype=float) - self.center)

    def derivative(self, x, nu: int = 1) -> np.ndarray:
        return self._interp.evaluate(self.values, np.asarray(x, dtype=float) - self.center, nu)

    def basis(self, x, nu: int = 0) -> np.ndarray:
        """Matrix mapping nodal values to the interpolant (or a derivative) at ``x``."""
        eye = np.eye(self.nodes.size)
        return self._interp.evaluate(eye, np.asarray(x, dtype=float) - self.center, nu)

    def support(self, threshold: float = 0.0) -> Tuple[float, float]:
        """Smallest interval outside which all nodal values are <= threshold in modulus."""
        idx = np.nonzero(np.abs(self.values) > threshold)[0]
        if idx.size == 0:
            return (self.center, self.center)
        return (self.nodes[idx[0]] + self.center, self.nodes[idx[-1]] + self.center)

    def is_compactly_supported(self) -> bool:
        return self.values[0] == 0.0 and self.values[-1] == 0.0

    def require_inside(self, lo: float, hi: float) -> None:
        a, b = self.support()
        if a < lo or b > hi:
            raise UnsupportedSupport("profile extends beyond [%g, %g]" % (lo, hi))
