"""Quadrature of nonlocal kernels against grid functions.

For a grid function ``u`` and an evaluation point ``x`` the operator

    L u(x) = PV int (u(x) - u(y)) G(x, y) dy,
    G(x, y) = |x - y|**-(1+2*gamma) * |x|**-alpha * |y|**-alpha,

is split into four parts:

* far cells, integrated with a fixed Gauss rule shared by every ``x``;
* cells adjacent to ``x``, subdivided geometrically toward ``x``;
* the symmetric band ``|y - x| < t_c`` (``t_c = pv_exclusion * h``), replaced
  by its second-order Taylor expansion, which is where the principal value
  is taken;
* the region beyond the last tail panel, closed analytically from the power
  law that the grid function follows there.

All parts are linear in the nodal values, so the same code produces
operator values, operator matrices and bilinear forms.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DomainError, NonConvergent
from .quadrature import GridFunction, QuadratureConfig, gauss_legendre

TAIL_DECADES = 18
OUTER_DECADES = 10
INNER_SKIP = 4


@dataclass(frozen=True)
class Kernel:
    """``|x-y|**-(1+2*gamma) * |x|**-alpha * |y|**-alpha``."""

    gamma: float
    alpha: float = 0.0

    @property
    def s(self) -> float:
        return 1.0 + 2.0 * self.gamma

    def weight(self, y):
        if self.alpha == 0.0:
            return np.ones_like(np.asarray(y, dtype=float))
        return np.abs(y) ** (-self.alpha)

    def weight_d1(self, y):
        if self.alpha == 0.0:
            return np.zeros_like(np.asarray(y, dtype=float))
        return -self.alpha * np.sign(y) * np.abs(y) ** (-self.alpha - 1.0)


class Layout:
    """Cells of the real line induced by a grid, with a shared Gauss rule.

    Positive-side cells are: decade panels from ``x_1 * 10**-origin`` up to
    ``x_1``, the grid cells ``[x_i, x_{i+1}]``, and decade panels from
    ``x_M`` to ``x_M * 10**tail``.  The negative side mirrors them.  Every
    cell is integrated with Gauss-Legendre in the variable ``log|y|``.
    """

    def __init__(self, nodes_pos: np.ndarray, order: int, origin_decades: int,
                 tail_decades: int = TAIL_DECADES, outer_decades: int = OUTER_DECADES):
        x1, xm = nodes_pos[0], nodes_pos[-1]
        origin = x1 * 10.0 ** (-np.arange(origin_decades, 0, -1, dtype=float))
        tail = xm * 10.0 ** np.arange(1, tail_decades + 1, dtype=float)
        edges = np.concatenate([origin, nodes_pos, tail])
        self.edges_pos = edges
        self.delta0 = edges[0]
        self.y_far = edges[-1]
        self.x1 = x1
        self.xm = xm
        lo = edges[:-1]
        hi = edges[1:]
        n = lo.size
        # signed cells in increasing order
        self.lo = np.concatenate([-hi[::-1], lo])
        self.hi = np.concatenate([-lo[::-1], hi])
        self.ncell = 2 * n
        t, w = gauss_legendre(order)
        slo = np.log(np.abs(np.concatenate([hi[::-1], lo])))
        shi = np.log(np.abs(np.concatenate([lo[::-1], hi])))
        # for negative cells integrate in s from log|hi| to log|lo| (same orientation in |y|)
        sa = np.minimum(slo, shi)
        sb = np.maximum(slo, shi)
        ds = sb - sa
        s = sa[:, None] + ds[:, None] * t[None, :]
        sign = np.concatenate([-np.ones(n), np.ones(n)])
        y = sign[:, None] * np.exp(s)
        wy = np.exp(s) * ds[:, None] * w[None, :]
        self.y = y.ravel()
        self.wy = wy.ravel()
        self.cell_of = np.repeat(np.arange(self.ncell), order)
        self.order = order
        # outer rule: drop the outermost tail panels so that far-field closures stay accurate
        limit = xm * 10.0 ** outer_decades * (1 + 1e-12)
        # and the innermost origin panels, where the untreated gap (-delta0, delta0)
        # is no longer small compared with |x|
        skip = min(INNER_SKIP, origin_decades - 2)
        floor = edges[skip] * (1 - 1e-12)
        ay = np.abs(self.y)
        self.outer_mask = (ay <= limit) & (ay >= floor)
        alo, ahi = np.abs(self.lo), np.abs(self.hi)
        self.outer_cells = (np.maximum(alo, ahi) <= limit) & (np.minimum(alo, ahi) >= floor)
        self.n_origin = origin_decades
        self.n_tail_outer = outer_decades


def layout_for(u: GridFunction, kernel: Kernel, cfg: QuadratureConfig, extra_origin: float = 0.0) -> Layout:
    """Layout whose origin panels are deep enough for the weights involved."""
    interp = u.interp
    e = kernel.alpha + max(0.0, interp.origin - interp.prefactor) + extra_origin
    e = min(max(e, 0.0), 0.97)
    digits = -math.log10(min(cfg.rel_tol, cfg.abs_tol) * 1e-3)
    decades = int(min(300, math.ceil(digits / (1.0 - e)) + 2))
    return Layout(interp.xp, cfg.order, decades)


# ---------------------------------------------------------------------------
# per-point near rules
# ---------------------------------------------------------------------------

def _near_rule(x: float, lay: Layout, kernel: Kernel, cfg: QuadratureConfig):
    """Special points/weights near ``x`` plus the Taylor band half-width."""
    lo, hi = lay.lo, lay.hi
    # cells are integrated in log|y|, so closeness is measured there; cells on
    # the other side of the origin never contain the kernel singularity
    same = (lo > 0) == (x > 0)
    sl = np.log(np.minimum(np.abs(lo), np.abs(hi)))
    sh = np.log(np.maximum(np.abs(lo), np.abs(hi)))
    sx = math.log(abs(x))
    dist = np.maximum(np.maximum(sl - sx, sx - sh), 0.0)
    near = same & (dist < (sh - sl))
    if not np.any(near):
        raise DomainError("evaluation point %.6g lies outside the layout" % x)
    idx = np.nonzero(near)[0]
    # a wide neighbour (an origin or tail decade) can be near while narrower
    # cells in between are not; the near region must be an interval
    idx = np.arange(idx[0], idx[-1] + 1)
    edges = np.unique(np.concatenate([lo[idx], hi[idx]]))
    # the origin gap (-delta0, delta0) is never integrated; its edges are breakpoints
    tol = 1e-13 * abs(x)
    other = edges[np.abs(edges - x) > tol]
    h = float(np.min(np.abs(other - x)))
    tc = cfg.pv_exclusion * h
    t, w = gauss_legendre(cfg.order)
    pts = []
    wts = []
    # band: symmetric nodes x +- t, t in [tc, h], panels halving toward 0
    k = max(1, int(math.ceil(math.log2(h / tc))))
    tb = h * 2.0 ** (-np.arange(k + 1, dtype=float))
    tb[-1] = tc
    tb = tb[::-1]
    tl = tb[:-1, None] + np.diff(tb)[:, None] * t[None, :]
    tw = np.diff(tb)[:, None] * w[None, :]
    tl = tl.ravel()
    tw = tw.ravel()
    pts.append(x + tl)
    wts.append(tw)
    pts.append(x - tl)
    wts.append(tw)
    # remaining pieces of the near region, graded toward x
    region_lo, region_hi = float(edges[0]), float(edges[-1])
    bps = np.unique(np.concatenate([edges, [x - h, x + h]]))
    bps = bps[(bps >= region_lo) & (bps <= region_hi)]
    for a, b in zip(bps[:-1], bps[1:]):
        if b <= x - h * (1 - 1e-12) or a >= x + h * (1 - 1e-12):
            if a < 0.0 < b:
                continue  # origin gap
            if -lay.delta0 <= a and b <= lay.delta0:
                continue
            d0 = a - x if a >= x else x - b
            d1 = b - x if a >= x else x - a
            count = max(1, int(math.ceil(math.log2(d1 / d0))))
            dd = d0 * (d1 / d0) ** (np.arange(count + 1) / count)
            br = np.sort(x + dd) if a >= x else np.sort(x - dd)
            br[0], br[-1] = a, b
            # Gauss in log|y| on every sub-panel (a, b never straddle 0)
            sa = np.log(np.abs(br[:-1]))
            sb = np.log(np.abs(br[1:]))
            sgn = 1.0 if a > 0 else -1.0
            s0 = np.minimum(sa, sb)
            ds = np.abs(sb - sa)
            ss = s0[:, None] + ds[:, None] * t[None, :]
            pts.append((sgn * np.exp(ss)).ravel())
            wts.append((np.exp(ss) * ds[:, None] * w[None, :]).ravel())
    return idx, np.concatenate(pts), np.concatenate(wts), tc


class KernelRule:
    """Quadrature data for ``y -> (.) G(x, y)`` at a block of points ``x``."""

    def __init__(self, u_like: GridFunction, kernel: Kernel, X: np.ndarray, cfg: QuadratureConfig,
                 lay: Optional[Layout] = None):
        if u_like.center != 0.0 and kernel.alpha != 0.0:
            raise DomainError("weighted kernels require profiles centred at the origin")
        self.kernel = kernel
        self.cfg = cfg
        self.lay = lay or layout_for(u_like, kernel, cfg)
        X = np.asarray(X, dtype=float)
        if np.any(X == 0.0) and kernel.alpha != 0.0:
            raise DomainError("the weighted operator is not defined at x = 0")
        self.X = X
        lay = self.lay
        s = kernel.s
        gx = kernel.weight(X)
        gy = kernel.weight(lay.y)
        n = X.size
        with np.errstate(divide="ignore"):
            # coincident points belong to near cells and are zeroed below
            C = np.abs(X[:, None] - lay.y[None, :]) ** (-s)
        C *= (gx[:, None] * (gy * lay.wy)[None, :])
        owners = []
        npts = []
        nwts = []
        tcs = np.empty(n)
        for i, x in enumerate(X):
            cells, p, wp, tc = _near_rule(float(x), lay, kernel, cfg)
            mask = np.isin(lay.cell_of, cells)
            C[i, mask] = 0.0
            owners.append(np.full(p.size, i))
            npts.append(p)
            nwts.append(wp * np.abs(x - p) ** (-s) * gx[i] * kernel.weight(p))
            tcs[i] = tc
        self.C = C
        self.owner = np.concatenate(owners)
        self.P = np.concatenate(npts)
        self.cP = np.concatenate(nwts)
        tau = tcs ** (2.0 - 2.0 * kernel.gamma) / (2.0 - 2.0 * kernel.gamma)
        g = gx
        g1 = kernel.weight_d1(X)
        self.band_d1 = -2.0 * g * g1 * tau
        self.band_d2 = -g * g * tau
        self.band_bil = 2.0 * g * g * tau

    # -- analytic far field -------------------------------------------------
    def _tail(self, q: float, side: float) -> np.ndarray:
        """int over y beyond the last panel on one side of |y|**-q G(x, y) dy."""
        k = self.kernel
        Y = self.lay.y_far
        X = self.X
        a = 2.0 * k.gamma + k.alpha + q
        if a <= 0.0:
            raise NonConvergent("far field does not decay (exponent %.3g)" % a)
        lead = Y ** (-a) / a
        corr = (1.0 + 2.0 * k.gamma) * Y ** (-(a + 1.0)) / (a + 1.0)
        return k.weight(X) * (lead + side * X * corr)

    def _tail_model(self, u: GridFunction):
        """(coefficient, exponent) pairs: u(y) = coef * |y|**-q beyond x_M on each side."""
        interp = u.interp
        q = interp.decay - interp.prefactor
        xm = interp.xp[-1]
        scale = xm ** interp.decay
        return (u.values[-1] * scale, u.values[0] * scale, q)


def _segment_sum(values: np.ndarray, owner: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n,) + values.shape[1:])
    np.add.at(out, owner, values)
    return out


def _as2d(a):
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


class Evaluator:
    """Cached evaluation of one or more grid functions on a kernel rule."""

    def __init__(self, rule: KernelRule):
        self.rule = rule

    def values(self, u: GridFunction):
        r = self.rule
        ux = u(r.X)
        uy = u(r.lay.y)
        up = u(r.P)
        d1 = u.derivative(r.X, 1)
        d2 = u.derivative(r.X, 2)
        return ux, uy, up, d1, d2

    def apply(self, u: GridFunction) -> np.ndarray:
        """``L u`` at the rule's points."""
        r = self.rule
        ux, uy, up, d1, d2 = self.values(u)
        out = r.C.sum(axis=1) * ux - r.C @ uy
        out += _segment_sum(r.cP * (ux[r.owner] - up), r.owner, r.X.size)
        out += r.band_d1 * d1 + r.band_d2 * d2
        cp, cn, q = r._tail_model(u)
        t0 = r._tail(0.0, 1.0) + r._tail(0.0, -1.0)
        out += ux * t0 - cp * r._tail(q, 1.0) - cn * r._tail(q, -1.0)
        return out

    def bilinear(self, u: GridFunction, v: GridFunction) -> np.ndarray:
        """``int (u(x)-u(y)) (v(x)-v(y)) G(x, y) dy`` at the rule's points."""
        r = self.rule
        ux, uy, up, ud1, _ = self.values(u)
        vx, vy, vp, vd1, _ = self.values(v)
        C = r.C
        out = (C.sum(axis=1) * ux * vx - ux * (C @ vy) - vx * (C @ uy) + C @ (uy * vy))
        out += _segment_sum(r.cP * (ux[r.owner] - up) * (vx[r.owner] - vp), r.owner, r.X.size)
        out += r.band_bil * ud1 * vd1
        up_, un_, qu = r._tail_model(u)
        vp_, vn_, qv = r._tail_model(v)
        t0 = r._tail(0.0, 1.0) + r._tail(0.0, -1.0)
        out += ux * vx * t0
        out -= ux * (vp_ * r._tail(qv, 1.0) + vn_ * r._tail(qv, -1.0))
        out -= vx * (up_ * r._tail(qu, 1.0) + un_ * r._tail(qu, -1.0))
        out += up_ * vp_ * r._tail(qu + qv, 1.0) + un_ * vn_ * r._tail(qu + qv, -1.0)
        return out

    def matrix(self, u: GridFunction) -> np.ndarray:
        """Matrix of ``values -> L(interpolant)`` at the rule's points."""
        r = self.rule
        bx = u.basis(r.X)
        by = u.basis(r.lay.y)
        out = r.C.sum(axis=1)[:, None] * bx - r.C @ by
        bp = u.basis(r.P)
        out += _segment_sum(r.cP[:, None] * (bx[r.owner] - bp), r.owner, r.X.size)
        out += r.band_d1[:, None] * u.basis(r.X, 1) + r.band_d2[:, None] * u.basis(r.X, 2)
        interp = u.interp
        q = interp.decay - interp.prefactor
        scale = interp.xp[-1] ** interp.decay
        t0 = r._tail(0.0, 1.0) + r._tail(0.0, -1.0)
        out += t0[:, None] * bx
        out[:, -1] -= scale * r._tail(q, 1.0)
        out[:, 0] -= scale * r._tail(q, -1.0)
        return out


# ---------------------------------------------------------------------------
# block drivers
# ---------------------------------------------------------------------------

def _blocks(n: int, per_row: int, budget: int = 3_000_000):
    size = max(1, min(n, budget // max(per_row, 1)))
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


def _frame(u: GridFunction, X, relative: bool):
    X = np.atleast_1d(np.asarray(X, dtype=float))
    return X if relative else X - u.center


def apply_at(u: GridFunction, kernel: Kernel, X, cfg: QuadratureConfig, lay: Optional[Layout] = None,
             relative: bool = False) -> np.ndarray:
    """``L u`` at ``X``; with ``relative=True`` the points are offsets from ``u.center``.

    Offsets keep full precision near the center, where ``X - center`` would not.
    """
    X = _frame(u, X, relative)
    lay = lay or layout_for(u, kernel, cfg)
    out = np.empty(X.size)
    shifted = _shift(u)
    for sl in _blocks(X.size, lay.y.size):
        out[sl] = Evaluator(KernelRule(shifted, kernel, X[sl], cfg, lay)).apply(shifted)
    return out


def bilinear_at(u: GridFunction, v: GridFunction, kernel: Kernel, X, cfg: QuadratureConfig,
                lay: Optional[Layout] = None, relative: bool = False) -> np.ndarray:
    if u.center != v.center:
        raise DomainError("bilinear forms need profiles with a common center")
    X = _frame(u, X, relative)
    lay = lay or layout_for(u, kernel, cfg)
    out = np.empty(X.size)
    su, sv = _shift(u), _shift(v)
    for sl in _blocks(X.size, lay.y.size):
        out[sl] = Evaluator(KernelRule(su, kernel, X[sl], cfg, lay)).bilinear(su, sv)
    return out


def matrix_at(u: GridFunction, kernel: Kernel, X, cfg: QuadratureConfig, lay: Optional[Layout] = None,
              relative: bool = False) -> np.ndarray:
    X = _frame(u, X, relative)
    lay = lay or layout_for(u, kernel, cfg)
    out = np.empty((X.size, u.nodes.size))
    su = _shift(u)
    for sl in _blocks(X.size, lay.y.size + 50 * u.nodes.size, budget=2_000_000):
        out[sl] = Evaluator(KernelRule(su, kernel, X[sl], cfg, lay)).matrix(su)
    return out


def _shift(u: GridFunction) -> GridFunction:
    if u.center == 0.0:
        return u
    factors = getattr(u, "factors", None)
    if factors is not None:
        return dataclasses.replace(u, center=0.0, factors=tuple(_shift(f) for f in factors))
    return dataclasses.replace(u, center=0.0)


# ---------------------------------------------------------------------------
# outer integrals
# ---------------------------------------------------------------------------

def outer_points(lay: Layout) -> Tuple[np.ndarray, np.ndarray]:
    m = lay.outer_mask
    return lay.y[m], lay.wy[m]


def outer_integral(lay: Layout, values: np.ndarray) -> Tuple[float, float]:
    """Integrate values given at ``outer_points``; returns (value, closure estimate).

    The integral is closed at both ends by geometric extrapolation of the
    contributions of the last two decade panels, i.e. by the algebraic tail
    these contributions reveal.
    """
    m = lay.outer_mask
    w = lay.wy[m]
    cells = lay.cell_of[m]
    contrib = values * w
    total = float(np.sum(contrib))
    per_cell = np.zeros(lay.ncell)
    np.add.at(per_cell, cells, contrib)
    closure = 0.0
    n = lay.ncell // 2
    # positive side: cells n .. 2n-1, innermost first; only outer cells are used
    for side_cells in (np.arange(n, 2 * n), np.arange(n - 1, -1, -1)):
        outer_ids = side_cells[lay.outer_cells[side_cells]]
        inner = per_cell[outer_ids[:2]]
        tail = per_cell[outer_ids[-2:]]
        for a, b in ((inner[1], inner[0]), (tail[0], tail[1])):
            if b == 0.0:
                continue
            ratio = b / a if a != 0.0 else math.inf
            if not (0.0 <= ratio < 1.0):
                if abs(b) < 1e-14 * max(abs(total), 1e-300):
                    continue
                raise NonConvergent("outer integrand does not decay (decade ratio %.3g)" % ratio)
            closure += b * ratio / (1.0 - ratio)
    return total + closure, abs(closure)
