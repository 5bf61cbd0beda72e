"""Piecewise-linear functions, adaptive minorants of nonlinearities, lower
hulls of modified potentials and piecewise-exponential densities."""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .bounds import LinearFn
from .errors import ContractError, ImproperEnvelope, NumericError
from .model import MarginalPotential, Nonlinearity, ObservationModel, classify_shape

log = logging.getLogger(__name__)

DEDUP_TOL = 1e-9
COLLINEAR_TOL = 1e-12
FD_STEP = 1e-6
EPSILON_SLOPE = 1e-3


# --------------------------------------------------------------------------
# piecewise-linear functions


@dataclass(frozen=True, eq=False)
class PiecewiseLinearFn:
    """``slopes[k] * x + intercepts[k]`` on ``[breaks[k-1], breaks[k]]``.

    ``breaks`` holds the interior breakpoints, so there is one more segment
    than breaks.  ``domain`` bounds the whole function; outside it the value
    is ``+inf``.
    """

    breaks: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray
    domain: tuple = (-math.inf, math.inf)

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float).reshape(-1)
        a = np.asarray(self.slopes, dtype=float).reshape(-1)
        c = np.asarray(self.intercepts, dtype=float).reshape(-1)
        if len(a) != len(b) + 1 or len(c) != len(a):
            raise ContractError("need one more segment than breakpoints")
        if np.any(np.diff(b) <= 0):
            raise ContractError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "slopes", a)
        object.__setattr__(self, "intercepts", c)
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))
        object.__setattr__(self, "_fast", (b.tolist(), a.tolist(), c.tolist()))

    @classmethod
    def from_line(cls, line: LinearFn, domain=(-math.inf, math.inf)):
        return cls(np.empty(0), np.array([line.a]), np.array([line.b]), domain)

    @property
    def edges(self):
        """Segment end points including the domain ends."""
        return np.concatenate(([self.domain[0]], self.breaks, [self.domain[1]]))

    @property
    def lines(self):
        return [LinearFn(float(a), float(b)) for a, b in zip(self.slopes, self.intercepts)]

    def segment(self, x, side: int = 1):
        """Segment index at ``x``; at a breakpoint ``side`` picks right (+1) or left (-1)."""
        return np.searchsorted(self.breaks, x, side="right" if side > 0 else "left")

    def value(self, x: float) -> float:
        """Scalar evaluation without numpy overhead."""
        b, a, c = self._fast
        if not self.domain[0] <= x <= self.domain[1]:
            return math.inf
        k = bisect.bisect_right(b, x)
        return a[k] * x + c[k]

    def __call__(self, x):
        if isinstance(x, float):
            return self.value(x)
        arr = np.asarray(x, dtype=float)
        k = self.segment(arr)
        out = self.slopes[k] * arr + self.intercepts[k]
        lo, hi = self.domain
        out = np.where((arr < lo) | (arr > hi), np.inf, out)
        return float(out) if out.ndim == 0 else out

    def slope_at(self, x: float, side: int = 1, tol: float = DEDUP_TOL) -> float:
        """One-sided slope; ``x`` within ``tol`` of a breakpoint counts as on it."""
        b, a, _ = self._fast
        k = bisect.bisect_left(b, x)
        for j in (k - 1, k):
            if 0 <= j < len(b) and abs(b[j] - x) <= tol * (1.0 + abs(x)):
                return a[j + 1] if side > 0 else a[j]
        return a[bisect.bisect_right(b, x) if side > 0 else bisect.bisect_left(b, x)]

    def slopes_at(self, xs, side: int = 1, tol: float = DEDUP_TOL) -> np.ndarray:
        """Vectorised :meth:`slope_at`."""
        xs = np.asarray(xs, dtype=float)
        b = self.breaks
        if b.size == 0:
            return np.full(xs.shape, self.slopes[0])
        k = np.searchsorted(b, xs, side="right" if side > 0 else "left")
        near = np.clip(np.searchsorted(b, xs), 0, b.size - 1)
        prev = np.clip(near - 1, 0, b.size - 1)
        d_near = np.abs(b[near] - xs)
        d_prev = np.abs(b[prev] - xs)
        j = np.where(d_prev < d_near, prev, near)
        snap = np.minimum(d_near, d_prev) <= tol * (1.0 + np.abs(xs))
        k = np.where(snap, j + 1 if side > 0 else j, k)
        return self.slopes[k]

    def segments(self):
        """``(lo, hi, slope, intercept)`` for every segment."""
        e = self.edges
        return [(float(e[k]), float(e[k + 1]), float(self.slopes[k]), float(self.intercepts[k]))
                for k in range(len(self.slopes))]


def canonicalize(breaks, slopes, intercepts, domain=(-math.inf, math.inf)) -> PiecewiseLinearFn:
    """Drop breaks between collinear segments and breaks that coincide."""
    b, a, c = list(breaks), list(slopes), list(intercepts)
    out_b, out_a, out_c = [], [a[0]], [c[0]]
    for k, x in enumerate(b):
        na, nc = a[k + 1], c[k + 1]
        if math.isinf(nc) or math.isinf(out_c[-1]):
            same = nc == out_c[-1]
        else:
            same = abs(na - out_a[-1]) <= COLLINEAR_TOL * max(1.0, abs(na)) and \
                abs(nc - out_c[-1]) <= COLLINEAR_TOL * max(1.0, abs(nc))
        if same:
            continue
        if out_b and x - out_b[-1] <= DEDUP_TOL:
            out_a[-1], out_c[-1] = na, nc
            out_b[-1] = x
            continue
        out_b.append(x)
        out_a.append(na)
        out_c.append(nc)
    return PiecewiseLinearFn(np.array(out_b), np.array(out_a), np.array(out_c), domain)


def _upper_envelope(lines: Sequence[LinearFn]):
    """Pointwise max of lines over the real line (convex hull trick)."""
    best = {}
    for ln in lines:
        if ln.a not in best or ln.b > best[ln.a].b:
            best[ln.a] = ln
    ordered = [best[a] for a in sorted(best)]
    hull, xs = [], []
    for ln in ordered:
        while hull:
            top = hull[-1]
            x = (top.b - ln.b) / (ln.a - top.a)
            if xs and x <= xs[-1]:
                hull.pop()
                xs.pop()
                continue
            break
        if hull:
            top = hull[-1]
            xs.append((top.b - ln.b) / (ln.a - top.a))
        hull.append(ln)
    return xs, [h.a for h in hull], [h.b for h in hull]


def envelope_combine(lines: Sequence[LinearFn], mode: str = "max", clamp: Optional[float] = None,
                     domain=(-math.inf, math.inf)) -> PiecewiseLinearFn:
    """Upper (``max``) or lower (``min``) envelope of ``lines``.

    ``clamp`` adds the constant line at that level before combining.
    """
    lines = list(lines)
    if not lines:
        raise ContractError("envelope needs at least one line")
    if clamp is not None:
        lines.append(LinearFn(0.0, float(clamp)))
    if mode == "max":
        xs, a, b = _upper_envelope(lines)
    elif mode == "min":
        xs, a, b = _upper_envelope([LinearFn(-ln.a, -ln.b) for ln in lines])
        a = [-v for v in a]
        b = [-v for v in b]
    else:
        raise ValueError(f"mode must be 'max' or 'min', got {mode!r}")
    return canonicalize(xs, a, b, domain)


def intersection_abscissas(fns: Sequence[PiecewiseLinearFn], tol: float = DEDUP_TOL) -> list:
    """Sorted interior breakpoints of all functions, merged within ``tol``."""
    pts = sorted(float(x) for f in fns for x in f.breaks)
    out = []
    for x in pts:
        if not out or x - out[-1] > tol:
            out.append(x)
    return out


# --------------------------------------------------------------------------
# adaptive minorants of convex or concave nonlinearities


def _tangent(nl: Nonlinearity, s: float) -> LinearFn:
    return LinearFn.tangent(s, nl.value(s), nl.slope(s))


def _chord(nl: Nonlinearity, s0: float, s1: float) -> LinearFn:
    return LinearFn.through(s0, nl.value(s0), s1, nl.value(s1))


def _contains(support, x, tol=1e-9):
    return any(abs(s - x) <= tol * (1.0 + abs(x)) for s in support)


def _all_tangents(nl, y_i, support, convex):
    lines = [_tangent(nl, s) for s in support]
    return envelope_combine(lines, "max" if convex else "min", clamp=y_i, domain=nl.support)


def gars_minorant_nonmonotonic(nl: Nonlinearity, y_i: float, support: Sequence[float],
                               roots: Optional[Sequence[float]] = None) -> PiecewiseLinearFn:
    """Minorant of a convex (or concave) nonlinearity with one turning point.

    Chords join consecutive support points inside ``J = [x1, x2]`` (the two
    roots of ``g(x) = y_i``), tangents are taken at support points outside
    ``J``.  Without two distinct roots every line is a tangent and the
    envelope is clamped at ``y_i``.
    """
    shape = classify_shape(nl)
    if shape.monotonic:
        raise ContractError(f"{nl.name}: expected a non-monotonic nonlinearity")
    s = sorted(float(v) for v in support)
    if not s:
        raise ContractError("support set is empty")
    roots = nl.roots(y_i) if roots is None else list(roots)
    if len(roots) < 2:
        return _all_tangents(nl, y_i, s, shape.convex)
    x1, x2 = roots[0], roots[-1]
    if not (_contains(s, x1) and _contains(s, x2)):
        raise ContractError(f"support set must contain the simple estimates {x1} and {x2}")
    tol = 1e-9
    lines = []
    for j, sj in enumerate(s):
        inside = x1 - tol * (1 + abs(x1)) <= sj <= x2 + tol * (1 + abs(x2))
        if not inside:
            lines.append(_tangent(nl, sj))
        elif j + 1 < len(s) and s[j + 1] <= x2 + tol * (1 + abs(x2)):
            lines.append(_chord(nl, sj, s[j + 1]))
    if not lines:
        return _all_tangents(nl, y_i, s, shape.convex)
    return envelope_combine(lines, "max" if shape.convex else "min", domain=nl.support)


def gars_minorant_monotonic(nl: Nonlinearity, y_i: float, support: Sequence[float],
                            roots: Optional[Sequence[float]] = None) -> PiecewiseLinearFn:
    """Minorant of a monotone convex (or concave) nonlinearity.

    Case (a), ``g' g'' >= 0``: ``J = (-inf, x_i]``, chords inside ``J``,
    tangents beyond it and a constant ``g(s_1)`` for the left tail.  Case
    (b) mirrors this with ``J = [x_i, inf)`` and constant ``g(s_k)``.  The
    envelope is a max for convex ``g`` and a min for concave ``g``.
    """
    shape = classify_shape(nl)
    if not shape.monotonic:
        raise ContractError(f"{nl.name}: expected a monotonic nonlinearity")
    s = sorted(float(v) for v in support)
    if not s:
        raise ContractError("support set is empty")
    if shape.linear:
        return PiecewiseLinearFn.from_line(_tangent(nl, s[0]), domain=nl.support)
    roots = nl.roots(y_i) if roots is None else list(roots)
    if not roots:
        return _all_tangents(nl, y_i, s, shape.convex)
    x = roots[0]
    if not _contains(s, x):
        raise ContractError(f"support set must contain the simple estimate {x}")
    tol = 1e-9 * (1.0 + abs(x))
    lines = []
    if shape.case == "a":
        lines.append(LinearFn(0.0, nl.value(s[0])))
        for j in range(1, len(s)):
            if s[j] <= x + tol:
                lines.append(_chord(nl, s[j - 1], s[j]))
            else:
                lines.append(_tangent(nl, s[j]))
    else:
        for j in range(len(s) - 1):
            if s[j] >= x - tol:
                lines.append(_chord(nl, s[j], s[j + 1]))
            else:
                lines.append(_tangent(nl, s[j]))
        lines.append(LinearFn(0.0, nl.value(s[-1])))
    return envelope_combine(lines, "max" if shape.convex else "min", domain=nl.support)


def gars_minorant(nl: Nonlinearity, y_i: float, support: Sequence[float],
                  roots: Optional[Sequence[float]] = None) -> PiecewiseLinearFn:
    if classify_shape(nl).monotonic:
        return gars_minorant_monotonic(nl, y_i, support, roots)
    return gars_minorant_nonmonotonic(nl, y_i, support, roots)


def interval_J(nl: Nonlinearity, y_i: float, roots: Optional[Sequence[float]] = None):
    """The interval ``J_i`` used to place support points, or ``None``.

    Returned ends may be infinite for monotone nonlinearities.
    """
    shape = classify_shape(nl)
    if shape.linear:
        return None
    roots = nl.roots(y_i) if roots is None else list(roots)
    if not roots:
        return None
    if not shape.monotonic:
        if len(roots) < 2:
            return None
        return roots[0], roots[-1]
    x = roots[0]
    return (-math.inf, x) if shape.case == "a" else (x, math.inf)


def check_minorant_pw(r, nl, y_i, lo=-50.0, hi=50.0, n=10_000, tol=1e-9) -> bool:
    """Grid check of ``|y - r| <= |y - g|`` and ``(y - r)(y - g) >= 0``."""
    from .bounds import check_minorant

    return check_minorant(r, nl.f, y_i, (lo, hi), n, tol)


# --------------------------------------------------------------------------
# modified potentials and lower hulls


class ModifiedPotential:
    """``sum_i Vbar_i(y_i - r_i(x))`` for piecewise-linear ``r_i``.

    Both values and one-sided slopes are exact: the slope from the right is
    ``sum_i -a_i^+ Vbar_i'(res_i)`` with the derivative of ``Vbar_i`` taken on
    the side the residual moves to.
    """

    def __init__(self, y: Sequence[float], rs: Sequence[PiecewiseLinearFn], potentials: Sequence[MarginalPotential]):
        self.y = [float(v) for v in y]
        self.rs = list(rs)
        self.potentials = list(potentials)

    def __call__(self, x):
        if isinstance(x, float):
            total = 0.0
            with np.errstate(over="ignore", invalid="ignore"):
                for y, r, v in zip(self.y, self.rs, self.potentials):
                    total += float(v(np.array([y - r.value(x)]))[0])
            return total
        arr = np.asarray(x, dtype=float)
        total = np.zeros(arr.shape)
        with np.errstate(over="ignore", invalid="ignore"):
            for y, r, v in zip(self.y, self.rs, self.potentials):
                total = total + v(y - r(arr))
        return float(total) if total.ndim == 0 else total

    def slope(self, x: float, side: int = 1) -> float:
        total = 0.0
        for y, r, v in zip(self.y, self.rs, self.potentials):
            a = r.slope_at(x, side)
            if a == 0.0:
                continue
            res = np.array([y - r.value(x)])
            direction = -side * np.sign(a)
            total += -a * float(np.asarray(v.deriv_side(res, direction))[0])
        return total

    def slopes(self, xs, side: int = 1) -> np.ndarray:
        """Vectorised :meth:`slope` over many points."""
        xs = np.asarray(xs, dtype=float)
        total = np.zeros(xs.shape)
        for y, r, v in zip(self.y, self.rs, self.potentials):
            a = r.slopes_at(xs, side)
            if not np.any(a):
                continue
            res = y - r(xs)
            d = np.asarray(v.deriv_side(res, -side * np.sign(a)), dtype=float)
            total = total + np.where(a == 0.0, 0.0, -a * d)
        return total

    @property
    def knots(self):
        return intersection_abscissas(self.rs)

    def walls(self) -> list:
        """Points where a residual ``y_i - r_i(x)`` reaches the end of its
        noise support; between walls and knots the potential is either
        finite and convex or identically ``+inf``."""
        out = []
        for y, r, v in zip(self.y, self.rs, self.potentials):
            ends = [e for e in getattr(v, "support", ()) if math.isfinite(e)]
            if not ends:
                continue
            for lo, hi, a, c in r.segments():
                if a == 0.0:
                    continue
                for e in ends:
                    x = (y - e - c) / a
                    if lo <= x <= hi:
                        out.append(x)
        return sorted(out)


def fd_slope(f: Callable[[float], float], x: float, side: int = 0, h: float = FD_STEP) -> float:
    """Central (``side=0``) or one-sided finite difference."""
    if side == 0:
        return (f(x + h) - f(x - h)) / (2 * h)
    # second-order one-sided stencil
    s = 1.0 if side > 0 else -1.0
    return s * (-3.0 * f(x) + 4.0 * f(x + s * h) - f(x + 2 * s * h)) / (2 * h)


def _slope_fn(potential):
    if hasattr(potential, "slope"):
        return potential.slope
    return lambda x, side: fd_slope(potential, x, side)


def _tail_knot(V, slope, start, direction, limit=1e6):
    """Walk outward from ``start`` until the tail tangent points the right way."""
    step = 1.0
    while step <= limit:
        x = start + direction * step
        v = float(V(x))
        if not math.isfinite(v):
            return None
        d = slope(x, direction)
        if direction * d > 0:
            return x
        step *= 2.0
    return None


def _dedup(xs):
    xs = sorted(float(x) for x in xs)
    return [x for k, x in enumerate(xs) if k == 0 or x - xs[k - 1] > DEDUP_TOL]


def _two_tangents(x0, x1, left, right):
    """Pieces of ``max(left, right)`` on ``[x0, x1]``; ``left`` is the tangent
    at ``x0`` and ``right`` the one at ``x1``, each ``(slope, intercept)``."""
    (a_r, b_r), (a_l, b_l) = left, right
    if a_l != a_r:
        z = min(max((b_r - b_l) / (a_l - a_r), x0), x1)
    else:
        z = x1 if b_r >= b_l else x0
    return [(x0, z, a_r, b_r), (z, x1, a_l, b_l)]


def build_hull(potential, knots: Sequence[float], extend_tails: bool = True,
               epsilon_slope: Optional[float] = None) -> PiecewiseLinearFn:
    """Piecewise-linear lower hull of a potential that is convex between knots.

    On ``[u_q, u_{q+1}]`` the hull is the max of the tangents at both ends
    (right slope at ``u_q``, left slope at ``u_{q+1}``); each tail uses the
    tangent at the outermost knot.  When a tail tangent is flat or points
    the wrong way the tail piece is still convex, so with ``extend_tails``
    extra knots are searched for outward.  ``epsilon_slope`` replaces a
    remaining bad tail slope by that small slope (the result is then no
    longer guaranteed to lie below the potential).

    A potential exposing ``walls()`` may be ``+inf`` between walls (outside
    a noise support); the hull is ``+inf`` there too, and a piece ending at
    a wall uses the tangent at its other end only.
    """
    u = _dedup(knots)
    if not u:
        raise ContractError("hull needs at least one knot")
    walls = list(potential.walls()) if hasattr(potential, "walls") else []
    pts = _dedup(u + walls)
    slope = _slope_fn(potential)
    with np.errstate(all="ignore"):
        if hasattr(potential, "slopes"):
            pa = np.array(pts)
            vals = np.asarray(potential(pa), dtype=float).tolist()
            sl_left = potential.slopes(pa, -1).tolist()
            sl_right = potential.slopes(pa, 1).tolist()
            mids = [pts[0] - 1.0] + [0.5 * (pts[k] + pts[k + 1]) for k in range(len(pts) - 1)] + [pts[-1] + 1.0]
            finite = np.isfinite(np.asarray(potential(np.array(mids)), dtype=float)).tolist()
        else:
            vals = [float(potential(x)) for x in pts]
            sl_left = [slope(x, -1) for x in pts]
            sl_right = [slope(x, 1) for x in pts]
            mids = [pts[0] - 1.0] + [0.5 * (pts[k] + pts[k + 1]) for k in range(len(pts) - 1)] + [pts[-1] + 1.0]
            finite = [math.isfinite(float(potential(x))) for x in mids]
    if not walls and not all(math.isfinite(v) for v in vals):
        raise NumericError("potential is not finite at a hull knot", bracket=(pts[0], pts[-1]))
    if not any(finite):
        raise NumericError("potential is +inf everywhere", bracket=(pts[0], pts[-1]))

    def usable(v, d):
        return math.isfinite(v) and math.isfinite(d)

    def tangent_at(x, side):
        v, d = float(potential(x)), slope(x, side)
        return d, v - d * x

    def bounded(x0, x1, v0, d0, v1, d1):
        ok0, ok1 = usable(v0, d0), usable(v1, d1)
        if ok0 and ok1:
            return _two_tangents(x0, x1, (d0, v0 - d0 * x0), (d1, v1 - d1 * x1))
        if ok0:
            return [(x0, x1, d0, v0 - d0 * x0)]
        if ok1:
            return [(x0, x1, d1, v1 - d1 * x1)]
        return [(x0, x1, *tangent_at(0.5 * (x0 + x1), 1))]

    pieces = []
    # left tail
    if not finite[0]:
        pieces.append((-math.inf, pts[0], 0.0, math.inf))
    else:
        x0, v0, d0 = pts[0], vals[0], sl_left[0]
        if extend_tails and not (usable(v0, d0) and d0 < 0):
            x = _tail_knot(potential, slope, x0, -1)
            if x is not None:
                vx = float(potential(x))
                pieces_inner = bounded(x, x0, vx, slope(x, 1), v0, d0)
                x0, v0, d0 = x, vx, slope(x, -1)
            else:
                pieces_inner = []
        else:
            pieces_inner = []
        a0, b0 = (d0, v0 - d0 * x0) if usable(v0, d0) else tangent_at(x0 - 1.0, -1)
        if epsilon_slope is not None and a0 >= 0:
            log.warning("left tail slope %g replaced by %g; samples are approximate", a0, -epsilon_slope)
            b0 = (a0 * x0 + b0) + epsilon_slope * x0
            a0 = -epsilon_slope
        pieces.append((-math.inf, x0, a0, b0))
        pieces.extend(pieces_inner)
    # interior
    for q in range(len(pts) - 1):
        x0, x1 = pts[q], pts[q + 1]
        if not finite[q + 1]:
            pieces.append((x0, x1, 0.0, math.inf))
        else:
            pieces.extend(bounded(x0, x1, vals[q], sl_right[q], vals[q + 1], sl_left[q + 1]))
    # right tail
    if not finite[-1]:
        pieces.append((pts[-1], math.inf, 0.0, math.inf))
    else:
        xn, vn, dn = pts[-1], vals[-1], sl_right[-1]
        if extend_tails and not (usable(vn, dn) and dn > 0):
            x = _tail_knot(potential, slope, xn, 1)
            if x is not None:
                vx = float(potential(x))
                pieces.extend(bounded(xn, x, vn, dn, vx, slope(x, -1)))
                xn, vn, dn = x, vx, slope(x, 1)
        an, bn = (dn, vn - dn * xn) if usable(vn, dn) else tangent_at(xn + 1.0, 1)
        if epsilon_slope is not None and an <= 0:
            log.warning("right tail slope %g replaced by %g; samples are approximate", an, epsilon_slope)
            bn = (an * xn + bn) - epsilon_slope * xn
            an = epsilon_slope
        pieces.append((xn, math.inf, an, bn))

    pieces = [p for p in pieces if p[1] > p[0]]
    return canonicalize([p[1] for p in pieces[:-1]], [p[2] for p in pieces], [p[3] for p in pieces])


# --------------------------------------------------------------------------
# piecewise-exponential densities


def _log_segment_mass(lo, hi, a, b):
    """``log int_lo^hi exp(-(a x + b)) dx``; ``+inf`` when it diverges."""
    if hi <= lo or b == math.inf:
        return -math.inf
    length = hi - lo
    if a == 0.0:
        if math.isinf(length):
            return math.inf
        return math.log(length) - b
    if a > 0:
        if math.isinf(lo):
            return math.inf
        w_lo = a * lo + b
        if math.isinf(hi):
            return -w_lo - math.log(a)
        return -w_lo + math.log(-math.expm1(-a * length)) - math.log(a)
    if math.isinf(hi):
        return math.inf
    w_hi = a * hi + b
    if math.isinf(lo):
        return -w_hi - math.log(-a)
    return -w_hi + math.log(-math.expm1(a * length)) - math.log(-a)


@dataclass(frozen=True, eq=False)
class PiecewiseExpDensity:
    """Density proportional to ``exp(-W(x))`` for piecewise-linear ``W``."""

    W: PiecewiseLinearFn
    segments: tuple
    log_masses: np.ndarray
    log_norm: float
    cum: np.ndarray
    approximate: bool = False

    @property
    def masses(self):
        return np.exp(self.log_masses - self.log_norm)

    @property
    def total_mass(self) -> float:
        return math.exp(self.log_norm)

    def pdf(self, x):
        return np.exp(-np.asarray(self.W(x)) - self.log_norm)

    def log_pdf(self, x):
        return -np.asarray(self.W(x)) - self.log_norm

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        flat = x.reshape(-1)
        res = out.reshape(-1)
        for idx, xv in enumerate(flat):
            total = 0.0
            for k, (lo, hi, a, b) in enumerate(self.segments):
                if xv >= hi:
                    total += math.exp(self.log_masses[k] - self.log_norm)
                elif xv > lo:
                    total += math.exp(_log_segment_mass(lo, xv, a, b) - self.log_norm)
                    break
                else:
                    break
            res[idx] = min(total, 1.0)
        return float(out) if out.ndim == 0 else out


def normalize_piecewise_exp(W: PiecewiseLinearFn, epsilon_slope: Optional[float] = None) -> PiecewiseExpDensity:
    """Closed-form normalisation of ``exp(-W)``; all sums in log space.

    A divergent tail raises :class:`ImproperEnvelope` unless
    ``epsilon_slope`` is given, in which case the offending tail gets that
    slope and the density is flagged approximate.
    """
    segs = W.segments()
    approximate = False
    if epsilon_slope is not None:
        lo, hi, a, b = segs[0]
        if math.isinf(lo) and a >= 0:
            a2 = -epsilon_slope
            segs[0] = (lo, hi, a2, (a - a2) * hi + b)
            approximate = True
        lo, hi, a, b = segs[-1]
        if math.isinf(hi) and a <= 0:
            a2 = epsilon_slope
            segs[-1] = (lo, hi, a2, (a - a2) * lo + b)
            approximate = True
        if approximate:
            log.warning("flat envelope tail replaced by slope %g; samples are approximate", epsilon_slope)
    logm = np.array([_log_segment_mass(*s) for s in segs])
    if np.any(np.isposinf(logm)):
        k = int(np.argmax(np.isposinf(logm)))
        tail = "left" if k == 0 else ("right" if k == len(segs) - 1 else f"segment {k}")
        raise ImproperEnvelope(f"exp(-W) is not integrable on the {tail} tail", tail=tail)
    if np.any(np.isnan(logm)):
        raise NumericError("NaN segment mass")
    fin = logm[np.isfinite(logm)]
    if fin.size == 0:
        raise NumericError("envelope has zero mass")
    top = float(np.max(fin))
    log_norm = top + math.log(float(np.sum(np.exp(fin - top))))
    cum = np.cumsum(np.exp(logm - log_norm))
    cum[-1] = 1.0
    if approximate:
        W = canonicalize([s[0] for s in segs[1:]], [s[2] for s in segs], [s[3] for s in segs], W.domain)
    return PiecewiseExpDensity(W, tuple(segs), logm, log_norm, cum, approximate)


def sample_segment(lo, hi, a, u):
    """Inverse CDF of ``exp(-a x)`` restricted to ``[lo, hi]``."""
    if a == 0.0:
        return lo + u * (hi - lo)
    if a > 0:
        return lo - math.log1p(u * math.expm1(-a * (hi - lo))) / a
    c = -a
    return hi + math.log1p(u * math.expm1(-c * (hi - lo))) / c


def sample_piecewise_exp(d: PiecewiseExpDensity, rng, size: Optional[int] = None):
    """Exact draws: pick a segment by mass, then invert its CDF."""
    gen = getattr(rng, "generator", rng)
    n = 1 if size is None else int(size)
    u1 = gen.random(n)
    u2 = gen.random(n)
    ks = np.minimum(np.searchsorted(d.cum, u1, side="right"), len(d.segments) - 1)
    out = np.empty(n)
    for idx in range(n):
        k = int(ks[idx])
        while d.log_masses[k] == -math.inf:
            k = k + 1 if k + 1 < len(d.segments) else k - 1
        lo, hi, a, _ = d.segments[k]
        x = sample_segment(lo, hi, a, float(u2[idx]))
        out[idx] = min(max(x, lo), hi)
    return float(out[0]) if size is None else out


# --------------------------------------------------------------------------
# GARS envelope for an observation model


def extended_parts(model: ObservationModel):
    terms = model.extended_terms()
    return [t[0] for t in terms], [t[1] for t in terms], [t[2] for t in terms]


def model_minorants(model: ObservationModel, support: Sequence[float]):
    ys, gs, _ = extended_parts(model)
    return [gars_minorant(g, y, support) for y, g in zip(ys, gs)]


def hull_knots(rs, support, rule: str = "intersections"):
    """Knots for the hull: the breakpoints of all minorants, optionally with
    the support points added; the support points when there are none."""
    e = intersection_abscissas(rs)
    if rule == "union" or not e:
        e = intersection_abscissas([PiecewiseLinearFn(np.array(sorted(set(support))),
                                                      np.zeros(len(set(support)) + 1),
                                                      np.zeros(len(set(support)) + 1))] + list(rs))
    elif rule != "intersections":
        raise ValueError(f"unknown knot rule {rule!r}")
    return e


def gars_envelope(model: ObservationModel, support: Sequence[float], knot_rule: str = "intersections",
                  epsilon_slope: Optional[float] = None, roots: Optional[Sequence] = None):
    """Minorants, modified potential, hull and density for ``support``.

    ``roots`` may carry the precomputed solutions of ``g_i(x) = y_i``.
    """
    ys, gs, vs = extended_parts(model)
    roots = roots if roots is not None else [None] * len(ys)
    rs = [gars_minorant(g, y, support, rt) for y, g, rt in zip(ys, gs, roots)]
    V = ModifiedPotential(ys, rs, vs)
    knots = hull_knots(rs, support, knot_rule)
    W = build_hull(V, knots, epsilon_slope=epsilon_slope)
    density = normalize_piecewise_exp(W, epsilon_slope=epsilon_slope)
    return rs, V, knots, W, density
