"""Lower bounds on the system potential (upper bounds on the likelihood).

Every method replaces the nonlinearities of a region by straight lines whose
residuals are never larger, and never of opposite sign, than the true ones.
The resulting modified potential lies below the true potential on the
simple-estimate interval, so its minimum is a valid bound.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractError, DegenerateIntervalError, NumericError, ParameterError
from .model import (
    DEFAULT_HORIZON,
    NonlinearBranch,
    ObservationModel,
    Unbounded,
    clip_extended,
    is_unbounded,
    ml_search_interval,
    potential_or_inf,
    simple_estimates,
)

log = logging.getLogger(__name__)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_SCAN = 257  # grid used to bracket the finite part of an objective


@dataclass(frozen=True)
class LinearFn:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise NumericError(f"non-finite line coefficients ({self.a}, {self.b})")

    def __call__(self, x):
        return self.a * np.asarray(x, dtype=float) + self.b if not np.isscalar(x) else self.a * x + self.b

    @classmethod
    def through(cls, x0, y0, x1, y1):
        a = (y1 - y0) / (x1 - x0)
        return cls(a, y0 - a * x0)

    @classmethod
    def tangent(cls, x0, y0, slope):
        return cls(slope, y0 - slope * x0)


@dataclass(frozen=True)
class RegionBound:
    region: int
    gamma: float
    minimizer: float
    interval: tuple
    lines: tuple = ()


@dataclass(frozen=True)
class BoundReport:
    method: str
    gamma: float
    regions: tuple
    iterations: int = 0
    support: tuple = ()
    flags: tuple = ()

    @property
    def L(self) -> float:
        return math.exp(-self.gamma)

    @property
    def minimizer(self) -> float:
        best = min(self.regions, key=lambda r: r.gamma)
        return best.minimizer

    def check_sound(self, model: ObservationModel, lo: float, hi: float, n: int = 100_000, tol: float = 1e-6) -> bool:
        """True when ``gamma`` does not exceed the grid minimum of the potential."""
        xs = np.linspace(lo, hi, n)
        vmin = float(np.min(potential_or_inf(model.without_prior(), xs) - model.c_n))
        return self.gamma <= vmin + tol


# --------------------------------------------------------------------------
# minorant lines


def build_minorant_line(branch: NonlinearBranch, y_i: float, interval, est) -> LinearFn:
    """Line replacing ``branch`` on ``interval`` for observation ``y_i``.

    Case 1 (``g' g'' >= 0``) joins the left end of the interval to the simple
    estimate, case 2 joins the right end.  When the estimate sits on that end
    the line is the tangent there; an unbounded estimate yields the
    horizontal asymptote.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if is_unbounded(est):
        if hi <= lo:
            return LinearFn(0.0, branch.value(lo))
        return LinearFn(0.0, branch.limit(est.value))
    est = float(est)
    anchor = lo if branch.case == 1 else hi
    if abs(est - anchor) <= 1e-12 * (1.0 + abs(est)):
        return LinearFn.tangent(est, branch.value(est), branch.slope(est))
    return LinearFn.through(anchor, branch.value(anchor), est, branch.value(est))


def check_minorant(line, g, y_i: float, interval, n: int = 1000, tol: float = 1e-9) -> bool:
    """Grid check of ``|y - r| <= |y - g|`` and ``(y - r)(y - g) >= 0``.

    ``line`` and ``g`` are any vectorised callables (a branch works too).
    """
    g = g.f if isinstance(g, NonlinearBranch) else g
    lo, hi = float(interval[0]), float(interval[1])
    xs = np.linspace(lo, hi, n)
    with np.errstate(over="ignore", invalid="ignore"):
        rr = y_i - np.asarray(line(xs), dtype=float)
        rg = y_i - np.asarray(g(xs), dtype=float)
    scale = tol * np.maximum(1.0, np.abs(rg))
    ok1 = np.abs(rr) <= np.abs(rg) + scale
    ok2 = rr * rg >= -scale * np.maximum(1.0, np.abs(rr))
    return bool(np.all(ok1 & ok2))


# --------------------------------------------------------------------------
# one-dimensional minimisation


def minimize_convex_1d(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10):
    """Golden-section search for a unimodal ``f`` on ``[lo, hi]``.

    Returns ``(x, f(x))``; the interval ends are also compared so a minimum on
    the boundary is returned exactly.
    """
    a, b = float(lo), float(hi)
    if b < a:
        a, b = b, a

    def fv(x):
        v = float(f(x))
        if math.isnan(v) or v == -math.inf:
            raise NumericError(f"objective is {v} at x={x}", bracket=(a, b))
        return v

    if b - a <= tol:
        x = 0.5 * (a + b)
        return x, fv(x)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fv(c), fv(d)
    anchor = None
    if not (math.isfinite(fc) and math.isfinite(fd)):
        # +inf outside the noise support: the finite part of a convex function
        # is an interval, so bracket it on a grid before the search
        xs = np.linspace(a, b, _SCAN)
        vs = np.array([fv(x) for x in xs])
        fin = np.flatnonzero(np.isfinite(vs))
        if fin.size == 0:
            log.info("objective is +inf on a %d-point scan of [%g, %g]", _SCAN, a, b)
            return 0.5 * (a + b), math.inf
        a, b = float(xs[max(fin[0] - 1, 0)]), float(xs[min(fin[-1] + 1, _SCAN - 1)])
        anchor = float(xs[fin[np.argmin(vs[fin])]])
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        fc, fd = fv(c), fv(d)
    while b - a > tol:
        if math.isinf(fc) and math.isinf(fd) and anchor is not None:
            # both probes outside the support; keep the side holding a finite point
            if anchor < c:
                b = c
            elif anchor > d:
                a = d
            else:
                a, b = c, d
            c = b - _GOLDEN * (b - a)
            d = a + _GOLDEN * (b - a)
            fc, fd = fv(c), fv(d)
            continue
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fv(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fv(d)
    cands = [(fc, c), (fd, d), (fv(lo), float(lo)), (fv(hi), float(hi))]
    if anchor is not None:
        cands.append((fv(anchor), anchor))
    best_v, best_x = min(cands)
    return best_x, best_v


def minimize_1d(f, lo, hi, convex: bool, grid: int = 10_000, tol: float = 1e-10):
    """Golden-section when ``convex``; otherwise a dense grid then a local refine."""
    if convex:
        return minimize_convex_1d(f, lo, hi, tol)
    xs = np.linspace(lo, hi, grid)
    vs = np.array([f(x) for x in xs], dtype=float)
    vs = np.where(np.isnan(vs), np.inf, vs)
    k = int(np.argmin(vs))
    a = xs[max(k - 1, 0)]
    b = xs[min(k + 1, grid - 1)]
    x, v = minimize_convex_1d(f, a, b, tol)
    if v > vs[k]:
        return float(xs[k]), float(vs[k])
    return x, v


# --------------------------------------------------------------------------
# modified potentials


def modified_potential(model: ObservationModel, lines: Sequence[LinearFn], include_constant: bool = False):
    ys = np.asarray(model.y, dtype=float)
    pots = model.potentials
    c = model.c_n if include_constant else 0.0

    def V(x):
        total = c
        for y, r, v in zip(ys, lines, pots):
            total = total + v(np.atleast_1d(y - r(x)))[0]
        return float(total)

    return V


def modified_potential_slope(model: ObservationModel, lines: Sequence[LinearFn], x: float) -> float:
    total = 0.0
    for y, r, v in zip(model.y, lines, model.potentials):
        res = y - r(x)
        total += -r.a * float(v.deriv(np.array([res]))[0])
    return total


def _all_convex(model: ObservationModel) -> bool:
    return all(v.convex for v in model.potentials)


def _region_setup(model, j, horizon):
    est = simple_estimates(model, j)
    lo_e, hi_e = ml_search_interval(est)
    lo = clip_extended(lo_e, horizon)
    hi = clip_extended(hi_e, horizon)
    lo_b, hi_b = est.bounds
    lo, hi = max(lo, lo_b), min(hi, hi_b)
    probe = 0.5 * (lo + hi)
    branches = [g.branch_at(probe) for g in model.nonlinearities]
    return est, (lo, hi), branches


def _floor_bound(model, est, branches):
    """Sum of per-term minima; used when every estimate is unbounded."""
    total = 0.0
    for y, v, br, e in zip(model.y, model.potentials, branches, est.estimates):
        gv = br.limit(e.value) if is_unbounded(e) else br.value(e)
        total += float(v(np.array([y - gv]))[0])
    return total


def region_lines(model, branches, interval, estimates):
    return tuple(
        build_minorant_line(br, y, interval, e) for br, y, e in zip(branches, model.y, estimates)
    )


def bm1_region(model: ObservationModel, j: int, include_constant=False, horizon=DEFAULT_HORIZON) -> RegionBound:
    try:
        est, interval, branches = _region_setup(model, j, horizon)
    except DegenerateIntervalError:
        est = simple_estimates(model, j)
        probe = _probe(est.bounds)
        branches = [g.branch_at(probe) for g in model.nonlinearities]
        gamma = _floor_bound(model, est, branches) + (model.c_n if include_constant else 0.0)
        log.info("region %d: all estimates unbounded, using per-term floor %g", j, gamma)
        return RegionBound(j, gamma, math.nan, est.bounds, ())
    lines = region_lines(model, branches, interval, est.estimates)
    V = modified_potential(model, lines, include_constant)
    x, v = minimize_1d(V, interval[0], interval[1], convex=_all_convex(model))
    return RegionBound(j, v, x, interval, lines)


def _probe(bounds):
    lo, hi = bounds
    if math.isinf(lo) and math.isinf(hi):
        return 0.0
    if math.isinf(lo):
        return hi - 1.0
    if math.isinf(hi):
        return lo + 1.0
    return 0.5 * (lo + hi)


def bm1_bound(model: ObservationModel, include_constant: bool = False, horizon: float = DEFAULT_HORIZON) -> BoundReport:
    """Non-iterative bound: one set of lines per region, minimum over regions."""
    model = model.without_prior()
    regions = tuple(bm1_region(model, j, include_constant, horizon) for j in range(len(model.regions())))
    return BoundReport("bm1", min(r.gamma for r in regions), regions)


# --------------------------------------------------------------------------
# iterative refinement


def midpoint_rule(lo: float, hi: float, rng=None) -> float:
    return 0.5 * (lo + hi)


def _clip_estimate(e, lo, hi):
    if e is Unbounded.NEG:
        return lo
    if e is Unbounded.POS:
        return hi
    return min(max(float(e), lo), hi)


def _sub_bound(model, branches, estimates, lo, hi, include_constant, convex):
    clipped = [_clip_estimate(e, lo, hi) for e in estimates]
    lines = region_lines(model, branches, (lo, hi), clipped)
    V = modified_potential(model, lines, include_constant)
    x, v = minimize_1d(V, lo, hi, convex=convex)
    return v, x, lines


def bm2_region(model: ObservationModel, j: int, k_max: int, point_rule=midpoint_rule,
               include_constant=False, horizon=DEFAULT_HORIZON, history: Optional[list] = None) -> RegionBound:
    """Refine region ``j`` by ``k_max`` support-point insertions."""
    if k_max < 0:
        raise ParameterError("k_max must be non-negative")
    try:
        est, interval, branches = _region_setup(model, j, horizon)
    except DegenerateIntervalError:
        return bm1_region(model, j, include_constant, horizon)
    convex = _all_convex(model)
    support = [interval[0], interval[1]]
    if support[1] <= support[0]:
        rb = bm1_region(model, j, include_constant, horizon)
        if history is not None:
            history.append(rb.gamma)
        return RegionBound(j, rb.gamma, rb.minimizer, interval, rb.lines)
    cache = {}
    best = None
    for it in range(k_max + 1):
        results = []
        for v in range(len(support) - 1):
            key = (support[v], support[v + 1])
            if key not in cache:
                cache[key] = _sub_bound(model, branches, est.estimates, key[0], key[1], include_constant, convex)
            results.append(cache[key])
        vstar = min(range(len(results)), key=lambda k: results[k][0])
        gamma, xmin, lines = results[vstar]
        best = RegionBound(j, gamma, xmin, interval, lines)
        if history is not None:
            history.append(gamma)
        if it == k_max:
            break
        a, b = support[vstar], support[vstar + 1]
        s = float(point_rule(a, b))
        if not a < s < b:
            raise ContractError(f"point rule returned {s}, not interior to ({a}, {b})")
        support.insert(vstar + 1, s)
    return RegionBound(best.region, best.gamma, best.minimizer, tuple(support), best.lines)


def bm2_bound(model: ObservationModel, j: Optional[int] = None, k_max: int = 3, point_rule=midpoint_rule,
              include_constant: bool = False, horizon: float = DEFAULT_HORIZON) -> BoundReport:
    """Iteratively refined bound.  ``j=None`` refines every region."""
    model = model.without_prior()
    idx = range(len(model.regions())) if j is None else [j]
    regions = tuple(bm2_region(model, k, k_max, point_rule, include_constant, horizon) for k in idx)
    gamma = min(r.gamma for r in regions)
    support = tuple(s for r in regions for s in r.interval)
    return BoundReport("bm2", gamma, regions, iterations=k_max, support=support)


# --------------------------------------------------------------------------
# quadratic closed form and transforms


def quadratic_bound(lines: Sequence[LinearFn], y: Sequence[float]):
    """Minimum of ``sum_i (y_i - a_i x - b_i)**2`` over the real line.

    Returns ``(gamma2, x_tilde)``.
    """
    a = np.array([r.a for r in lines], dtype=float)
    w = np.asarray(y, dtype=float) - np.array([r.b for r in lines], dtype=float)
    aa = float(a @ a)
    if aa == 0.0:
        raise NumericError("all slopes are zero; the quadratic has no unique minimiser")
    x = float(a @ w) / aa
    gamma2 = float(np.sum((w - a * x) ** 2))
    return gamma2, x


def lp_transform_bound(gamma2: float, p: float, n: int) -> float:
    """Turn a quadratic-potential bound into one for ``sum |t_i|**p``."""
    if p <= 0:
        raise ParameterError("p must be positive")
    if gamma2 < 0:
        raise ParameterError("gamma2 must be non-negative")
    if p <= 2:
        return gamma2 ** (p / 2.0)
    return n ** (-(p - 2.0) / 2.0) * gamma2 ** (p / 2.0)


def generic_transform_bound(gamma2: float, R_inv: Callable[[float], float], check_upto: Optional[float] = None,
                            n_check: int = 200) -> float:
    """Apply a caller-supplied increasing ``R_inv`` after checking monotonicity."""
    top = check_upto if check_upto is not None else max(10.0, 2.0 * gamma2)
    grid = np.linspace(0.0, top, n_check)
    vals = np.array([float(R_inv(v)) for v in grid])
    if not np.all(np.diff(vals) >= -1e-12):
        raise ContractError("R_inv is not increasing on the check grid")
    return float(R_inv(gamma2))


def check_R(R: Callable[[float], float], potentials, lo=-5.0, hi=5.0, samples=2000, seed=0) -> bool:
    """Sample-based check of ``R(sum Vbar_i(t_i)) >= sum t_i**2``."""
    rng = np.random.default_rng(seed)
    t = rng.uniform(lo, hi, size=(samples, len(potentials)))
    vsum = sum(np.asarray(v(t[:, i])) for i, v in enumerate(potentials))
    lhs = np.array([R(v) for v in vsum])
    return bool(np.all(lhs >= np.sum(t ** 2, axis=1) - 1e-9))


def quadratic_region(model, j, horizon=DEFAULT_HORIZON) -> RegionBound:
    try:
        est, interval, branches = _region_setup(model, j, horizon)
    except DegenerateIntervalError:
        est = simple_estimates(model, j)
        branches = [g.branch_at(_probe(est.bounds)) for g in model.nonlinearities]
        floor = sum((y - (br.limit(e.value) if is_unbounded(e) else br.value(e))) ** 2
                    for y, br, e in zip(model.y, branches, est.estimates))
        return RegionBound(j, floor, math.nan, est.bounds, ())
    lines = region_lines(model, branches, interval, est.estimates)
    if all(r.a == 0 for r in lines):
        gamma2 = float(sum((y - r.b) ** 2 for y, r in zip(model.y, lines)))
        return RegionBound(j, gamma2, math.nan, interval, lines)
    gamma2, x = quadratic_bound(lines, model.y)
    return RegionBound(j, gamma2, x, interval, lines)


def quadratic_model_bound(model: ObservationModel, horizon: float = DEFAULT_HORIZON) -> BoundReport:
    """Closed-form bound of ``sum_i (y_i - g_i(x))**2`` with the first-method lines."""
    model = model.without_prior()
    regions = tuple(quadratic_region(model, j, horizon) for j in range(len(model.regions())))
    return BoundReport("quad", min(r.gamma for r in regions), regions)


def lp_model_bound(model: ObservationModel, p: float, weight: float = 1.0) -> BoundReport:
    """Bound for ``weight * sum |t_i|**p`` potentials via the quadratic form."""
    q = quadratic_model_bound(model)
    gamma = weight * lp_transform_bound(q.gamma, p, model.n)
    return BoundReport("lp", gamma, q.regions, flags=(f"gamma2={q.gamma!r}",))


def transform_model_bound(model: ObservationModel, R_inv) -> BoundReport:
    q = quadratic_model_bound(model)
    gamma = generic_transform_bound(q.gamma, R_inv)
    return BoundReport("transform", gamma, q.regions, flags=(f"gamma2={q.gamma!r}",))


# --------------------------------------------------------------------------
# tangents of a convex modified potential


def convex_tangent_region(model: ObservationModel, j: int, horizon: float = DEFAULT_HORIZON,
                          include_constant: bool = False):
    """Intersection of the tangents at both ends of the estimate interval.

    Returns ``(gamma, x, flagged)``; ``flagged`` marks the fallbacks used when
    both tangents slope the same way or an end lies outside a noise support.
    """
    if not _all_convex(model):
        raise ContractError("tangent bound needs convex marginal potentials")
    est, (lo, hi), branches = _region_setup(model, j, horizon)
    lines = region_lines(model, branches, (lo, hi), est.estimates)
    V = modified_potential(model, lines, include_constant)
    vlo, vhi = V(lo), V(hi)
    if hi <= lo:
        return vlo, lo, False
    dlo = modified_potential_slope(model, lines, lo)
    dhi = modified_potential_slope(model, lines, hi)
    if not all(math.isfinite(v) for v in (vlo, vhi, dlo, dhi)):
        # an end lies outside a noise support; no tangent there, minimise instead
        x, v = minimize_1d(V, lo, hi, convex=True)
        return v, x, True
    if dlo < 0 < dhi:
        x = (vhi - vlo + dlo * lo - dhi * hi) / (dlo - dhi)
        return vlo + dlo * (x - lo), x, False
    if vlo <= vhi:
        return vlo, lo, True
    return vhi, hi, True


def convex_tangent_bound(model: ObservationModel, j: int = 0, horizon: float = DEFAULT_HORIZON) -> float:
    return convex_tangent_region(model.without_prior(), j, horizon)[0]


def tangent_model_bound(model: ObservationModel, horizon: float = DEFAULT_HORIZON) -> BoundReport:
    model = model.without_prior()
    regions, flags = [], []
    for j in range(len(model.regions())):
        try:
            g, x, flagged = convex_tangent_region(model, j, horizon)
            if flagged:
                flags.append(f"region {j}: tangents unusable, fell back to direct minimisation")
            regions.append(RegionBound(j, g, x, (), ()))
        except DegenerateIntervalError:
            regions.append(bm1_region(model, j, False, horizon))
    return BoundReport("tangent", min(r.gamma for r in regions), tuple(regions), flags=tuple(flags))
