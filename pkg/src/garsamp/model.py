"""Observation models: marginal potentials, branch-partitioned nonlinearities,
system potentials and simple estimates.

A model describes ``n`` scalar observations ``y_i = g_i(x) + noise_i`` where
each noise density is ``k_i exp(-Vbar_i(t))`` with ``Vbar_i`` non-negative and
minimised only at zero.  The system potential is the negative log-likelihood
``c_n + sum_i Vbar_i(y_i - g_i(x))``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateIntervalError,
    DomainError,
    ModelError,
    NumericError,
)

log = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]

ROOT_TOL = 1e-12
ROOT_MAXITER = 200
DEFAULT_HORIZON = 1e3
_EXPAND_LIMIT = 1e300


class Unbounded(enum.Enum):
    """Extended-real tag for simple estimates at minus/plus infinity."""

    NEG = -1
    POS = 1

    def __repr__(self):
        return "-inf" if self is Unbounded.NEG else "+inf"


def is_unbounded(v) -> bool:
    return isinstance(v, Unbounded)


def clip_extended(v, horizon: float = DEFAULT_HORIZON) -> float:
    """Map an extended real to a float, replacing sentinels by +-horizon."""
    if isinstance(v, Unbounded):
        log.info("clipping unbounded estimate %r to %g", v, v.value * horizon)
        return v.value * horizon
    return float(v)


# --------------------------------------------------------------------------
# marginal potentials


@dataclass(frozen=True, eq=False)
class MarginalPotential:
    """Noise potential ``Vbar(t) = -log p(t) - log k``.

    ``eval`` and ``deriv`` are vectorised.  Values outside the noise support
    are ``+inf``.
    """

    eval: ArrayFn
    deriv: ArrayFn
    convex: bool
    log_norm: float = 0.0
    name: str = "custom"
    support: tuple = (-math.inf, math.inf)  # open interval of t where the value is finite

    def __call__(self, t):
        return self.eval(t)

    def deriv_side(self, t, direction):
        """One-sided derivative in direction ``direction`` (+1 or -1)."""
        t = np.asarray(t, dtype=float)
        eps = 1e-12 * np.maximum(1.0, np.abs(t))
        return self.deriv(t + np.sign(direction) * eps)

    def check(self, lo=-20.0, hi=20.0, n=1000, tol=1e-9):
        """Grid check of non-negativity, sign of the derivative and convexity.

        Returns a list of human-readable failures (empty when all pass).
        """
        grid = np.linspace(lo, hi, n)
        grid = grid[grid != 0.0]
        problems = []
        with np.errstate(all="ignore"):
            vals = np.asarray(self.eval(grid), dtype=float)
            d = np.asarray(self.deriv(grid), dtype=float)
        fin = np.isfinite(vals)
        if np.any(vals[fin] < -tol):
            problems.append(f"{self.name}: negative values")
        if not np.all(np.sign(grid[fin]) * d[fin] > 0):
            problems.append(f"{self.name}: derivative sign does not match sign(t)")
        v0 = float(self.eval(np.array([0.0]))[0])
        if np.any(vals[fin] < v0 - tol):
            problems.append(f"{self.name}: minimum not at t=0")
        if self.convex:
            u = np.linspace(lo, hi, n)
            with np.errstate(all="ignore"):
                vu = np.asarray(self.eval(u), dtype=float)
            fin = np.isfinite(vu)
            with np.errstate(invalid="ignore"):
                second = vu[:-2] - 2 * vu[1:-1] + vu[2:]
            ok = fin[:-2] & fin[1:-1] & fin[2:]
            scale = tol * np.maximum(1.0, np.abs(vu[1:-1][ok]))
            if np.any(second[ok] < -scale):
                problems.append(f"{self.name}: flagged convex but second difference negative")
        return problems


def quadratic(weight: float = 1.0) -> MarginalPotential:
    """``weight * t**2`` (Gaussian noise with variance ``1 / (2 weight)``)."""
    w = float(weight)
    if w <= 0:
        raise ModelError("quadratic weight must be positive")
    return MarginalPotential(
        eval=lambda t: w * np.square(np.asarray(t, dtype=float)),
        deriv=lambda t: 2.0 * w * np.asarray(t, dtype=float),
        convex=True,
        log_norm=-0.5 * math.log(w / math.pi),
        name=f"quadratic({w:g})",
    )


def gaussian(variance: float) -> MarginalPotential:
    return quadratic(1.0 / (2.0 * float(variance)))


def lp(p: float, weight: float = 1.0) -> MarginalPotential:
    """``weight * |t|**p``; convex for ``p >= 1``."""
    p = float(p)
    w = float(weight)
    if p <= 0 or w <= 0:
        raise ModelError("lp potential needs p > 0 and weight > 0")

    def ev(t):
        return w * np.abs(np.asarray(t, dtype=float)) ** p

    def dv(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = w * p * np.sign(t) * np.abs(t) ** (p - 1.0)
        return np.where(t == 0.0, 0.0, out)

    return MarginalPotential(ev, dv, convex=p >= 1.0, name=f"lp({p:g},{w:g})")


def cosh_potential(weight: float = 1.0) -> MarginalPotential:
    """``weight * cosh(t)`` (minimum value ``weight`` at zero)."""
    w = float(weight)
    return MarginalPotential(
        eval=lambda t: w * np.cosh(np.asarray(t, dtype=float)),
        deriv=lambda t: w * np.sinh(np.asarray(t, dtype=float)),
        convex=True,
        name=f"cosh({w:g})",
    )


def gamma_shifted(shape: float, rate: float) -> MarginalPotential:
    """Gamma noise recentred at its mode.

    With mode ``m = (shape - 1) / rate`` this is
    ``-(shape - 1) log(t + m) + rate (t + m)``, finite for ``t > -m``.  For
    ``shape=2, rate=1`` it reads ``-log(t + 1) + t + 1``.
    """
    k = float(shape)
    lam = float(rate)
    if k <= 1 or lam <= 0:
        raise ModelError("shifted gamma potential needs shape > 1 and rate > 0")
    m = (k - 1.0) / lam
    floor = (k - 1.0) * (1.0 - math.log(m))
    offset = min(floor, 0.0)

    def ev(t):
        t = np.asarray(t, dtype=float)
        s = t + m
        out = np.full(t.shape, np.inf)
        ok = s > 0
        out[ok] = -(k - 1.0) * np.log(s[ok]) + lam * s[ok] - offset
        return out

    def dv(t):
        t = np.asarray(t, dtype=float)
        s = t + m
        out = np.full(t.shape, -np.inf)
        ok = s > 0
        out[ok] = -(k - 1.0) / s[ok] + lam
        return out

    log_norm = k * math.log(lam) - math.lgamma(k)
    return MarginalPotential(ev, dv, convex=True, log_norm=-log_norm, name=f"gamma({k:g},{lam:g})",
                             support=(-m, math.inf))


# --------------------------------------------------------------------------
# nonlinearities


def _eval_scalar(f, x):
    with np.errstate(all="ignore"):
        return float(np.asarray(f(np.array([x], dtype=float)))[0])


@dataclass(frozen=True, eq=False)
class NonlinearBranch:
    """Restriction of a nonlinearity to an interval where it is invertible and
    either convex or concave.  ``curvature_sign`` 0 marks a linear branch."""

    lo: float
    hi: float
    f: ArrayFn
    d1: ArrayFn
    d2: ArrayFn
    monotone_sign: int
    curvature_sign: int
    inv: Optional[Callable[[float], float]] = None

    @property
    def case(self) -> int:
        """1 when ``g' g'' >= 0`` (ties go here), else 2."""
        return 1 if self.monotone_sign * self.curvature_sign >= 0 else 2

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi

    def value(self, x: float) -> float:
        return _eval_scalar(self.f, x)

    def slope(self, x: float) -> float:
        return _eval_scalar(self.d1, x)

    def limit(self, side: int) -> float:
        """Value of the branch at its lower (side=-1) or upper (+1) end."""
        end = self.lo if side < 0 else self.hi
        v = _eval_scalar(self.f, end)
        if math.isfinite(v):
            return v
        for mag in (1e16, 1e8, 1e4):
            v = _eval_scalar(self.f, side * mag)
            if math.isfinite(v):
                return v
        raise NumericError("branch has no finite limit at its unbounded end", bracket=(self.lo, self.hi))

    def verify(self, n: int = 1000, horizon: float = 50.0, tol: float = 1e-9) -> list:
        lo = max(self.lo, -horizon)
        hi = min(self.hi, horizon)
        if not hi > lo:
            return []
        width = hi - lo
        grid = np.linspace(lo + 1e-6 * width, hi - 1e-6 * width, n)
        with np.errstate(all="ignore"):
            d1 = np.asarray(self.d1(grid), dtype=float)
            d2 = np.asarray(self.d2(grid), dtype=float)
        problems = []
        fin = np.isfinite(d1)
        if not np.all(self.monotone_sign * d1[fin] > -tol) or not np.any(self.monotone_sign * d1[fin] > 0):
            problems.append(f"branch [{self.lo}, {self.hi}]: first derivative does not have sign {self.monotone_sign:+d}")
        fin = np.isfinite(d2)
        if self.curvature_sign == 0:
            if np.any(np.abs(d2[fin]) > tol):
                problems.append(f"branch [{self.lo}, {self.hi}]: flagged linear but second derivative nonzero")
        else:
            scale = tol * np.maximum(1.0, np.abs(d1[fin]))
            if np.any(self.curvature_sign * d2[fin] < -scale):
                problems.append(
                    f"branch [{self.lo}, {self.hi}]: second derivative does not have sign {self.curvature_sign:+d}"
                )
        return problems

    def invert(self, y: float, lo: Optional[float] = None, hi: Optional[float] = None):
        """Simple estimate of ``y`` on ``[lo, hi]`` (defaults to the branch).

        Returns ``(estimate, is_root)``.  When ``y`` lies outside the range
        the estimate is the closure arg-extremum, an :class:`Unbounded` tag
        when that end is infinite.
        """
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        if self.inv is not None:
            x = self.inv(y)
            if x is not None and math.isfinite(x) and lo <= x <= hi:
                return float(x), True
        return invert_monotone(self.f, self.d1, self.monotone_sign, lo, hi, y)


def _expand(h, start, direction, want_nonneg):
    """Walk from ``start`` in ``direction`` until ``h`` crosses zero."""
    step = 1.0
    prev = start
    while step < _EXPAND_LIMIT:
        x = start + direction * step
        hx = h(x)
        if math.isnan(hx):
            raise NumericError("nonlinearity returned NaN while bracketing a root", bracket=(prev, x))
        if (hx >= 0) == want_nonneg:
            return x, prev
        prev = x
        step *= 2.0
    return None, prev


def invert_monotone(f, df, sign, lo, hi, y, tol=ROOT_TOL, maxiter=ROOT_MAXITER):
    """Safeguarded Newton/bisection inverse of a monotone function."""

    def h(x):
        return sign * (_eval_scalar(f, x) - y)

    lo_inf = math.isinf(lo)
    hi_inf = math.isinf(hi)
    if not lo_inf and not hi_inf:
        a, b = lo, hi
        ha, hb = h(a), h(b)
        if ha > 0:
            return lo, False
        if hb < 0:
            return hi, False
    elif lo_inf and hi_inf:
        h0 = h(0.0)
        if h0 == 0:
            return 0.0, True
        if h0 < 0:
            b, a = _expand(h, 0.0, +1, True)
            if b is None:
                return Unbounded.POS, False
        else:
            a, b = _expand(h, 0.0, -1, False)
            if a is None:
                return Unbounded.NEG, False
    elif lo_inf:
        if h(hi) < 0:
            return hi, False
        a, b = _expand(h, hi, -1, False)
        if a is None:
            return Unbounded.NEG, False
    else:
        if h(lo) > 0:
            return lo, False
        b, a = _expand(h, lo, +1, True)
        if b is None:
            return Unbounded.POS, False
    if a > b:
        a, b = b, a
    ha, hb = h(a), h(b)
    if ha == 0:
        return a, True
    if hb == 0:
        return b, True
    x = 0.5 * (a + b)
    for _ in range(maxiter):
        hx = h(x)
        if hx == 0:
            return x, True
        if hx < 0:
            a = x
        else:
            b = x
        if b - a <= tol * (1.0 + abs(x)):
            return 0.5 * (a + b), True
        d = sign * _eval_scalar(df, x)
        xn = x - hx / d if d and math.isfinite(d) else None
        if xn is None or not (a < xn < b) or not math.isfinite(xn):
            xn = 0.5 * (a + b)
        elif abs(xn - x) <= tol * (1.0 + abs(x)):
            return xn, True
        x = xn
    raise NumericError(f"root finding for y={y} did not converge", bracket=(a, b))


@dataclass(frozen=True)
class Shape:
    """Construction class of a nonlinearity for adaptive envelopes."""

    monotonic: bool
    convex: bool
    case: Optional[str] = None  # "a" or "b" for monotonic shapes
    linear: bool = False

    def __str__(self):
        if self.linear:
            return "monotonic linear (case a)"
        kind = "convex" if self.convex else "concave"
        if self.monotonic:
            return f"monotonic {kind}, case ({self.case})"
        return f"non-monotonic {kind}"


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    branches: tuple
    name: str = ""

    def __post_init__(self):
        if not self.branches:
            raise ModelError("a nonlinearity needs at least one branch")
        for left, right in zip(self.branches[:-1], self.branches[1:]):
            if left.hi != right.lo:
                raise ModelError(f"branch domains leave a gap or overlap at {left.hi} / {right.lo}")
        for br in self.branches:
            if not br.hi > br.lo:
                raise ModelError("branch domains must have positive length")
            if br.monotone_sign not in (-1, 1) or br.curvature_sign not in (-1, 0, 1):
                raise ModelError("branch signs must be +-1 (curvature may be 0 for linear)")

    @classmethod
    def from_functions(cls, f, d1, d2, breaks=(), monotone=(1,), curvature=(1,),
                       support=(-math.inf, math.inf), name="", inverses=None):
        """Split ``f`` at ``breaks``; ``inverses`` optionally gives a closed-form
        inverse per branch (returning ``None`` when ``y`` is out of range)."""
        edges = [support[0], *breaks, support[1]]
        if len(monotone) != len(edges) - 1 or len(curvature) != len(edges) - 1:
            raise ModelError("one monotone/curvature flag is needed per branch")
        branches = tuple(
            NonlinearBranch(edges[k], edges[k + 1], f, d1, d2, int(monotone[k]), int(curvature[k]),
                            inverses[k] if inverses else None)
            for k in range(len(edges) - 1)
        )
        return cls(branches, name)

    @property
    def f(self):
        return self.branches[0].f

    @property
    def d1(self):
        return self.branches[0].d1

    @property
    def d2(self):
        return self.branches[0].d2

    @property
    def support(self):
        return self.branches[0].lo, self.branches[-1].hi

    @property
    def breakpoints(self):
        return tuple(b.lo for b in self.branches[1:])

    def __call__(self, x):
        return self.f(x)

    def branch_at(self, x: float) -> NonlinearBranch:
        for br in self.branches:
            if x <= br.hi:
                return br
        return self.branches[-1]

    def value(self, x: float) -> float:
        return _eval_scalar(self.f, x)

    def slope(self, x: float) -> float:
        return _eval_scalar(self.d1, x)

    def verify(self, n=1000, horizon=50.0, tol=1e-9) -> list:
        problems = []
        for br in self.branches:
            problems.extend(br.verify(n, horizon, tol))
        return [f"{self.name or 'g'}: {p}" for p in problems]

    def roots(self, y: float) -> list:
        """All exact solutions of ``g(x) = y`` (at most one per branch), sorted."""
        out = []
        for br in self.branches:
            est, is_root = br.invert(y)
            if is_root and (not out or abs(est - out[-1]) > 1e-9 * (1 + abs(est))):
                out.append(float(est))
        return out


def identity() -> Nonlinearity:
    return Nonlinearity.from_functions(
        lambda x: np.asarray(x, dtype=float),
        lambda x: np.ones_like(np.asarray(x, dtype=float)),
        lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        monotone=(1,), curvature=(0,), name="x", inverses=(lambda y: y,),
    )


def linear(slope: float, intercept: float = 0.0) -> Nonlinearity:
    a, b = float(slope), float(intercept)
    if a == 0:
        raise ModelError("a constant nonlinearity is not invertible")
    return Nonlinearity.from_functions(
        lambda x: a * np.asarray(x, dtype=float) + b,
        lambda x: np.full(np.shape(x), a),
        lambda x: np.zeros(np.shape(x)),
        monotone=(int(np.sign(a)),), curvature=(0,), name=f"{a:g}*x+{b:g}",
        inverses=(lambda y: (y - b) / a,),
    )


def exponential(rate: float = 1.0, scale: float = 1.0) -> Nonlinearity:
    """``scale * exp(rate * x)``."""
    r, c = float(rate), float(scale)
    if r == 0 or c == 0:
        raise ModelError("exponential needs nonzero rate and scale")
    return Nonlinearity.from_functions(
        lambda x: c * np.exp(r * np.asarray(x, dtype=float)),
        lambda x: c * r * np.exp(r * np.asarray(x, dtype=float)),
        lambda x: c * r * r * np.exp(r * np.asarray(x, dtype=float)),
        monotone=(int(np.sign(c * r)),), curvature=(int(np.sign(c)),),
        name=f"{c:g}*exp({r:g}x)",
        inverses=(lambda y: math.log(y / c) / r if y / c > 0 else None,),
    )


def square(center: float = 0.0, scale: float = 1.0) -> Nonlinearity:
    """``scale * (x - center)**2``; negative ``scale`` gives a concave bump."""
    c, s = float(center), float(scale)
    if s == 0:
        raise ModelError("square needs nonzero scale")
    sg = int(np.sign(s))
    return Nonlinearity.from_functions(
        lambda x: s * np.square(np.asarray(x, dtype=float) - c),
        lambda x: 2.0 * s * (np.asarray(x, dtype=float) - c),
        lambda x: np.full(np.shape(x), 2.0 * s),
        breaks=(c,), monotone=(-sg, sg), curvature=(sg, sg),
        name=f"{s:g}*(x-{c:g})^2",
        inverses=(lambda y: c - math.sqrt(y / s) if y / s >= 0 else None,
                  lambda y: c + math.sqrt(y / s) if y / s >= 0 else None),
    )


def exp_abs() -> Nonlinearity:
    """``exp(|x|)``; derivative at the kink is taken as zero."""
    return Nonlinearity.from_functions(
        lambda x: np.exp(np.abs(np.asarray(x, dtype=float))),
        lambda x: np.sign(x) * np.exp(np.abs(np.asarray(x, dtype=float))),
        lambda x: np.exp(np.abs(np.asarray(x, dtype=float))),
        breaks=(0.0,), monotone=(-1, 1), curvature=(1, 1), name="exp(|x|)",
        inverses=(lambda y: -math.log(y) if y >= 1 else None,
                  lambda y: math.log(y) if y >= 1 else None),
    )


def classify_shape(nl: Nonlinearity) -> Shape:
    """Global shape class used by the adaptive minorant construction."""
    mono = [b.monotone_sign for b in nl.branches]
    curv = {b.curvature_sign for b in nl.branches}
    changes = sum(1 for a, b in zip(mono[:-1], mono[1:]) if a != b)
    if curv == {0}:
        if changes:
            raise ModelError(f"{nl.name}: linear branches with changing monotonicity")
        return Shape(monotonic=True, convex=True, case="a", linear=True)
    nonzero = curv - {0}
    if len(nonzero) != 1:
        raise ModelError(f"{nl.name}: mixes convex and concave branches")
    convex = nonzero == {1}
    if changes == 0:
        prod = mono[0] * (1 if convex else -1)
        return Shape(monotonic=True, convex=convex, case="a" if prod >= 0 else "b")
    if changes > 1:
        raise ModelError(f"{nl.name}: first derivative changes sign {changes} times")
    if convex and not (mono[0] == -1 and mono[-1] == 1):
        raise ModelError(f"{nl.name}: convex but first derivative goes from + to -")
    if not convex and not (mono[0] == 1 and mono[-1] == -1):
        raise ModelError(f"{nl.name}: concave but first derivative goes from - to +")
    return Shape(monotonic=False, convex=convex)


# --------------------------------------------------------------------------
# observation model


@dataclass(frozen=True, eq=False)
class Prior:
    """Prior ``p(x) ~ exp(-Vbar(mu - x))`` entering the extended model."""

    potential: MarginalPotential
    mu: float = 0.0


@dataclass(frozen=True, eq=False)
class ObservationModel:
    y: tuple
    nonlinearities: tuple
    potentials: tuple
    prior: Optional[Prior] = None
    c_n: float = 0.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        object.__setattr__(self, "nonlinearities", tuple(self.nonlinearities))
        object.__setattr__(self, "potentials", tuple(self.potentials))
        if not (len(self.y) == len(self.nonlinearities) == len(self.potentials)):
            raise ModelError("y, nonlinearities and potentials must have equal length")
        if self.nonlinearities:
            sup = self.nonlinearities[0].support
            if any(g.support != sup for g in self.nonlinearities):
                raise ModelError("all nonlinearities must share one support")

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def support(self):
        if self.nonlinearities:
            return self.nonlinearities[0].support
        return (-math.inf, math.inf)

    def without_prior(self) -> "ObservationModel":
        return replace(self, prior=None) if self.prior is not None else self

    def extended_terms(self):
        """``(y_i, g_i, Vbar_i)`` triples, the prior appended as ``(mu, x, Vbar)``."""
        terms = list(zip(self.y, self.nonlinearities, self.potentials))
        if self.prior is not None:
            terms.append((float(self.prior.mu), identity(), self.prior.potential))
        return terms

    @property
    def extended_y(self):
        return tuple(t[0] for t in self.extended_terms())

    @property
    def extended_nonlinearities(self):
        return tuple(t[1] for t in self.extended_terms())

    def regions(self):
        """Common refinement of all branch partitions, as ``(lo, hi)`` pairs."""
        lo, hi = self.support
        cuts = sorted({b for g in self.nonlinearities for b in g.breakpoints})
        edges = [lo, *cuts, hi]
        return [(edges[k], edges[k + 1]) for k in range(len(edges) - 1)]

    def verify(self, n=1000, horizon=50.0) -> list:
        problems = []
        for g in self.nonlinearities:
            problems.extend(g.verify(n, horizon))
        for v in self.potentials:
            problems.extend(v.check())
        if self.prior is not None:
            problems.extend(self.prior.potential.check())
        return problems


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _check_support(model, arr):
    lo, hi = model.support
    if lo == -math.inf and hi == math.inf:
        return
    if np.any(arr < lo) or np.any(arr > hi):
        raise DomainError(f"x outside the support [{lo}, {hi}]")


def potential_terms(model: ObservationModel, x, extended: bool = True):
    """Per-term potentials ``Vbar_i(y_i - g_i(x))`` stacked along axis 0."""
    arr, _ = _as_array(x)
    terms = model.extended_terms() if extended else list(zip(model.y, model.nonlinearities, model.potentials))
    with np.errstate(over="ignore", invalid="ignore"):
        return [v(y - g(arr)) for (y, g, v) in terms]


def system_potential(model: ObservationModel, x, extended: bool = True):
    """``c_n + sum_i Vbar_i(y_i - g_i(x))``, plus the prior term when present."""
    arr, scalar = _as_array(x)
    _check_support(model, arr)
    total = np.full(arr.shape, float(model.c_n))
    for term in potential_terms(model, arr, extended):
        total = total + term
    return float(total) if scalar else total


def potential_or_inf(model: ObservationModel, x, extended: bool = True):
    """Like :func:`system_potential` but ``+inf`` outside the support."""
    arr, scalar = _as_array(x)
    lo, hi = model.support
    if lo == -math.inf and hi == math.inf:
        out = np.asarray(system_potential(model, arr, extended), dtype=float)
    else:
        inside = (arr >= lo) & (arr <= hi)
        out = np.full(arr.shape, np.inf)
        if np.any(inside):
            out[inside] = system_potential(model, arr[inside], extended)
    out = np.where(np.isnan(out), np.inf, out)
    return float(out) if scalar else out


def likelihood(model: ObservationModel, x):
    """``exp(-V)`` for the observation terms only; the prior is never included."""
    v = system_potential(model.without_prior(), x)
    return np.exp(-v) if isinstance(v, np.ndarray) else math.exp(-v)


@dataclass(frozen=True)
class SimpleEstimateSet:
    region: int
    bounds: tuple
    estimates: tuple
    is_root: tuple = field(default=())

    @property
    def finite(self):
        return [e for e in self.estimates if not is_unbounded(e)]


def simple_estimates(model: ObservationModel, j: int) -> SimpleEstimateSet:
    """One estimate per observation inside region ``j`` of :meth:`ObservationModel.regions`."""
    regions = model.regions()
    if not 0 <= j < len(regions):
        raise ModelError(f"region index {j} out of range (model has {len(regions)})")
    lo, hi = regions[j]
    mid = _region_probe(lo, hi)
    ests, roots = [], []
    for y, g in zip(model.y, model.nonlinearities):
        br = g.branch_at(mid)
        e, r = br.invert(y, lo, hi)
        ests.append(e)
        roots.append(r)
    return SimpleEstimateSet(j, (lo, hi), tuple(ests), tuple(roots))


def _region_probe(lo, hi):
    if math.isinf(lo) and math.isinf(hi):
        return 0.0
    if math.isinf(lo):
        return hi - 1.0
    if math.isinf(hi):
        return lo + 1.0
    return 0.5 * (lo + hi)


def ml_search_interval(est: SimpleEstimateSet):
    """``[min, max]`` of the estimates; ends may be :class:`Unbounded`."""
    if not est.finite:
        raise DegenerateIntervalError(f"region {est.region}: every simple estimate is unbounded")
    fin = est.finite
    lo = Unbounded.NEG if any(e is Unbounded.NEG for e in est.estimates) else min(fin)
    hi = Unbounded.POS if any(e is Unbounded.POS for e in est.estimates) else max(fin)
    return lo, hi


def clipped_interval(est: SimpleEstimateSet, horizon: float = DEFAULT_HORIZON):
    lo, hi = ml_search_interval(est)
    return clip_extended(lo, horizon), clip_extended(hi, horizon)


def check_model(model: ObservationModel, n=1000, horizon=50.0):
    """Raise :class:`ModelError` when declared branch or potential flags fail."""
    problems = model.verify(n, horizon)
    if problems:
        raise ModelError("; ".join(problems))
    return model


def grid_argmin(model: ObservationModel, lo: float, hi: float, n: int = 10_000, extended: bool = False):
    xs = np.linspace(lo, hi, n)
    vs = potential_or_inf(model, xs, extended) - model.c_n
    k = int(np.argmin(vs))
    return float(xs[k]), float(vs[k])

