"""Rejection samplers: fixed bound, ARS, GARS and a two-coordinate Gibbs chain."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import envelope as env
from .bounds import quadratic_model_bound
from .errors import BoundViolation, ContractError, EnvelopeViolation
from .model import (
    ObservationModel,
    Prior,
    Unbounded,
    classify_shape,
    gaussian,
    potential_or_inf,
    quadratic,
    square,
)

log = logging.getLogger(__name__)

RATIO_TOL = 1e-9


class RandomSource:
    """Seeded uniform and Gaussian streams.  ``spawn(i)`` derives the stream
    of replication ``i`` as ``seed + i``."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self.generator = np.random.default_rng(self.seed)

    def uniform(self, size=None):
        return self.generator.random(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def random(self, size=None):
        return self.generator.random(size)

    def spawn(self, index: int) -> "RandomSource":
        return RandomSource(self.seed + int(index))


def as_source(rng) -> RandomSource:
    if isinstance(rng, RandomSource):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return RandomSource(0 if rng is None else int(rng))
    src = RandomSource.__new__(RandomSource)
    src.seed = None
    src.generator = rng
    return src


@dataclass
class SamplerTrace:
    samples: List[float] = field(default_factory=list)
    proposals: List[int] = field(default_factory=list)  # per accepted sample
    support_sizes: List[int] = field(default_factory=list)
    rebuilds: int = 0
    violations: List[tuple] = field(default_factory=list)
    envelope_rates: List[float] = field(default_factory=list)

    @property
    def accepted(self) -> int:
        return len(self.samples)

    @property
    def proposed(self) -> int:
        return int(sum(self.proposals))

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else math.nan

    def running_rates(self) -> np.ndarray:
        p = np.cumsum(self.proposals)
        return np.arange(1, len(p) + 1) / p if len(p) else np.empty(0)

    def extend(self, other: "SamplerTrace"):
        self.samples.extend(other.samples)
        self.proposals.extend(other.proposals)
        self.support_sizes.extend(other.support_sizes)
        self.rebuilds += other.rebuilds
        self.violations.extend(other.violations)
        self.envelope_rates.extend(other.envelope_rates)


def _observation_potential(model: ObservationModel, x):
    """Likelihood potential without the prior and without ``c_n``."""
    return potential_or_inf(model.without_prior(), x) - model.c_n


def _target_potential(model: ObservationModel, x):
    """Extended potential (prior included) without ``c_n``."""
    return potential_or_inf(model, x) - model.c_n


# --------------------------------------------------------------------------
# fixed bound


def prior_sampler(prior: Prior):
    """Draws from ``exp(-Vbar(mu - x))`` for quadratic priors."""
    v1, v2 = (float(v) for v in prior.potential(np.array([1.0, 2.0])))
    w = v1
    if not (w > 0 and abs(v2 - 4.0 * w) <= 1e-12 * v2):
        raise ContractError("prior sampling is only built in for quadratic (Gaussian) priors")
    sd = math.sqrt(1.0 / (2.0 * w))

    def draw(rng, size):
        return as_source(rng).normal(prior.mu, sd, size)

    return draw


def rejection_sample_fixed(model: ObservationModel, prior_draw: Callable, L: float, N: int, rng,
                           strict: bool = True, batch: int = 4096) -> SamplerTrace:
    """Standard rejection sampling with the prior as proposal.

    Accepts ``x'`` when ``l(x') / L > u'`` where ``l`` is the likelihood with
    ``c_n`` removed, so ``L = exp(-gamma)`` for a bound ``gamma`` from
    :mod:`garsamp.bounds`.
    """
    rng = as_source(rng)
    trace = SamplerTrace()
    if N <= 0:
        return trace
    if not L > 0:
        raise ContractError("L must be positive")
    log_L = math.log(L)
    obs = model.without_prior()
    pending = 0
    while trace.accepted < N:
        xs = np.asarray(prior_draw(rng, batch), dtype=float)
        us = rng.uniform(batch)
        with np.errstate(over="ignore", invalid="ignore"):
            log_ratio = -(potential_or_inf(obs, xs) - model.c_n) - log_L
        bad = log_ratio > math.log1p(RATIO_TOL)
        if np.any(bad):
            k = int(np.argmax(bad))
            r = float(np.exp(log_ratio[k]))
            if strict:
                raise BoundViolation(f"likelihood ratio {r:.6g} > 1 at x={xs[k]:.6g}; gamma is not a lower bound",
                                     x=float(xs[k]), ratio=r)
            trace.violations.extend((float(xs[j]), float(np.exp(log_ratio[j]))) for j in np.flatnonzero(bad))
        accept = us < np.exp(log_ratio)
        for x, ok in zip(xs, accept):
            pending += 1
            if ok:
                trace.samples.append(float(x))
                trace.proposals.append(pending)
                pending = 0
                if trace.accepted == N:
                    break
    return trace


# --------------------------------------------------------------------------
# classic ARS


def ars_run(potential: Callable, S0: Sequence[float], N: int, rng, slope: Optional[Callable] = None,
            strict: bool = True, max_proposals: int = 10_000_000) -> SamplerTrace:
    """Adaptive rejection sampling from ``exp(-potential)`` (convex potential).

    ``slope(x, side)`` gives one-sided derivatives; finite differences are
    used when it is omitted.
    """
    rng = as_source(rng)
    trace = SamplerTrace()
    if N <= 0:
        return trace
    support = sorted(float(s) for s in S0)
    if len(support) < 2:
        raise ContractError("ARS needs at least two initial support points")

    class _Pot:
        def __call__(self, x):
            return potential(x)

        def slope(self, x, side):
            if slope is not None:
                return slope(x, side)
            return env.fd_slope(potential, x, side)

    pot = _Pot()
    if not (pot.slope(support[0], 1) < 0 < pot.slope(support[-1], -1)):
        raise ContractError("initial support points must have tangent slopes of opposite sign")

    def rebuild():
        W = env.build_hull(pot, support, extend_tails=False)
        return W, env.normalize_piecewise_exp(W)

    W, dens = rebuild()
    pending = 0
    total = 0
    while trace.accepted < N:
        if total >= max_proposals:
            raise ContractError("ARS exceeded the proposal budget")
        x = env.sample_piecewise_exp(dens, rng)
        u = rng.uniform()
        pending += 1
        total += 1
        log_ratio = float(W(x)) - float(potential(x))
        if log_ratio > math.log1p(RATIO_TOL):
            if strict:
                raise EnvelopeViolation(f"target exceeds envelope at x={x:.6g}", x=x, ratio=math.exp(log_ratio))
            trace.violations.append((x, math.exp(log_ratio)))
        if math.log(u) <= log_ratio if u > 0 else True:
            trace.samples.append(x)
            trace.proposals.append(pending)
            trace.support_sizes.append(len(support))
            pending = 0
        else:
            _insert(support, x)
            W, dens = rebuild()
            trace.rebuilds += 1
    return trace


def _insert(support: list, x: float) -> bool:
    k = int(np.searchsorted(support, x))
    for j in (k - 1, k):
        if 0 <= j < len(support) and abs(support[j] - x) <= 1e-12 * (1.0 + abs(x)):
            return False
    support.insert(k, float(x))
    return True


# --------------------------------------------------------------------------
# GARS


@dataclass
class GarsState:
    model: ObservationModel
    support: list
    minorants: list
    modified: env.ModifiedPotential
    knots: list
    hull: env.PiecewiseLinearFn
    density: env.PiecewiseExpDensity
    knot_rule: str = "intersections"
    epsilon_slope: Optional[float] = None

    roots: Optional[list] = None

    @property
    def k(self) -> int:
        return len(self.support)

    def rebuild(self):
        rs, V, knots, W, dens = env.gars_envelope(self.model, self.support, self.knot_rule, self.epsilon_slope,
                                                  self.roots)
        self.minorants, self.modified, self.knots, self.hull, self.density = rs, V, knots, W, dens
        return self

    def envelope_acceptance(self, lo: float, hi: float, n: int = 20_001) -> float:
        """Probability that one proposal is accepted, by grid quadrature."""
        xs = np.linspace(lo, hi, n)
        target = np.exp(-_target_potential(self.model, xs))
        return float(np.trapezoid(target, xs) / self.density.total_mass)


def term_roots(model: ObservationModel) -> list:
    """Exact solutions of ``g_i(x) = y_i`` for every extended term."""
    return [g.roots(y) for y, g, _ in model.extended_terms()]


def initial_support(model: ObservationModel, extra_point_rule: str = "midpoint", rng=None,
                    roots: Optional[list] = None) -> list:
    """All simple estimates plus one point inside every nonzero-length ``J_i``
    that has no support point in its interior."""
    terms = model.extended_terms()
    roots_all = term_roots(model) if roots is None else roots
    support: list = []
    intervals = []
    for (y, g, _), roots in zip(terms, roots_all):
        shape = classify_shape(g)
        for r in roots:
            _insert(support, r)
        if shape.linear:
            J = (-math.inf, roots[0]) if roots else None
        else:
            J = env.interval_J(g, y, roots)
        if J is not None and J[1] > J[0]:
            intervals.append(J)
    spread = (support[-1] - support[0]) if len(support) > 1 else 0.0
    width = max(1.0, spread)
    src = as_source(rng) if extra_point_rule == "uniform" else None
    for lo, hi in intervals:
        if any(lo < s < hi for s in support):
            continue
        if math.isinf(lo) and math.isinf(hi):
            s = 0.0
        elif math.isinf(lo):
            s = hi - width * (src.uniform() if src else 1.0)
        elif math.isinf(hi):
            s = lo + width * (src.uniform() if src else 1.0)
        elif extra_point_rule == "uniform":
            s = lo + (hi - lo) * src.uniform()
        elif extra_point_rule == "midpoint":
            s = 0.5 * (lo + hi)
        else:
            raise ValueError(f"unknown extra point rule {extra_point_rule!r}")
        _insert(support, s)
    if not support:
        support = [0.0]
    return support


def gars_init(model: ObservationModel, extra_point_rule: str = "midpoint", rng=None,
              knot_rule: str = "intersections", epsilon_slope: Optional[float] = None,
              support: Optional[Sequence[float]] = None) -> GarsState:
    """Initial support set and envelope for ``model`` (prior included)."""
    roots = term_roots(model)
    if support is not None:
        S0 = sorted(float(s) for s in support)
    else:
        S0 = initial_support(model, extra_point_rule, rng, roots)
    rs, V, knots, W, dens = env.gars_envelope(model, S0, knot_rule, epsilon_slope, roots)
    return GarsState(model, S0, rs, V, knots, W, dens, knot_rule, epsilon_slope, roots)


def gars_step(state: GarsState, rng, strict: bool = True, trace: Optional[SamplerTrace] = None):
    """One proposal.  Returns ``(x, state)`` on acceptance, ``(None, state)``
    on rejection, in which case ``x'`` has joined the support and the
    envelope has been rebuilt."""
    rng = as_source(rng)
    x = env.sample_piecewise_exp(state.density, rng)
    u = rng.uniform()
    v = float(_target_potential(state.model, x))
    log_ratio = float(state.hull(x)) - v
    if log_ratio > math.log1p(RATIO_TOL):
        if strict:
            raise EnvelopeViolation(f"target exceeds envelope at x={x:.6g}", x=x, ratio=math.exp(log_ratio))
        if trace is not None:
            trace.violations.append((x, math.exp(log_ratio)))
    if u <= math.exp(min(log_ratio, 0.0)) if math.isfinite(log_ratio) else False:
        return x, state
    # a zero-density point (outside a noise support) still tightens the minorants
    lo, hi = state.model.support
    if lo < x < hi and _insert(state.support, x):
        state.rebuild()
        if trace is not None:
            trace.rebuilds += 1
    return None, state


def gars_run(model: ObservationModel, N: int, rng, extra_point_rule: str = "midpoint",
             knot_rule: str = "intersections", strict: bool = True, state: Optional[GarsState] = None,
             envelope_grid: Optional[tuple] = None, max_proposals: int = 10_000_000) -> SamplerTrace:
    """Draw ``N`` exact samples.  ``envelope_grid=(lo, hi)`` also records the
    acceptance probability of the envelope in force before each sample."""
    rng = as_source(rng)
    trace = SamplerTrace()
    if N <= 0:
        return trace
    if state is None:
        state = gars_init(model, extra_point_rule, rng, knot_rule)
    pending = 0
    total = 0
    while trace.accepted < N:
        if pending == 0 and envelope_grid is not None:
            trace.envelope_rates.append(state.envelope_acceptance(*envelope_grid))
        if total >= max_proposals:
            raise ContractError("GARS exceeded the proposal budget")
        x, state = gars_step(state, rng, strict, trace)
        pending += 1
        total += 1
        if x is not None:
            trace.samples.append(x)
            trace.proposals.append(pending)
            trace.support_sizes.append(state.k)
            pending = 0
    return trace


# --------------------------------------------------------------------------
# Gibbs composition for range measurements in the plane


@dataclass(frozen=True)
class SensorNetwork2D:
    """``y_i = |x - h_i|^2 + noise`` with quadratic noise and Gaussian priors."""

    sensors: tuple = ((0.0, 0.0), (2.0, 2.0))
    y: tuple = (5.0, 2.0)
    noise_weight: float = 1.0
    prior_weight: float = 1.0
    prior_mean: tuple = (0.0, 0.0)

    def conditional(self, coord: int, other: float) -> ObservationModel:
        """Model for coordinate ``coord`` given the other coordinate's value."""
        o = 1 - coord
        ys = [yi - (other - h[o]) ** 2 for yi, h in zip(self.y, self.sensors)]
        gs = [square(center=h[coord]) for h in self.sensors]
        vs = [quadratic(self.noise_weight) for _ in self.sensors]
        prior = Prior(quadratic(self.prior_weight), self.prior_mean[coord])
        return ObservationModel(tuple(ys), tuple(gs), tuple(vs), prior=prior, name=f"x{coord + 1}|x{o + 1}")

    def potential(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        total = self.prior_weight * ((x1 - self.prior_mean[0]) ** 2 + (x2 - self.prior_mean[1]) ** 2)
        for yi, h in zip(self.y, self.sensors):
            total = total + self.noise_weight * (yi - (x1 - h[0]) ** 2 - (x2 - h[1]) ** 2) ** 2
        return total

    def prior_sd(self) -> float:
        return math.sqrt(1.0 / (2.0 * self.prior_weight))


@dataclass
class GibbsResult:
    chain: np.ndarray
    traces: tuple  # one SamplerTrace per coordinate

    def acceptance_rates(self):
        return tuple(t.acceptance_rate for t in self.traces)

    @property
    def acceptance_rate(self) -> float:
        acc = sum(t.accepted for t in self.traces)
        prop = sum(t.proposed for t in self.traces)
        return acc / prop if prop else math.nan


def _gibbs(net: SensorNetwork2D, N: int, rng, draw_conditional, burn: int = 0) -> GibbsResult:
    rng = as_source(rng)
    traces = (SamplerTrace(), SamplerTrace())
    chain = np.empty((N, 2))
    x2 = float(rng.normal(net.prior_mean[1], net.prior_sd()))
    for i in range(N + burn):
        t1 = draw_conditional(net.conditional(0, x2), rng)
        x1 = t1.samples[0]
        t2 = draw_conditional(net.conditional(1, x1), rng)
        if i >= burn:
            chain[i - burn] = (x1, x2)
            traces[0].extend(t1)
            traces[1].extend(t2)
        x2 = t2.samples[0]
    return GibbsResult(chain, traces)


def gibbs_gars(net: SensorNetwork2D, N: int, rng, extra_point_rule: str = "midpoint",
               knot_rule: str = "intersections", burn: int = 0) -> GibbsResult:
    """Gibbs chain whose conditionals are drawn with GARS, each from a fresh
    envelope since the conditioning value changes every step."""

    def draw(model, r):
        return gars_run(model, 1, r, extra_point_rule, knot_rule)

    return _gibbs(net, N, rng, draw, burn)


def gibbs_fixed(net: SensorNetwork2D, N: int, rng, burn: int = 0, batch: int = 1) -> GibbsResult:
    """Gibbs chain with prior-proposal rejection sampling under the
    closed-form quadratic bound for each conditional.

    ``batch=1`` draws one proposal at a time, the same per-proposal work
    pattern as GARS, which keeps wall-clock comparisons like for like.
    Larger batches vectorize the proposals.
    """

    def draw(model, r):
        gamma = net.noise_weight * quadratic_model_bound(model).gamma
        return rejection_sample_fixed(model, prior_sampler(model.prior), math.exp(-gamma), 1, r, batch=batch)

    return _gibbs(net, N, rng, draw, burn)
