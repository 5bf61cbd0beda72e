"""Invariant checks run against a configuration.

``verify_suite`` never raises for a failed check; each check becomes one
report entry ``{"check", "passed", "detail"}`` (``passed`` is ``None``
for checks that do not apply to the model).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import bounds as B
from .. import envelope as env
from ..errors import BoundViolation, ContractError, GarsampError
from ..model import ObservationModel, clipped_interval, grid_argmin, potential_or_inf, simple_estimates
from ..samplers import gars_init, prior_sampler, rejection_sample_fixed, RandomSource
from .config import ModelConfig
from .experiments import bound_table

LEVELS = {"quick": 2_000, "full": 10_000}


@dataclass
class VerifyReport:
    name: str
    entries: list = field(default_factory=list)

    def add(self, check: str, passed: Optional[bool], detail: str = ""):
        self.entries.append({"check": check, "passed": passed, "detail": detail})

    @property
    def passed(self) -> bool:
        return all(e["passed"] is not False for e in self.entries)

    @property
    def failures(self) -> list:
        return [e for e in self.entries if e["passed"] is False]

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "checks": self.entries}


def _guard(report, check):
    """Run the decorated check at once; a library error becomes a failed entry."""

    def wrap(fn):
        try:
            fn()
        except GarsampError as exc:
            report.add(check, False, f"{type(exc).__name__}: {exc}")

    return wrap


def _check_model(report: VerifyReport, model: ObservationModel, domain, n: int, label: str = "",
                 gamma_override: Optional[float] = None, seed: int = 0, cfg: Optional[ModelConfig] = None):
    lo, hi = domain
    tag = f"{label}:" if label else ""

    problems = model.verify(n)
    report.add(tag + "model_flags", not problems, "; ".join(problems))
    obs = model.without_prior()
    xs = np.linspace(lo, hi, 20 * n + 1)
    v_true = potential_or_inf(obs, xs) - model.c_n
    vmin = float(np.min(v_true))

    @_guard(report, tag + "bm1_minorants")
    def _():
        rep = B.bm1_bound(model)
        bad = []
        for reg in rep.regions:
            if not reg.lines:
                continue
            a, b = reg.interval
            for i, (line, g) in enumerate(zip(reg.lines, obs.nonlinearities)):
                if not B.check_minorant(line, g.f, obs.y[i], (a, b), n):
                    bad.append(f"region {reg.region} term {i}")
        report.add(tag + "bm1_minorants", not bad, ", ".join(bad))

    @_guard(report, tag + "bound_soundness")
    def _():
        table = bound_table(model, cfg, 3, domain)
        bad = [f"{m}={g:.6g}" for m, g, *_ in table if m not in ("quad_gamma2", "optimal") and g > vmin + 1e-6]
        report.add(tag + "bound_soundness", not bad,
                   f"grid min {vmin:.6g}; " + ", ".join(f"{m}={g:.6g}" for m, g, *_ in table))

    @_guard(report, tag + "containment")
    def _():
        bad = []
        for j, (a, b) in enumerate(obs.regions()):
            est = simple_estimates(obs, j)
            if not est.finite:
                continue
            ilo, ihi = clipped_interval(est)
            ra, rb = max(a, lo), min(b, hi)
            if not rb > ra:
                continue
            x, _v = grid_argmin(obs, ra, rb, 20 * n + 1)
            step = (rb - ra) / (20 * n)
            if not (ilo - step <= x <= ihi + step):
                bad.append(f"region {j}: argmin {x:.6g} outside [{ilo:.6g}, {ihi:.6g}]")
        report.add(tag + "containment", not bad, "; ".join(bad))

    @_guard(report, tag + "gars_envelope")
    def _():
        state = gars_init(model)
        terms = model.extended_terms()
        bad = [f"term {i}" for i, ((y, g, _), r) in enumerate(zip(terms, state.minorants))
               if not env.check_minorant_pw(r, g, y, lo, hi, n)]
        report.add(tag + "gars_minorants", not bad, ", ".join(bad))
        V = potential_or_inf(model, xs) - model.c_n
        W = np.asarray(state.hull(xs), dtype=float)
        fin = np.isfinite(V)  # W <= V holds trivially where V = +inf
        gap = float(np.max(W[fin] - V[fin]))
        report.add(tag + "hull_domination", gap <= 1e-8 * max(1.0, float(np.max(np.abs(W)))),
                   f"max(W - V) = {gap:.3g}")
        d = state.density
        tot = float(np.sum(d.masses))
        ends = float(d.cum[-1]) if len(d.cum) else math.nan
        inside = float(np.trapezoid(d.pdf(xs), xs))
        ok = abs(tot - 1.0) < 1e-9 and abs(ends - 1.0) < 1e-9 and inside <= 1.0 + 1e-6
        report.add(tag + "normalization", ok, f"sum of masses {tot:.12g}, cdf end {ends:.12g}, "
                                              f"grid mass {inside:.9g}")

    if model.prior is None:
        report.add(tag + "rs_bound", None, "no prior to propose from")
        return
    try:
        draw = prior_sampler(model.prior)
    except ContractError as exc:
        report.add(tag + "rs_bound", None, str(exc))
        return
    gamma = gamma_override if gamma_override is not None else B.bm2_bound(model).gamma
    try:
        rejection_sample_fixed(model, draw, math.exp(-gamma), 200, RandomSource(seed), strict=True, batch=1024)
        report.add(tag + "rs_bound", True, f"gamma {gamma:.6g}")
    except BoundViolation as exc:
        report.add(tag + "rs_bound", False, f"BoundViolation: {exc}")


def verify_suite(cfg: ModelConfig, level: str = "quick", gamma_override: Optional[float] = None,
                 seed: int = 0) -> VerifyReport:
    """Run all invariant checks for ``cfg``; ``gamma_override`` replaces the
    bound used in the fixed-bound rejection sampling check."""
    n = LEVELS.get(level)
    if n is None:
        raise ValueError(f"unknown level {level!r}")
    report = VerifyReport(cfg.name)
    if cfg.kind == "sensor_network":
        net = cfg.network()
        for coord in (0, 1):
            for other in (-1.0, 0.0, 1.0, 2.0):
                _check_model(report, net.conditional(coord, other), cfg.domain, n,
                             f"x{coord + 1}|{other:g}", gamma_override, seed, cfg)
        return report
    try:
        model = cfg.build_model()
    except GarsampError as exc:
        report.add("model_load", False, str(exc))
        return report
    _check_model(report, model, cfg.domain, n, "", gamma_override, seed, cfg)
    return report
