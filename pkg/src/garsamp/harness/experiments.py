"""Drivers for the three worked examples.

Each driver writes CSV files (header row, UTF-8, LF endings) plus a
``summary.json`` into an output directory.  Files written by a failed run
are removed.  Replications use per-replication seeds ``seed + r`` and are
spread over a process pool capped by ``GARSAMP_THREADS``, so outputs do
not depend on the pool size.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .. import bounds as B
from ..errors import ConfigError, ContractError
from ..model import ObservationModel, grid_argmin
from ..samplers import (RandomSource, SamplerTrace, gars_run, gibbs_fixed, gibbs_gars, prior_sampler,
                        rejection_sample_fixed)
from .config import ModelConfig, builtin_config, parse_config
from .oracle import grid_oracle, ks_statistic, ks_threshold

log = logging.getLogger(__name__)

SAMPLES_HEADER = ("index", "x")
CHAIN_HEADER = ("index", "x1", "x2")
TRACE_HEADER = ("sample_index", "proposals", "cumulative_acceptance_rate")
BOUND_HEADER = ("method", "gamma", "L", "region", "minimizer")


# --------------------------------------------------------------------------
# output plumbing


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return str(v)


class Outputs:
    """Tracks written files so a failed run can remove them."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.files: list = []
        self._created = not self.dir.exists()

    def path(self, name: str) -> Path:
        p = self.dir / name
        self.files.append(p)
        return p

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        p = self.path(name)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        return p

    def json(self, name: str, data) -> Path:
        p = self.path(name)
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(data, fh, indent=2, sort_keys=True, default=_fmt)
            fh.write("\n")
        return p

    def cleanup(self):
        for p in self.files:
            try:
                p.unlink()
            except FileNotFoundError:
                pass
        if self._created:
            try:
                self.dir.rmdir()
            except OSError:
                pass


@contextmanager
def outputs(out_dir):
    out = Outputs(out_dir)
    out.dir.mkdir(parents=True, exist_ok=True)
    try:
        yield out
    except BaseException:
        out.cleanup()
        raise


def pool_size() -> int:
    raw = os.environ.get("GARSAMP_THREADS", "")
    try:
        n = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"GARSAMP_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def pool_map(fn: Callable, args: Sequence, workers: Optional[int] = None) -> list:
    """Ordered map over a process pool (serial when one worker suffices)."""
    workers = pool_size() if workers is None else max(1, workers)
    if workers == 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=min(workers, len(args))) as ex:
        return list(ex.map(fn, args, chunksize=max(1, len(args) // (4 * workers))))


# --------------------------------------------------------------------------
# shared rows


def sample_rows(samples):
    return ((i, float(x)) for i, x in enumerate(samples))


def trace_rows(trace: SamplerTrace):
    accepted = 0
    proposed = 0
    for k, t in enumerate(trace.proposals, start=1):
        accepted += 1
        proposed += t
        yield k, int(t), accepted / proposed


def histogram_rows(samples, bins: int, lo: float, hi: float, target_pdf: Optional[Callable] = None):
    dens, edges = np.histogram(samples, bins=bins, range=(lo, hi), density=False)
    dens = dens / (len(samples) * np.diff(edges))
    mids = 0.5 * (edges[1:] + edges[:-1])
    tgt = target_pdf(mids) if target_pdf is not None else np.full(mids.shape, math.nan)
    for a, b, d, t in zip(edges[:-1], edges[1:], dens, tgt):
        yield float(a), float(b), float(d), float(t)


HIST_HEADER = ("bin_left", "bin_right", "density", "target_density")


def acceptance_by_index(traces: Sequence[SamplerTrace], length: int):
    """Per accepted-sample index ``k``: pooled rate ``R / sum_r T_k`` and the
    mean of ``1 / T_k`` over replications."""
    T = np.array([tr.proposals[:length] for tr in traces], dtype=float)
    pooled = T.shape[0] / T.sum(axis=0)
    mean_inv = np.mean(1.0 / T, axis=0)
    return pooled, mean_inv


# --------------------------------------------------------------------------
# Example 1: bounds and fixed-bound rejection sampling


def _best_region(report) -> int:
    return min(report.regions, key=lambda r: r.gamma).region


def bound_table(model: ObservationModel, cfg: Optional[ModelConfig] = None, bm2_iterations: int = 3,
                domain=(-12.0, 12.0)):
    """``(method, BoundReport-like)`` rows: bm1, transform, tangent, bm2, the
    quadratic surrogate's gamma2 and the grid optimum."""
    rows = []
    bm1 = B.bm1_bound(model)
    rows.append(("bm1", bm1.gamma, _best_region(bm1), bm1.minimizer))
    quad = B.quadratic_model_bound(model)
    r_inv = cfg.r_inverse() if cfg is not None else None
    if r_inv is not None:
        tr = B.transform_model_bound(model, r_inv)
        rows.append(("transform", tr.gamma, _best_region(quad), quad.minimizer))
    try:
        tg = B.tangent_model_bound(model)
        rows.append(("tangent", tg.gamma, _best_region(tg), tg.minimizer))
    except ContractError as exc:  # non-convex marginals: method does not apply
        log.info("tangent bound skipped: %s", exc)
    bm2 = B.bm2_bound(model, k_max=bm2_iterations)
    rows.append(("bm2", bm2.gamma, _best_region(bm2), bm2.minimizer))
    rows.append(("quad_gamma2", quad.gamma, _best_region(quad), quad.minimizer))
    x_opt, v_opt = grid_argmin(model, domain[0], domain[1], 200_001)
    rows.append(("optimal", v_opt - model.c_n, 0, x_opt))
    return [(m, g, math.exp(-g), r, x) for m, g, r, x in rows]


def rs_acceptance(model: ObservationModel, gamma: float, n: int, seed: int) -> SamplerTrace:
    return rejection_sample_fixed(model, prior_sampler(model.prior), math.exp(-gamma), n, RandomSource(seed))


def run_example1(cfg: ModelConfig, out_dir, overrides: Optional[dict] = None) -> dict:
    ex = {**cfg.experiment, **(overrides or {})}
    model = cfg.build_model()
    n = int(ex.get("n_samples", 10_000))
    seed = int(ex.get("seed", 1))
    k = int(cfg.bound_option("bm2_iterations", 3))
    bins = int(ex.get("histogram_bins", 60))
    lo, hi = cfg.domain
    with outputs(out_dir) as out:
        table = bound_table(model, cfg, k, (lo, hi))
        out.csv("bounds.csv", BOUND_HEADER, table)
        gammas = {m: g for m, g, *_ in table}
        g_rs = gammas["bm2"]
        trace = rs_acceptance(model, g_rs, n, seed)
        out.csv("samples.csv", SAMPLES_HEADER, sample_rows(trace.samples))
        out.csv("trace.csv", TRACE_HEADER, trace_rows(trace))
        oracle = grid_oracle(model, (lo, hi))
        out.csv("histogram.csv", HIST_HEADER, histogram_rows(trace.samples, bins, -3.0, 3.0, oracle.pdf))
        curve = []
        m_curve = int(ex.get("curve_samples", 20_000))
        for i, g in enumerate(ex.get("gamma_curve", [0.0, gammas["bm1"], g_rs, gammas["optimal"]])):
            g = float(g)
            if g > gammas["optimal"]:
                raise ConfigError(f"gamma {g} exceeds the potential minimum {gammas['optimal']:.6g}")
            t = rs_acceptance(model, g, m_curve, seed + 1 + i)
            curve.append((g, t.acceptance_rate, t.proposed, t.accepted))
        out.csv("rs_curve.csv", ("gamma", "acceptance_rate", "proposals", "accepted"), curve)
        summary = {
            "example": 1,
            "bounds": {m: g for m, g, *_ in table},
            "rs_gamma": g_rs,
            "rs_acceptance_rate": trace.acceptance_rate,
            "ks": ks_statistic(trace.samples, oracle),
            "ks_threshold": ks_threshold(len(trace.samples)),
            "n_samples": n,
        }
        out.json("summary.json", summary)
    return summary


# --------------------------------------------------------------------------
# Example 2: GARS on the bimodal target


def _gars_job(args):
    raw, constants, n, seed, extra, knots = args
    model = parse_config(raw, verify=False).build_model(**constants)
    return gars_run(model, n, RandomSource(seed), extra, knots)


def gars_curve(cfg: ModelConfig, alpha_key: str, alpha: float, replications: int, length: int, seed: int,
               extra: str = "uniform", knots: str = "intersections", workers: Optional[int] = None):
    jobs = [(cfg.raw, {alpha_key: alpha}, length, seed + r, extra, knots) for r in range(replications)]
    traces = pool_map(_gars_job, jobs, workers)
    return acceptance_by_index(traces, length)


def run_example2(cfg: ModelConfig, out_dir, overrides: Optional[dict] = None) -> dict:
    ex = {**cfg.experiment, **(overrides or {})}
    n = int(ex.get("n_samples", 5000))
    seed = int(ex.get("seed", 1))
    extra = ex.get("extra_point_rule", "uniform")
    knots = ex.get("knot_rule", "intersections")
    bins = int(ex.get("histogram_bins", 80))
    lo, hi = cfg.domain
    with outputs(out_dir) as out:
        a_hist = float(ex.get("histogram_alpha", 0.2))
        model = cfg.build_model(alpha=a_hist)
        trace = gars_run(model, n, RandomSource(seed), extra, knots)
        oracle = grid_oracle(model, (lo, hi))
        out.csv("samples.csv", SAMPLES_HEADER, sample_rows(trace.samples))
        out.csv("trace.csv", TRACE_HEADER, trace_rows(trace))
        out.csv("histogram.csv", HIST_HEADER, histogram_rows(trace.samples, bins, lo, hi, oracle.pdf))

        a_curve = float(ex.get("curve_alpha", 2.0))
        reps = int(ex.get("curve_replications", 2000))
        length = int(ex.get("curve_length", 20))
        pooled, mean_inv = gars_curve(cfg, "alpha", a_curve, reps, length, seed + 10_000, extra, knots)
        out.csv("curve.csv", ("sample_index", "acceptance_rate", "mean_inverse_proposals"),
                ((k + 1, float(p), float(m)) for k, (p, m) in enumerate(zip(pooled, mean_inv))))

        grid = ex.get("alpha_grid", {"start": 0.2, "stop": 5.0, "count": 10})
        alphas = np.linspace(grid["start"], grid["stop"], int(grid["count"]))
        mreps = int(ex.get("mean_replications", 5))
        jobs = [(cfg.raw, {"alpha": float(a)}, n, seed + 20_000 + 100 * i + r, extra, knots)
                for i, a in enumerate(alphas) for r in range(mreps)]
        runs = pool_map(_gars_job, jobs)
        mean_rows = [(float(a), r, float(np.mean(runs[i * mreps + r].samples)))
                     for i, a in enumerate(alphas) for r in range(mreps)]
        out.csv("means.csv", ("alpha", "replication", "sample_mean"), mean_rows)
        summary = {
            "example": 2,
            "histogram_alpha": a_hist,
            "ks": ks_statistic(trace.samples, oracle),
            "ks_threshold": ks_threshold(n),
            "target_local_maxima": oracle.local_maxima(),
            "curve_alpha": a_curve,
            "curve_replications": reps,
            "curve": {str(k): float(pooled[k - 1]) for k in (1, 2, 3, 10, length) if k <= length},
            "max_abs_mean": float(max(abs(m) for *_, m in mean_rows)),
            "n_samples": n,
        }
        out.json("summary.json", summary)
    return summary


# --------------------------------------------------------------------------
# Example 3: Gibbs sampling for localisation


def hist2d_rows(chain, bins: int, lo: float, hi: float):
    H, xe, ye = np.histogram2d(chain[:, 0], chain[:, 1], bins=bins, range=((lo, hi), (lo, hi)))
    area = np.diff(xe)[:, None] * np.diff(ye)[None, :]
    D = H / (chain.shape[0] * area)
    for i in range(bins):
        for j in range(bins):
            yield float(xe[i]), float(xe[i + 1]), float(ye[j]), float(ye[j + 1]), float(D[i, j])


def grid_posterior_2d(net, lo: float, hi: float, n: int = 801):
    """Moments of the 2-D target on a grid: mean vector and P(x1 > x2)."""
    g = np.linspace(lo, hi, n)
    X1, X2 = np.meshgrid(g, g, indexing="ij")
    V = net.potential(X1, X2)
    W = np.exp(-(V - V.min()))
    W /= W.sum()
    return float((W * X1).sum()), float((W * X2).sum()), float(W[X1 > X2].sum())


def run_example3(cfg: ModelConfig, out_dir, overrides: Optional[dict] = None) -> dict:
    ex = {**cfg.experiment, **(overrides or {})}
    net = cfg.network()
    n = int(ex.get("n_samples", 10_000))
    seed = int(ex.get("seed", 1))
    bins = int(ex.get("histogram_bins", 40))
    lo, hi = cfg.domain
    with outputs(out_dir) as out:
        t0 = time.perf_counter()
        gars = gibbs_gars(net, n, RandomSource(seed), ex.get("extra_point_rule", "midpoint"),
                          ex.get("knot_rule", "intersections"))
        t_gars = time.perf_counter() - t0
        t0 = time.perf_counter()
        fixed = gibbs_fixed(net, n, RandomSource(seed + 1), batch=int(ex.get("fixed_batch", 1)))
        t_fixed = time.perf_counter() - t0
        out.csv("chain.csv", CHAIN_HEADER, ((i, float(a), float(b)) for i, (a, b) in enumerate(gars.chain)))
        out.csv("chain_fixed.csv", CHAIN_HEADER, ((i, float(a), float(b)) for i, (a, b) in enumerate(fixed.chain)))
        for c in (0, 1):
            out.csv(f"trace_x{c + 1}.csv", TRACE_HEADER, trace_rows(gars.traces[c]))
        out.csv("histogram2d.csv", ("x1_left", "x1_right", "x2_left", "x2_right", "density"),
                hist2d_rows(gars.chain, bins, lo, hi))
        m1, m2, p12 = grid_posterior_2d(net, lo, hi)
        summary = {
            "example": 3,
            "n_samples": n,
            "gars_acceptance": list(gars.acceptance_rates()),
            "gars_acceptance_pooled": gars.acceptance_rate,
            "gars_mean_inverse_proposals": [float(np.mean(1.0 / np.asarray(t.proposals))) for t in gars.traces],
            "fixed_acceptance": list(fixed.acceptance_rates()),
            "fixed_acceptance_pooled": fixed.acceptance_rate,
            "fixed_mean_inverse_proposals": [float(np.mean(1.0 / np.asarray(t.proposals))) for t in fixed.traces],
            "fixed_batch": int(ex.get("fixed_batch", 1)),
            "seconds_gars": t_gars,
            "seconds_fixed": t_fixed,
            "speedup": t_fixed / t_gars if t_gars > 0 else math.inf,
            "chain_mean": [float(v) for v in gars.chain.mean(axis=0)],
            "grid_mean": [m1, m2],
            "chain_p_x1_gt_x2": float(np.mean(gars.chain[:, 0] > gars.chain[:, 1])),
            "grid_p_x1_gt_x2": p12,
        }
        out.json("summary.json", summary)
    return summary


RUNNERS = {1: run_example1, 2: run_example2, 3: run_example3}


def run_example(example: int, out_dir, overrides: Optional[dict] = None, cfg: Optional[ModelConfig] = None) -> dict:
    """Run one of the built-in examples, writing its report files to ``out_dir``."""
    if example not in RUNNERS:
        raise ConfigError(f"unknown example {example!r}")
    cfg = cfg or builtin_config(example)
    return RUNNERS[example](cfg, out_dir, overrides)
