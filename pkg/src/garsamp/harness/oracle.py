"""Grid-based reference distributions used to check samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import NumericError
from ..model import ObservationModel, potential_or_inf

MIN_RESOLUTION = 10_000
# exp(-(V_edge - V_min)) * width must leave at most this much mass outside
TAIL_MASS = 1e-6


@dataclass(frozen=True)
class GridOracle:
    grid: np.ndarray
    potential: np.ndarray  # unnormalised target is exp(-potential)
    pdf_values: np.ndarray
    cdf_values: np.ndarray
    log_norm: float

    @property
    def domain(self):
        return float(self.grid[0]), float(self.grid[-1])

    @property
    def argmin(self) -> float:
        return float(self.grid[np.argmin(self.potential)])

    @property
    def min(self) -> float:
        return float(np.min(self.potential))

    def pdf(self, x):
        return np.interp(x, self.grid, self.pdf_values, left=0.0, right=0.0)

    def cdf(self, x):
        return np.interp(x, self.grid, self.cdf_values, left=0.0, right=1.0)

    def ppf(self, u):
        # cdf can be flat where the density underflows; keep the left-most grid point
        c, idx = np.unique(self.cdf_values, return_index=True)
        return np.interp(u, c, self.grid[idx])

    def sample(self, rng, size: int):
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        return self.ppf(gen.uniform(size=size))

    def mean(self) -> float:
        return float(np.trapezoid(self.grid * self.pdf_values, self.grid))

    def local_maxima(self, rel_height: float = 1e-3) -> int:
        """Number of strict local maxima of the density above ``rel_height``
        times the global maximum."""
        p = self.pdf_values
        top = rel_height * float(np.max(p))
        inner = (p[1:-1] > p[:-2]) & (p[1:-1] >= p[2:]) & (p[1:-1] > top)
        return int(np.count_nonzero(inner))


def oracle_from_potential(V: Callable, domain, resolution: int = 100_001) -> GridOracle:
    """Trapezoid-rule normalisation of ``exp(-V)`` on a uniform grid.

    ``V = +inf`` is zero density (outside the noise support); NaN or
    ``-inf`` is an error.
    """
    lo, hi = float(domain[0]), float(domain[1])
    if not hi > lo:
        raise NumericError("empty oracle domain", bracket=(lo, hi))
    if resolution < MIN_RESOLUTION:
        raise NumericError(f"oracle resolution must be at least {MIN_RESOLUTION}", bracket=(lo, hi))
    x = np.linspace(lo, hi, int(resolution))
    with np.errstate(over="ignore", invalid="ignore"):
        v = np.asarray(V(x), dtype=float)
    if np.any(np.isnan(v) | (v == -np.inf)) or not np.any(np.isfinite(v)):
        bad = x[~np.isfinite(v)]
        raise NumericError(f"potential is not finite on the oracle grid (first at x={bad[0]:.6g})", bracket=(lo, hi))
    vmin = float(np.min(v))
    w = np.exp(-(v - vmin))
    z = float(np.trapezoid(w, x))
    edge = max(w[0], w[-1]) * (hi - lo)
    if edge > TAIL_MASS * z:
        raise NumericError("oracle domain cuts off more than the allowed tail mass", bracket=(lo, hi))
    pdf = w / z
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(x))])
    if abs(cdf[-1] - 1.0) > 1e-8:
        raise NumericError("oracle cdf does not reach 1", bracket=(lo, hi))
    cdf = cdf / cdf[-1]
    return GridOracle(x, v, pdf, cdf, vmin + math.log(z))


def grid_oracle(model: ObservationModel, domain, resolution: int = 100_001, extended: bool = True) -> GridOracle:
    """Oracle for the posterior ``exp(-V)`` of ``model`` (prior included by
    default)."""
    return oracle_from_potential(lambda x: potential_or_inf(model, x, extended), domain, resolution)


def ks_statistic(samples, oracle: GridOracle) -> float:
    """Kolmogorov-Smirnov distance between ``samples`` and the oracle cdf."""
    s = np.sort(np.asarray(samples, dtype=float))
    n = s.size
    if n == 0:
        raise ValueError("no samples")
    F = oracle.cdf(s)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_threshold(n: int, coefficient: float = 1.63) -> float:
    """Critical value ``c / sqrt(n)`` (1.63 is roughly the 1% level)."""
    return coefficient / math.sqrt(n)
