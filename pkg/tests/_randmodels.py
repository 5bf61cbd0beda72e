"""Random convex-marginal observation models for the property suites."""

import math

import numpy as np

from garsamp import model as M


def random_potential(rng):
    fam = rng.integers(5)
    if fam == 0:
        return M.gaussian(rng.uniform(0.3, 2.0))
    if fam == 1:
        return M.quadratic(rng.uniform(0.3, 2.0))
    if fam == 2:
        return M.gamma_shifted(rng.uniform(1.5, 4.0), rng.uniform(0.5, 2.0))
    if fam == 3:
        return M.lp(rng.uniform(1.2, 3.0), rng.uniform(0.5, 2.0))
    return M.cosh_potential(rng.uniform(0.5, 2.0))


def random_nonlinearity(rng):
    sign = lambda: 1.0 if rng.random() < 0.5 else -1.0  # noqa: E731
    kind = rng.integers(4)
    if kind == 0:
        return M.exponential(sign() * rng.uniform(0.3, 1.2), sign() * rng.uniform(0.5, 2.0))
    if kind == 1:
        return M.square(rng.uniform(-1.0, 1.0), sign() * rng.uniform(0.3, 1.5))
    if kind == 2:
        return M.linear(sign() * rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0))
    return M.exp_abs()


def random_model(seed: int) -> M.ObservationModel:
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(1, 4))
    x_true = rng.uniform(-1.5, 1.5)
    gs = [random_nonlinearity(rng) for _ in range(n)]
    ys = [float(g.f(x_true)) + rng.uniform(-0.5, 0.5) for g in gs]
    vs = [random_potential(rng) for _ in range(n)]
    return M.ObservationModel(tuple(ys), tuple(gs), tuple(vs), prior=M.Prior(M.gaussian(2.0)), name=f"random{seed}")


def radial_r_inverse(model: M.ObservationModel):
    """A valid increasing ``R^-1`` for any convex marginals: if ``sum t_i**2 = u``
    some ``|t_i| >= sqrt(u / n)``, and every other term is at least its minimum."""
    vs = model.potentials
    n = len(vs)
    v0 = [float(v(np.array([0.0]))[0]) for v in vs]

    def r_inv(u):
        s = math.sqrt(max(float(u), 0.0) / n)
        rise = [min(float(v(np.array([s]))[0]), float(v(np.array([-s]))[0])) - z for v, z in zip(vs, v0)]
        return sum(v0) + min(rise)

    return r_inv
