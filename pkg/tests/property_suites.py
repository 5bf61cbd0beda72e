"""Invariant suites shared by the property tests and the acceptance run.

Each suite returns a list of failure descriptions (empty when it passes).
"""

import math

import numpy as np

from garsamp import bounds as B
from garsamp import envelope as env
from garsamp import model as M
from garsamp import samplers as S
from garsamp.harness.config import builtin_config

from _randmodels import radial_r_inverse, random_model

GRID = 10_000
LO, HI = -8.0, 8.0
N_RANDOM = 25


def shipped_models():
    """Every scalar model the package ships, with a label."""
    out = [("example1", builtin_config(1).build_model())]
    cfg2 = builtin_config(2)
    out += [(f"example2(alpha={a:g})", cfg2.build_model(alpha=a)) for a in (0.2, 2.0, 5.0)]
    net = builtin_config(3).network()
    out += [(f"example3(x{c + 1}|{o:g})", net.conditional(c, o)) for c in (0, 1) for o in (-1.0, 0.0, 1.0, 2.0)]
    return out


def random_models(n=N_RANDOM):
    return [(f"random{s}", random_model(s)) for s in range(n)]


def _grid_min(V, n=GRID + 1):
    xs = np.linspace(LO, HI, n)
    with np.errstate(all="ignore"):
        return float(np.min(V(xs)))


def chi2_sf(x: float, k: int) -> float:
    """Upper tail of the chi-square distribution with integer ``k`` degrees."""
    h = 0.5 * x
    if k % 2 == 0:
        term, total = 1.0, 1.0
        for i in range(1, k // 2):
            term *= h / i
            total += term
        return math.exp(-h) * total
    total = math.erfc(math.sqrt(h))
    term = math.sqrt(h) / math.gamma(1.5)
    for i in range(1, (k - 1) // 2 + 1):
        total += math.exp(-h) * term
        term *= h / (i + 0.5)
    return total


def minorant_suite(models):
    bad = []
    for name, m in models:
        obs = m.without_prior()
        for reg in B.bm1_bound(m).regions:
            if not reg.lines or not reg.interval[1] > reg.interval[0]:
                continue
            for i, (line, g) in enumerate(zip(reg.lines, obs.nonlinearities)):
                if not B.check_minorant(line, g.f, obs.y[i], reg.interval, GRID):
                    bad.append(f"{name}: bm1 region {reg.region} term {i}")
        st = S.gars_init(m)
        rng = S.RandomSource(3)
        for _ in range(40):
            _, st = S.gars_step(st, rng)
        for i, ((y, g, _), r) in enumerate(zip(m.extended_terms(), st.minorants)):
            if not env.check_minorant_pw(r, g, y, LO, HI, GRID):
                bad.append(f"{name}: gars term {i}")
    return bad


def hull_suite(models):
    bad = []
    xs = np.linspace(LO, HI, GRID + 1)
    for name, m in models:
        V = M.potential_or_inf(m, xs) - m.c_n
        fin = np.isfinite(V)
        st = S.gars_init(m)
        rng = S.RandomSource(4)
        for step in range(41):
            if step % 10 == 0:
                W = np.asarray(st.hull(xs), dtype=float)
                gap = float(np.max(W[fin] - V[fin]))
                if gap > 1e-8 * max(1.0, float(np.max(np.abs(V[fin])))):
                    bad.append(f"{name}: W exceeds V by {gap:.3g} after {step} proposals")
            _, st = S.gars_step(st, rng)
    return bad


def soundness_suite(models):
    """bm1, bm2, tangent and transform against the system potential; the
    quadratic closed form against the sum of squared residuals."""
    bad = []
    for name, m in models:
        obs = m.without_prior()
        vmin = _grid_min(lambda x: M.potential_or_inf(obs, x) - m.c_n)
        sq = _grid_min(lambda x: sum((y - g.f(x)) ** 2 for y, g in zip(obs.y, obs.nonlinearities)))
        gammas = {
            "bm1": B.bm1_bound(m).gamma,
            "bm2": B.bm2_bound(m).gamma,
            "tangent": B.tangent_model_bound(m).gamma,
            "transform": B.transform_model_bound(m, radial_r_inverse(m)).gamma,
        }
        for k, g in gammas.items():
            if not g <= vmin + 1e-6:
                bad.append(f"{name}: {k} gamma {g:.6g} > grid min {vmin:.6g}")
        q = B.quadratic_model_bound(m).gamma
        if not q <= sq + 1e-6:
            bad.append(f"{name}: quadratic gamma {q:.6g} > grid min {sq:.6g}")
    return bad


def bm2_monotone_suite(models, k_max=5):
    bad = []
    for name, m in models:
        gs = [B.bm2_bound(m, k_max=k).gamma for k in range(k_max + 1)]
        if any(b < a - 1e-9 for a, b in zip(gs, gs[1:])):
            bad.append(f"{name}: BM2 not monotone {['%.6g' % g for g in gs]}")
    return bad


def containment_suite(models):
    bad = []
    for name, m in models:
        obs = m.without_prior()
        for j, (a, b) in enumerate(obs.regions()):
            est = M.simple_estimates(obs, j)
            if not est.finite:
                continue
            ilo, ihi = M.clipped_interval(est)
            ra, rb = max(a, LO), min(b, HI)
            if not rb > ra:
                continue
            x, v = M.grid_argmin(obs, ra, rb, GRID + 1)
            if not math.isfinite(v):
                continue  # no mass in this region
            step = (rb - ra) / GRID
            if not ilo - step <= x <= ihi + step:
                bad.append(f"{name} region {j}: argmin {x:.6g} outside [{ilo:.6g}, {ihi:.6g}]")
    return bad


def chi_square_suite(models, n=20_000, alpha=1e-3):
    """Envelope draws binned by hull segment against the segment masses."""
    bad = []
    for idx, (name, m) in enumerate(models):
        d = S.gars_init(m).density
        x = env.sample_piecewise_exp(d, S.RandomSource(100 + idx), n)
        edges = [s[0] for s in d.segments] + [d.segments[-1][1]]
        counts = np.histogram(x, bins=np.clip(edges, -1e300, 1e300))[0]
        expected = n * d.masses
        # merge cells with small expectations into their neighbours
        obs_c, exp_c, acc_o, acc_e = [], [], 0.0, 0.0
        for o, e in zip(counts, expected):
            acc_o += o
            acc_e += e
            if acc_e >= 5:
                obs_c.append(acc_o)
                exp_c.append(acc_e)
                acc_o = acc_e = 0.0
        if acc_e > 0 and exp_c:
            obs_c[-1] += acc_o
            exp_c[-1] += acc_e
        if len(exp_c) < 2:
            continue
        o, e = np.array(obs_c), np.array(exp_c)
        stat = float(np.sum((o - e) ** 2 / e))
        p = chi2_sf(stat, len(e) - 1)
        if p <= alpha:
            bad.append(f"{name}: chi-square p = {p:.3g}")
    return bad


def quadratic_closed_form_suite(n_cases=50, seed=0):
    bad = []
    rng = np.random.default_rng(seed)
    for c in range(n_cases):
        n = int(rng.integers(1, 6))
        lines = [B.LinearFn(float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3))) for _ in range(n)]
        if all(abs(r.a) < 1e-3 for r in lines):
            continue
        y = rng.uniform(-4, 4, n)
        gamma2, x = B.quadratic_bound(lines, y)
        f = lambda t: float(sum((yy - r.a * t - r.b) ** 2 for yy, r in zip(y, lines)))  # noqa: E731
        _, v = B.minimize_convex_1d(f, -100.0, 100.0, tol=1e-12)
        if abs(gamma2 - v) > 1e-8 * max(1.0, abs(v)):
            bad.append(f"case {c}: closed form {gamma2!r} vs numeric {v!r}")
    return bad


SUITES = {
    "minorant inequalities (shipped models)": lambda: minorant_suite(shipped_models()),
    "hull domination W <= V": lambda: hull_suite(shipped_models() + random_models()),
    "bound soundness, five methods, 25 random models": lambda: soundness_suite(random_models()),
    "BM2 monotone in k": lambda: bm2_monotone_suite(shipped_models() + random_models()),
    "simple-estimate containment": lambda: containment_suite(shipped_models() + random_models()),
    "envelope chi-square p > 0.001": lambda: chi_square_suite(shipped_models() + random_models()),
    "quadratic closed form vs numeric": quadratic_closed_form_suite,
}
