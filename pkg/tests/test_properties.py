import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from garsamp import bounds as B
from garsamp import envelope as env
from garsamp import model as M

import property_suites as P

SHIPPED = P.shipped_models()
RANDOM = P.random_models()
IDS = [n for n, _ in SHIPPED + RANDOM]


@pytest.mark.parametrize("case", SHIPPED, ids=[n for n, _ in SHIPPED])
def test_minorants_shipped(case):
    assert P.minorant_suite([case]) == []


@pytest.mark.parametrize("case", SHIPPED + RANDOM, ids=IDS)
def test_hull_domination(case):
    assert P.hull_suite([case]) == []


@pytest.mark.parametrize("case", RANDOM, ids=[n for n, _ in RANDOM])
def test_bound_soundness_random(case):
    assert P.soundness_suite([case]) == []


@pytest.mark.parametrize("case", SHIPPED + RANDOM, ids=IDS)
def test_bm2_monotone(case):
    assert P.bm2_monotone_suite([case]) == []


def test_containment():
    assert P.containment_suite(SHIPPED + RANDOM) == []


def test_envelope_chi_square():
    assert P.chi_square_suite(SHIPPED + RANDOM) == []


def test_quadratic_closed_form():
    assert P.quadratic_closed_form_suite() == []


def test_chi2_sf_reference_values():
    # 5% critical values
    for x, k in [(3.841, 1), (5.991, 2), (7.815, 3), (11.070, 5), (18.307, 10)]:
        assert P.chi2_sf(x, k) == pytest.approx(0.05, abs=2e-4)


def test_chi_square_detects_wrong_masses():
    name, m = RANDOM[1]
    from garsamp import samplers as S
    d = S.gars_init(m).density
    skewed = env.PiecewiseExpDensity(d.W, d.segments, d.log_masses, d.log_norm,
                                     np.clip(np.sqrt(d.cum), 0, 1), False)
    x = env.sample_piecewise_exp(skewed, S.RandomSource(0), 20_000)
    counts = np.histogram(x, bins=np.clip([s[0] for s in d.segments] + [math.inf], -1e300, 1e300))[0]
    e = 20_000 * d.masses
    keep = e > 5
    stat = float(np.sum((counts[keep] - e[keep]) ** 2 / e[keep]))
    assert P.chi2_sf(stat, int(keep.sum()) - 1) < 1e-3


def test_radial_transform_is_valid():
    for _, m in RANDOM[:10]:
        r_inv = P.radial_r_inverse(m)
        rng = np.random.default_rng(0)
        t = rng.uniform(-3, 3, size=(2000, m.n))
        u = np.sum(t ** 2, axis=1)
        vs = sum(np.asarray(v(t[:, i])) for i, v in enumerate(m.potentials))
        assert all(r_inv(ui) <= vi + 1e-9 for ui, vi in zip(u, vs))


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(0.01, 5), st.floats(-3, 3), st.floats(0, 1))
def test_segment_inverse_cdf_in_range(lo, width, a, u):
    x = env.sample_segment(lo, lo + width, a, u)
    assert lo - 1e-9 <= x <= lo + width + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 20), st.floats(0, 20), st.floats(0.5, 4), st.integers(1, 5))
def test_lp_transform_monotone(g1, g2, p, n):
    lo, hi = sorted((g1, g2))
    assert B.lp_transform_bound(lo, p, n) <= B.lp_transform_bound(hi, p, n) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6, unique=True), st.floats(-4, 4))
def test_gars_minorants_exp_abs(support, y):
    g = M.exp_abs()
    y = abs(y) + 1.0
    support = support + g.roots(y)  # the roots are always support points
    r = env.gars_minorant(g, y, support)
    assert env.check_minorant_pw(r, g, y, -6, 6, 2000)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6, unique=True), st.floats(-4, 4),
       st.sampled_from([1.0, -1.0]), st.sampled_from([1.0, -1.0]))
def test_gars_minorants_exponential(support, y, rate, scale):
    g = M.exponential(rate, scale)
    support = support + g.roots(y)
    r = env.gars_minorant(g, y, support)
    assert env.check_minorant_pw(r, g, y, -4, 4, 2000)
