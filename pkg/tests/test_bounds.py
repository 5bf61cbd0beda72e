import math

import numpy as np
import pytest

from garsamp import bounds as B
from garsamp import model as M
from garsamp.errors import ContractError, ParameterError

from conftest import example1_potential, grid_min

# independent oracle: the grid minimum of the hand-written potential
X_OPT, V_OPT = grid_min(example1_potential, -1.6, 0.7)


def test_grid_oracle_value():
    assert V_OPT == pytest.approx(3.78, abs=0.01)


def test_linear_fn_helpers():
    line = B.LinearFn.through(0.0, 1.0, 2.0, 5.0)
    assert (line.a, line.b) == pytest.approx((2.0, 1.0))
    t = B.LinearFn.tangent(3.0, 9.0, 6.0)  # tangent of x^2 at 3
    assert (t.a, t.b) == pytest.approx((6.0, -9.0))


def test_bm1_lines_match_hand_chords(ex1):
    rep = B.bm1_bound(ex1)
    r1, r2 = rep.regions[0].lines
    lo, hi = -math.log(5), math.log(2)
    # case 2 for exp(x) with y=2: chord from max(I) (the estimate itself) to min(I)
    a1 = (math.exp(hi) - math.exp(lo)) / (hi - lo)
    assert r1.a == pytest.approx(a1)
    assert r1.b == pytest.approx(math.exp(lo) - a1 * lo)
    a2 = (math.exp(-hi) - math.exp(-lo)) / (hi - lo)
    assert r2.a == pytest.approx(a2)
    # rounded lines quoted for this example: 0.78x + 1.45 and -1.95x + 1.85
    assert r1.a == pytest.approx(0.78, abs=0.01) and r1.b == pytest.approx(1.45, abs=0.01)
    assert r2.a == pytest.approx(-1.95, abs=0.01) and r2.b == pytest.approx(1.85, abs=0.01)


def test_bm1_minorant_conditions(ex1):
    rep = B.bm1_bound(ex1)
    reg = rep.regions[0]
    for line, g, y in zip(reg.lines, ex1.nonlinearities, ex1.y):
        assert B.check_minorant(line, g.f, y, reg.interval, n=10_000)


def test_bm1_value(ex1):
    rep = B.bm1_bound(ex1)
    assert rep.gamma == pytest.approx(2.89, abs=0.01)
    assert rep.gamma <= V_OPT
    assert -math.log(5) <= rep.minimizer <= math.log(2)


def test_bm2_monotone_and_converges(ex1):
    vals = [B.bm2_bound(ex1, k_max=k).gamma for k in range(0, 13)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    assert vals[3] == pytest.approx(3.77, abs=0.01)
    assert vals[-1] == pytest.approx(V_OPT, abs=1e-4)
    assert vals[-1] <= V_OPT + 1e-9


def test_quadratic_bound_closed_form():
    lines = [B.LinearFn(1.0, 0.0), B.LinearFn(2.0, 1.0)]
    y = [1.0, 2.0]
    g2, x = B.quadratic_bound(lines, y)
    # minimise (1-x)^2 + (1-2x)^2 -> x = 3/5, value 1/5
    assert x == pytest.approx(0.6)
    assert g2 == pytest.approx(0.2)


def test_quadratic_model_bound(ex1):
    q = B.quadratic_model_bound(ex1)
    assert q.gamma == pytest.approx(2.79, abs=0.01)


def test_transform_bound_example1(ex1):
    r_inv = lambda v: -math.log(math.sqrt(v) + 1) + math.sqrt(v) + 1
    rep = B.transform_model_bound(ex1, r_inv)
    assert rep.gamma == pytest.approx(1.68, abs=0.01)
    assert rep.gamma <= V_OPT


def test_transform_rejects_decreasing():
    with pytest.raises(ContractError):
        B.generic_transform_bound(1.0, lambda v: -v)


def test_lp_transform():
    assert B.lp_transform_bound(4.0, 1.0, 3) == pytest.approx(2.0)
    assert B.lp_transform_bound(4.0, 4.0, 2) == pytest.approx(2 ** -1 * 16.0)
    with pytest.raises(ParameterError):
        B.lp_transform_bound(-1.0, 2.0, 2)


def test_lp_bound_sound_on_l1_model():
    m = M.ObservationModel((2.0, 5.0), (M.exponential(1.0), M.exponential(-1.0)), (M.lp(1.0), M.lp(1.0)))
    gamma = B.lp_model_bound(m, 1.0).gamma
    xs = np.linspace(-3, 3, 100_001)
    assert gamma <= float(np.min(M.system_potential(m, xs))) + 1e-9


def test_check_R():
    R = lambda v: v
    assert B.check_R(R, [M.quadratic(), M.quadratic()])
    assert not B.check_R(lambda v: 0.5 * v, [M.quadratic(), M.quadratic()])


def test_tangent_bound(ex1):
    assert B.convex_tangent_bound(ex1) == pytest.approx(1.61, abs=0.01)
    assert B.tangent_model_bound(ex1).gamma <= V_OPT


def test_tangent_needs_convex_marginals():
    v = M.MarginalPotential(lambda t: np.sqrt(np.abs(np.asarray(t))), lambda t: np.sign(t), convex=False)
    m = M.ObservationModel((1.0,), (M.linear(1.0),), (v,))
    with pytest.raises(ContractError):
        B.convex_tangent_bound(m)


def test_minimize_convex_1d():
    x, v = B.minimize_convex_1d(lambda t: (t - 1.3) ** 2 + 2, -5, 5)
    # a quadratic is flat to rounding within ~sqrt(eps) of its minimum
    assert x == pytest.approx(1.3, abs=1e-7) and v == pytest.approx(2.0, abs=1e-14)
    x, v = B.minimize_convex_1d(lambda t: t, 0, 1)  # boundary minimum
    assert x == pytest.approx(0.0, abs=1e-8)


def test_bound_report_check_sound(ex1):
    assert B.bm2_bound(ex1).check_sound(ex1, -5, 5)
    bogus = B.BoundReport("fake", V_OPT + 1, B.bm1_bound(ex1).regions)
    assert not bogus.check_sound(ex1, -5, 5)


def test_non_monotone_model_regions(ex2):
    rep = B.bm1_bound(ex2)
    assert len(rep.regions) == 2
    xs = np.linspace(-4, 4, 200_001)
    vmin = float(np.min(M.system_potential(ex2, xs)))
    assert rep.gamma <= vmin + 1e-9
    for k in (1, 3, 6):
        assert B.bm2_bound(ex2, k_max=k).gamma <= vmin + 1e-9


def test_minimize_convex_1d_extended_values():
    # finite only on a narrow window that both golden-section probes miss
    f = lambda t: (t - 0.9) ** 2 if 0.85 < t < 0.95 else math.inf  # noqa: E731
    x, v = B.minimize_convex_1d(f, -10, 10)
    assert x == pytest.approx(0.9, abs=1e-6) and v < 1e-10
    x, v = B.minimize_convex_1d(lambda t: math.inf, 0, 1)
    assert v == math.inf
