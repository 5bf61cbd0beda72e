import copy
import json

import numpy as np
import pytest

from garsamp import model as M
from garsamp.errors import ConfigError
from garsamp.harness.config import builtin_config_path, load_config, parse_config

from conftest import example1_potential, example2_potential

SCALAR = {
    "name": "t",
    "observations": [
        {"y": 1.0,
         "nonlinearity": {"expression": "exp(x)", "monotone": [1], "curvature": [1]},
         "noise": {"family": "gaussian", "variance": 0.5}},
    ],
    "prior": {"family": "gaussian", "mu": 0.0, "variance": 1.0},
    "domain": [-8, 8],
}


def test_builtin_example1_matches_hand_written(cfg1):
    m = cfg1.build_model()
    assert m.y == pytest.approx((2.0, 5.0))
    xs = np.linspace(-2, 3, 41)
    np.testing.assert_allclose(M.potential_or_inf(m.without_prior(), xs), example1_potential(xs), rtol=1e-12)


def test_builtin_example2_constants(cfg2):
    xs = np.linspace(-3, 3, 41)
    for a in (0.2, 2.0):
        m = cfg2.build_model(alpha=a)
        np.testing.assert_allclose(M.potential_or_inf(m, xs), example2_potential(xs, a), rtol=1e-12)
    with pytest.raises(ConfigError):
        cfg2.build_model(beta=1.0)


def test_builtin_example3(cfg3):
    net = cfg3.network()
    assert net.sensors == ((0.0, 0.0), (2.0, 2.0))
    with pytest.raises(ConfigError):
        cfg3.build_model()


def test_expression_config_equals_builtin():
    cfg = parse_config(SCALAR)
    m = cfg.build_model()
    ref = M.ObservationModel((1.0,), (M.exponential(1.0),), (M.gaussian(0.5),), prior=M.Prior(M.gaussian(1.0)))
    xs = np.linspace(-3, 2, 21)
    np.testing.assert_allclose(M.potential_or_inf(m, xs), M.potential_or_inf(ref, xs), rtol=1e-12)


def test_inverted_curvature_rejected():
    bad = copy.deepcopy(SCALAR)
    bad["observations"][0]["nonlinearity"]["curvature"] = [-1]
    with pytest.raises(ConfigError, match="verification"):
        parse_config(bad)


def test_inverted_monotonicity_rejected():
    bad = copy.deepcopy(SCALAR)
    bad["observations"][0]["nonlinearity"]["monotone"] = [-1]
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_expression_noise_family():
    doc = copy.deepcopy(SCALAR)
    doc["observations"][0]["noise"] = {"family": "expression", "expression": "t^2", "convex": True}
    m = parse_config(doc).build_model()
    assert M.potential_or_inf(m.without_prior(), np.log(3.0)) == pytest.approx(4.0)


@pytest.mark.parametrize("mutate", [
    lambda d: d["observations"][0].pop("y"),
    lambda d: d["observations"][0]["noise"].update(family="weird"),
    lambda d: d["observations"][0]["nonlinearity"].update(expression="exp(x"),
    lambda d: d["observations"][0]["nonlinearity"].pop("monotone"),
    lambda d: d["observations"][0]["noise"].update(variance="nope"),
    lambda d: d.update(kind="other"),
    lambda d: d.update(constants={"a": "b"}),
])
def test_malformed_configs(mutate):
    doc = copy.deepcopy(SCALAR)
    mutate(doc)
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text(json.dumps(SCALAR))
    assert load_config(p).name == "t"


def test_builtin_paths_exist():
    for i in (1, 2, 3):
        assert builtin_config_path(i).is_file()
    with pytest.raises(ConfigError):
        builtin_config_path(4)


def test_r_inverse(cfg1):
    r_inv = cfg1.r_inverse()
    # R^-1(u) is the gamma potential evaluated at -sqrt(u)
    assert r_inv(4.0) == pytest.approx(-np.log(3.0) + 3.0)


def test_expression_noise_support_gives_walls():
    doc = copy.deepcopy(SCALAR)
    doc["observations"][0]["noise"] = {"family": "expression", "expression": "t - log(1 + t)",
                                       "support": [-1, None], "convex": True}
    m = parse_config(doc).build_model()
    assert m.potentials[0].support == (-1.0, float("inf"))
    from garsamp import samplers as S
    st = S.gars_init(m)
    xs = np.linspace(-4, 3, 2001)
    V = M.potential_or_inf(m, xs)
    fin = np.isfinite(V)
    assert np.all(np.asarray(st.hull(xs))[fin] <= V[fin] + 1e-9)
