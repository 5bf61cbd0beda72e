"""JSON model configurations.

A scalar config looks like::

    {
      "name": "example1",
      "constants": {"alpha": 0.2},
      "observations": [
        {"y": 2.0,
         "nonlinearity": {"builtin": "exponential", "rate": 1.0},
         "noise": {"family": "gaussian", "variance": 0.5}},
        {"y": 6.0, "shift": "mode",
         "nonlinearity": {"expression": "exp(-x)", "monotone": [-1], "curvature": [1]},
         "noise": {"family": "gamma", "shape": 2, "rate": 1}}
      ],
      "prior": {"family": "gaussian", "mu": 0.0, "variance": 2.0},
      "domain": [-10, 10]
    }

Any numeric parameter may instead name an entry of ``constants``, so a
sweep over ``alpha`` is ``cfg.build_model(alpha=a)``.  ``null`` stands for
an infinite support end.  A config with ``"kind": "sensor_network"``
describes the two-coordinate localisation model instead.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import numpy as np

from .. import model as M
from ..errors import ConfigError, ExpressionDomainError, ExpressionSyntaxError, GarsampError
from ..samplers import SensorNetwork2D
from .expr import parse_expression

NOISE_FAMILIES = ("gaussian", "quadratic", "gamma", "lp", "cosh", "expression")
BUILTIN_NONLINEARITIES = ("identity", "linear", "exponential", "square", "exp_abs")
BUILTIN_CONFIGS = {1: "example1.json", 2: "example2.json", 3: "example3.json"}


def _num(value, constants: Mapping[str, float], what: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{what}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str) and value in constants:
        return float(constants[value])
    raise ConfigError(f"{what}: expected a number or a constant name, got {value!r}")


def _opt_num(value, constants, what, default):
    return default if value is None else _num(value, constants, what)


def _bound(v, default):
    return default if v is None else float(v)


def build_potential(spec: Mapping[str, Any], constants: Mapping[str, float], what: str = "noise") -> M.MarginalPotential:
    """Marginal potential from a ``{"family": ..., ...}`` entry."""
    if not isinstance(spec, Mapping) or "family" not in spec:
        raise ConfigError(f"{what}: needs a 'family'")
    fam = spec["family"]
    try:
        if fam == "gaussian":
            return M.gaussian(_num(spec.get("variance"), constants, f"{what}.variance"))
        if fam == "quadratic":
            return M.quadratic(_opt_num(spec.get("weight"), constants, f"{what}.weight", 1.0))
        if fam == "gamma":
            return M.gamma_shifted(_num(spec.get("shape"), constants, f"{what}.shape"),
                                   _num(spec.get("rate"), constants, f"{what}.rate"))
        if fam == "lp":
            return M.lp(_num(spec.get("p"), constants, f"{what}.p"),
                        _opt_num(spec.get("weight"), constants, f"{what}.weight", 1.0))
        if fam == "cosh":
            return M.cosh_potential(_opt_num(spec.get("weight"), constants, f"{what}.weight", 1.0))
        if fam == "expression":
            text = spec.get("expression")
            e = parse_expression(text, variable="t", constants=constants)
            sup = spec.get("support", [None, None])
            support = (_bound(sup[0], -math.inf), _bound(sup[1], math.inf))
            return M.MarginalPotential(e.safe(np.inf), e.safe_d1(np.nan), convex=bool(spec.get("convex", True)),
                                       name=f"expr({text})", support=support)
    except ExpressionSyntaxError as exc:
        raise ConfigError(f"{what}.expression: {exc}") from exc
    except M.ModelError as exc:
        raise ConfigError(f"{what}: {exc}") from exc
    raise ConfigError(f"{what}: unknown family {fam!r} (expected one of {', '.join(NOISE_FAMILIES)})")


def noise_mode(spec: Mapping[str, Any], constants) -> float:
    """Mode of the raw (uncentred) noise density; only gamma noise is off-centre."""
    if spec.get("family") == "gamma":
        return (_num(spec["shape"], constants, "shape") - 1.0) / _num(spec["rate"], constants, "rate")
    return 0.0


def build_nonlinearity(spec: Mapping[str, Any], constants: Mapping[str, float],
                       what: str = "nonlinearity") -> M.Nonlinearity:
    if not isinstance(spec, Mapping):
        raise ConfigError(f"{what}: expected an object")
    if "builtin" in spec:
        name = spec["builtin"]
        p = lambda key, default=None: _opt_num(spec.get(key), constants, f"{what}.{key}", default)  # noqa: E731
        if name == "identity":
            return M.identity()
        if name == "linear":
            return M.linear(p("slope"), p("intercept", 0.0))
        if name == "exponential":
            return M.exponential(p("rate", 1.0), p("scale", 1.0))
        if name == "square":
            return M.square(p("center", 0.0), p("scale", 1.0))
        if name == "exp_abs":
            return M.exp_abs()
        raise ConfigError(f"{what}: unknown builtin {name!r} (expected one of {', '.join(BUILTIN_NONLINEARITIES)})")
    if "expression" not in spec:
        raise ConfigError(f"{what}: needs 'builtin' or 'expression'")
    try:
        e = parse_expression(spec["expression"], constants=constants)
    except ExpressionSyntaxError as exc:
        raise ConfigError(f"{what}.expression: {exc}") from exc
    breaks = [_num(b, constants, f"{what}.breaks") for b in spec.get("breaks", [])]
    mono = spec.get("monotone")
    curv = spec.get("curvature")
    if mono is None or curv is None:
        raise ConfigError(f"{what}: expression nonlinearities need 'monotone' and 'curvature' flags per branch")
    sup = spec.get("support", [None, None])
    support = (_bound(sup[0], -math.inf), _bound(sup[1], math.inf))
    try:
        return M.Nonlinearity.from_functions(e.safe(np.nan), e.safe_d1(np.nan), _safe_d2(e), breaks,
                                             tuple(int(m) for m in mono), tuple(int(c) for c in curv),
                                             support, name=spec["expression"])
    except M.ModelError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def _safe_d2(e):
    def call(x):
        try:
            return np.asarray(e.d2(np.asarray(x, dtype=float)), dtype=float)
        except ExpressionDomainError:
            return np.full(np.shape(x), np.nan)

    return call


@dataclass
class ModelConfig:
    """Parsed configuration; models are built lazily so constants can be
    overridden per run."""

    name: str
    kind: str
    raw: dict
    constants: dict = field(default_factory=dict)
    experiment: dict = field(default_factory=dict)
    source: Optional[str] = None

    def _consts(self, overrides):
        c = dict(self.constants)
        for k, v in overrides.items():
            if k not in c:
                raise ConfigError(f"unknown constant {k!r}")
            c[k] = float(v)
        return c

    def build_model(self, **overrides) -> M.ObservationModel:
        if self.kind != "scalar":
            raise ConfigError(f"config {self.name!r} is a {self.kind} model, not a scalar one")
        c = self._consts(overrides)
        obs = self.raw.get("observations")
        if not obs:
            raise ConfigError("scalar config needs at least one observation")
        ys, gs, vs = [], [], []
        for i, o in enumerate(obs):
            what = f"observations[{i}]"
            if "y" not in o:
                raise ConfigError(f"{what}: missing 'y'")
            noise = o.get("noise")
            v = build_potential(noise, c, f"{what}.noise")
            shift = o.get("shift", 0.0)
            shift = noise_mode(noise, c) if shift == "mode" else _num(shift, c, f"{what}.shift")
            ys.append(_num(o["y"], c, f"{what}.y") - shift)
            gs.append(build_nonlinearity(o.get("nonlinearity"), c, f"{what}.nonlinearity"))
            vs.append(v)
        prior = None
        if self.raw.get("prior") is not None:
            p = self.raw["prior"]
            prior = M.Prior(build_potential(p, c, "prior"), _opt_num(p.get("mu"), c, "prior.mu", 0.0))
        try:
            return M.ObservationModel(tuple(ys), tuple(gs), tuple(vs), prior=prior,
                                      c_n=_opt_num(self.raw.get("c_n"), c, "c_n", 0.0), name=self.name)
        except M.ModelError as exc:
            raise ConfigError(str(exc)) from exc

    def network(self) -> SensorNetwork2D:
        if self.kind != "sensor_network":
            raise ConfigError(f"config {self.name!r} is not a sensor network")
        r = self.raw
        try:
            sensors = tuple(tuple(float(v) for v in h) for h in r["sensors"])
            y = tuple(float(v) for v in r["y"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"sensor network needs 'sensors' and 'y': {exc}") from exc
        if len(sensors) != len(y) or any(len(h) != 2 for h in sensors):
            raise ConfigError("one 2-D sensor position per observation is required")
        return SensorNetwork2D(sensors, y, float(r.get("noise_weight", 1.0)), float(r.get("prior_weight", 1.0)),
                               tuple(float(v) for v in r.get("prior_mean", (0.0, 0.0))))

    @property
    def domain(self):
        d = self.raw.get("domain", [-10.0, 10.0])
        return float(d[0]), float(d[1])

    def r_inverse(self):
        """``R^-1`` for the transform bound, if the config supplies one."""
        text = self.raw.get("bounds", {}).get("r_inverse")
        if text is None:
            return None
        try:
            return parse_expression(text, constants=self.constants).f
        except ExpressionSyntaxError as exc:
            raise ConfigError(f"bounds.r_inverse: {exc}") from exc

    def bound_option(self, key, default=None):
        return self.raw.get("bounds", {}).get(key, default)

    def verify(self, **overrides) -> list:
        """Grid verification of declared flags; list of problems."""
        if self.kind == "sensor_network":
            self.network()
            return []
        return self.build_model(**overrides).verify()


def parse_config(data: Mapping[str, Any], source: Optional[str] = None, verify: bool = True) -> ModelConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a JSON object")
    kind = data.get("kind", "scalar")
    if kind not in ("scalar", "sensor_network"):
        raise ConfigError(f"unknown kind {kind!r}")
    constants = data.get("constants", {})
    if not isinstance(constants, Mapping) or not all(isinstance(v, (int, float)) for v in constants.values()):
        raise ConfigError("'constants' must map names to numbers")
    cfg = ModelConfig(str(data.get("name", source or "model")), kind, dict(data),
                      {k: float(v) for k, v in constants.items()}, dict(data.get("experiment", {})), source)
    if verify:
        try:
            problems = cfg.verify()
        except GarsampError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"model does not load: {exc}") from exc
        if problems:
            raise ConfigError("declared model flags fail grid verification: " + "; ".join(problems))
    return cfg


def load_config(path: Union[str, Path], verify: bool = True) -> ModelConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(data, str(path), verify)


def builtin_config_path(example: int) -> Path:
    if example not in BUILTIN_CONFIGS:
        raise ConfigError(f"no built-in config for example {example}")
    return Path(str(resources.files("garsamp.configs").joinpath(BUILTIN_CONFIGS[example])))


def builtin_config(example: int, verify: bool = True) -> ModelConfig:
    return load_config(builtin_config_path(example), verify)
