"""Experiment configuration: INI sections with a closed set of keys.

Every key is validated before any computation starts; unknown sections and
keys are errors. Lists are comma separated.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Optional

from .nonlinearity import BUILTINS
from .solver import SolveConfig

SUBCOMMANDS = ("layer", "minimize", "saddle", "energy-scan", "hhalf", "symmetry", "extend",
               "selftest")

# section -> key -> parser
_float = float
_int = int


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _choice(*options):
    def parse(text: str) -> str:
        text = text.strip()
        if text not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return text
    return parse


SCHEMA = {
    "nonlinearity": {"name": _choice(*BUILTINS), "coefficients": _floats},
    "domain": {"n": _int, "R": _float, "radii": _floats, "height": _float,
               "base_shape": _choice("box", "ball"), "h": _float, "m": _int, "L": _float,
               "direction": _floats, "source": _choice("explicit", "minimized")},
    "solver": {"max_iter": _int, "residual_tol": _float, "energy_tol": _float,
               "armijo_c": _float, "backtrack": _float, "max_backtracks": _int,
               "init": _choice("tanh", "data", "zero", "harmonic"), "lower": _float,
               "upper": _float},
    "hhalf": {"geometry": _choice("interval", "cylinder-boundary"), "n": _int, "h": _float,
              "eps": _floats, "c0": _float},
    "extend": {"kind": _choice("poisson", "mollifier"), "lambda_max": _float, "lambda_step": _float,
               "half_width": _float,
               "h": _float},
    "run": {"seed": _int, "threads": _int},
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    subcommand: str
    nonlinearity: str = "sine"
    coefficients: Optional[list] = None
    n: int = 1
    R: float = 8.0
    radii: list = field(default_factory=lambda: [4.0, 8.0, 16.0, 32.0])
    height: Optional[float] = None
    base_shape: str = "box"
    h: float = 0.05
    m: int = 1
    L: float = 8.0
    direction: Optional[list] = None
    source: str = "explicit"
    solver: SolveConfig = field(default_factory=SolveConfig)
    hhalf_geometry: str = "interval"
    hhalf_n: int = 1
    hhalf_h: float = 2.0 ** -10
    eps: list = field(default_factory=lambda: [2.0 ** -k for k in range(3, 9)])
    c0: float = 1.0
    extend_kind: str = "poisson"
    lambda_max: float = 2.0
    lambda_step: float = 0.25
    half_width: float = 20.0
    extend_h: float = 0.01
    out: str = "."
    seed: int = 0
    threads: int = 0

    def validate(self) -> "ExperimentConfig":
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.nonlinearity == "cubic-custom" and not self.coefficients:
            raise ConfigError("cubic-custom requires nonlinearity.coefficients")
        if self.n < 1 or self.n > 3:
            raise ConfigError("domain.n must be 1, 2 or 3")
        for name in ("R", "h", "L", "hhalf_h", "extend_h", "half_width", "c0"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ConfigError(f"{name} must be positive")
        if self.height is not None and self.height <= 0:
            raise ConfigError("domain.height must be positive")
        if self.m < 1:
            raise ConfigError("domain.m must be at least 1")
        if any(r <= 2 for r in self.radii):
            raise ConfigError("every radius must exceed 2")
        if sorted(self.radii) != list(self.radii) or len(set(self.radii)) != len(self.radii):
            raise ConfigError("radii must be strictly increasing")
        if any(not 0 < e < 0.5 for e in self.eps):
            raise ConfigError("every eps must lie in (0, 1/2)")
        if not (self.lambda_max > 0 and self.lambda_step > 0):
            raise ConfigError("extend.lambda_max and extend.lambda_step must be positive")
        ratio = self.lambda_max / self.lambda_step
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError("extend.lambda_max must be a multiple of extend.lambda_step")
        if self.direction is not None:
            if len(self.direction) != self.n or math.hypot(*self.direction) == 0:
                raise ConfigError("domain.direction needs n components, not all zero")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")
        return self


_TARGETS = {
    ("nonlinearity", "name"): "nonlinearity",
    ("nonlinearity", "coefficients"): "coefficients",
    ("hhalf", "geometry"): "hhalf_geometry",
    ("hhalf", "n"): "hhalf_n",
    ("hhalf", "h"): "hhalf_h",
    ("hhalf", "eps"): "eps",
    ("hhalf", "c0"): "c0",
    ("extend", "kind"): "extend_kind",
    ("extend", "half_width"): "half_width",
    ("extend", "h"): "extend_h",
}


def parse_ini(text: str, subcommand: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}".replace("\n", " ")) from exc
    cfg = ExperimentConfig(subcommand)
    solver_kwargs = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            try:
                value = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {exc}") from exc
            if section == "solver":
                solver_kwargs[key] = value
            elif (section, key) in _TARGETS:
                setattr(cfg, _TARGETS[(section, key)], value)
            else:
                setattr(cfg, key, value)
    if solver_kwargs:
        try:
            cfg.solver = SolveConfig(**solver_kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return cfg.validate()
