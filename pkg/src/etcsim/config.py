"""Run configuration: a small line-oriented config format and its schema.

The format is sections in brackets, ``key = value`` pairs, and ``#``
comments.  Unknown sections or keys are rejected with the offending line
number, values are typed per key, and omitted keys take defaults, so an
empty file is a complete configuration.  The effective configuration
serializes back to canonical text; parsing that text reproduces the config
exactly (floats render with repr, which round-trips).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable

from .bench import BenchConfig
from .certificates import IssCertificate, PowerLaw, example_vi_certificate
from .hybrid import SolverConfig
from .policies import (
    EtaPolicyParams,
    TriggerPolicy,
    WlPolicyParams,
    eta_policy,
    iss_policy,
    periodic_policy,
    wl_policy,
)
from .systems import SampledLoop, example_vi_loop

__all__ = [
    "ConfigError",
    "ParseError",
    "UnknownKeyError",
    "ValueTypeError",
    "Config",
    "parse_config",
    "render_config",
    "config_echo_lines",
    "build_certificate",
    "build_loop",
    "build_policy",
    "build_solver_config",
    "build_bench_config",
]

MODELS = ("example_vi",)
POLICY_KINDS = ("iss", "wl", "eta_threshold", "periodic")


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is set when a source line is at fault."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ParseError(ConfigError):
    """The text is not well-formed section/key-value syntax."""


class UnknownKeyError(ConfigError):
    """A section or key is not part of the schema."""


class ValueTypeError(ConfigError):
    """A value does not parse as its key's type or is out of range."""


@dataclass(frozen=True)
class Config:
    """The effective (defaulted) configuration of one command."""

    model: str = "example_vi"
    d: float = 0.5
    x0: float = 1.0
    kind: str = "eta_threshold"
    sigma: float = 0.5
    sigma_bar: float = 1e-3
    epsilon: float = 1e-6
    eta0: float = 1.0
    delta_gain: float = 0.5
    period: float = 0.368
    t_end: float = 20.0
    h: float = 1e-3
    event_tol: float = 1e-9
    max_jumps: int = 100_000
    n_runs: int = 200
    seed: int = 42
    x0_min: float = -1.0
    x0_max: float = 1.0
    d_min: float = 0.0
    d_max: float = 1.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"kind must be one of {POLICY_KINDS}, got {self.kind!r}")
        for name in ("d", "x0", "sigma", "sigma_bar", "epsilon", "eta0", "delta_gain",
                     "period", "t_end", "h", "event_tol", "x0_min", "x0_max",
                     "d_min", "d_max"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if not 0.0 < self.sigma < 1.0:
            raise ConfigError("sigma must lie in (0, 1)")
        if not 0.0 < self.sigma_bar < 1.0:
            raise ConfigError("sigma_bar must lie in (0, 1)")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.eta0 < 0.0:
            raise ConfigError("eta0 must be nonnegative")
        if not self.period > 0.0:
            raise ConfigError("period must be positive")
        if not self.t_end > 0.0:
            raise ConfigError("t_end must be positive")
        if not self.h > 0.0:
            raise ConfigError("h must be positive")
        if not 0.0 < self.event_tol < self.h:
            raise ConfigError("event_tol must satisfy 0 < event_tol < h")
        if self.max_jumps < 1:
            raise ConfigError("max_jumps must be >= 1")
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        if self.x0_max < self.x0_min:
            raise ConfigError("x0_max must be >= x0_min")
        if self.d_max < self.d_min:
            raise ConfigError("d_max must be >= d_min")


def _parse_int(raw: str) -> int:
    return int(raw, 10)


_SCHEMA: dict[str, dict[str, tuple[str, Callable]]] = {
    "system": {
        "model": ("model", str),
        "d": ("d", float),
        "x0": ("x0", float),
    },
    "policy": {
        "kind": ("kind", str),
        "sigma": ("sigma", float),
        "sigma_bar": ("sigma_bar", float),
        "epsilon": ("epsilon", float),
        "eta0": ("eta0", float),
        "delta_gain": ("delta_gain", float),
        "period": ("period", float),
    },
    "sim": {
        "t_end": ("t_end", float),
        "h": ("h", float),
        "event_tol": ("event_tol", float),
        "max_jumps": ("max_jumps", _parse_int),
    },
    "bench": {
        "n_runs": ("n_runs", _parse_int),
        "seed": ("seed", _parse_int),
        "x0_min": ("x0_min", float),
        "x0_max": ("x0_max", float),
        "d_min": ("d_min", float),
        "d_max": ("d_max", float),
    },
}


def parse_config(text: str) -> Config:
    """Parse config text; omitted keys default, bad lines raise with their number."""
    values: dict[str, object] = {}
    section: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError("unterminated section header", lineno)
            name = line[1:-1].strip()
            if name not in _SCHEMA:
                raise UnknownKeyError(f"unknown section [{name}]", lineno)
            section = name
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ParseError("key-value pair before any section header", lineno)
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in _SCHEMA[section]:
            raise UnknownKeyError(f"unknown key {key!r} in section [{section}]", lineno)
        attr, conv = _SCHEMA[section][key]
        if conv is str:
            value: object = raw_value
        else:
            try:
                value = conv(raw_value)
            except ValueError:
                kind = "an integer" if conv is _parse_int else "a number"
                raise ValueTypeError(f"{key} expects {kind}, got {raw_value!r}", lineno) from None
            if conv is float and not math.isfinite(value):
                raise ValueTypeError(f"{key} must be finite, got {raw_value!r}", lineno)
        values[attr] = value
    try:
        return Config(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(cfg: Config) -> str:
    """Canonical text of the effective config; parse_config inverts it."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (attr, _) in keys.items():
            lines.append(f"{key} = {_format_value(getattr(cfg, attr))}")
    return "\n".join(lines) + "\n"


def config_echo_lines(cfg: Config) -> list[str]:
    """The effective config as comment-block lines for output headers."""
    return render_config(cfg).splitlines()


def build_certificate(cfg: Config) -> IssCertificate:
    return example_vi_certificate(cfg.sigma)


def build_loop(cfg: Config, d: float | None = None) -> SampledLoop:
    return example_vi_loop(cfg.d if d is None else d)


def build_policy(cfg: Config, cert: IssCertificate | None = None,
                 loop: SampledLoop | None = None) -> TriggerPolicy:
    cert = cert if cert is not None else build_certificate(cfg)
    loop = loop if loop is not None else build_loop(cfg)
    if cfg.kind == "iss":
        return iss_policy(cert)
    if cfg.kind == "wl":
        params = WlPolicyParams(
            sigma_bar=cfg.sigma_bar, alpha_bar=cert.alpha.coeff, epsilon=cfg.epsilon
        )
        return wl_policy(cert, params, loop)
    if cfg.kind == "eta_threshold":
        params = EtaPolicyParams(delta=PowerLaw(cfg.delta_gain, 1.0), eta0=cfg.eta0)
        return eta_policy(cert, params, n_x=loop.n_x, n_e=loop.n_e)
    return periodic_policy(cfg.period)


def build_solver_config(cfg: Config) -> SolverConfig:
    return SolverConfig(
        h=cfg.h, event_tol=cfg.event_tol, t_end=cfg.t_end, max_jumps=cfg.max_jumps
    )


def build_bench_config(cfg: Config) -> BenchConfig:
    return BenchConfig(
        n_runs=cfg.n_runs,
        t_end=cfg.t_end,
        seed=cfg.seed,
        x0_range=(cfg.x0_min, cfg.x0_max),
        d_range=(cfg.d_min, cfg.d_max),
        sigma=cfg.sigma,
        epsilon=cfg.epsilon,
        delta_gain=cfg.delta_gain,
        h=cfg.h,
        event_tol=cfg.event_tol,
        max_jumps=cfg.max_jumps,
    )
