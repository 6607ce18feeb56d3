"""Experiment configuration: a sectioned key-value file plus command-line overrides.

A file holds an optional ``[experiment]`` block (``seed``, ``out``,
``format``) and one block named after the subcommand.  Lists are comma
separated; an integer range may be written ``a:b`` (inclusive) and a
log-spaced grid ``logspace(lo, hi, k)``.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DomainError

__all__ = ["ConfigError", "ExperimentConfig", "SCHEMAS", "load_config", "parse_value"]

SUBCOMMANDS = ("vote", "linreg", "glm", "pate")


class ConfigError(DomainError):
    pass


def _floats(text: str):
    text = text.strip()
    m = re.fullmatch(r"logspace\(\s*([^,]+),\s*([^,]+),\s*(\d+)\s*\)", text)
    if m:
        lo, hi, k = float(m.group(1)), float(m.group(2)), int(m.group(3))
        if not (0 < lo <= hi) or k < 1:
            raise ValueError(f"bad logspace bounds in {text!r}")
        return [float(v) for v in np.geomspace(lo, hi, k)]
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str):
    out = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        if ":" in part:
            a, b = (int(v) for v in part.split(":", 1))
            if b < a:
                raise ValueError(f"empty range {part!r}")
            out.extend(range(a, b + 1))
        else:
            out.append(int(part))
    return out


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _str(text: str) -> str:
    return text.strip()


_PARSERS = {
    "float": float,
    "int": int,
    "floats": _floats,
    "ints": _ints,
    "bool": _bool,
    "str": _str,
}

# key -> (kind, default); default None means optional and unset.
SCHEMAS = {
    "vote": {
        "gaps": ("ints", "0:200"),
        "eps": ("floats", "10"),
        "eps_tilde": ("float", "1"),
        "delta": ("float", "1e-6"),
        "eps_budget": ("float", "1"),
        "trials": ("int", "200"),
    },
    "linreg": {
        "data": ("str", None),
        "target": ("str", None),
        "n": ("int", "200"),
        "d": ("int", "5"),
        "eps": ("floats", "1,2"),
        "delta": ("float", "1e-5"),
        "lambdas": ("floats", "logspace(2.5, 9536.7431640625, 30)"),
        "lambda_fixed": ("float", None),
        "trials": ("int", "10"),
    },
    "glm": {
        "data": ("str", None),
        "target": ("str", None),
        "n": ("int", "500"),
        "d": ("int", "5"),
        "eps": ("floats", "2,4,8"),
        "delta": ("float", "1e-5"),
        "lambdas": ("floats", "2,4,8,16,32,64,128,256,512,1024"),
        "trials": ("int", "10"),
    },
    "pate": {
        "data": ("str", None),
        "K": ("int", "400"),
        "C": ("int", "3"),
        "T": ("int", "200"),
        "regime": ("str", "high"),
        "sigma1": ("floats", "30,60,90,120,150"),
        "sigma_s": ("float", "15"),
        "delta": ("float", "1e-5"),
        "eps_prime": ("float", "10"),
        "trials": ("int", "10"),
    },
}

EXPERIMENT_KEYS = {"seed": ("int", "0"), "out": ("str", None), "format": ("str", "csv")}


def parse_value(kind: str, text: str, where: str):
    try:
        return _PARSERS[kind](text)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: cannot parse {text!r} as {kind} ({exc})") from None


@dataclass
class ExperimentConfig:
    subcommand: str
    seed: int = 0
    out: str | None = None
    format: str = "csv"
    params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]


def _validate(cfg: ExperimentConfig):
    p = cfg.params
    if cfg.format not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg.format!r}")
    if "delta" in p and not (0.0 < p["delta"] < 1.0):
        raise ConfigError(f"delta must be in (0, 1), got {p['delta']}")
    for e in p.get("eps", []) if isinstance(p.get("eps"), list) else []:
        if not (e > 0) or math.isinf(e):
            raise ConfigError(f"every eps must be positive and finite, got {e}")
    if p.get("trials", 1) < 1:
        raise ConfigError("trials must be >= 1")
    if cfg.subcommand == "vote":
        if any(g < 0 for g in p["gaps"]):
            raise ConfigError("gaps must be >= 0")
        if not (p["eps_tilde"] > 0):
            raise ConfigError("eps_tilde must be positive")
    if cfg.subcommand in ("linreg", "glm"):
        if not p["lambdas"] or any(lam <= 0 for lam in p["lambdas"]):
            raise ConfigError("lambdas must be a nonempty list of positive values")
        if p.get("data") is not None and p.get("target") is None:
            raise ConfigError("a data file needs a target column")
        if p.get("data") is not None and not Path(p["data"]).is_file():
            raise ConfigError(f"data file {p['data']!r} does not exist")
    if cfg.subcommand == "pate":
        if p["regime"] not in ("high", "low"):
            raise ConfigError(f"regime must be high or low, got {p['regime']!r}")
        if any(s <= 0 for s in p["sigma1"]):
            raise ConfigError("sigma1 values must be positive")
        if p.get("data") is not None and not Path(p["data"]).is_file():
            raise ConfigError(f"data file {p['data']!r} does not exist")


def load_config(subcommand: str, path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read ``path`` (may be None for all defaults) and apply string ``overrides``."""
    if subcommand not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
    schema = SCHEMAS[subcommand]
    for section in parser.sections():
        allowed = EXPERIMENT_KEYS if section == "experiment" else SCHEMAS.get(section)
        if allowed is None:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
    overrides = dict(overrides or {})
    for key in overrides:
        if key not in schema and key not in EXPERIMENT_KEYS:
            raise ConfigError(f"option --{key} does not apply to {subcommand}")

    def resolve(section, key, kind, default):
        if key in overrides and overrides[key] is not None:
            return parse_value(kind, str(overrides[key]), f"--{key}")
        if parser.has_option(section, key):
            return parse_value(kind, parser.get(section, key), f"[{section}] {key}")
        return None if default is None else parse_value(kind, default, f"default {key}")

    exp = {k: resolve("experiment", k, kind, d) for k, (kind, d) in EXPERIMENT_KEYS.items()}
    params = {k: resolve(subcommand, k, kind, d) for k, (kind, d) in schema.items()}
    cfg = ExperimentConfig(subcommand, exp["seed"], exp["out"], exp["format"], params)
    _validate(cfg)
    return cfg
