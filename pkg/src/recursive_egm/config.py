"""Flat key-value calibration files with environment-variable overrides.

A config file is a flat YAML (or JSON) mapping such as::

    beta: 0.96
    gamma: 10
    eis: 1.5        # alternative to rho; rho = 1 / eis
    n_m: 100

Any key can be overridden from the environment as ``EZEGM_<KEY>`` (case
insensitive), e.g. ``EZEGM_BETA=0.95``. Environment values win over the
file, which wins over the built-in defaults.
"""

import math
import os

import yaml

from .model import DEFAULT_CURVATURE, make_model

ENV_PREFIX = "EZEGM_"

DEFAULTS = {
    "beta": 0.96,
    "R": 1.02,
    "gamma": 10.0,
    "rho": 2.0 / 3.0,
    "persistence": 0.95,
    "innovation_sd": 0.10,
    "n_states": 10,
    "width": 3.0,
    "n_m": 100,
    "n_a": 100,
    "m_max_multiple": 20.0,
    "curvature": DEFAULT_CURVATURE,
    "conv_tol": 1e-6,
    "max_iters": 2000,
    "howard_k": 1,
    "seed": 0,
}

_TYPES = {k: type(v) for k, v in DEFAULTS.items()}
_TYPES["eis"] = float
_CANONICAL = {k.lower(): k for k in _TYPES}

MODEL_KEYS = ("beta", "R", "gamma", "rho", "persistence", "innovation_sd", "n_states",
              "width", "n_m", "n_a", "m_max_multiple", "curvature", "conv_tol",
              "max_iters")


class ConfigError(ValueError):
    pass


def _coerce(key, value):
    kind = _TYPES[key]
    try:
        if kind is int:
            as_float = float(value)
            if not as_float.is_integer():
                raise ValueError
            return int(as_float)
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r} expects {kind.__name__}, got {value!r}")


def _canonical(key):
    try:
        return _CANONICAL[str(key).lower()]
    except KeyError:
        raise ConfigError(f"unknown config key {key!r}") from None


def parse_mapping(raw):
    """Validate and type a flat mapping; ``eis`` is converted to ``rho``."""
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a flat key-value mapping")
    out = {}
    for key, value in raw.items():
        if isinstance(value, (dict, list)):
            raise ConfigError(f"config key {key!r} must be a scalar")
        name = _canonical(key)
        out[name] = _coerce(name, value)
    if "eis" in out:
        eis = out.pop("eis")
        if eis <= 0:
            raise ConfigError("eis must be positive")
        if "rho" in out and not math.isclose(out["rho"], 1.0 / eis, rel_tol=1e-12):
            raise ConfigError("rho and eis are both given and disagree")
        out["rho"] = 1.0 / eis
    return out


def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    raw = {k[len(ENV_PREFIX):]: v for k, v in environ.items()
           if k.upper().startswith(ENV_PREFIX)}
    return parse_mapping(raw)


def load_config(path=None, environ=None, **overrides):
    """Defaults, then the file at ``path``, then environment, then ``overrides``."""
    cfg = dict(DEFAULTS)
    if path is not None:
        with open(path) as fh:
            cfg.update(parse_mapping(yaml.safe_load(fh)))
    # env rho must beat a file eis, so merge layer by layer
    cfg.update(env_overrides(environ))
    cfg.update(parse_mapping({k: v for k, v in overrides.items() if v is not None}))
    return cfg


def model_from_config(cfg):
    return make_model(**{k: cfg[k] for k in MODEL_KEYS})
