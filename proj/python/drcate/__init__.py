"""Doubly robust CATE estimation with kernel-smoothed pseudo-outcomes."""

import json as _json

from ._drcate import (
    ArgumentError,
    ConfigError,
    ConvergenceError,
    DegenerateStructureError,
    DrcateError,
    EmptyWindowError,
    ParseError,
    RankError,
    SchemaError,
    check_rates,
    combinations,
    config_hash,
    default_bandwidth,
    generate,
    kernel_eval,
    kernel_moment,
    kernel_roughness,
    true_tau,
    vd,
)
from . import _drcate


def _as_json(config):
    if config is None:
        return "{}"
    if isinstance(config, str):
        return config
    return _json.dumps(config)


def estimate(x, y, d, config=None):
    """Estimate the CATE curve on arrays; column 0 of ``x`` is X1.

    ``config`` is a dict or JSON string in the run-configuration format.
    """
    return _drcate.estimate(x, y, d, _as_json(config))


def simulate(config=None):
    """Run a Monte Carlo study and return its per-grid-point summary."""
    return _drcate.simulate(_as_json(config))


def canonical_config(config):
    return _drcate.canonical_config(_as_json(config))


__all__ = [
    "ArgumentError", "ConfigError", "ConvergenceError", "DegenerateStructureError", "DrcateError",
    "EmptyWindowError", "ParseError", "RankError", "SchemaError", "canonical_config", "check_rates",
    "combinations", "config_hash", "default_bandwidth", "estimate", "generate", "kernel_eval",
    "kernel_moment", "kernel_roughness", "simulate", "true_tau", "vd",
]
