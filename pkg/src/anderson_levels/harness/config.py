"""Strict JSON experiment configuration."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Any

from ..model import LAWS, DisorderSpec

DEFAULT_SEED = 12345
DEFAULT_DISORDER = {"law": "uniform", "a": 0.0, "b": 4.0}

COMMON_DEFAULTS = {"seed": DEFAULT_SEED, "disorder": DEFAULT_DISORDER}
# keys that affect how a run executes but never what it computes
EXECUTION_KEYS = ("workers", "output_dir")

EXPERIMENTS: dict[str, dict[str, Any]] = {
    "dirichlet-oracle": {"n_max": 200, "gap_n_max": 10000},
    "dos": {"d": 1, "L": 500, "realizations": 100, "h": 0.05, "grid": None},
    "wegner": {"d": 1, "L": 100, "realizations": 2000, "J": [1.9, 2.1]},
    "minami": {"d": 1, "L": 100, "realizations": 10000, "J": [1.95, 2.05], "K": None},
    "decorrelation": {"d": 1, "L": 300, "alpha": 0.7, "E": 0.5, "E_prime": 3.5, "realizations": 50000},
    "poisson": {
        "d": 1,
        "L": 1000,
        "E": 2.0,
        "realizations": 300,
        "windows": [[-1.0, 1.0]],
        "spacing_window": [-10.0, 10.0],
        "h": 0.05,
        "dos_realizations": 200,
        "nu_min": 0.01,
    },
    "independence": {
        "d": 1,
        "L": 1000,
        "E": 0.5,
        "E_prime": 3.5,
        "realizations": 500,
        "window": [-1.0, 1.0],
        "window_prime": [-1.0, 1.0],
        "probes": [0.5, 1.0, 2.0],
        "h": 0.05,
        "dos_realizations": 200,
        "nu_min": 0.01,
    },
    "localization": {"d": 1, "L": 500, "energy_window": [0.3, 0.7], "realizations": 2},
    "perturbation-checks": {
        "d": 1,
        "L": 50,
        "realizations": 50,
        "fd_samples": 20,
        "hessian_instances": 20,
        "sign_patterns": 200,
        "minor_trials": 1000,
        "minor_n_max": 50,
    },
    "box-matching": {"d": 1, "L": 400, "ell": [50, 100], "epsilon": 0.3, "energy_window": [0.4, 0.6], "realizations": 8},
}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    seed: int
    disorder: dict
    workers: int | None = None
    output_dir: str | None = None
    filled_defaults: list = field(default_factory=list)

    def __getattr__(self, name):
        params = self.__dict__.get("params", {})
        if name in params:
            return params[name]
        raise AttributeError(name)

    def disorder_spec(self, seed: int | None = None) -> DisorderSpec:
        return DisorderSpec(self.disorder["law"], self.disorder["a"], self.disorder["b"], self.seed if seed is None else seed)

    def echo(self) -> dict:
        """Everything that determines the results, defaults included."""
        return {"experiment": self.experiment, "seed": self.seed, "disorder": dict(self.disorder), **self.params}


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x):
    return (isinstance(x, (int, float))) and not isinstance(x, bool)


def _need(cond, path, msg):
    if not cond:
        raise ConfigError(path, msg)


def _interval(value, path, allow_empty=False):
    _need(isinstance(value, list) and len(value) == 2 and all(_is_num(v) for v in value), path, "must be a [lo, hi] pair of numbers")
    lo, hi = float(value[0]), float(value[1])
    _need(lo <= hi if allow_empty else lo < hi, path, f"needs lo < hi, got [{lo}, {hi}]")
    return [lo, hi]


def _positive_int(value, path, minimum=1):
    _need(_is_int(value) and value >= minimum, path, f"must be an integer >= {minimum}, got {value!r}")
    return int(value)


def _validate_disorder(raw) -> dict:
    _need(isinstance(raw, dict), "disorder", "must be an object")
    for key in raw:
        _need(key in ("law", "a", "b"), f"disorder.{key}", "unknown key")
    out = dict(DEFAULT_DISORDER)
    out.update(raw)
    _need(out["law"] in LAWS, "disorder.law", f"must be one of {list(LAWS)}, got {out['law']!r}")
    _need(_is_num(out["a"]), "disorder.a", "must be a number")
    _need(_is_num(out["b"]), "disorder.b", "must be a number")
    _need(out["a"] < out["b"], "disorder", f"needs a < b, got a={out['a']}, b={out['b']}")
    out["a"] = float(out["a"])
    out["b"] = float(out["b"])
    return out


def _validate_params(name: str, p: dict) -> None:
    if "d" in p:
        p["d"] = _positive_int(p["d"], "d")
    if "L" in p:
        if name == "decorrelation" and isinstance(p["L"], list):
            _need(p["L"], "L", "must be a non-empty list")
            p["L"] = [_positive_int(v, f"L[{i}]") for i, v in enumerate(p["L"])]
        else:
            p["L"] = _positive_int(p["L"], "L")
    if "realizations" in p:
        p["realizations"] = _positive_int(p["realizations"], "realizations")
    for key in ("dos_realizations", "fd_samples", "hessian_instances", "sign_patterns", "minor_trials"):
        if key in p:
            p[key] = _positive_int(p[key], key)
    for key in ("n_max", "gap_n_max"):
        if key in p:
            p[key] = _positive_int(p[key], key, 2)
    if "minor_n_max" in p:
        p["minor_n_max"] = _positive_int(p["minor_n_max"], "minor_n_max", 2)
    if "alpha" in p:
        _need(_is_num(p["alpha"]) and 0 < p["alpha"] < 1, "alpha", f"must lie in (0, 1), got {p['alpha']!r}")
    for key in ("E", "E_prime"):
        if key in p:
            _need(_is_num(p[key]), key, "must be a number")
            p[key] = float(p[key])
    for key in ("h", "epsilon"):
        if key in p:
            _need(_is_num(p[key]) and p[key] > 0, key, f"must be positive, got {p[key]!r}")
    if "nu_min" in p:
        _need(_is_num(p["nu_min"]) and p["nu_min"] >= 0, "nu_min", "must be a nonnegative number")
    for key in ("J", "window", "window_prime", "spacing_window", "energy_window"):
        if key in p:
            p[key] = _interval(p[key], key)
    if "K" in p:
        if p["K"] is None:
            p["K"] = list(p["J"])
        p["K"] = _interval(p["K"], "K")
        _need(p["K"][0] <= p["J"][0] and p["J"][1] <= p["K"][1], "K", "must contain J")
    if "windows" in p:
        _need(isinstance(p["windows"], list) and p["windows"], "windows", "must be a non-empty list of [lo, hi] pairs")
        p["windows"] = [_interval(w, f"windows[{i}]") for i, w in enumerate(p["windows"])]
        ordered = sorted(p["windows"])
        for a, b in zip(ordered, ordered[1:]):
            _need(b[0] >= a[1], "windows", "must be pairwise disjoint")
    if "probes" in p:
        _need(isinstance(p["probes"], list) and p["probes"] and all(_is_num(t) and t >= 0 for t in p["probes"]), "probes", "must be a non-empty list of nonnegative numbers")
        p["probes"] = [float(t) for t in p["probes"]]
    if "grid" in p and p["grid"] is not None:
        g = p["grid"]
        _need(isinstance(g, list) and len(g) == 3 and _is_num(g[0]) and _is_num(g[1]) and _is_int(g[2]) and g[0] < g[1] and g[2] >= 2, "grid", "must be [lo, hi, num] with lo < hi and num >= 2")
    if "ell" in p:
        ells = p["ell"] if isinstance(p["ell"], list) else [p["ell"]]
        _need(ells and all(_is_int(e) and e >= 1 for e in ells), "ell", "must be a positive integer or a list of them")
        p["ell"] = [int(e) for e in ells]
        for e in p["ell"]:
            _need(round(e * (1 + p["epsilon"])) <= p["L"], "ell", f"sub-box half-side round({e}*(1+epsilon)) exceeds L={p['L']}")


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from exc
    return config_from_dict(raw)


def config_from_dict(raw) -> ExperimentConfig:
    _need(isinstance(raw, dict), "<root>", "config must be a JSON object")
    _need("experiment" in raw, "experiment", "missing required key")
    name = raw["experiment"]
    _need(name in EXPERIMENTS, "experiment", f"unknown experiment {name!r}; expected one of {sorted(EXPERIMENTS)}")
    allowed = set(EXPERIMENTS[name]) | set(COMMON_DEFAULTS) | set(EXECUTION_KEYS) | {"experiment"}
    for key in raw:
        _need(key in allowed, key, f"unknown key for experiment {name!r}")
    params = copy.deepcopy(EXPERIMENTS[name])
    filled = sorted(k for k in params if k not in raw)
    for key in EXPERIMENTS[name]:
        if key in raw:
            params[key] = copy.deepcopy(raw[key])
    seed = raw.get("seed", DEFAULT_SEED)
    _need(_is_int(seed) and 0 <= seed < 2**64, "seed", "must be an unsigned 64-bit integer")
    if "seed" not in raw:
        filled.append("seed")
    disorder = _validate_disorder(raw.get("disorder", {}))
    if "disorder" not in raw:
        filled.append("disorder")
    workers = raw.get("workers")
    if workers is not None:
        workers = _positive_int(workers, "workers")
    out_dir = raw.get("output_dir")
    _need(out_dir is None or isinstance(out_dir, str), "output_dir", "must be a string")
    _validate_params(name, params)
    return ExperimentConfig(name, params, int(seed), disorder, workers, out_dir, sorted(filled))
