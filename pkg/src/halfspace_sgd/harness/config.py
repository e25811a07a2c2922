"""Declarative run configuration.

A single JSON file describes distribution + network + training (and
optionally a sweep).  Unknown keys anywhere are hard errors so typos
cannot silently fall back to defaults.  The schema is versioned; see
README for the documented layout.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..distributions import (ABSOLUTE_BOUNDARY, TWO_GAUSSIAN, DistributionSpec,
                             absolute_boundary_from_opt, boundary_from_opt)
from ..trainer import BatchMode, NetworkConfig, TrainConfig

SCHEMA_VERSION = 1

_TOP_KEYS = {"version", "distribution", "network", "train", "sweep"}
_DIST_KEYS = {"kind", "gamma0", "b", "opt_lin", "rcn_rate", "cluster_offset", "d"}
_NET_KEYS = {"m", "leaky_slope", "activation", "outer_magnitude",
             "outer_trainable", "use_biases", "depth", "shuffle_outer_signs"}
_TRAIN_KEYS = {"step_size", "iterations", "batch", "validation_size",
               "validation_cadence", "test_size", "loss", "init_variance",
               "seed", "diag_gamma_grid", "enforce_step_size_bound"}
_BATCH_KEYS = {"kind", "size", "epochs"}
_SWEEP_KEYS = {"variable", "values", "seeds"}

_KIND_ALIASES = {
    "two_gaussian": TWO_GAUSSIAN,
    TWO_GAUSSIAN: TWO_GAUSSIAN,
    "absolute_boundary": ABSOLUTE_BOUNDARY,
}

SWEEP_VARIABLES = ("opt_lin", "learning_rate", "init_variance", "width",
                   "activation", "batch_mode", "architecture")
ARCHITECTURES = ("baseline", "bias_trainable_outer", "deep3")


class ConfigError(ValueError):
    pass


def _check_keys(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc
    validate_config(data)
    return data


def validate_config(data: dict):
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(data, _TOP_KEYS, "config")
    if data.get("version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config version {data.get('version')}")
    if "distribution" not in data:
        raise ConfigError("config needs a 'distribution' section")
    _check_keys(data["distribution"], _DIST_KEYS, "distribution")
    _check_keys(data.get("network", {}), _NET_KEYS, "network")
    train = data.get("train", {})
    _check_keys(train, _TRAIN_KEYS, "train")
    if isinstance(train.get("batch"), dict):
        _check_keys(train["batch"], _BATCH_KEYS, "train.batch")
    if "sweep" in data:
        sweep = data["sweep"]
        _check_keys(sweep, _SWEEP_KEYS, "sweep")
        if sweep.get("variable") not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep.variable must be one of {SWEEP_VARIABLES}")
        if not sweep.get("values"):
            raise ConfigError("sweep.values must be a nonempty list")
        if sweep.get("seeds", 10) < 1:
            raise ConfigError("sweep.seeds must be >= 1")


def build_distribution(section: dict) -> DistributionSpec:
    kind = _KIND_ALIASES.get(section.get("kind", "two_gaussian"))
    if kind is None:
        raise ConfigError(f"unknown distribution kind {section.get('kind')!r}")
    if kind == TWO_GAUSSIAN:
        gamma0 = float(section.get("gamma0", 0.5))
        p = float(section.get("rcn_rate", 0.1))
        offset = float(section.get("cluster_offset", 3.0))
        if "opt_lin" in section and "b" in section:
            raise ConfigError("give either 'b' or 'opt_lin', not both")
        if "opt_lin" in section:
            b = boundary_from_opt(gamma0, p, float(section["opt_lin"]), offset)
        else:
            b = float(section.get("b", 2.04))
        return DistributionSpec(kind, gamma0=gamma0, b=b, rcn_rate=p,
                                cluster_offset=offset, d=int(section.get("d", 2)))
    if "opt_lin" in section and "b" in section:
        raise ConfigError("give either 'b' or 'opt_lin', not both")
    if "opt_lin" in section:
        b = absolute_boundary_from_opt(float(section["opt_lin"]))
    else:
        b = float(section.get("b", 1.0))
    return DistributionSpec(kind, b=b, d=2)


def build_network(section: dict, paper_scale: bool = False,
                  d: int = 2) -> NetworkConfig:
    sec = dict(section)
    if paper_scale:
        sec["m"] = max(int(sec.get("m", 200)), 1000)
    return NetworkConfig(
        m=int(sec.get("m", 200)),
        d=d,
        leaky_slope=float(sec.get("leaky_slope", 0.1)),
        activation=str(sec.get("activation", "leaky_relu")),
        outer_magnitude=sec.get("outer_magnitude"),
        outer_trainable=bool(sec.get("outer_trainable", False)),
        use_biases=bool(sec.get("use_biases", False)),
        depth=int(sec.get("depth", 1)),
        shuffle_outer_signs=bool(sec.get("shuffle_outer_signs", False)),
    )


def build_train(section: dict, seed_override: int | None = None,
                paper_scale: bool = False) -> TrainConfig:
    sec = dict(section)
    if paper_scale:
        sec["validation_size"] = 10_000
        sec["test_size"] = 100_000
    batch_sec = sec.get("batch", {"kind": "online"})
    batch = BatchMode(kind=batch_sec.get("kind", "online"),
                      size=int(batch_sec.get("size", 32)),
                      epochs=int(batch_sec.get("epochs", 100)))
    if sec.get("loss", "cross_entropy") != "cross_entropy":
        raise ConfigError(f"unsupported loss {sec.get('loss')!r}")
    seed = int(sec.get("seed", 0)) if seed_override is None else int(seed_override)
    return TrainConfig(
        step_size=float(sec.get("step_size", 0.01)),
        iterations=int(sec.get("iterations", 20_000)),
        batch=batch,
        validation_size=int(sec.get("validation_size", 10_000)),
        validation_cadence=int(sec.get("validation_cadence", 100)),
        test_size=int(sec.get("test_size", 20_000)),
        init_variance=sec.get("init_variance"),
        seed=seed,
        diag_gamma_grid=tuple(sec.get("diag_gamma_grid", ())),
        enforce_step_size_bound=bool(sec.get("enforce_step_size_bound", False)),
    )


def build_run(data: dict, seed_override: int | None = None,
              paper_scale: bool = False):
    """(spec, net_config, train_config) from a validated config dict."""
    spec = build_distribution(data["distribution"])
    net = build_network(data.get("network", {}), paper_scale, d=spec.d)
    train = build_train(data.get("train", {}), seed_override, paper_scale)
    return spec, net, train
