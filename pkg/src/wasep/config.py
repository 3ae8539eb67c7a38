"""Experiment configuration: strict TOML parsing, defaults, and hashing.

Unknown keys are rejected so that a manifest plus this package version
pins a run completely; the config hash is the sha256 of the canonical
JSON form (sorted keys, defaults materialized), invariant under key
reordering in the source file.
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import ModelSpec
from .profiles import FAMILIES, SmoothFunction, TimeWeight, parse_test_function

__all__ = ["ExperimentConfig", "parse_config", "config_from_dict", "config_hash"]


class ConfigError(ValueError):
    pass


_MODEL_KEYS = {"n", "T", "eps0", "drift", "profile", "weight"}
_FAMILY_KEYS = {"family", "value", "offset", "amplitude", "k", "phase", "terms", "height", "center", "width"}
_RUN_KEYS = {"replicas", "seed", "snapshot_dt", "dump_trajectories", "jobs"}
_OBS_KEYS = {"functions", "eps_ladder", "moment_order"}
_ORACLE_KEYS = {"grid", "cfl", "quad_nodes", "store_slices", "spde_enabled", "spde_grid", "spde_paths"}
_VERIFY_KEYS = {"suites", "max_events"}
_SECTIONS = {"model", "run", "observables", "oracle", "verify"}

SUITE_NAMES = (
    "hydro-limit",
    "pde-convergence",
    "field-clt",
    "occupation-gauss",
    "variance-id",
    "replacement-scan",
    "holder",
    "brute-force",
    "dynkin",
    "determinism",
)


@dataclass
class ExperimentConfig:
    """Validated, fully defaulted experiment description."""

    n: int
    horizon: float
    eps0: float
    drift: dict
    profile: dict
    weight: dict
    replicas: int
    seed: int
    snapshot_dt: float
    dump_trajectories: bool
    jobs: int
    functions: list
    eps_ladder: list
    moment_order: float
    oracle_grid: int
    oracle_cfl: float
    quad_nodes: int
    store_slices: int
    spde_enabled: bool
    spde_grid: int
    spde_paths: int
    suites: list
    max_events: float

    def as_dict(self) -> dict:
        return {
            "model": {
                "n": self.n,
                "T": self.horizon,
                "eps0": self.eps0,
                "drift": self.drift,
                "profile": self.profile,
                "weight": self.weight,
            },
            "run": {
                "replicas": self.replicas,
                "seed": self.seed,
                "snapshot_dt": self.snapshot_dt,
                "dump_trajectories": self.dump_trajectories,
                "jobs": self.jobs,
            },
            "observables": {
                "functions": list(self.functions),
                "eps_ladder": list(self.eps_ladder),
                "moment_order": self.moment_order,
            },
            "oracle": {
                "grid": self.oracle_grid,
                "cfl": self.oracle_cfl,
                "quad_nodes": self.quad_nodes,
                "store_slices": self.store_slices,
                "spde_enabled": self.spde_enabled,
                "spde_grid": self.spde_grid,
                "spde_paths": self.spde_paths,
            },
            "verify": {
                "suites": list(self.suites),
                "max_events": self.max_events,
            },
        }

    @property
    def grid_m(self) -> int:
        """Oracle grid: explicit value or max(n, 256), rounded to a multiple of n."""
        if self.oracle_grid > 0:
            return self.oracle_grid
        if self.n >= 256:
            return self.n
        mult = int(np.ceil(256 / self.n))
        return mult * self.n

    def build_model(self, validate: bool = True) -> ModelSpec:
        return ModelSpec(
            n=self.n,
            drift=_make(self.drift),
            profile=_make(self.profile),
            weight=TimeWeight(_make(self.weight), self.horizon),
            horizon=self.horizon,
            margin=self.eps0,
            validate=validate,
        )

    def test_functions(self, n: int | None = None) -> dict:
        """Named test functions evaluated on the n-site lattice."""
        n = n or self.n
        u = np.arange(n) / n
        return {name: parse_test_function(name)(u) for name in self.functions}


def _make(d: dict) -> SmoothFunction:
    params = {k: v for k, v in d.items() if k != "family"}
    if "terms" in params:
        params["terms"] = [tuple(t) for t in params["terms"]]
    return SmoothFunction(d["family"], params)


def _check_keys(section: str, d: dict, allowed: set):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")


def _family_dict(section: str, d: dict | None, default: dict) -> dict:
    if d is None:
        return dict(default)
    _check_keys(section, d, _FAMILY_KEYS)
    fam = d.get("family")
    if fam not in FAMILIES:
        raise ConfigError(f"[{section}] family must be one of {FAMILIES}, got {fam!r}")
    out = {"family": fam}
    for k, v in d.items():
        if k != "family":
            out[k] = v
    return out


def config_from_dict(raw: dict, path: str = "<dict>") -> ExperimentConfig:
    unknown = set(raw) - _SECTIONS
    if unknown:
        raise ConfigError(f"{path}: unknown section(s): {', '.join(sorted(unknown))}")
    model = raw.get("model", {})
    _check_keys("model", model, _MODEL_KEYS)
    if "n" not in model or "T" not in model:
        raise ConfigError(f"{path}: [model] must provide n and T")
    n = int(model["n"])
    horizon = float(model["T"])
    eps0 = float(model.get("eps0", 0.05))
    if not 0.0 < eps0 < 0.5:
        raise ConfigError(f"{path}: eps0 must lie in (0, 1/2), got {eps0}")
    if n < 4:
        raise ConfigError(f"{path}: n must be >= 4, got {n}")
    if horizon <= 0:
        raise ConfigError(f"{path}: T must be positive, got {horizon}")

    drift = _family_dict("model.drift", model.get("drift"), {"family": "constant", "value": 0.0})
    profile = _family_dict("model.profile", model.get("profile"), {"family": "constant", "value": 0.5})
    weight = _family_dict("model.weight", model.get("weight"), {"family": "constant", "value": 1.0})

    run = raw.get("run", {})
    _check_keys("run", run, _RUN_KEYS)
    replicas = int(run.get("replicas", 2000))
    seed = int(run.get("seed", 20260810))
    snapshot_dt = float(run.get("snapshot_dt", horizon / 200.0))
    if not 0 < snapshot_dt <= horizon:
        raise ConfigError(f"{path}: snapshot_dt must lie in (0, T]")
    dump = bool(run.get("dump_trajectories", False))
    jobs = int(run.get("jobs", 0))

    obs = raw.get("observables", {})
    _check_keys("observables", obs, _OBS_KEYS)
    functions = list(obs.get("functions", ["fourier:k=1"]))
    for name in functions:
        parse_test_function(name)  # validate the grammar early
    eps_ladder = sorted((float(e) for e in obs.get("eps_ladder", [0.2, 0.1, 0.05])), reverse=True)
    if any(not 0.0 < e < 1.0 for e in eps_ladder):
        raise ConfigError(f"{path}: eps_ladder entries must lie in (0, 1)")
    moment_order = float(obs.get("moment_order", 1.5))
    if not 1.0 < moment_order < 2.0:
        raise ConfigError(f"{path}: moment_order must lie in (1, 2), got {moment_order}")

    oracle = raw.get("oracle", {})
    _check_keys("oracle", oracle, _ORACLE_KEYS)
    grid = int(oracle.get("grid", 0))
    cfl = float(oracle.get("cfl", 0.25))
    quad_nodes = int(oracle.get("quad_nodes", 16))
    store_slices = int(oracle.get("store_slices", 2049))
    spde_enabled = bool(oracle.get("spde_enabled", True))
    spde_grid = int(oracle.get("spde_grid", 128))
    spde_paths = int(oracle.get("spde_paths", 1500))

    verify = raw.get("verify", {})
    _check_keys("verify", verify, _VERIFY_KEYS)
    suites = list(verify.get("suites", []))
    for s in suites:
        if s not in SUITE_NAMES:
            raise ConfigError(f"{path}: unknown suite {s!r}; expected one of {SUITE_NAMES}")
    max_events = float(verify.get("max_events", 1e11))

    cfg = ExperimentConfig(
        n=n, horizon=horizon, eps0=eps0, drift=drift, profile=profile, weight=weight,
        replicas=replicas, seed=seed, snapshot_dt=snapshot_dt, dump_trajectories=dump,
        jobs=jobs, functions=functions, eps_ladder=eps_ladder, moment_order=moment_order,
        oracle_grid=grid, oracle_cfl=cfl, quad_nodes=quad_nodes, store_slices=store_slices,
        spde_enabled=spde_enabled, spde_grid=spde_grid, spde_paths=spde_paths,
        suites=suites, max_events=max_events,
    )
    cfg.build_model()  # surface model-level violations at parse time
    return cfg


def parse_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    with open(p, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{p}: {exc}") from exc
    return config_from_dict(raw, path=str(p))


def config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(cfg.as_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]
