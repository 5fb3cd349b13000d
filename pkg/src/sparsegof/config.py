"""Experiment configuration: parsing, validation and overrides.

Configs are JSON objects.  Precedence, highest first: command-line flags,
``SPARSEGOF_*`` environment variables, the config file, built-in defaults.
Everything is validated up front so that a malformed config never leaves
partial output behind.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass
from math import floor
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .alternatives import (
    AlternativeSpec,
    DeltaSchedule,
    FamilyTag,
    classify_family,
    cosine_direction,
)
from .errors import UnclassifiedFamilyError
from .montecarlo import THRESHOLD_MODES, Method
from .statistics import KERNELS

SCHEMA_VERSION = 1
ENV_PREFIX = "SPARSEGOF_"
QUANTITIES = ("alpha", "beta", "power")
METHODS = ("auto",) + tuple(m.value.lower() for m in Method)
N_RULE_EPS = 1e-9
DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "budget": 100_000,
    "workers": 1,
    "out": "out",
    "tests": ["chi2", "lr"],
    "methods": ["auto"],
    "quantities": ["alpha"],
    "threshold_mode": "auto",
    "power_c": [0.0],
    "direction": {"k": 1},
    "family": None,
    "lambda_limit": "auto",
}


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps it to exit code 2."""


@dataclass(frozen=True)
class ExperimentConfig:
    points: tuple[tuple[int, int], ...]
    schedule: dict
    direction: dict
    tests: tuple[str, ...]
    methods: tuple[str, ...]
    quantities: tuple[str, ...]
    threshold_mode: str
    power_c: tuple[float, ...]
    family: str | None
    lambda_limit: str | float
    seed: int
    budget: int
    workers: int
    out: str

    def to_json(self) -> dict:
        d = asdict(self)
        d["points"] = [list(p) for p in self.points]
        return d

    def config_hash(self) -> str:
        """Hash of everything that affects results (not ``out``/``workers``)."""
        d = self.to_json()
        d.pop("out")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def spec(self) -> AlternativeSpec:
        return build_spec(self.schedule, self.direction)

    def family_tag(self) -> FamilyTag:
        if self.family is not None:
            return FamilyTag.parse(self.family)
        return infer_family(self.schedule, self.points)

    def lambda_for_efficiency(self) -> float:
        if self.lambda_limit == "inf":
            return float("inf")
        if self.lambda_limit != "auto":
            return float(self.lambda_limit)
        lams = np.array([n / N for n, N in self.points])
        if np.allclose(lams, lams[0], rtol=1e-12):
            return float(lams[0])
        return float("inf")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _positive_int(value: Any, name: str) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool) and value > 0,
             f"{name} must be a positive integer, got {value!r}")
    return int(value)


def n_rule(n: int, c: float, a: float) -> int:
    """``N = floor(c n^a)``; the tiny epsilon makes exact powers land on integers."""
    return max(1, int(floor(c * n**a + N_RULE_EPS)))


def expand_grid(grid: Mapping) -> tuple[tuple[int, int], ...]:
    _require(isinstance(grid, Mapping), "grid must be an object")
    if "points" in grid:
        pts = grid["points"]
        _require(isinstance(pts, list) and pts, "grid.points must be a non-empty list of [n, N]")
        out = []
        for p in pts:
            _require(isinstance(p, list) and len(p) == 2, f"grid point {p!r} must be [n, N]")
            out.append((_positive_int(p[0], "n"), _positive_int(p[1], "N")))
        return tuple(out)
    _require("n" in grid and "N" in grid, "grid needs either 'points' or both 'n' and 'N'")
    ns = grid["n"]
    _require(isinstance(ns, list) and ns, "grid.n must be a non-empty list")
    ns = [_positive_int(n, "n") for n in ns]
    rule = grid["N"]
    if isinstance(rule, Mapping):
        _require(set(rule) <= {"c", "a"} and "a" in rule, "grid.N rule needs 'a' (and optional 'c')")
        c, a = float(rule.get("c", 1.0)), float(rule["a"])
        _require(c > 0, "grid.N.c must be positive")
        return tuple((n, n_rule(n, c, a)) for n in ns)
    if isinstance(rule, list):
        _require(len(rule) == len(ns), "grid.N list must match grid.n")
        return tuple((n, _positive_int(N, "N")) for n, N in zip(ns, rule))
    return tuple((n, _positive_int(rule, "N")) for n in ns)


def build_schedule(d: Mapping) -> DeltaSchedule:
    _require(isinstance(d, Mapping) and "kind" in d, "schedule must be an object with 'kind'")
    kind = d["kind"]
    try:
        if kind == "power":
            return DeltaSchedule.power(float(d["gamma"]))
        if kind == "pitman":
            return DeltaSchedule.pitman()
        if kind == "explicit":
            v = d["values"]
            if isinstance(v, Mapping):
                v = {int(k): float(x) for k, x in v.items()}
            else:
                v = float(v)
            return DeltaSchedule("explicit", values=v)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid schedule {dict(d)!r}: {exc}") from None
    raise ConfigError(f"unknown schedule kind {kind!r}")


def build_spec(schedule: Mapping, direction: Mapping) -> AlternativeSpec:
    sched = build_schedule(schedule)
    _require(isinstance(direction, Mapping), "direction must be an object")
    try:
        if "contrast" in direction:
            return AlternativeSpec(sched, cell_contrast=np.asarray(direction["contrast"], dtype=float))
        return AlternativeSpec(sched, cosine_direction(int(direction.get("k", 1))))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid direction {dict(direction)!r}: {exc}") from None


def infer_family(schedule: Mapping, points) -> FamilyTag:
    sched = build_schedule(schedule)
    ns = [n for n, _ in points]
    if len(set(ns)) < 3 or list(ns) != sorted(ns):
        raise UnclassifiedFamilyError("family inference needs >= 3 increasing n; set 'family' explicitly")
    return classify_family(sched, ns, dict(points))


def _env_overrides(environ: Mapping[str, str]) -> dict:
    out: dict[str, Any] = {}
    for key, cast in (("seed", int), ("budget", int), ("workers", int), ("out", str)):
        raw = environ.get(ENV_PREFIX + key.upper())
        if raw is not None:
            try:
                out[key] = cast(raw)
            except ValueError:
                raise ConfigError(f"{ENV_PREFIX}{key.upper()}={raw!r} is not a valid {cast.__name__}") from None
    return out


def load_config(path: str | Path | None, overrides: Mapping[str, Any] | None = None,
                environ: Mapping[str, str] | None = None) -> ExperimentConfig:
    """Read, merge and validate a config.  ``overrides`` are CLI flags (None = unset)."""
    data: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        _require(isinstance(data, dict), "config must be a JSON object")
    merged = dict(DEFAULTS)
    merged.update({k: v for k, v in data.items() if k != "schema_version"})
    merged.update(_env_overrides(os.environ if environ is None else environ))
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return validate(merged)


def validate(d: Mapping[str, Any]) -> ExperimentConfig:
    known = set(DEFAULTS) | {"grid", "schedule"}
    unknown = set(d) - known
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")
    _require("grid" in d, "config needs a 'grid'")
    _require("schedule" in d, "config needs a 'schedule'")
    points = expand_grid(d["grid"])
    tests = tuple(d["tests"])
    _require(tests and all(t in KERNELS for t in tests), f"tests must be drawn from {sorted(KERNELS)}")
    methods = tuple(str(m).lower() for m in d["methods"])
    _require(methods and all(m in METHODS for m in methods), f"methods must be drawn from {METHODS}")
    quantities = tuple(d["quantities"])
    _require(quantities and all(q in QUANTITIES for q in quantities), f"quantities must be drawn from {QUANTITIES}")
    _require(d["threshold_mode"] in THRESHOLD_MODES, f"threshold_mode must be one of {THRESHOLD_MODES}")
    try:
        power_c = tuple(float(c) for c in d["power_c"])
    except (TypeError, ValueError):
        raise ConfigError("power_c must be a list of numbers") from None
    seed = d["seed"]
    _require(isinstance(seed, int) and 0 <= seed < 2**64, "seed must be an integer in [0, 2^64)")
    budget = _positive_int(d["budget"], "budget")
    workers = _positive_int(d["workers"], "workers")
    lam_limit = d["lambda_limit"]
    _require(lam_limit in ("auto", "inf") or (isinstance(lam_limit, (int, float)) and lam_limit > 0),
             "lambda_limit must be 'auto', 'inf' or a positive number")
    family = d["family"]
    if family is not None:
        try:
            FamilyTag.parse(str(family))
        except ValueError as exc:
            raise ConfigError(f"invalid family {family!r}: {exc}") from None
    cfg = ExperimentConfig(points, dict(d["schedule"]), dict(d["direction"]), tests, methods, quantities,
                           d["threshold_mode"], power_c, family, lam_limit, seed, budget, workers,
                           str(d["out"]))
    spec = cfg.spec()
    for n, N in points:
        try:
            spec.delta(n, N)
        except ValueError as exc:
            raise ConfigError(f"schedule invalid at (n={n}, N={N}): {exc}") from None
    return cfg
