"""Experiment spec files: a YAML schema for batch runs over parameter grids.

Schema (every key except ``kind`` and ``grid`` is optional)::

    kind: simulate        # simulate | double_spend | selfish | offline | committee
    seed: 7               # base seed; cell c, repetition j uses seed + c * trials + j
    trials: 4             # repetitions per cell (simulate) or Monte Carlo draws
    grid:                 # cartesian product, one list per swept parameter
      alpha: [0.1, 0.3]
      delta: [0, 10]
    base:                 # fixed parameters for every cell
      horizon_blocks: 2000
      strategy: selfish
    output:
      path: out/summary.csv
      format: csv         # csv | json
      traces: out/traces  # simulate only: one JSONL trace per run

Grid keys are drawn from alpha, k, delta, gamma_off, W, m, epsilon and must
make sense for the kind (see ``GRID_KEYS``). ``base`` keys for ``simulate``
are SimConfig fields; for the other kinds see ``BASE_KEYS``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .sim.config import ConfigError, SimConfig

KINDS = ("simulate", "double_spend", "selfish", "offline", "committee")
GRID_ORDER = ("alpha", "k", "delta", "gamma_off", "W", "m", "epsilon")
GRID_KEYS = {
    "simulate": set(GRID_ORDER),
    "double_spend": {"alpha", "k", "delta", "epsilon"},
    "selfish": {"alpha", "delta", "epsilon"},
    "offline": {"alpha", "gamma_off", "W", "m"},
    "committee": {"alpha", "W", "epsilon"},
}
BASE_KEYS = {
    "double_spend": {"protocol", "method", "lam", "alpha", "k", "delta", "epsilon"},
    "selfish": {"protocol", "gamma", "blocks", "lam", "n_honest", "alpha", "delta", "epsilon"},
    "offline": {"alpha", "gamma_off", "W", "m"},
    "committee": {"alpha", "W", "epsilon"},
}
INT_KEYS = {"k", "W", "m"}


class SpecError(ValueError):
    """Invalid spec; the message starts with the offending field path."""


@dataclass(frozen=True)
class OutputSpec:
    path: Optional[str] = None
    format: str = "csv"
    traces: Optional[str] = None


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    grid: dict
    trials: int = 1
    seed: int = 0
    base: dict = field(default_factory=dict)
    output: OutputSpec = field(default_factory=OutputSpec)

    def cells(self) -> list[dict]:
        keys = [k for k in GRID_ORDER if k in self.grid]
        return [dict(self.base, **dict(zip(keys, combo)))
                for combo in itertools.product(*(self.grid[k] for k in keys))]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "trials": self.trials,
                "grid": {k: list(v) for k, v in self.grid.items()}, "base": dict(self.base),
                "output": {"path": self.output.path, "format": self.output.format,
                           "traces": self.output.traces}}


def _check_value(path: str, key: str, v: Any):
    if key in INT_KEYS:
        if isinstance(v, bool) or not isinstance(v, int):
            raise SpecError(f"{path}: must be an integer")
        if v < 1:
            raise SpecError(f"{path}: must be >= 1")
        return
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(f"{path}: must be a number")
    if key == "alpha" and not 0 <= v < 0.5:
        raise SpecError(f"{path}: must lie in [0, 0.5)")
    if key in ("gamma_off", "epsilon") and not 0 <= v <= 1:
        raise SpecError(f"{path}: must lie in [0, 1]")
    if key == "delta" and v < 0:
        raise SpecError(f"{path}: must be >= 0")


def parse_spec(doc: Any) -> ExperimentSpec:
    if not isinstance(doc, dict):
        raise SpecError("<root>: expected a mapping")
    unknown = set(doc) - {"kind", "seed", "trials", "grid", "base", "output"}
    if unknown:
        raise SpecError(f"{sorted(unknown)[0]}: unknown key")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise SpecError(f"kind: expected one of {KINDS}, got {kind!r}")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise SpecError("seed: must be a non-negative integer")
    trials = doc.get("trials", 1)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise SpecError("trials: must be an integer >= 1")

    grid = doc.get("grid")
    if not isinstance(grid, dict) or not grid:
        raise SpecError("grid: must be a non-empty mapping")
    for key, values in grid.items():
        if key not in GRID_KEYS[kind]:
            raise SpecError(f"grid.{key}: not a grid parameter for kind {kind!r}")
        if not isinstance(values, list) or not values:
            raise SpecError(f"grid.{key}: must be a non-empty list")
        for i, v in enumerate(values):
            _check_value(f"grid.{key}[{i}]", key, v)

    base = doc.get("base", {}) or {}
    if not isinstance(base, dict):
        raise SpecError("base: must be a mapping")
    if kind != "simulate":
        for key, v in base.items():
            if key not in BASE_KEYS[kind]:
                raise SpecError(f"base.{key}: unknown parameter for kind {kind!r}")
            if key in GRID_ORDER:
                _check_value(f"base.{key}", key, v)

    out = doc.get("output", {}) or {}
    if not isinstance(out, dict):
        raise SpecError("output: must be a mapping")
    bad = set(out) - {"path", "format", "traces"}
    if bad:
        raise SpecError(f"output.{sorted(bad)[0]}: unknown key")
    if out.get("format", "csv") not in ("csv", "json"):
        raise SpecError("output.format: expected csv or json")
    if out.get("traces") and kind != "simulate":
        raise SpecError("output.traces: only simulate writes traces")
    spec = ExperimentSpec(kind, grid, trials, seed, base, OutputSpec(**out))

    missing = {"double_spend": ("alpha", "k"), "offline": ("alpha", "gamma_off", "W", "m"),
               "committee": ("alpha", "W", "epsilon"), "selfish": ("alpha",)}.get(kind, ())
    for key in missing:
        if key not in grid and key not in base:
            raise SpecError(f"grid.{key}: required for kind {kind!r} (in grid or base)")
    if kind == "simulate":
        for c, cell in enumerate(spec.cells()):
            try:
                SimConfig.from_dict(dict(cell, seed=seed))
            except ConfigError as e:
                where = "grid" if str(e).split(":")[0] in grid else "base"
                raise SpecError(f"{where}.{e} (cell {c})") from None
            except TypeError as e:
                raise SpecError(f"base: {e}") from None
    return spec


def load_spec(path: str) -> ExperimentSpec:
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as e:
            raise SpecError(f"<root>: not valid YAML ({e})") from None
    return parse_spec(doc)
