"""Flat ``key=value`` config files and on-disk run directories."""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .model import ConfigError, GridSpec, InitialData, ModelParams
from .stepper import Snapshots, read_snapshots_csv

CONFIG_NAME = "config.txt"
SNAPSHOT_NAME = "snapshots.csv"
SUMMARY_NAME = "summary.json"

PARAM_KEYS = ("a", "b", "chi", "tau", "sigma", "c")
GRID_KEYS = ("L", "M", "T", "dt")


def read_config(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment.  Values stay strings."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_config(path, values: dict) -> None:
    lines = [f"{k}={format_value(v)}" for k, v in values.items() if v is not None]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def config_values(params: ModelParams, grid: GridSpec, init: str, out, **extra) -> dict:
    vals = {k: getattr(params, k) for k in PARAM_KEYS}
    vals.update({k: getattr(grid, k) for k in GRID_KEYS})
    vals["init"] = init
    vals["out"] = str(out) if out is not None else None
    vals.update(extra)
    return vals


def params_from(values: dict) -> ModelParams:
    return ModelParams(**{k: float(values[k]) for k in PARAM_KEYS if k in values})


def grid_from(values: dict) -> GridSpec:
    kw = {}
    for k in GRID_KEYS:
        if k in values:
            kw[k] = int(values[k]) if k == "M" else float(values[k])
    return GridSpec(**kw)


def init_from(spec: str) -> InitialData:
    if spec in (None, "", "bump"):
        return InitialData.bump()
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"init must be 'bump' or a CSV file with x,u,v columns (got {spec!r})")
    return InitialData.from_csv(path)


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False, default=_default) + "\n",
                          encoding="utf-8")


def _default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


class RunDir:
    """A simulation written by ``simulate``: config, snapshots and summary."""

    def __init__(self, path):
        self.path = Path(path)
        if not (self.path / CONFIG_NAME).exists():
            raise ConfigError(f"{self.path} has no {CONFIG_NAME}")
        self.values = read_config(self.path / CONFIG_NAME)
        self.params = params_from(self.values)
        self.grid = grid_from(self.values)
        self.init = init_from(self.values.get("init", "bump"))

    @property
    def stride(self):
        s = self.values.get("stride")
        return int(s) if s not in (None, "", "None") else None

    def snapshots(self) -> Snapshots:
        return read_snapshots_csv(self.path / SNAPSHOT_NAME, frame_speed=self.params.c)

    def summary(self) -> dict:
        p = self.path / SUMMARY_NAME
        return json.loads(p.read_text(encoding="utf-8")) if p.exists() else {}
