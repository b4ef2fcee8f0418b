"""Parallel parameter sweeps with append-only, resumable persistence."""
from __future__ import annotations

import csv
import enum
import hashlib
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import _kernels
from .front import ClassifyConfig, classify
from .model import ConfigError, GridSpec, InitialData, ModelParams, sample_initial, validate
from .stepper import BlowUp, CSVSnapshotWriter

AXES = ("chi", "c", "tau", "sigma")
RECORD_HEADER = ["run_id", "chi", "c", "tau", "sigma", "a", "b", "L", "M", "T", "dt", "verdict",
                 "final_max_u", "center_min_u", "decision_time", "min_u", "max_u", "min_v",
                 "max_v", "wall_ms"]
RECORDS_NAME = "records.csv"
RUNS_DIR = "runs"
SNAPSHOT_DIR = "snapshots"

BLOWUP = "BlowUp"
SKIPPED = "Skipped"
SYMBOLS = {"Persisted": "P", "Decayed": "D", "Undetermined": "?", BLOWUP: "!", SKIPPED: "S"}
HOLE = "-"


class Mode(str, enum.Enum):
    CLASSIFY = "Classify"
    FULL_SNAPSHOTS = "FullSnapshots"


# reference experiment matrix
MATRIX_CHI = (-10.0, -1.0, 1.0, 10.0)
MATRIX_C = (1.0, 1.99, 2.01, 3.0)


@dataclass
class SweepPlan:
    """Cartesian product of ``axes`` on top of ``base`` parameters.

    Axes not listed take the value in ``base``.
    """

    axes: Dict[str, Sequence[float]]
    base: ModelParams = field(default_factory=ModelParams)
    grid: GridSpec = field(default_factory=GridSpec)
    init: InitialData = field(default_factory=InitialData.bump)
    mode: Mode = Mode.CLASSIFY
    config: ClassifyConfig = field(default_factory=ClassifyConfig)

    def __post_init__(self):
        unknown = set(self.axes) - set(AXES)
        if unknown:
            raise ConfigError(f"unknown sweep axes {sorted(unknown)}; choose from {list(AXES)}")
        for name, values in self.axes.items():
            if len(values) == 0:
                raise ConfigError(f"sweep axis {name!r} is empty")
        self.mode = Mode(self.mode)

    def combinations(self) -> List[ModelParams]:
        lists = [sorted(set(float(v) for v in self.axes.get(k, (getattr(self.base, k),))))
                 for k in AXES]
        return [self.base.replace(**dict(zip(AXES, combo))) for combo in itertools.product(*lists)]

    def __len__(self):
        return len(self.combinations())


def canonical_inputs(params: ModelParams, grid: GridSpec, init: InitialData,
                     config: ClassifyConfig, mode: Mode) -> str:
    """Full-precision text of everything that determines a run's outcome."""
    parts = [f"{k}={float(getattr(params, k)).hex()}" for k in ("a", "b", "chi", "tau", "sigma", "c")]
    parts += [f"L={float(grid.L).hex()}", f"M={int(grid.M)}", f"T={float(grid.T).hex()}",
              f"dt={float(grid.dt).hex()}"]
    if init.kind == "bump":
        parts.append("init=bump")
    else:
        digest = hashlib.sha256()
        state = sample_initial(init, grid)
        for arr in (state.u, state.v):
            digest.update(arr.astype("<f8").tobytes())
        parts.append(f"init={digest.hexdigest()}")
    for f in fields(config):
        val = getattr(config, f.name)
        parts.append(f"{f.name}={float(val).hex() if isinstance(val, float) else val}")
    parts.append(f"mode={Mode(mode).value}")
    return ";".join(parts)


def run_id(params, grid, init, config=ClassifyConfig(), mode=Mode.CLASSIFY) -> str:
    return hashlib.sha256(canonical_inputs(params, grid, init, config, mode).encode()).hexdigest()[:16]


@dataclass
class RunRecord:
    run_id: str
    chi: float
    c: float
    tau: float
    sigma: float
    a: float
    b: float
    L: float
    M: int
    T: float
    dt: float
    verdict: str
    final_max_u: float = math.nan
    center_min_u: float = math.nan
    decision_time: float = math.nan
    min_u: float = math.nan
    max_u: float = math.nan
    min_v: float = math.nan
    max_v: float = math.nan
    wall_ms: float = 0.0
    detail: str = ""

    @property
    def key(self):
        return (self.chi, self.c, self.tau, self.sigma)

    @property
    def symbol(self) -> str:
        return SYMBOLS.get(self.verdict, "?")

    def row(self) -> List[str]:
        out = []
        for name in RECORD_HEADER:
            v = getattr(self, name)
            out.append(repr(float(v)) if isinstance(v, float) else str(v))
        return out

    def stable_row(self) -> List[str]:
        """``row`` without the wall time, for comparing sweeps."""
        return self.row()[:-1]

    @classmethod
    def from_row(cls, row: Dict[str, str]) -> "RunRecord":
        kw = {}
        for f in fields(cls):
            if f.name not in row:
                continue
            raw = row[f.name]
            if f.name in ("run_id", "verdict"):
                kw[f.name] = raw
            elif f.name == "M":
                kw[f.name] = int(raw)
            else:
                kw[f.name] = float(raw)
        return cls(**kw)


def _blank_record(rid, p: ModelParams, g: GridSpec, verdict: str, detail: str = "") -> RunRecord:
    nums = [float(v) for v in (p.chi, p.c, p.tau, p.sigma, p.a, p.b, g.L)]
    return RunRecord(rid, *nums, int(g.M), float(g.T), float(g.dt), verdict, detail=detail)


def _run_one(job):
    """Worker entry point: classify one combination, never raising."""
    rid, params, grid, init, config, mode, snap_path = job
    t0 = time.perf_counter()
    hooks = []
    writer = None
    if snap_path is not None:
        writer = CSVSnapshotWriter(snap_path, grid)
        hooks.append(writer)
    try:
        out = classify(params, grid, init, config, hooks=hooks)
    except BlowUp as exc:
        rec = _blank_record(rid, params, grid, BLOWUP, str(exc))
        rec.decision_time = exc.t
        rec.wall_ms = (time.perf_counter() - t0) * 1e3
        return rec, {"error": str(exc), "step_index": exc.step_index}
    finally:
        if writer is not None:
            writer.close()
    rec = _blank_record(rid, params, grid, out.verdict.value)
    rec.final_max_u = out.final_max_u
    rec.center_min_u = out.center_min_u
    rec.decision_time = out.decision_time
    rec.min_u, rec.max_u, rec.min_v, rec.max_v = out.min_u, out.max_u, out.min_v, out.max_v
    rec.wall_ms = (time.perf_counter() - t0) * 1e3
    return rec, out.to_dict()


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit argument, else ``CHEMOSPREAD_WORKERS``, else 1."""
    if workers is None:
        env = os.environ.get("CHEMOSPREAD_WORKERS", "").strip()
        workers = int(env) if env else 1
    if workers < 1:
        raise ConfigError(f"worker count must be >= 1 (got {workers})")
    return workers


def load_records(path) -> List[RunRecord]:
    path = Path(path)
    if not path.exists():
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        return [RunRecord.from_row(r) for r in csv.DictReader(fh)]


class RecordSink:
    """Append-only records CSV plus one JSON provenance file per run.

    Only the parent process writes, one record at a time.
    """

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / RUNS_DIR).mkdir(exist_ok=True)
        self.path = self.dir / RECORDS_NAME
        fresh = not self.path.exists() or self.path.stat().st_size == 0
        self._fh = open(self.path, "a", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh)
        if fresh:
            self._w.writerow(RECORD_HEADER)
            self._fh.flush()

    def write(self, rec: RunRecord, provenance: dict):
        sidecar = self.dir / RUNS_DIR / f"{rec.run_id}.json"
        sidecar.write_text(json.dumps(provenance, indent=2) + "\n", encoding="utf-8")
        self._w.writerow(rec.row())
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self):
        self._fh.close()


def execute(plan: SweepPlan, workers: Optional[int] = None, out_dir=None,
            limit: Optional[int] = None) -> List[RunRecord]:
    """Classify every combination of ``plan``; records sorted by (chi, c, tau, sigma).

    With ``out_dir`` the records are appended to ``records.csv`` as they
    finish and run_ids already present there are not recomputed.  ``limit``
    stops after that many new runs (used to exercise resuming).
    """
    workers = resolve_workers(workers)
    if plan.mode is Mode.FULL_SNAPSHOTS and out_dir is None:
        raise ConfigError("FullSnapshots mode needs an output directory")
    done: Dict[str, RunRecord] = {}
    sink = None
    if out_dir is not None:
        done = {r.run_id: r for r in load_records(Path(out_dir) / RECORDS_NAME)}
        sink = RecordSink(out_dir)
        if plan.mode is Mode.FULL_SNAPSHOTS:
            (Path(out_dir) / SNAPSHOT_DIR).mkdir(exist_ok=True)

    results: Dict[str, RunRecord] = {}
    jobs = []
    for p in plan.combinations():
        rid = run_id(p, plan.grid, plan.init, plan.config, plan.mode)
        if rid in done:
            results[rid] = done[rid]
            continue
        if rid in results or any(j[0] == rid for j in jobs):
            continue
        report = validate(p, plan.grid, plan.init)
        if not report.ok:
            rec = _blank_record(rid, p, plan.grid, SKIPPED, "; ".join(report.errors))
            results[rid] = rec
            if sink is not None:
                sink.write(rec, _provenance(rec, plan, {"skipped": report.errors}))
            continue
        snap = (Path(out_dir) / SNAPSHOT_DIR / f"{rid}.csv"
                if plan.mode is Mode.FULL_SNAPSHOTS else None)
        jobs.append((rid, p, plan.grid, plan.init, plan.config, plan.mode, snap))
    if limit is not None:
        jobs = jobs[:limit]

    def accept(rec, outcome):
        results[rec.run_id] = rec
        if sink is not None:
            sink.write(rec, _provenance(rec, plan, outcome))

    try:
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
                futs = [ex.submit(_run_one, j) for j in jobs]
                for fut in as_completed(futs):
                    accept(*fut.result())
        else:
            for j in jobs:
                accept(*_run_one(j))
    finally:
        if sink is not None:
            sink.close()
    return sorted(results.values(), key=lambda r: r.key)


def _provenance(rec: RunRecord, plan: SweepPlan, outcome: dict) -> dict:
    return {
        "run_id": rec.run_id,
        "params": {k: getattr(rec, k) for k in ("a", "b", "chi", "tau", "sigma", "c")},
        "grid": {"L": plan.grid.L, "M": plan.grid.M, "T": plan.grid.T, "dt": plan.grid.dt,
                 "h": plan.grid.h},
        "init": plan.init.source,
        "mode": plan.mode.value,
        "classify_config": {f.name: getattr(plan.config, f.name) for f in fields(plan.config)},
        "backend": _kernels.BACKEND,
        "verdict": rec.verdict,
        "outcome": outcome,
    }


def write_records(path, records: Sequence[RunRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_HEADER)
        for r in records:
            w.writerow(r.row())


@dataclass
class PhaseTable:
    row_axis: str
    col_axis: str
    rows: List[float]
    cols: List[float]
    cells: List[List[str]]

    def render(self) -> str:
        head = f"{self.row_axis}\\{self.col_axis}"
        labels = [f"{c:g}" for c in self.cols]
        width = max([len(head)] + [len(f"{r:g}") for r in self.rows])
        colw = max([1] + [len(s) for s in labels])
        lines = [head.ljust(width) + "  " + "  ".join(s.rjust(colw) for s in labels)]
        for r, row in zip(self.rows, self.cells):
            lines.append(f"{r:g}".ljust(width) + "  " + "  ".join(s.rjust(colw) for s in row))
        return "\n".join(lines) + "\n"


def phase_table(records: Sequence[RunRecord], row_axis: str = "chi", col_axis: str = "c",
                fixed: Optional[Dict[str, float]] = None, rows=None, cols=None) -> PhaseTable:
    """Verdict symbols indexed by two axes; absent cells get ``HOLE``.

    ``fixed`` pins the remaining axes; ``rows``/``cols`` default to the
    values present in the selected records.
    """
    if row_axis not in AXES or col_axis not in AXES or row_axis == col_axis:
        raise ValueError(f"row and column axes must be two distinct members of {AXES}")
    fixed = fixed or {}
    sel = [r for r in records if all(getattr(r, k) == v for k, v in fixed.items())]
    rows = sorted(set(rows if rows is not None else (getattr(r, row_axis) for r in sel)))
    cols = sorted(set(cols if cols is not None else (getattr(r, col_axis) for r in sel)))
    lookup: Dict[tuple, set] = {}
    for r in sel:
        lookup.setdefault((getattr(r, row_axis), getattr(r, col_axis)), set()).add(r.symbol)
    cells = []
    for rv in rows:
        line = []
        for cv in cols:
            syms = lookup.get((rv, cv))
            if not syms:
                line.append(HOLE)
            elif len(syms) == 1:
                line.append(next(iter(syms)))
            else:
                # several records differ only on an unpinned axis
                line.append("".join(sorted(syms)))
        cells.append(line)
    return PhaseTable(row_axis, col_axis, [float(r) for r in rows], [float(c) for c in cols], cells)
