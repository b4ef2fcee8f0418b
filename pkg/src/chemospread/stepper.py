"""Explicit finite-difference stepping of the comoving-frame system."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .model import FieldState, GridSpec, ModelParams, STABILITY_BOUND, RATIO_RTOL

DEFAULT_SNAPSHOTS = 200
SNAPSHOT_HEADER = ["step", "t", "x", "u", "v"]


class BlowUp(RuntimeError):
    """A non-finite value appeared in the solution."""

    def __init__(self, step_index: int, t: float):
        super().__init__(f"non-finite value at step {step_index} (t = {t:.6g})")
        self.step_index = step_index
        self.t = t


@dataclass
class StepWorkspace:
    next_u: np.ndarray
    next_v: np.ndarray
    extremes: np.ndarray = field(default_factory=_kernels.new_extremes)

    @classmethod
    def for_grid(cls, grid: GridSpec) -> "StepWorkspace":
        return cls(np.empty(grid.M + 1), np.empty(grid.M + 1))


def _advance(state: FieldState, params: ModelParams, grid: GridSpec, ws: StepWorkspace,
             nsteps: int, kernel=None) -> None:
    kernel = kernel or _kernels.advance
    done = kernel(state.u, state.v, ws.next_u, ws.next_v, nsteps, grid.dt, grid.h,
                  params.a, params.b, params.chi, params.tau, params.sigma, params.c,
                  ws.extremes)
    state.step_index += done
    state.t = state.step_index * grid.dt
    if done < nsteps:
        raise BlowUp(state.step_index + 1, (state.step_index + 1) * grid.dt)


def step(state: FieldState, params: ModelParams, grid: GridSpec,
         ws: Optional[StepWorkspace] = None) -> FieldState:
    """Advance ``state`` in place by one time step and return it."""
    ws = ws or StepWorkspace.for_grid(grid)
    _advance(state, params, grid, ws, 1)
    return state


def default_stride(n_steps: int, snapshots: int = DEFAULT_SNAPSHOTS) -> int:
    return max(1, n_steps // snapshots)


Observer = Callable[[FieldState], object]


def run(state0: FieldState, params: ModelParams, grid: GridSpec,
        hooks: Sequence[Observer] = (), stride: Optional[int] = None,
        ws: Optional[StepWorkspace] = None, stop: Optional[Callable[[FieldState], bool]] = None,
        n_steps: Optional[int] = None) -> FieldState:
    """Apply ``ceil(T/dt)`` steps, calling each hook every ``stride`` steps.

    Hooks see read-only views at step 0, every multiple of ``stride`` and the
    final step.  ``stop`` is evaluated at the same points; returning True ends
    the run early.  ``state0`` is not modified.
    """
    state = state0.copy()
    ws = ws or StepWorkspace.for_grid(grid)
    total = grid.n_steps if n_steps is None else n_steps
    stride = stride or default_stride(total)

    def observe():
        view = state.readonly()
        for hook in hooks:
            hook(view)
        return stop is not None and stop(view)

    if observe():
        return state
    while state.step_index < total:
        chunk = min(stride - state.step_index % stride, total - state.step_index)
        _advance(state, params, grid, ws, chunk)
        if observe():
            break
    return state


@dataclass
class Snapshots:
    """Stored trajectory: ``u``/``v`` rows at the observed steps."""

    x: np.ndarray
    steps: np.ndarray
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    frame_speed: float = 0.0

    def __len__(self):
        return len(self.t)

    def window(self, t_min: float, t_max: float = np.inf) -> "Snapshots":
        sel = (self.t >= t_min - 1e-12) & (self.t <= t_max + 1e-12)
        return Snapshots(self.x, self.steps[sel], self.t[sel], self.u[sel], self.v[sel],
                         self.frame_speed)

    def fixed_frame_x(self) -> np.ndarray:
        """Positions in the resting frame, shape ``(len(t), len(x))``."""
        return self.x[None, :] + self.frame_speed * self.t[:, None]


class SnapshotRecorder:
    """Observer accumulating snapshots in memory."""

    def __init__(self, grid: GridSpec, frame_speed: float = 0.0):
        self.x = grid.x()
        self.frame_speed = frame_speed
        self._steps, self._t, self._u, self._v = [], [], [], []

    def __call__(self, state: FieldState):
        self._steps.append(state.step_index)
        self._t.append(state.t)
        self._u.append(state.u.copy())
        self._v.append(state.v.copy())

    def snapshots(self) -> Snapshots:
        return Snapshots(self.x, np.array(self._steps, dtype=np.int64), np.array(self._t),
                         np.array(self._u), np.array(self._v), self.frame_speed)


class CSVSnapshotWriter:
    """Observer streaming ``step,t,x,u,v`` rows to a file."""

    def __init__(self, path, grid: GridSpec):
        self.x = grid.x()
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(SNAPSHOT_HEADER)

    def __call__(self, state: FieldState):
        step, t = state.step_index, repr(float(state.t))
        self._writer.writerows(
            (step, t, repr(float(x)), repr(float(u)), repr(float(v)))
            for x, u, v in zip(self.x, state.u, state.v))
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_snapshots_csv(path, frame_speed: float = 0.0) -> Snapshots:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    steps = data[:, 0].astype(np.int64)
    uniq, first = np.unique(steps, return_index=True)
    order = np.argsort(first)
    uniq = uniq[order]
    n_nodes = int(np.sum(steps == uniq[0]))
    if n_nodes * len(uniq) != len(steps):
        raise ValueError(f"{path}: snapshots have differing node counts")
    block = data.reshape(len(uniq), n_nodes, 5)
    return Snapshots(block[0, :, 2].copy(), block[:, 0, 0].astype(np.int64), block[:, 0, 1].copy(),
                     block[:, :, 3].copy(), block[:, :, 4].copy(), frame_speed)


@dataclass
class HeatBaseline:
    """Solution ``V`` of ``tau V_t = V_xx`` with Neumann ends, at observed steps."""

    x: np.ndarray
    steps: np.ndarray
    t: np.ndarray
    V: np.ndarray
    tau: float


def run_heat(v0: np.ndarray, tau: float, grid: GridSpec, stride: Optional[int] = None,
             n_steps: Optional[int] = None) -> HeatBaseline:
    """Evolve ``v0`` by the v-update with ``u = 0`` and ``c = 0``."""
    if not grid.diffusive_ratio < STABILITY_BOUND * tau * (1.0 - RATIO_RTOL):
        from .model import ConfigError

        raise ConfigError(f"heat baseline needs dt/h^2 < tau/2 (dt/h^2 = {grid.diffusive_ratio:.6g}, tau = {tau})")
    v0 = np.asarray(v0, dtype=np.float64)
    if v0.shape != (grid.M + 1,):
        raise ValueError("v0 must have one value per node")
    state = FieldState(0, 0.0, np.zeros(grid.M + 1), v0.copy())
    state.v[0] = state.v[1]
    state.v[-1] = state.v[-2]
    params = ModelParams(a=0.0, b=0.0, chi=0.0, tau=tau, sigma=1.0, c=0.0)
    rec = SnapshotRecorder(grid)
    run(state, params, grid, [rec], stride=stride, n_steps=n_steps)
    snaps = rec.snapshots()
    return HeatBaseline(snaps.x, snaps.steps, snaps.t, snaps.v, tau)


@dataclass
class RunSummary:
    final: FieldState
    min_u: float
    max_u: float
    min_v: float
    max_v: float


def simulate(state0: FieldState, params: ModelParams, grid: GridSpec,
             hooks: Iterable[Observer] = (), stride: Optional[int] = None) -> RunSummary:
    """``run`` plus the extremes of ``u`` and ``v`` over every time level."""
    ws = StepWorkspace.for_grid(grid)
    _fold(ws.extremes, state0)
    final = run(state0, params, grid, list(hooks), stride=stride, ws=ws)
    e = ws.extremes
    return RunSummary(final, float(e[0]), float(e[1]), float(e[2]), float(e[3]))


def _fold(ext: np.ndarray, state: FieldState) -> None:
    ext[0] = min(ext[0], state.u.min())
    ext[1] = max(ext[1], state.u.max())
    ext[2] = min(ext[2], state.v.min())
    ext[3] = max(ext[3], state.v.max())
