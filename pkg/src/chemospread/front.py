"""Decay/persistence verdicts in the comoving frame and bisection of the
spreading speed and of the critical chemotactic sensitivity."""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .model import GridSpec, InitialData, ModelParams, sample_initial, validate
from .stepper import Snapshots, StepWorkspace, _fold, default_stride, run


class Verdict(str, enum.Enum):
    DECAYED = "Decayed"
    PERSISTED = "Persisted"
    UNDETERMINED = "Undetermined"

    @property
    def symbol(self) -> str:
        return {"Decayed": "D", "Persisted": "P", "Undetermined": "?"}[self.value]


@dataclass(frozen=True)
class ClassifyConfig:
    """Thresholds for :func:`classify`.

    A run is Decayed when ``max u`` falls below ``eps_decay`` or when the
    log-slope of ``max u`` over the dwell window gives an e-folding time no
    longer than ``efold_horizon * T``.  It is Persisted when it is not decaying
    on that timescale and ``max u`` stays above ``delta_persist`` times the
    carrying capacity throughout the dwell window.
    """

    eps_decay: float = 1e-4
    delta_persist: float = 0.1
    center_window: float = 2.0
    dwell_fraction: float = 0.2
    eps_exit: float = 1e-8
    efold_horizon: float = 1.0
    steady_tol: float = 1e-9
    snapshots: int = 200


@dataclass
class Outcome:
    verdict: Verdict
    final_max_u: float
    center_min_u: float
    decision_time: float
    decay_rate: float
    dwell_min_max_u: float
    early_exit: str
    min_u: float
    max_u: float
    min_v: float
    max_v: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict.value
        return d


class BracketInvalid(ValueError):
    def __init__(self, message: str, lo_outcome=None, hi_outcome=None):
        super().__init__(message)
        self.lo_outcome = lo_outcome
        self.hi_outcome = hi_outcome


class FrontAtBoundary(RuntimeError):
    pass


def _log_slope(t: np.ndarray, y: np.ndarray) -> float:
    if len(t) < 2 or np.ptp(t) == 0:
        return 0.0
    return float(np.polyfit(t, np.log(np.maximum(y, 1e-300)), 1)[0])


def classify(params: ModelParams, grid: GridSpec, init: Optional[InitialData] = None,
             config: ClassifyConfig = ClassifyConfig(), hooks=()) -> Outcome:
    """Run the comoving-frame simulation and decide decay vs persistence.

    ``hooks`` are extra observers called at the same snapshot stride.
    """
    init = init or InitialData.bump()
    validate(params, grid, init).raise_if_failed()
    state0 = sample_initial(init, grid)
    xs = grid.x()
    center = np.abs(xs) <= config.center_window
    n_steps = grid.n_steps
    stride = default_stride(n_steps, config.snapshots)
    dwell = config.dwell_fraction * grid.T
    cap = params.capacity()
    lag = max(1, int(round(dwell / (stride * grid.dt))))

    times: List[float] = []
    maxima: List[float] = []
    recent: deque = deque(maxlen=lag + 1)
    exit_reason = [""]

    def stop(state) -> bool:
        m = float(state.u.max())
        times.append(state.t)
        maxima.append(m)
        recent.append(state.u.copy())
        if m < config.eps_exit:
            exit_reason[0] = "decayed"
            return True
        if (len(recent) == lag + 1 and m >= config.delta_persist * cap
                and float(np.max(np.abs(recent[-1] - recent[0]))) < config.steady_tol * cap):
            exit_reason[0] = "steady"
            return True
        return False

    ws = StepWorkspace.for_grid(grid)
    _fold(ws.extremes, state0)
    final = run(state0, params, grid, list(hooks), stride=stride, ws=ws, stop=stop)

    t_arr = np.asarray(times)
    m_arr = np.asarray(maxima)
    t_end = final.t
    sel = t_arr >= t_end - dwell - 1e-9
    rate = _log_slope(t_arr[sel], m_arr[sel])
    dwell_min = float(m_arr[sel].min())
    final_max = float(final.u.max())
    center_min = float(final.u[center].min())

    if final_max < config.eps_decay:
        verdict = Verdict.DECAYED
    elif grid.T > 0 and rate * grid.T <= -1.0 / config.efold_horizon:
        verdict = Verdict.DECAYED
    elif dwell_min >= config.delta_persist * cap:
        verdict = Verdict.PERSISTED
    else:
        verdict = Verdict.UNDETERMINED
    e = ws.extremes
    return Outcome(verdict, final_max, center_min, float(t_end), rate, dwell_min, exit_reason[0],
                   float(e[0]), float(e[1]), float(e[2]), float(e[3]))


@dataclass
class Probe:
    value: float
    outcome: Outcome

    def to_dict(self) -> dict:
        return {"value": self.value, **self.outcome.to_dict()}


@dataclass
class SpeedEstimate:
    lower: float
    upper: float
    tolerance: float
    probes: List[Probe] = field(default_factory=list)
    undetermined: bool = False

    def contains(self, c: float) -> bool:
        return self.lower <= c <= self.upper

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "tolerance": self.tolerance,
                "undetermined": self.undetermined, "probes": [p.to_dict() for p in self.probes]}


@dataclass
class ChiStarBracket:
    lower: float
    upper: float
    tolerance: float
    c_probe: float
    probes: List[Probe] = field(default_factory=list)
    undetermined: bool = False

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "tolerance": self.tolerance,
                "c_probe": self.c_probe, "undetermined": self.undetermined,
                "probes": [p.to_dict() for p in self.probes]}


def _classify_job(args):
    return classify(*args)


def _endpoints(jobs, workers):
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            return list(ex.map(_classify_job, jobs))
    return [_classify_job(j) for j in jobs]


def bisect_speed(params: ModelParams, grid: GridSpec, init: Optional[InitialData], c_lo: float,
                 c_hi: float, tol: float, config: ClassifyConfig = ClassifyConfig(),
                 workers: int = 1) -> SpeedEstimate:
    """Bracket the largest persisting frame speed to within ``tol``.

    Undetermined probes are treated as decayed, which can only lower the
    reported bracket.
    """
    if not c_lo < c_hi:
        raise BracketInvalid(f"empty speed bracket [{c_lo}, {c_hi}]")
    o_lo, o_hi = _endpoints([(params.replace(c=c_lo), grid, init, config),
                             (params.replace(c=c_hi), grid, init, config)], workers)
    if o_lo.verdict is not Verdict.PERSISTED or o_hi.verdict is not Verdict.DECAYED:
        raise BracketInvalid(
            f"need Persisted at c={c_lo} and Decayed at c={c_hi}; got "
            f"{o_lo.verdict.value} and {o_hi.verdict.value}", o_lo, o_hi)
    est = SpeedEstimate(c_lo, c_hi, tol, [Probe(c_lo, o_lo), Probe(c_hi, o_hi)])
    while est.upper - est.lower > tol:
        mid = 0.5 * (est.lower + est.upper)
        o = classify(params.replace(c=mid), grid, init, config)
        est.probes.append(Probe(mid, o))
        if o.verdict is Verdict.PERSISTED:
            est.lower = mid
        else:
            est.undetermined |= o.verdict is Verdict.UNDETERMINED
            est.upper = mid
    return est


def bisect_chi_star(params: ModelParams, grid: GridSpec, init: Optional[InitialData],
                    c_probe: float, chi_lo: float, chi_hi: float, tol: float,
                    config: ClassifyConfig = ClassifyConfig(), workers: int = 1) -> ChiStarBracket:
    """Bracket the sensitivity above which the front persists at ``c_probe``."""
    if not chi_lo < chi_hi:
        raise BracketInvalid(f"empty chi bracket [{chi_lo}, {chi_hi}]")
    base = params.replace(c=c_probe)
    o_lo, o_hi = _endpoints([(base.replace(chi=chi_lo), grid, init, config),
                             (base.replace(chi=chi_hi), grid, init, config)], workers)
    if o_lo.verdict is not Verdict.DECAYED or o_hi.verdict is not Verdict.PERSISTED:
        raise BracketInvalid(
            f"need Decayed at chi={chi_lo} and Persisted at chi={chi_hi} (c={c_probe}); got "
            f"{o_lo.verdict.value} and {o_hi.verdict.value}", o_lo, o_hi)
    br = ChiStarBracket(chi_lo, chi_hi, tol, c_probe, [Probe(chi_lo, o_lo), Probe(chi_hi, o_hi)])
    while br.upper - br.lower > tol:
        mid = 0.5 * (br.lower + br.upper)
        o = classify(base.replace(chi=mid), grid, init, config)
        br.probes.append(Probe(mid, o))
        if o.verdict is Verdict.PERSISTED:
            br.upper = mid
        else:
            br.undetermined |= o.verdict is Verdict.UNDETERMINED
            br.lower = mid
    return br


@dataclass
class FrontTrack:
    times: np.ndarray
    positions: np.ndarray
    speed: float
    decay_rate: float
    fit_window: Tuple[float, float]
    level: float

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "positions": self.positions.tolist(),
                "speed": self.speed, "decay_rate": self.decay_rate,
                "fit_window": list(self.fit_window), "level": self.level}


TAIL_RANGE = (1e-8, 1e-2)


def front_position(x: np.ndarray, u: np.ndarray, level: float) -> float:
    """Largest ``x`` with ``u >= level``, linearly interpolated to the crossing."""
    idx = np.nonzero(u >= level)[0]
    if len(idx) == 0:
        return float("nan")
    i = idx[-1]
    if i == len(x) - 1:
        return float(x[i])
    return float(x[i] + (u[i] - level) / (u[i] - u[i + 1]) * (x[i + 1] - x[i]))


def tail_slope(x: np.ndarray, u: np.ndarray, x_front: float) -> float:
    sel = (x > x_front) & (u >= TAIL_RANGE[0]) & (u <= TAIL_RANGE[1])
    if sel.sum() < 3:
        return float("nan")
    return float(np.polyfit(x[sel], np.log(u[sel]), 1)[0])


def track_front(snaps: Snapshots, level: float = 0.5, L: Optional[float] = None,
                fit_window: Optional[Tuple[float, float]] = None,
                boundary_margin: float = 2.0) -> FrontTrack:
    """Front positions, fitted speed and exponential tail rate of a resting-frame run."""
    if snaps.frame_speed != 0:
        raise ValueError("track_front needs a resting-frame run (c = 0)")
    L = float(np.max(np.abs(snaps.x))) if L is None else L
    T = float(snaps.t[-1])
    lo, hi = fit_window or (0.5 * T, T)
    pos = np.array([front_position(snaps.x, u, level) for u in snaps.u])
    sel = (snaps.t >= lo - 1e-12) & (snaps.t <= hi + 1e-12) & np.isfinite(pos)
    if np.any(pos[sel] >= L - boundary_margin):
        raise FrontAtBoundary(f"front reached within {boundary_margin} of x = {L}; enlarge the domain")
    if sel.sum() < 2:
        raise ValueError("fewer than two front positions in the fit window")
    speed = float(np.polyfit(snaps.t[sel], pos[sel], 1)[0])
    slopes = np.array([tail_slope(snaps.x, snaps.u[k], pos[k]) for k in np.nonzero(sel)[0]])
    slopes = slopes[np.isfinite(slopes)]
    decay = float(-np.mean(slopes)) if len(slopes) else float("nan")
    return FrontTrack(snaps.t.copy(), pos, speed, decay, (lo, hi), level)


def kpp_level(params: ModelParams) -> float:
    return 0.5 * params.capacity()

