"""Quantitative checks of the spreading-speed statements on stored runs,
and the principal-eigenvalue probe."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded
from scipy.ndimage import minimum_filter1d

from .model import ModelParams
from .stepper import HeatBaseline, Snapshots


class PreconditionError(ValueError):
    """The check does not apply to the given run or arguments."""


class DomainTooSmall(PreconditionError):
    pass


class NoData(ValueError):
    pass


class EigenNonConvergence(RuntimeError):
    pass


@dataclass
class TheoremReport:
    name: str
    status: str  # "pass", "fail", "precondition not met" or "reported"
    measured: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    witness: Optional[dict] = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    @property
    def failed(self) -> bool:
        return self.status == "fail"

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "pass": self.passed,
                "measured": _plain(self.measured), "tolerances": _plain(self.tolerances),
                "provenance": _plain(self.provenance), "witness": _plain(self.witness)}


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def skipped(name: str, reason: str) -> TheoremReport:
    return TheoremReport(name, "precondition not met", measured={"reason": reason})


def _report(name, ok, measured, tolerances, provenance, witness):
    return TheoremReport(name, "pass" if ok else "fail", measured, tolerances, provenance,
                         None if ok else witness)


def _require_resting(snaps: Snapshots, name: str):
    if snaps.frame_speed != 0:
        raise PreconditionError(f"{name} needs a resting-frame run (c = 0), got c = {snaps.frame_speed}")


# -- lower bound -----------------------------------------------------------

def check_lower_bound(snaps: Snapshots, params: ModelParams, c_prime: float,
                      delta_persist: float = 0.1) -> TheoremReport:
    """``u`` stays bounded away from zero on ``|x| <= c' t`` for ``t`` in ``[T/2, T]``."""
    name = "lower_bound"
    _require_resting(snaps, name)
    kpp = params.kpp_speed()
    if not c_prime < kpp:
        raise PreconditionError(f"c' = {c_prime} must be below 2 sqrt(a) = {kpp}")
    T = float(snaps.t[-1])
    L = float(np.max(np.abs(snaps.x)))
    if L < kpp * T + 5:
        raise DomainTooSmall(f"L = {L} < 2 sqrt(a) T + 5 = {kpp * T + 5}")
    late = snaps.window(T / 2, T)
    floor = 0.1 * delta_persist * params.capacity()
    best = (np.inf, None, None)
    for t, u in zip(late.t, late.u):
        inside = np.abs(snaps.x) <= c_prime * t
        if not inside.any():
            continue
        i = np.argmin(np.where(inside, u, np.inf))
        if u[i] < best[0]:
            best = (float(u[i]), float(t), float(snaps.x[i]))
    ok = best[0] > floor
    return _report(name, ok, {"inf_u": best[0], "at_t": best[1], "at_x": best[2]},
                   {"floor": floor, "c_prime": c_prime}, {"T": T, "L": L},
                   {"t": best[1], "x": best[2], "value": best[0]})


# -- exponential envelope --------------------------------------------------

def envelope_constant(snaps: Snapshots, a: float, c_upper: float):
    """``max u(t,x) exp(sqrt(a)(|x| - c'' t))`` over all snapshots, with the
    per-snapshot maxima.  Positions are converted to the resting frame."""
    xf = snaps.fixed_frame_x()
    expo = math.sqrt(a) * (np.abs(xf) - c_upper * snaps.t[:, None])
    with np.errstate(over="ignore", invalid="ignore"):
        prod = np.where(snaps.u > 0, snaps.u * np.exp(expo), 0.0)
    per_t = prod.max(axis=1)
    k = int(np.argmax(per_t))
    i = int(np.argmax(prod[k]))
    return float(per_t[k]), k, i, per_t


def check_envelope(snaps: Snapshots, params: ModelParams, c_upper: float) -> TheoremReport:
    """The weighted maximum is finite and reached in the first half of the run."""
    if len(snaps) == 0:
        raise NoData("no snapshots")
    m_fit, k, i, per_t = envelope_constant(snaps, params.a, c_upper)
    T = float(snaps.t[-1])
    t_att = float(snaps.t[k])
    ok = math.isfinite(m_fit) and (t_att <= 0.5 * T or T == 0)
    late = per_t[snaps.t >= 0.5 * T]
    return _report("envelope", ok,
                   {"M_fit": m_fit, "attained_t": t_att, "attained_x": float(snaps.fixed_frame_x()[k, i]),
                    "late_max": float(late.max()) if len(late) else float("nan")},
                   {"c_upper": c_upper, "attain_before": 0.5 * T},
                   {"T": T, "frame_speed": snaps.frame_speed},
                   {"t": t_att, "x": float(snaps.x[i]), "value": m_fit})


# -- convergence behind the front ------------------------------------------

def check_equilibrium(snaps: Snapshots, params: ModelParams, v0_max: float = 1.0,
                      window: float = 2.0, rtol: float = 0.02, verdict=None,
                      eps_decay: float = 1e-4) -> TheoremReport:
    """At the final time ``u`` is within 2% of the carrying capacity and ``v``
    below 2% of ``max v0`` on ``|x| <= window``."""
    name = "equilibrium"
    u = snaps.u[-1]
    v = snaps.v[-1]
    if verdict is not None and getattr(verdict, "value", verdict) != "Persisted":
        raise PreconditionError(f"run is {getattr(verdict, 'value', verdict)}, not Persisted")
    if verdict is None and float(u.max()) < eps_decay:
        raise PreconditionError("run has decayed (max u below the decay threshold)")
    cap = params.capacity()
    center = np.abs(snaps.x) <= window
    du = np.abs(u[center] - cap) / cap
    vv = v[center]
    iu, iv = int(np.argmax(du)), int(np.argmax(vv))
    ok = du[iu] < rtol and vv[iv] < rtol * v0_max
    xc = snaps.x[center]
    if du[iu] >= rtol:
        witness = {"t": float(snaps.t[-1]), "x": float(xc[iu]), "value": float(u[center][iu]), "field": "u"}
    else:
        witness = {"t": float(snaps.t[-1]), "x": float(xc[iv]), "value": float(vv[iv]), "field": "v"}
    return _report(name, ok,
                   {"max_rel_u_error": float(du[iu]), "max_v": float(vv[iv]),
                    "center_min_u": float(u[center].min())},
                   {"rtol": rtol, "v_bound": rtol * v0_max, "window": window},
                   {"t": float(snaps.t[-1])}, witness)


# -- chemical ahead of the front -------------------------------------------

def v_ahead_error(snaps: Snapshots, heat: HeatBaseline, c_upper: float):
    """``E(t) = sup_{|x| >= c'' t} |v - V|``; NaN where the region is empty."""
    if len(heat.t) != len(snaps.t) or not np.allclose(heat.t, snaps.t, rtol=0, atol=1e-9):
        raise ValueError("heat baseline must be observed at the same times as the run")
    E = np.full(len(snaps.t), np.nan)
    for k, t in enumerate(snaps.t):
        region = np.abs(snaps.x) >= c_upper * t
        if region.any():
            E[k] = float(np.max(np.abs(snaps.v[k, region] - heat.V[k, region])))
    return E


def check_v_ahead(snaps: Snapshots, heat: HeatBaseline, c_upper: float) -> TheoremReport:
    """``E(t)`` is eventually decreasing with a negative exponential rate."""
    name = "v_ahead"
    _require_resting(snaps, name)
    E = v_ahead_error(snaps, heat, c_upper)
    T = float(snaps.t[-1])
    truncated = bool(np.isnan(E).any())
    late = (snaps.t >= 0.5 * T) & np.isfinite(E)
    measured = {"E_final": float(E[late][-1]) if late.any() else float("nan"),
                "E_max": float(np.nanmax(E)) if np.isfinite(E).any() else float("nan"),
                "truncated": truncated}
    prov = {"T": T, "c_upper": c_upper}
    if late.sum() < 2:
        measured["gamma_fit"] = float("nan")
        return _report(name, False, measured, {}, prov, {"t": T, "x": None, "value": None})
    El = E[late]
    tl = snaps.t[late]
    if np.all(El == 0):
        measured["gamma_fit"] = float("inf")
        return _report(name, True, measured, {}, prov, None)
    pos = El > 0
    gamma = -float(np.polyfit(tl[pos], np.log(El[pos]), 1)[0]) if pos.sum() >= 2 else float("nan")
    measured["gamma_fit"] = gamma
    decreasing = El[-1] < El[0]
    ok = bool(gamma > 0 and decreasing)
    k = int(np.argmax(El))
    return _report(name, ok, measured, {"gamma_min": 0.0}, prov,
                   {"t": float(tl[k]), "x": None, "value": float(El[k])})


# -- Harnack-type monitor --------------------------------------------------

def harnack_monitor(snaps: Snapshots, p: float, s0: float, R: float, t_min: float = 1.0,
                    floor: float = 1e-12) -> float:
    """Smallest ``C`` with ``u(t,x) <= C u(t+s,y)^(1/p)`` over the sampled
    ``t >= t_min``, ``0 <= s <= s0``, ``|x-y| <= R``, ignoring ``u(t+s,y) <= floor``."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    if snaps.frame_speed != 0 and s0 > 0:
        raise ValueError("time-shifted comparisons need a resting-frame run")
    h = float(snaps.x[1] - snaps.x[0])
    r = int(math.floor(R / h + 1e-9))
    valid = np.where(snaps.u > floor, snaps.u, np.inf)
    wmin = minimum_filter1d(valid, size=2 * r + 1, axis=1, mode="constant", cval=np.inf)
    best = -np.inf
    for k, t in enumerate(snaps.t):
        if t < t_min - 1e-12:
            continue
        for k2 in range(k, len(snaps.t)):
            if snaps.t[k2] - t > s0 + 1e-12:
                break
            den = wmin[k2]
            ok = np.isfinite(den)
            if ok.any():
                best = max(best, float(np.max(snaps.u[k, ok] / den[ok] ** (1.0 / p))))
    if best == -np.inf:
        raise NoData("no sample with u(t+s, y) above the floor")
    return best


# -- principal eigenvalue probe --------------------------------------------

@dataclass
class EigenProbe:
    c: float
    a: float
    delta0: float
    N: int
    a_bar: float
    l0: float
    R0: float
    h_eig: float
    lambda_closed: float
    lambda_discrete: float
    iterations: int

    @property
    def gap(self) -> float:
        return abs(self.lambda_discrete - self.lambda_closed)

    def to_dict(self) -> dict:
        from dataclasses import asdict

        d = asdict(self)
        d["gap"] = self.gap
        return d


def closed_form_eigenvalue(c: float, a_bar: float, l0: float, N: int = 1) -> float:
    return a_bar - c * c / 4.0 - N * math.pi**2 / (4.0 * l0**2)


def dirichlet_operator(c: float, a_bar: float, l0: float, n: int):
    """Tridiagonal 3-point discretisation of ``phi'' + c phi' + a_bar phi`` on
    ``n`` interior nodes of ``(-l0, l0)``: returns ``(h, diag, lower, upper)``."""
    h = 2.0 * l0 / (n + 1)
    diag = np.full(n, -2.0 / h**2 + a_bar)
    lower = np.full(n - 1, 1.0 / h**2 - c / (2.0 * h))
    upper = np.full(n - 1, 1.0 / h**2 + c / (2.0 * h))
    return h, diag, lower, upper


def principal_eigenvalue(c: float, a_bar: float, l0: float, n: int, tol: float = 1e-15,
                         max_iter: int = 10_000):
    """Largest eigenvalue of the discrete operator by shifted inverse iteration.

    The ``exp(c x / 2)`` similarity makes the matrix symmetric with off-diagonal
    ``sqrt(lower * upper)``; the shift is its Gershgorin upper bound, so the
    principal eigenvalue is the one nearest the shift.
    """
    h, diag, lower, upper = dirichlet_operator(c, a_bar, l0, n)
    prod = lower * upper
    if np.any(prod <= 0):
        raise ValueError(f"h_eig = {h} too coarse for c = {c}: need h |c| < 2")
    off = np.sqrt(prod)
    shift = float(diag[0] + 2.0 * off[0]) + 1e-6
    # (shift I - S) is symmetric positive definite; upper banded storage
    ab = np.zeros((2, n))
    ab[0, 1:] = -off
    ab[1, :] = shift - diag
    chol = cholesky_banded(ab)
    x = np.full(n, 1.0 / math.sqrt(n))
    lam_old = np.inf
    for it in range(1, max_iter + 1):
        y = cho_solve_banded((chol, False), x)
        x = y / np.linalg.norm(y)
        Sx = diag * x
        Sx[:-1] += off * x[1:]
        Sx[1:] += off * x[:-1]
        lam = float(x @ Sx)
        # the quotient carries roundoff of order eps * 4/h^2
        if abs(lam - lam_old) <= tol * max(1.0, abs(lam), 4.0 / h**2):
            return lam, it
        lam_old = lam
    raise EigenNonConvergence(f"inverse iteration did not converge in {max_iter} iterations")


def eigen_probe(c: float, delta0: float, a: float = 1.0, N: int = 1,
                h_eig: Optional[float] = None) -> EigenProbe:
    """Closed-form and discrete principal eigenvalues for frame speed ``c``.

    ``a_bar`` is the smallest rate with ``4 a_bar - c^2 >= delta0 sqrt(a)``;
    the half-width is ``l0 = 2 pi sqrt(N) (delta0 sqrt(a))^(-1/2)``.  The
    discrete value is for the cube ``(-l0, l0)^N`` with drift along the first
    axis, which separates into one drifted and ``N-1`` pure 1-D problems.
    """
    kpp = 2.0 * math.sqrt(a)
    if not (0 < delta0 < 1):
        raise PreconditionError(f"delta0 = {delta0} must lie in (0, 1)")
    if abs(c) > kpp - delta0 + 1e-12:
        raise PreconditionError(f"|c| = {abs(c)} exceeds 2 sqrt(a) - delta0 = {kpp - delta0}")
    a_bar = (c * c + delta0 * math.sqrt(a)) / 4.0
    if not a_bar < a:
        raise PreconditionError(f"a_bar = {a_bar} is not below a = {a}")
    l0 = 2.0 * math.pi * math.sqrt(N) * (delta0 * math.sqrt(a)) ** -0.5
    h_eig = l0 / 400 if h_eig is None else h_eig
    n = int(round(2.0 * l0 / h_eig)) - 1
    lam, its = principal_eigenvalue(c, a_bar, l0, n)
    if N > 1:
        lam_free, its2 = principal_eigenvalue(0.0, 0.0, l0, n)
        lam += (N - 1) * lam_free
        its += its2
    return EigenProbe(c, a, delta0, N, a_bar, l0, math.sqrt(N) * l0, 2.0 * l0 / (n + 1),
                      closed_form_eigenvalue(c, a_bar, l0, N), lam, its)
