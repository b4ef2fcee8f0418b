"""Parameter, grid and state types for the 1-D chemotaxis-consumption model.

The model, written in a frame moving with speed ``c``::

    u_t = u_xx + c u_x - chi (u v_x)_x + u (a - b u^sigma)
    tau v_t = v_xx + c tau v_x - u v

on ``(-L, L)`` with ``u = 0`` and ``v_x = 0`` at both ends.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from typing import Callable, Optional

import numpy as np

#: exp(1/(x^2-1)) is treated as 0 once |x| reaches 1 - BUMP_EDGE
BUMP_EDGE = 1e-12
#: dt/h^2 bounds are compared with this relative slack; h = 0.1, dt = 0.005
#: evaluates to 0.49999999999999994 in binary floating point
RATIO_RTOL = 1e-9
STABILITY_BOUND = 0.5


@dataclass(frozen=True)
class ModelParams:
    a: float = 1.0
    b: float = 1.0
    chi: float = 0.0
    tau: float = 1.0
    sigma: float = 1.0
    c: float = 0.0

    def kpp_speed(self) -> float:
        """Fisher-KPP spreading speed ``2 sqrt(a)``."""
        return 2.0 * math.sqrt(self.a)

    def capacity(self) -> float:
        """Carrying capacity ``(a/b)^(1/sigma)``."""
        return (self.a / self.b) ** (1.0 / self.sigma)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class GridSpec:
    L: float = 20.0
    M: int = 400
    T: float = 500.0
    dt: float = 0.002

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.M

    @property
    def n_steps(self) -> int:
        # round first so that 500/0.002 = 250000.00000000003 gives 250000
        return int(math.ceil(round(self.T / self.dt, 9)))

    @property
    def diffusive_ratio(self) -> float:
        return self.dt / self.h**2

    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.M + 1, dtype=np.float64)

    def replace(self, **changes) -> "GridSpec":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_h(cls, L: float, h: float, T: float, dt: float) -> "GridSpec":
        M = int(round(2.0 * L / h))
        return cls(L=L, M=M, T=T, dt=dt)


def bump_profile(x):
    """Compactly supported bump ``exp(1/(x^2-1))`` on (-1, 1), zero elsewhere."""
    x = np.asarray(x, dtype=np.float64)
    inside = np.abs(x) < 1.0 - BUMP_EDGE
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.exp(1.0 / (xi * xi - 1.0))
    return out


@dataclass(frozen=True)
class InitialData:
    """Initial profiles ``(u0, v0)``.

    ``kind`` is ``"bump"`` for the bump/constant pair used throughout the
    experiments, or ``"custom"`` with vectorised callables ``u0`` and ``v0``.
    """

    kind: str = "bump"
    u0: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    v0: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    v0_max: float = 1.0
    source: str = "bump"

    @classmethod
    def bump(cls) -> "InitialData":
        return cls()

    @classmethod
    def custom(cls, u0, v0, v0_max: Optional[float] = None, source: str = "custom") -> "InitialData":
        return cls(kind="custom", u0=u0, v0=v0, v0_max=np.nan if v0_max is None else float(v0_max),
                   source=source)

    @classmethod
    def from_csv(cls, path) -> "InitialData":
        """Profiles tabulated as ``x,u,v`` columns, linearly interpolated (0 / edge values outside)."""
        data = np.genfromtxt(path, delimiter=",", names=True)
        xs, us, vs = data["x"], data["u"], data["v"]
        order = np.argsort(xs)
        xs, us, vs = xs[order], us[order], vs[order]

        def u0(x):
            return np.interp(x, xs, us, left=0.0, right=0.0)

        def v0(x):
            return np.interp(x, xs, vs)

        return cls.custom(u0, v0, v0_max=float(np.max(vs)), source=str(path))

    def profiles(self):
        if self.kind == "bump":
            return bump_profile, lambda x: np.ones_like(np.asarray(x, dtype=np.float64))
        if self.kind == "custom":
            if self.u0 is None or self.v0 is None:
                raise ValueError("custom initial data needs both u0 and v0")
            return self.u0, self.v0
        raise ValueError(f"unknown initial data kind {self.kind!r}")


@dataclass
class FieldState:
    step_index: int
    t: float
    u: np.ndarray
    v: np.ndarray

    def copy(self) -> "FieldState":
        return FieldState(self.step_index, self.t, self.u.copy(), self.v.copy())

    def readonly(self) -> "FieldState":
        u = self.u.view()
        v = self.v.view()
        u.flags.writeable = False
        v.flags.writeable = False
        return FieldState(self.step_index, self.t, u, v)


class InitialDataError(ValueError):
    def __init__(self, message: str, index: int):
        super().__init__(f"{message} at node {index}")
        self.index = index


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    diffusive_ratio: float = float("nan")
    advective_ratio: float = float("nan")

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_if_failed(self):
        if self.errors:
            raise ConfigError("; ".join(self.errors))


class ConfigError(ValueError):
    pass


def validate(params: ModelParams, grid: GridSpec, init: Optional[InitialData] = None,
             gradient_guard: float = 1.0) -> ValidationReport:
    """Check the scheme's stability bounds and parameter signs.

    Hard failures: non-finite values, nonpositive ``a, b, tau, sigma, L, dt``,
    negative ``T``, odd or too small ``M``, ``dt/h^2 >= 0.5`` and
    ``dt/(tau h^2) >= 0.5`` (the v-equation diffuses with coefficient 1/tau).
    Soft warnings: advective ratio ``(|c| max(1, tau) + |chi| G) dt/h >= 1``
    and initial support close to the boundary.
    """
    rep = ValidationReport()
    for obj in (params, grid):
        for f in fields(obj):
            val = getattr(obj, f.name)
            if not math.isfinite(val):
                rep.errors.append(f"{f.name} must be finite (got {val})")
    for name in ("a", "b", "tau", "sigma"):
        if not getattr(params, name) > 0:
            rep.errors.append(f"{name} must be > 0 (got {getattr(params, name)})")
    for name in ("L", "dt"):
        if not getattr(grid, name) > 0:
            rep.errors.append(f"{name} must be > 0 (got {getattr(grid, name)})")
    if not grid.T >= 0:
        rep.errors.append(f"T must be >= 0 (got {grid.T})")
    if int(grid.M) != grid.M or grid.M < 4 or grid.M % 2:
        rep.errors.append(f"M must be an even integer >= 4 (got {grid.M})")
    if rep.errors:
        return rep

    ratio = grid.diffusive_ratio
    rep.diffusive_ratio = ratio
    limit = STABILITY_BOUND * (1.0 - RATIO_RTOL)
    if not ratio < limit:
        rep.errors.append(f"dt/h^2 = {ratio:.6g} violates the stability bound dt/h^2 < 0.5")
    elif not ratio / params.tau < limit:
        rep.errors.append(
            f"dt/(tau h^2) = {ratio / params.tau:.6g} violates the v-equation bound dt/(tau h^2) < 0.5")

    adv = (abs(params.c) * max(1.0, params.tau) + abs(params.chi) * gradient_guard) * grid.dt / grid.h
    rep.advective_ratio = adv
    if adv >= 1.0:
        rep.warnings.append(f"advective ratio {adv:.4g} >= 1; central differences may oscillate")

    init = init or InitialData.bump()
    if init.kind == "bump":
        support = (-1.0, 1.0)
    else:
        xs = grid.x()
        u0 = np.asarray(init.profiles()[0](xs), dtype=np.float64)
        nz = np.nonzero(u0 > 0)[0]
        support = (xs[nz[0]], xs[nz[-1]]) if len(nz) else (0.0, 0.0)
    margin = 5 * grid.h
    if support[0] <= -grid.L + margin or support[1] >= grid.L - margin:
        rep.warnings.append(f"support of u0 {support} is not well inside (-L, L)")
    return rep


def sample_initial(init: InitialData, grid: GridSpec) -> FieldState:
    """Sample ``(u0, v0)`` on the grid and impose the boundary rows."""
    xs = grid.x()
    u0f, v0f = init.profiles()
    u = np.array(u0f(xs), dtype=np.float64).reshape(-1)
    v = np.array(v0f(xs), dtype=np.float64).reshape(-1)
    if u.shape != xs.shape or v.shape != xs.shape:
        raise ValueError("initial profiles must return one value per node")
    bad = np.nonzero(~np.isfinite(u) | (u < 0))[0]
    if len(bad):
        raise InitialDataError(f"u0 is NaN or negative ({u[bad[0]]})", int(bad[0]))
    bad = np.nonzero(~np.isfinite(v) | (v < 0))[0]
    if len(bad):
        raise InitialDataError(f"v0 is NaN or negative ({v[bad[0]]})", int(bad[0]))
    if init.kind == "custom" and np.isfinite(init.v0_max) and np.any(v > init.v0_max):
        i = int(np.argmax(v > init.v0_max))
        raise InitialDataError(f"v0 exceeds stated bound {init.v0_max}", i)
    apply_boundary(u, v)
    return FieldState(0, 0.0, u, v)


def apply_boundary(u: np.ndarray, v: np.ndarray) -> None:
    u[0] = 0.0
    u[-1] = 0.0
    v[0] = v[1]
    v[-1] = v[-2]


def v0_max_of(init: InitialData, state: FieldState) -> float:
    if init.kind == "bump":
        return 1.0
    if np.isfinite(init.v0_max):
        return float(init.v0_max)
    return float(np.max(state.v))
