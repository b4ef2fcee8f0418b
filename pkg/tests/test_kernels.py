from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chemospread import _kernels
from chemospread.model import FieldState, GridSpec, ModelParams
from chemospread.stepper import BlowUp, StepWorkspace, _advance, step


def exact_step(u, v, dt, h, a, b, chi, tau, c):
    """One step in rational arithmetic from the expanded PDE terms (sigma = 1)."""
    F = Fraction
    u = [F(x) for x in u]
    v = [F(x) for x in v]
    dt, h, a, b, chi, tau, c = (F(x) for x in (dt, h, a, b, chi, tau, c))
    M = len(u) - 1
    nu, nv = u[:], v[:]
    for i in range(1, M):
        ux = (u[i + 1] - u[i - 1]) / (2 * h)
        vx = (v[i + 1] - v[i - 1]) / (2 * h)
        uxx = (u[i + 1] - 2 * u[i] + u[i - 1]) / h ** 2
        vxx = (v[i + 1] - 2 * v[i] + v[i - 1]) / h ** 2
        nu[i] = u[i] + dt * (uxx + c * ux - chi * (ux * vx + u[i] * vxx) + u[i] * (a - b * u[i]))
        nv[i] = v[i] + dt * (vxx / tau + c * vx - u[i] * v[i] / tau)
    nu[0] = nu[M] = 0
    nv[0], nv[M] = nv[1], nv[M - 1]
    return [float(x) for x in nu], [float(x) for x in nv]


GOLDEN_U = [0.0, 0.25, 0.5, 0.125, 0.0]
GOLDEN_V = [1.0, 1.0, 0.5, 0.75, 0.75]


@pytest.mark.parametrize("backend", sorted(_kernels.BACKENDS))
def test_golden_single_step(backend):
    params = ModelParams(a=1.5, b=0.5, chi=2.0, tau=2.0, c=0.75)
    grid = GridSpec(L=0.25, M=4, T=0.001, dt=0.001)
    state = FieldState(0, 0.0, np.array(GOLDEN_U), np.array(GOLDEN_V))
    _advance(state, params, grid, StepWorkspace.for_grid(grid), 1, _kernels.BACKENDS[backend])
    eu, ev = exact_step(GOLDEN_U, GOLDEN_V, grid.dt, grid.h, 1.5, 0.5, 2.0, 2.0, 0.75)
    np.testing.assert_allclose(state.u, eu, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(state.v, ev, rtol=1e-13, atol=1e-15)
    # the same step worked out by hand as exact fractions (h = 1/8)
    np.testing.assert_allclose(state.u[1:4], [8827 / 32000, 329 / 800, 18903 / 128000], rtol=1e-13)
    np.testing.assert_allclose(state.v[1:4], [7859 / 8000, 837 / 1600, 47533 / 64000], rtol=1e-13)


@pytest.mark.parametrize("backend", sorted(_kernels.BACKENDS))
def test_fixed_points_exact(backend):
    grid = GridSpec(L=2.0, M=40, T=1.0, dt=0.002)
    params = ModelParams(chi=3.0, c=1.5, tau=0.7)
    u = np.zeros(grid.M + 1)
    v = np.ones(grid.M + 1)
    state = FieldState(0, 0.0, u, v)
    _advance(state, params, grid, StepWorkspace.for_grid(grid), 500, _kernels.BACKENDS[backend])
    assert np.all(state.u == 0.0)
    assert np.all(state.v == 1.0)


@pytest.mark.skipif("numba" not in _kernels.BACKENDS, reason="numba unavailable")
@given(seed=st.integers(0, 2 ** 32 - 1), chi=st.floats(-10, 10), c=st.floats(-3, 3),
       sigma=st.sampled_from([1.0, 0.5, 2.0]), nsteps=st.integers(1, 7))
@settings(max_examples=40, deadline=None)
def test_backends_agree(seed, chi, c, sigma, nsteps):
    rng = np.random.default_rng(seed)
    M = 30
    u = rng.uniform(0, 1, M + 1)
    v = rng.uniform(0, 1, M + 1)
    u[0] = u[-1] = 0.0
    out = []
    for name in ("numpy", "numba"):
        uu, vv = u.copy(), v.copy()
        ext = _kernels.new_extremes()
        done = _kernels.BACKENDS[name](uu, vv, np.empty_like(uu), np.empty_like(vv), nsteps,
                                       1e-4, 0.1, 1.0, 1.0, chi, 1.0, sigma, c, ext)
        out.append((done, uu, vv, ext))
    (d1, u1, v1, e1), (d2, u2, v2, e2) = out
    assert d1 == d2 == nsteps
    np.testing.assert_allclose(u1, u2, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(v1, v2, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(e1, e2, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("backend", sorted(_kernels.BACKENDS))
@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blowup_detected(backend):
    grid = GridSpec(L=2.0, M=40, T=10.0, dt=0.05)  # far beyond the stability limit
    params = ModelParams(chi=5.0)
    x = grid.x()
    state = FieldState(0, 0.0, np.exp(-x ** 2), np.ones_like(x))
    with pytest.raises(BlowUp) as exc:
        _advance(state, params, grid, StepWorkspace.for_grid(grid), grid.n_steps,
                 _kernels.BACKENDS[backend])
    assert 0 < exc.value.step_index <= grid.n_steps
    assert state.step_index == exc.value.step_index - 1


def test_step_advances_one_level():
    grid = GridSpec(L=1.0, M=20, T=1.0, dt=0.001)
    state = FieldState(0, 0.0, np.zeros(21), np.ones(21))
    step(state, ModelParams(), grid)
    assert state.step_index == 1 and state.t == pytest.approx(0.001)


@pytest.mark.parametrize("name", ["numpy", "bogus"])
def test_backend_selected_by_environment(name):
    import os
    import subprocess
    import sys

    env = dict(os.environ, CHEMOSPREAD_BACKEND=name)
    proc = subprocess.run([sys.executable, "-c", "import chemospread; print(chemospread.BACKEND)"],
                          env=env, capture_output=True, text=True)
    if name == "numpy":
        assert proc.stdout.strip() == "numpy"
    else:
        assert proc.returncode != 0 and "not available" in proc.stderr
