"""Time-stepping kernels.

Two interchangeable implementations of the explicit update: a numba
``@njit`` loop and a vectorised numpy version.  Both evaluate the same
expression in the same order.  The active one is chosen at import time:
``CHEMOSPREAD_BACKEND=numpy`` forces the fallback, otherwise numba is used
when importable.
"""
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def _advance_py(u, v, nu, nv, nsteps, dt, h, a, b, chi, tau, sigma, c, ext):
    """Advance ``(u, v)`` in place by ``nsteps`` explicit steps.

    ``nu``/``nv`` are scratch arrays of the same length.  ``ext`` holds the
    running ``[min u, max u, min v, max v]`` and is updated with every new
    time level.  Returns the number of steps completed; fewer than
    ``nsteps`` means a non-finite value appeared in the last one, which is
    left in ``u``/``v``.
    """
    M = u.shape[0] - 1
    inv_h2 = 1.0 / (h * h)
    inv_2h = 1.0 / (2.0 * h)
    unit_sigma = sigma == 1.0
    cur_u, cur_v, new_u, new_v = u, v, nu, nv
    done = 0
    bad = False
    for _ in range(nsteps):
        for i in range(1, M):
            ui = cur_u[i]
            vi = cur_v[i]
            lap_u = cur_u[i - 1] - 2.0 * ui + cur_u[i + 1]
            du = cur_u[i + 1] - cur_u[i - 1]
            lap_v = cur_v[i - 1] - 2.0 * vi + cur_v[i + 1]
            dv = cur_v[i + 1] - cur_v[i - 1]
            if unit_sigma:
                pw = ui
            else:
                pw = max(ui, 0.0) ** sigma
            adv = c - chi * dv * inv_2h
            new_u[i] = ui + dt * (lap_u * inv_h2 + adv * du * inv_2h
                                  - chi * ui * lap_v * inv_h2 + ui * (a - b * pw))
            new_v[i] = vi + dt * (lap_v * inv_h2 / tau + c * dv * inv_2h - ui * vi / tau)
        new_u[0] = 0.0
        new_u[M] = 0.0
        new_v[0] = new_v[1]
        new_v[M] = new_v[M - 1]
        for i in range(M + 1):
            x = new_u[i]
            y = new_v[i]
            if not (abs(x) < np.inf and abs(y) < np.inf):
                bad = True
            if x < ext[0]:
                ext[0] = x
            if x > ext[1]:
                ext[1] = x
            if y < ext[2]:
                ext[2] = y
            if y > ext[3]:
                ext[3] = y
        cur_u, new_u = new_u, cur_u
        cur_v, new_v = new_v, cur_v
        done += 1
        if bad:
            break
    if done % 2 == 1:
        u[:] = cur_u
        v[:] = cur_v
    return done if not bad else done - 1


def advance_numpy(u, v, nu, nv, nsteps, dt, h, a, b, chi, tau, sigma, c, ext):
    inv_h2 = 1.0 / (h * h)
    inv_2h = 1.0 / (2.0 * h)
    unit_sigma = sigma == 1.0
    cur_u, cur_v, new_u, new_v = u, v, nu, nv
    done = 0
    bad = False
    for _ in range(nsteps):
        ui = cur_u[1:-1]
        vi = cur_v[1:-1]
        lap_u = cur_u[:-2] - 2.0 * ui + cur_u[2:]
        du = cur_u[2:] - cur_u[:-2]
        lap_v = cur_v[:-2] - 2.0 * vi + cur_v[2:]
        dv = cur_v[2:] - cur_v[:-2]
        pw = ui if unit_sigma else np.maximum(ui, 0.0) ** sigma
        adv = c - chi * dv * inv_2h
        new_u[1:-1] = ui + dt * (lap_u * inv_h2 + adv * du * inv_2h
                                 - chi * ui * lap_v * inv_h2 + ui * (a - b * pw))
        new_v[1:-1] = vi + dt * (lap_v * inv_h2 / tau + c * dv * inv_2h - ui * vi / tau)
        new_u[0] = 0.0
        new_u[-1] = 0.0
        new_v[0] = new_v[1]
        new_v[-1] = new_v[-2]
        lo_u, hi_u = new_u.min(), new_u.max()
        lo_v, hi_v = new_v.min(), new_v.max()
        # NaN propagates through min/max
        if not (abs(lo_u) < np.inf and abs(hi_u) < np.inf
                and abs(lo_v) < np.inf and abs(hi_v) < np.inf):
            bad = True
        else:
            ext[0] = min(ext[0], lo_u)
            ext[1] = max(ext[1], hi_u)
            ext[2] = min(ext[2], lo_v)
            ext[3] = max(ext[3], hi_v)
        cur_u, new_u = new_u, cur_u
        cur_v, new_v = new_v, cur_v
        done += 1
        if bad:
            break
    if done % 2 == 1:
        u[:] = cur_u
        v[:] = cur_v
    return done if not bad else done - 1


if HAVE_NUMBA:
    advance_numba = numba.njit(cache=True, nogil=True)(_advance_py)
else:  # pragma: no cover
    advance_numba = None

BACKENDS = {"numpy": advance_numpy}
if advance_numba is not None:
    BACKENDS["numba"] = advance_numba


def _default_backend():
    name = os.environ.get("CHEMOSPREAD_BACKEND", "").strip().lower()
    if name:
        if name not in BACKENDS:
            raise RuntimeError(f"CHEMOSPREAD_BACKEND={name!r} is not available; choose from {sorted(BACKENDS)}")
        return name
    return "numba" if HAVE_NUMBA else "numpy"


BACKEND = _default_backend()
advance = BACKENDS[BACKEND]


def new_extremes():
    return np.array([np.inf, -np.inf, np.inf, -np.inf])
