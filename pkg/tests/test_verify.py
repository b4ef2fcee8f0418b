import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chemospread.model import ModelParams
from chemospread.stepper import HeatBaseline, Snapshots
from chemospread.verify import (DomainTooSmall, PreconditionError, check_envelope,
                                check_equilibrium, check_lower_bound, check_v_ahead,
                                dirichlet_operator, eigen_probe,
                                envelope_constant, harnack_monitor, principal_eigenvalue)


def snaps_from(x, t, u, v=None, frame_speed=0.0):
    u = np.asarray(u, dtype=float)
    v = np.zeros_like(u) if v is None else np.asarray(v, dtype=float)
    return Snapshots(np.asarray(x, float), np.arange(len(t)), np.asarray(t, float), u, v, frame_speed)


def envelope_profile(x, t, c_upper, a=1.0):
    return np.minimum(1.0, np.exp(-math.sqrt(a) * (np.abs(x)[None, :] - c_upper * t[:, None])))


def test_envelope_constant_of_exact_envelope_is_one():
    x = np.linspace(-40, 40, 801)
    t = np.linspace(0, 10, 21)
    snaps = snaps_from(x, t, envelope_profile(x, t, 2.1))
    m_fit, *_ = envelope_constant(snaps, 1.0, 2.1)
    assert m_fit == pytest.approx(1.0, rel=1e-12)
    assert check_envelope(snaps, ModelParams(), 2.1).passed


def test_envelope_fails_when_growth_outruns_speed():
    x = np.linspace(-60, 60, 1201)
    t = np.linspace(0, 10, 21)
    snaps = snaps_from(x, t, envelope_profile(x, t, 3.0))  # front faster than c''
    rep = check_envelope(snaps, ModelParams(), 2.1)
    assert rep.failed
    assert rep.witness["t"] > 5.0


def test_envelope_in_comoving_frame_uses_resting_positions():
    x = np.linspace(-40, 40, 801)
    t = np.linspace(0, 10, 21)
    u_rest = envelope_profile(x, t, 2.1)
    # comoving samples at x are resting positions x + c t; build them exactly
    c = 1.0
    xf = x[None, :] + c * t[:, None]
    u_move = np.minimum(1.0, np.exp(-(np.abs(xf) - 2.1 * t[:, None])))
    m_rest, *_ = envelope_constant(snaps_from(x, t, u_rest), 1.0, 2.1)
    m_move, *_ = envelope_constant(snaps_from(x, t, u_move, frame_speed=c), 1.0, 2.1)
    assert m_rest == pytest.approx(m_move)


def test_equilibrium_pass_and_witness():
    x = np.linspace(-5, 5, 101)
    good = snaps_from(x, [0, 1], [np.zeros(101), np.full(101, 0.995)], [np.ones(101), np.full(101, 0.01)])
    assert check_equilibrium(good, ModelParams()).passed
    u = np.full(101, 0.995)
    u[50] = 0.9
    bad = snaps_from(x, [0, 1], [np.zeros(101), u], [np.ones(101), np.full(101, 0.01)])
    rep = check_equilibrium(bad, ModelParams())
    assert rep.failed
    assert rep.witness["x"] == pytest.approx(0.0) and rep.witness["field"] == "u"


def test_equilibrium_needs_persistence():
    x = np.linspace(-5, 5, 101)
    dead = snaps_from(x, [0, 1], [np.zeros(101), np.full(101, 1e-9)])
    with pytest.raises(PreconditionError):
        check_equilibrium(dead, ModelParams())
    with pytest.raises(PreconditionError):
        check_equilibrium(dead, ModelParams(), verdict="Decayed")


def test_lower_bound_preconditions():
    x = np.linspace(-10, 10, 201)
    snaps = snaps_from(x, [0, 10], np.ones((2, 201)))
    with pytest.raises(DomainTooSmall):
        check_lower_bound(snaps, ModelParams(), 1.5)
    with pytest.raises(PreconditionError):
        check_lower_bound(snaps, ModelParams(), 2.5)
    moving = snaps_from(x, [0, 1], np.ones((2, 201)), frame_speed=1.0)
    with pytest.raises(PreconditionError):
        check_lower_bound(moving, ModelParams(), 1.5)


def test_lower_bound_on_saturated_profile():
    x = np.linspace(-40, 40, 801)
    t = np.linspace(0, 10, 11)
    u = np.clip(2.0 * t[:, None] + 1.0 - np.abs(x)[None, :], 0, 1)
    assert check_lower_bound(snaps_from(x, t, u), ModelParams(), 1.5).passed


def test_v_ahead_identical_fields():
    x = np.linspace(-20, 20, 401)
    t = np.linspace(0, 5, 11)
    V = np.ones((11, 401))
    snaps = snaps_from(x, t, np.zeros((11, 401)), V)
    rep = check_v_ahead(snaps, HeatBaseline(x, snaps.steps, t, V, 1.0), 2.1)
    assert rep.passed and math.isinf(rep.measured["gamma_fit"])


def test_v_ahead_recovers_decay_rate():
    x = np.linspace(-40, 40, 801)
    t = np.linspace(0, 10, 21)
    V = np.ones((21, 801))
    v = V - 0.1 * np.exp(-0.5 * t)[:, None]
    rep = check_v_ahead(snaps_from(x, t, np.zeros_like(V), v), HeatBaseline(x, np.arange(21), t, V, 1.0), 2.1)
    assert rep.passed
    assert rep.measured["gamma_fit"] == pytest.approx(0.5)


@given(K=st.floats(1e-3, 1e3), p=st.floats(1.1, 5.0))
@settings(max_examples=50, deadline=None)
def test_harnack_constant_for_constant_field(K, p):
    x = np.linspace(-5, 5, 101)
    t = np.linspace(0, 4, 5)
    snaps = snaps_from(x, t, np.full((5, 101), K))
    C = harnack_monitor(snaps, p, s0=1.0, R=1.0)
    assert C == pytest.approx(K ** (1.0 - 1.0 / p), rel=1e-12)


def test_harnack_rejects_time_shift_in_moving_frame():
    x = np.linspace(-5, 5, 101)
    snaps = snaps_from(x, [0, 1, 2], np.ones((3, 101)), frame_speed=1.0)
    with pytest.raises(ValueError):
        harnack_monitor(snaps, 2.0, s0=1.0, R=1.0)
    assert harnack_monitor(snaps, 2.0, s0=0.0, R=1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("c,expected", [(0.0, 0.09375), (1.0, 0.09375), (1.5, 0.09375)])
def test_eigen_closed_form(c, expected):
    probe = eigen_probe(c, 0.5)
    assert probe.lambda_closed == pytest.approx(expected, abs=1e-15)


def test_principal_eigenvalue_matches_tridiagonal_formula():
    c, a_bar, l0, n = 1.0, 0.375, 8.0, 399
    h, diag, lower, upper = dirichlet_operator(c, a_bar, l0, n)
    exact = diag[0] + 2.0 * math.sqrt(lower[0] * upper[0]) * math.cos(math.pi / (n + 1))
    lam, _ = principal_eigenvalue(c, a_bar, l0, n)
    assert lam == pytest.approx(exact, abs=1e-11)


def test_eigen_gap_shrinks_quadratically():
    coarse = eigen_probe(1.0, 0.5)
    fine = eigen_probe(1.0, 0.5, h_eig=coarse.h_eig / 2)
    assert coarse.gap <= 1e-4
    assert 3.5 <= coarse.gap / fine.gap <= 4.5


def test_eigen_higher_dimension_adds_free_modes():
    probe = eigen_probe(0.0, 0.5, N=2)
    assert probe.lambda_closed == pytest.approx(0.125 - 2 * math.pi ** 2 / (4 * probe.l0 ** 2))
    assert probe.gap <= 1e-4


def test_eigen_rejects_supercritical_speed():
    with pytest.raises(PreconditionError):
        eigen_probe(1.8, 0.5)
    with pytest.raises(PreconditionError):
        eigen_probe(0.0, 1.5)
