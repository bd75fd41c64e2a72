import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frachigs import (DfQuery, GammaSolveError, HigsMode, HigsParams, TimeSeries,
                      df_classic, df_fractional, df_harmonic_n, gamma_classic,
                      gamma_fractional, gamma_intermediates, higs_response,
                      piecewise_output, switching_angle)

GRID = np.logspace(-2, 2, 50)


def q(omega, alpha, omega_h=1.0, k_h=1.0, e_hat=1.0):
    return DfQuery(omega, e_hat, HigsParams(omega_h, k_h, alpha))


def _quadrature_first_harmonic(query, n_pts=200_001):
    # independent oracle: trapezoid on the piecewise steady output
    th = np.linspace(0.0, 2 * np.pi, n_pts)
    u = piecewise_output(query, th)
    b1 = np.trapezoid(u * np.sin(th), th) / np.pi
    a1 = np.trapezoid(u * np.cos(th), th) / np.pi
    return complex(b1, a1) / query.e_hat


# -- switching angle -------------------------------------------------------------

def test_gamma_classic_examples():
    assert gamma_classic(1.0, 1.0, 1.0) == pytest.approx(math.pi / 2)
    assert gamma_classic(1e-9, 1.0, 1.0) == pytest.approx(0.0, abs=1e-8)
    assert gamma_classic(10.0, 1.0, 1.0) == pytest.approx(2 * math.atan(10.0))
    assert gamma_classic(10.0, 1.0, 1.0) == pytest.approx(2.9423, abs=1e-4)
    assert gamma_classic(3.0, 0.0, 1.0) == math.pi
    with pytest.raises(ValueError):
        gamma_classic(0.0, 1.0, 1.0)


@pytest.mark.parametrize("omega", GRID[::5])
def test_gamma_fractional_reduces_to_classic(omega):
    assert gamma_fractional(q(omega, 1.0)) == pytest.approx(
        gamma_classic(omega, 1.0, 1.0), rel=1e-9)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.9])
@pytest.mark.parametrize("omega", [0.3, 1.0, 10.0])
def test_gamma_satisfies_continuity_equation(alpha, omega):
    query = q(omega, alpha, omega_h=0.5, k_h=1.0)
    g = gamma_fractional(query)
    gi = gamma_intermediates(query)
    phi = math.pi * alpha / 2
    lhs = gi.B * (math.sin(g - phi) + math.sin(phi))
    assert lhs == pytest.approx(gi.C * math.sin(g), abs=1e-6 * max(gi.B, gi.C))
    assert 0.0 < g < math.pi


def test_gamma_fractional_reports_gain_locked_case():
    # B cos(phi) > C: the integrator arc would leave the sector immediately
    query = q(0.01, 0.3, omega_h=5.0, k_h=1.0)
    with pytest.raises(GammaSolveError) as info:
        gamma_fractional(query)
    assert info.value.residual is not None
    assert switching_angle(query) == 0.0


def test_gamma_small_order_tends_to_zero():
    angles = [switching_angle(q(1.0, a)) for a in (0.3, 0.1, 0.01)]
    assert angles[0] > angles[1] > angles[2]
    assert angles[2] < 0.05


@settings(max_examples=200, deadline=None)
@given(alpha=st.floats(0, 1), omega=st.floats(1e-3, 1e3), omega_h=st.floats(1e-3, 1e3),
       k_h=st.floats(1e-3, 1e3))
def test_intermediate_x_in_unit_interval(alpha, omega, omega_h, k_h):
    gi = gamma_intermediates(q(omega, alpha, omega_h, k_h))
    if gi.a + gi.b > 0:
        assert abs(gi.X) <= 1.0 + 1e-12
    assert gi.A == pytest.approx(math.sin(math.pi * alpha / 2))


@pytest.mark.parametrize("alpha", [0.01, 0.5, 1.0])
def test_simulated_steady_switch_angle(alpha):
    # 5000 samples per period keeps 13 periods inside the default memory
    omega, spp = 1.0, 5_000
    dt = 2 * math.pi / (omega * spp)
    ts = TimeSeries.from_function(np.sin, 12 * 2 * math.pi, dt)
    _, events = higs_response(HigsParams(1.0, 1.0, alpha), ts)
    late = [ev for ev in events if ev.to_mode is HigsMode.GAIN and ev.time > 20 * math.pi]
    assert late
    measured = math.fmod(late[-1].time * omega, math.pi)
    assert measured == pytest.approx(switching_angle(q(omega, alpha)), abs=3e-3)


# -- classic DF ----------------------------------------------------------------------

def test_classic_df_limits():
    hf = df_classic(1e4, 1.0, 1.0)
    assert math.degrees(cmath.phase(hf)) == pytest.approx(-38.15, abs=0.2)
    assert df_classic(1e-4, 1.0, 2.5) == pytest.approx(2.5, rel=1e-6)


@pytest.mark.parametrize("omega", [0.05, 0.5, 1.0, 4.0, 50.0])
def test_classic_df_matches_quadrature_of_piecewise_output(omega):
    # reading resolved by oracle: cos(2g) - 1, 2/T normalization, j on the gain term
    oracle = _quadrature_first_harmonic(q(omega, 1.0))
    assert df_classic(omega, 1.0, 1.0) == pytest.approx(oracle, rel=1e-8)


def test_classic_df_follows_first_order_lowpass_gain():
    w = np.logspace(1, 3, 5)
    mags = np.array([abs(df_classic(x, 1.0, 1.0)) for x in w])
    slope = np.polyfit(np.log10(w), 20 * np.log10(mags), 1)[0]
    assert slope == pytest.approx(-20.0, abs=0.5)


# -- fractional DF ----------------------------------------------------------------------

def test_fractional_reduces_to_classic_on_grid():
    for w in GRID:
        ref = df_classic(w, 1.0, 1.0)
        assert abs(df_fractional(q(w, 1.0)).value - ref) / abs(ref) < 1e-9


@pytest.mark.parametrize("omega", [0.01, 1.0, 100.0])
def test_order_zero_is_pure_gain(omega):
    pt = df_fractional(q(omega, 0.0, omega_h=1.0, k_h=1.0))
    assert pt.phase_deg == pytest.approx(0.0, abs=1e-9)
    assert pt.magnitude == pytest.approx(1.0, rel=1e-12)
    assert pt.source == "closed_form"


@pytest.mark.parametrize("alpha", np.round(np.arange(0.1, 1.0, 0.1), 2))
def test_matches_quadrature_oracle(alpha):
    for w in GRID[::7]:
        query = q(w, alpha)
        oracle = _quadrature_first_harmonic(query)
        val = df_fractional(query).value
        assert abs(val - oracle) <= 1e-6 * abs(oracle)


def test_phase_sweep_monotone_at_high_frequency():
    phases = [df_fractional(q(1e3, a)).phase_deg for a in (0.0, 0.25, 0.5, 0.75, 1.0)]
    assert phases[0] == pytest.approx(0.0, abs=1e-9)
    assert all(a > b for a, b in zip(phases, phases[1:]))
    assert phases[-1] == pytest.approx(-38.1, abs=0.3)


@settings(max_examples=150, deadline=None)
@given(alpha=st.floats(0, 1), omega=st.floats(1e-2, 1e3), omega_h=st.floats(1e-2, 1e2),
       k_h=st.floats(1e-2, 1e2))
def test_phase_and_gamma_ranges(alpha, omega, omega_h, k_h):
    pt = df_fractional(q(omega, alpha, omega_h, k_h))
    assert -38.2 <= pt.phase_deg <= 1e-9
    assert 0.0 <= pt.gamma <= math.pi


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.0])
def test_amplitude_independence(alpha):
    vals = [df_fractional(q(2.0, alpha, e_hat=e)).value for e in (0.1, 1.0, 10.0)]
    assert vals[0] == pytest.approx(vals[1], rel=1e-12)
    assert vals[2] == pytest.approx(vals[1], rel=1e-12)


def test_query_validation():
    with pytest.raises(ValueError):
        q(0.0, 0.5)
    with pytest.raises(ValueError):
        q(1.0, 0.5, e_hat=-1.0)


# -- harmonics ---------------------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.2, 0.68, 1.0])
def test_first_harmonic_quadrature_matches_closed_form(alpha):
    query = q(3.0, alpha)
    assert abs(df_harmonic_n(query, 1) - df_fractional(query).value) < 1e-6 * abs(
        df_fractional(query).value)


def test_even_harmonics_vanish():
    query = q(3.0, 0.6)
    assert abs(df_harmonic_n(query, 2)) < 1e-9 * abs(df_fractional(query).value)


def test_third_harmonic_smaller_than_classic():
    def rel3(alpha):
        query = q(100.0, alpha)
        return abs(df_harmonic_n(query, 3)) / abs(df_fractional(query).value)
    assert rel3(0.68) < rel3(1.0)


def test_harmonic_index_validation():
    with pytest.raises(ValueError):
        df_harmonic_n(q(1.0, 0.5), 0)
