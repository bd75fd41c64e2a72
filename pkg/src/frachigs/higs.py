"""Hybrid integrator-gain system with a fractional-order integrator.

The filter switches between an integrator mode, where the output follows
``D**alpha x_h = omega_h * e``, and a gain mode ``x_h = k_h * e``.  Switching
is evaluated once per sample:

* integrator -> gain when the integrated candidate leaves the sector
  ``e*u >= u**2 / k_h``; the output is projected onto ``k_h * e``;
* gain -> integrator when neither
  ``omega_h * D**(1-alpha)(e) * e > k_h * de/dt * e`` nor
  ``omega_h * D**(1-alpha)(e) * e < 0`` holds.  Ties keep the gain mode.

In integrator mode the output is re-anchored at the value it had on entry
and advanced by ``omega_h`` times the increment of the full-history
fractional integral of ``e``.  That increment is accumulated as
``dt * D**(1-alpha)(e)``, so only the (fast-decaying) derivative kernel is
memory-truncated.  ``alpha=1`` is the classic HIGS with a backward-Euler
integrator.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .base import SignalFilter, TimeSeries, check_dt
from .fractional import (DEFAULT_CAPACITY, HistoryBuffer, check_order,
                         frac_diff, frac_diff_series)

__all__ = [
    "FractionalHIGS", "HigsMode", "HigsParams", "HigsState", "SwitchEvent", "Trigger",
    "classic_higs_response", "higs_response", "higs_step", "initial_state",
]

# relative dead-band on the gain-mode inequalities
DEADBAND = 1e-12


class HigsMode(enum.Enum):
    INTEGRATOR = "integrator"
    GAIN = "gain"


class Trigger(str, enum.Enum):
    SECTOR = "sector_boundary"
    GAIN_INEQUALITY = "gain_inequality"
    MONOTONICITY = "monotonicity"


@dataclass(frozen=True)
class HigsParams:
    omega_h: float
    k_h: float
    alpha: float = 1.0

    def __post_init__(self):
        if not self.omega_h >= 0 or not math.isfinite(self.omega_h):
            raise ValueError(f"omega_h must be >= 0, got {self.omega_h}")
        if not self.k_h >= 0 or not math.isfinite(self.k_h):
            raise ValueError(f"k_h must be >= 0, got {self.k_h}")
        object.__setattr__(self, "alpha", check_order(self.alpha, "alpha"))


@dataclass(frozen=True)
class SwitchEvent:
    time: float
    index: int
    from_mode: HigsMode
    to_mode: HigsMode
    trigger: str


@dataclass
class HigsState:
    """Mutable automaton state.  The output is always ``x_h``."""

    input_history: HistoryBuffer
    x_h: float = 0.0
    mode: HigsMode = HigsMode.INTEGRATOR
    # running fractional integral of e and its value at the last mode entry
    integral: float = 0.0
    anchor_integral: float = 0.0
    anchor_time: float = 0.0
    e_prev: float = 0.0
    e_anchor: float = 0.0
    gain_hold: str = Trigger.GAIN_INEQUALITY.value
    index: int = 0
    last_event: SwitchEvent = None
    memory: str = "full"


def initial_state(dt, capacity=DEFAULT_CAPACITY, memory="full"):
    """State at rest: ``x_h = 0`` in integrator mode, which is the only mode
    consistent with ``u = 0`` for a non-zero first input sample."""
    if memory not in ("full", "since_switch"):
        raise ValueError("memory must be 'full' or 'since_switch'")
    return HigsState(HistoryBuffer(check_dt(dt), capacity), memory=memory)


def _advance(integrating, u, e, e_dot, d, omega_h, k_h, dt):
    """One sampled-data update.

    Returns ``(integrating, u, code)`` with ``code`` 0 for no switch, 1 for a
    sector exit, 2 when the gain inequality released the gain mode and 3
    while the gain mode is held by the monotonicity disjunct.
    """
    if integrating:
        cand = u + omega_h * dt * d
        if cand * (k_h * e - cand) >= 0.0:
            return True, cand, 0
        return False, k_h * e, 1
    p = omega_h * d * e
    q = k_h * e_dot * e
    eps = DEADBAND * (abs(p) + abs(q))
    if p >= q - eps:
        return False, k_h * e, 0
    if p <= eps:
        return False, k_h * e, 3
    return True, k_h * e, 2


def higs_step(state, params, e, e_dot, dt, d_frac=None):
    """Advance ``state`` by one sample of input ``e`` and return ``(state, u)``.

    ``d_frac`` is ``D**(1-alpha)(e)`` at this sample; when omitted it is
    computed from ``state.input_history``.  A mode change is reported in
    ``state.last_event``.
    """
    dt = check_dt(dt)
    if d_frac is None:
        order = 1.0 - params.alpha
        hist = state.input_history
        if state.memory == "since_switch":
            hist.append(e - state.e_anchor)
            d_frac = frac_diff(hist, order) if order > 0 else e
        elif order == 0.0:
            hist.append(e)
            d_frac = e
        elif order == 1.0:
            hist.append(e)
            d_frac = (e - state.e_prev) / dt
        else:
            hist.append(e)
            d_frac = frac_diff(hist, order)
    state.integral += dt * d_frac
    was = state.mode
    if params.k_h == 0.0:
        integrating, u, code = False, 0.0, 1
    else:
        integrating, u, code = _advance(was is HigsMode.INTEGRATOR, state.x_h,
                                        e, e_dot, d_frac, params.omega_h,
                                        params.k_h, dt)
    state.x_h = u
    state.mode = HigsMode.INTEGRATOR if integrating else HigsMode.GAIN
    state.last_event = None
    if code == 3:
        state.gain_hold = Trigger.MONOTONICITY.value
    elif state.mode is not was:
        t = state.index * dt
        trigger = (Trigger.SECTOR.value if code == 1 else state.gain_hold)
        state.last_event = SwitchEvent(t, state.index, was, state.mode, trigger)
        state.gain_hold = Trigger.GAIN_INEQUALITY.value
        state.anchor_integral = state.integral
        state.anchor_time = t
        if state.memory == "since_switch":
            state.e_anchor = e
            state.input_history.clear()
    elif state.mode is HigsMode.GAIN:
        state.gain_hold = Trigger.GAIN_INEQUALITY.value
    state.e_prev = e
    state.index += 1
    return state, u


def _batch(x, dt, params, d):
    """Tight loop over precomputed ``D**(1-alpha)(e)``; see :func:`_advance`."""
    n = x.size
    u_out = np.empty(n)
    modes = np.empty(n, dtype=bool)
    events = []
    omega_h, k_h = params.omega_h, params.k_h
    if k_h == 0.0:
        u_out[:] = 0.0
        modes[:] = False
        if n:
            events.append(SwitchEvent(0.0, 0, HigsMode.INTEGRATOR, HigsMode.GAIN,
                                      Trigger.SECTOR.value))
        return u_out, modes, events
    xs = x.tolist()
    ds = d.tolist()
    integrating = True
    u = 0.0
    e_prev = 0.0
    hold = Trigger.GAIN_INEQUALITY.value
    for i in range(n):
        e = xs[i]
        was = integrating
        integrating, u, code = _advance(was, u, e, (e - e_prev) / dt, ds[i],
                                        omega_h, k_h, dt)
        if code == 3:
            hold = Trigger.MONOTONICITY.value
        elif integrating != was:
            trig = Trigger.SECTOR.value if code == 1 else hold
            events.append(SwitchEvent(
                i * dt, i,
                HigsMode.INTEGRATOR if was else HigsMode.GAIN,
                HigsMode.INTEGRATOR if integrating else HigsMode.GAIN, trig))
            hold = Trigger.GAIN_INEQUALITY.value
        elif not integrating:
            hold = Trigger.GAIN_INEQUALITY.value
        u_out[i] = u
        modes[i] = integrating
        e_prev = e
    return u_out, modes, events


def higs_response(params, input, capacity=DEFAULT_CAPACITY, memory="full",
                  return_modes=False):
    """Simulate the filter from rest on a uniformly sampled input.

    Returns ``(output, events)``, plus a boolean integrator-mode array when
    ``return_modes`` is set.  The input derivative is a backward difference
    with zero history before the first sample.
    """
    if not isinstance(input, TimeSeries):
        raise TypeError("input must be a TimeSeries")
    x, dt = input.values, input.dt
    if memory == "full":
        d = frac_diff_series(x, dt, 1.0 - params.alpha, capacity)
        u, modes, events = _batch(x, dt, params, d)
    else:
        state = initial_state(dt, capacity, memory)
        u = np.empty(x.size)
        modes = np.empty(x.size, dtype=bool)
        events = []
        for i, e in enumerate(x.tolist()):
            state, u[i] = higs_step(state, params, e, (e - state.e_prev) / dt, dt)
            modes[i] = state.mode is HigsMode.INTEGRATOR
            if state.last_event is not None:
                events.append(state.last_event)
    out = TimeSeries(input.t0, dt, u)
    if return_modes:
        return out, events, modes
    return out, events


def classic_higs_response(omega_h, k_h, input, return_modes=False):
    """Classic HIGS (integer-order integrator) on a sampled input.

    The gain-mode test is ``omega_h*e**2 > k_h*e*de/dt`` directly.
    """
    params = HigsParams(omega_h, k_h, 1.0)
    u, modes, events = _batch(input.values, input.dt, params, input.values)
    out = TimeSeries(input.t0, input.dt, u)
    if return_modes:
        return out, events, modes
    return out, events


class FractionalHIGS(SignalFilter):
    """Fractional-order HIGS as a stepping filter.

    Parameters
    ----------
    omega_h : float
        Integral frequency (units ``s**-alpha``).
    k_h : float
        Gain-mode gain.
    alpha : float
        Integrator order in [0, 1]; 1 is the classic HIGS.
    capacity : int
        Memory truncation of the ``D**(1-alpha)`` kernel, in samples.
    memory : {'full', 'since_switch'}
        History used by ``D**(1-alpha)(e)`` in the switching test.
    """

    def __init__(self, omega_h=1.0, k_h=1.0, alpha=1.0,
                 capacity=DEFAULT_CAPACITY, memory="full"):
        self.omega_h = omega_h
        self.k_h = k_h
        self.alpha = alpha
        self.capacity = capacity
        self.memory = memory

    def _prepare(self, dt):
        self.params_ = HigsParams(self.omega_h, self.k_h, self.alpha)
        if self.memory not in ("full", "since_switch"):
            raise ValueError("memory must be 'full' or 'since_switch'")
        self.reset()

    def _transform(self, x):
        out, events, modes = higs_response(self.params_, TimeSeries(0.0, self.dt_, x),
                                           self.capacity, self.memory,
                                           return_modes=True)
        self.events_ = events
        self.modes_ = modes
        return out.values

    def reset(self):
        check_is_fitted(self, "params_")
        self.state_ = initial_state(self.dt_, self.capacity, self.memory)

    def step(self, e):
        e_dot = (e - self.state_.e_prev) / self.dt_
        _, u = higs_step(self.state_, self.params_, e, e_dot, self.dt_)
        return u

    def describing_function(self, omega, e_hat=1.0):
        """Closed-form describing function value at ``omega``."""
        from .describing import DfQuery, df_fractional
        p = HigsParams(self.omega_h, self.k_h, self.alpha)
        return df_fractional(DfQuery(omega, e_hat, p)).value
