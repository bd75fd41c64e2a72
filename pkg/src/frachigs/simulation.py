"""Open- and closed-loop simulation and empirical frequency analysis."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, signal
from sklearn.base import clone

from .architectures import DoubleIntegrator, plant_step
from .base import TimeSeries, check_dt
from .describing import FrequencyResponsePoint

__all__ = [
    "HarmonicSpectrum", "NoSteadyStateError", "SimConfig", "SimulationError",
    "StepMetrics", "estimate_df", "harmonic_spectrum", "linear_loop_oracle",
    "simulate_closed_loop", "simulate_open_loop", "step_metrics",
]


class SimulationError(RuntimeError):
    """Numerical failure during a run; ``index`` is the offending sample."""

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} (sample {index})")
        self.index = index


class NoSteadyStateError(SimulationError):
    pass


@dataclass(frozen=True)
class SimConfig:
    dt: float
    duration: float
    settle_periods: int = 10

    def __post_init__(self):
        check_dt(self.dt)
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.settle_periods < 0:
            raise ValueError("settle_periods must be >= 0")

    @property
    def n_samples(self):
        return int(round(self.duration / self.dt))

    @classmethod
    def for_sine(cls, omega, samples_per_period=10_000, settle_periods=10,
                 analysis_periods=4):
        """Config whose sample period divides the input period exactly."""
        dt = 2 * math.pi / (omega * samples_per_period)
        periods = settle_periods + analysis_periods
        return cls(dt, periods * samples_per_period * dt, settle_periods)


@dataclass(frozen=True)
class StepMetrics:
    overshoot: float
    settling_time: float
    rise_time: float
    steady_state_error: float
    settled: bool = True


@dataclass(frozen=True)
class HarmonicSpectrum:
    base_freq: float
    harmonics: dict = field(default_factory=dict)

    def relative(self):
        """Harmonic magnitudes divided by the fundamental's magnitude."""
        ref = abs(self.harmonics[1])
        return {n: abs(c) / ref for n, c in self.harmonics.items()}


def _fit(filt, dt):
    return clone(filt).fit(dt=dt)


def simulate_open_loop(filt, input, config):
    """Run ``filt`` from rest on ``input`` and return the output series."""
    if not math.isclose(input.dt, config.dt, rel_tol=1e-12):
        raise ValueError(f"input dt {input.dt} differs from config dt {config.dt}")
    y = _fit(filt, config.dt).transform(input.values)
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise SimulationError("non-finite filter output", int(bad[0]))
    return TimeSeries(input.t0, input.dt, y)


def _steady_window(filt, omega, e_hat, config):
    n_per = 2 * math.pi / (omega * config.dt)
    total = config.n_samples
    analysis = int(math.floor(total / n_per + 1e-9)) - config.settle_periods
    if analysis < 4:
        raise ValueError(
            f"duration covers {total / n_per:.2f} periods; need settle_periods "
            f"({config.settle_periods}) + 4 analysis periods")
    ts = TimeSeries.from_function(lambda t: e_hat * np.sin(omega * t),
                                  config.duration, config.dt)
    y = simulate_open_loop(filt, ts, config).values
    start = int(round(config.settle_periods * n_per))
    stop = int(round((config.settle_periods + analysis) * n_per))
    # period-to-period drift on the last two analysis periods
    p = int(round(n_per))
    last, prev = y[stop - p:stop], y[stop - 2 * p:stop - p]
    scale = np.sqrt(np.mean(last ** 2))
    drift = np.sqrt(np.mean((last - prev) ** 2))
    if scale > 0 and drift > 0.01 * scale:
        raise NoSteadyStateError(
            f"no steady state: period-to-period RMS drift {drift / scale:.3%}")
    return ts.t[start:stop], y[start:stop]


def _project(t, y, omega, n_max):
    # exact DFT on integer periods, least squares otherwise
    th = omega * t
    cols = [np.ones_like(th)]
    for n in range(1, n_max + 1):
        cols += [np.sin(n * th), np.cos(n * th)]
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), y, rcond=None)
    return {n: complex(coef[2 * n - 1], coef[2 * n]) for n in range(1, n_max + 1)}


def estimate_df(filt, omega, e_hat, config, n_harmonics=15):
    """Empirical describing function from the settled sinusoidal response."""
    if not omega > 0 or not e_hat > 0:
        raise ValueError("omega and e_hat must be positive")
    t, y = _steady_window(filt, omega, e_hat, config)
    c1 = _project(t, y, omega, n_harmonics)[1]
    return FrequencyResponsePoint(omega, c1 / e_hat, float("nan"), "empirical")


def harmonic_spectrum(filt, omega, e_hat, config, N=9):
    """Harmonics ``1..N`` of the settled output, as ``(b_n + j a_n)/e_hat``."""
    t, y = _steady_window(filt, omega, e_hat, config)
    n_per = 2 * math.pi / (omega * config.dt)
    if abs(n_per - round(n_per)) < 1e-6 * n_per and y.size % round(n_per) == 0:
        k = np.arange(1, N + 1)
        basis = np.exp(-1j * np.outer(k, omega * t))
        c = 2j * (basis @ y) / y.size
        coefs = {int(n): complex(v) for n, v in zip(k, c)}
    else:
        coefs = _project(t, y, omega, max(N, 15))
        coefs = {n: coefs[n] for n in range(1, N + 1)}
    return HarmonicSpectrum(omega, {n: c / e_hat for n, c in coefs.items()})


def simulate_closed_loop(controller, plant, reference, config, limit=1e6):
    """Unit negative feedback ``e = r - y``, ``u = C(e)``, ``y = P(u)``.

    The control computed at sample ``k`` is held on the plant over the next
    sample interval, so the loop carries one sample of computational delay.
    """
    if not math.isclose(reference.dt, config.dt, rel_tol=1e-12):
        raise ValueError("reference dt differs from config dt")
    dt = config.dt
    ctrl = _fit(controller, dt)
    ctrl.reset()
    r = reference.values
    bound = limit * max(np.max(np.abs(r)), 1.0)
    y = np.empty(r.size)
    u = np.empty(r.size)
    state = (0.0, 0.0)
    pos = 0.0
    for k, rk in enumerate(r.tolist()):
        y[k] = pos
        u[k] = ctrl.step(rk - pos)
        state, pos = plant_step(plant, state, u[k], dt)
        if not abs(pos) <= bound:
            raise SimulationError(f"closed loop diverged: |y| = {abs(pos):.3g}", k)
    return (TimeSeries(reference.t0, dt, y), TimeSeries(reference.t0, dt, u))


def linear_loop_oracle(controller_tf, plant, t, reference=1.0, rtol=1e-10):
    """Continuous-time step response of the linear loop ``CP/(1 + CP)``.

    Integrated with an implicit ODE solver on the closed-loop state-space
    realization; independent of the sampled simulation path.
    """
    cn, cd = controller_tf
    pn, pdn = plant.transfer_function()
    ln, ld = np.polymul(cn, pn), np.polymul(cd, pdn)
    num, den = ln, np.polyadd(ld, ln)
    A, B, C, D = signal.tf2ss(num, den)

    def rhs(_, x):
        return A @ x + B[:, 0] * reference

    sol = integrate.solve_ivp(rhs, (t[0], t[-1]), np.zeros(A.shape[0]),
                              method="Radau", t_eval=t, rtol=rtol,
                              atol=1e-12, jac=lambda *_: A)
    if not sol.success:
        raise SimulationError(f"oracle integration failed: {sol.message}")
    return (C @ sol.y)[0] + D[0, 0] * reference


def step_metrics(response, final_value, band=0.02):
    """Overshoot (%), 2 % settling time, 10-90 % rise time, final error."""
    if final_value == 0:
        raise ValueError("final_value must be non-zero")
    y = np.asarray(response.values if isinstance(response, TimeSeries) else response,
                   dtype=float)
    dt = response.dt if isinstance(response, TimeSeries) else 1.0
    yn = y / final_value
    overshoot = max(0.0, 100.0 * (yn.max() - 1.0))
    outside = np.flatnonzero(np.abs(yn - 1.0) > band)
    settled = not (outside.size and outside[-1] == yn.size - 1)
    settling = 0.0 if outside.size == 0 else (outside[-1] + 1) * dt
    if not settled:
        settling = float("inf")
    above10 = np.flatnonzero(yn >= 0.1)
    above90 = np.flatnonzero(yn >= 0.9)
    rise = (above90[0] - above10[0]) * dt if above90.size else float("inf")
    return StepMetrics(overshoot, settling, rise, abs(final_value - y[-1]),
                       settled)


def default_plant():
    return DoubleIntegrator(1.0)
