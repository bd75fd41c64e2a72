"""Signal containers, input validation and the stepping filter protocol."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

__all__ = [
    "FilterChain", "Gain", "LinearFilter", "ParallelSum", "SignalFilter",
    "TimeSeries", "check_dt", "check_signal",
]


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled scalar signal."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        check_dt(self.dt)
        if not np.all(np.isfinite(values)):
            raise ValueError("TimeSeries values must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    @property
    def t(self):
        return self.t0 + self.dt * np.arange(self.values.size)

    @classmethod
    def from_function(cls, func, duration, dt, t0=0.0):
        n = int(round(duration / dt))
        t = t0 + dt * np.arange(n)
        return cls(t0, dt, func(t))


def check_dt(dt):
    dt = float(dt)
    if not dt > 0 or not math.isfinite(dt):
        raise ValueError(f"dt must be a positive finite number, got {dt}")
    return dt


def check_signal(X, dt=None):
    """Return ``(values, dt)`` for a TimeSeries or array-like input.

    Arrays may be 1-D or a single column.  When ``X`` is a TimeSeries its
    sample period wins unless ``dt`` disagrees, which is an error.
    """
    if isinstance(X, TimeSeries):
        if dt is not None and not math.isclose(dt, X.dt, rel_tol=1e-12):
            raise ValueError(f"dt={dt} disagrees with TimeSeries dt={X.dt}")
        return X.values, X.dt
    x = np.asarray(X, dtype=float)
    if x.ndim == 2 and x.shape[1] == 1:
        x = x[:, 0]
    if x.ndim != 1:
        raise ValueError(f"expected a single-channel signal, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    return x, (None if dt is None else check_dt(dt))


class SignalFilter(TransformerMixin, BaseEstimator):
    """Causal single-input single-output filter running from rest.

    ``fit`` fixes the sample period and prepares the discretization;
    ``transform`` filters a whole signal from zero initial state.  For
    feedback loops use ``reset`` followed by repeated ``step`` calls.
    """

    def fit(self, X=None, y=None, dt=None):
        if X is not None:
            _, dt = check_signal(X, dt)
        if dt is None:
            raise ValueError("sample period unknown: pass a TimeSeries or dt=")
        self.dt_ = check_dt(dt)
        self._prepare(self.dt_)
        return self

    def transform(self, X):
        check_is_fitted(self, "dt_")
        x, _ = check_signal(X, self.dt_ if isinstance(X, TimeSeries) else None)
        y = self._transform(x)
        if isinstance(X, TimeSeries):
            return TimeSeries(X.t0, X.dt, y)
        return y

    def _prepare(self, dt):
        pass

    def _transform(self, x):
        self.reset()
        return np.array([self.step(v) for v in x])

    def reset(self):
        raise NotImplementedError

    def step(self, x):
        raise NotImplementedError


class Gain(SignalFilter):
    """Static gain ``y = gain * x``."""

    def __init__(self, gain=1.0):
        self.gain = gain

    def _transform(self, x):
        return self.gain * x

    def reset(self):
        pass

    def step(self, x):
        return self.gain * x


class _SosFilter(SignalFilter):
    """Shared machinery for filters realized as discrete biquad cascades."""

    def _set_sos(self, sos):
        self.sos_ = np.atleast_2d(np.asarray(sos, dtype=float))
        self.reset()

    def _transform(self, x):
        return signal.sosfilt(self.sos_, x)

    def reset(self):
        check_is_fitted(self, "sos_")
        self._zi = np.zeros((self.sos_.shape[0], 2))
        self._rows = [tuple(r) for r in self.sos_]

    def step(self, x):
        # transposed direct form II, one section at a time
        zi = self._zi
        for i, (b0, b1, b2, _, a1, a2) in enumerate(self._rows):
            y = b0 * x + zi[i, 0]
            zi[i, 0] = b1 * x - a1 * y + zi[i, 1]
            zi[i, 1] = b2 * x - a2 * y
            x = y
        return x


class LinearFilter(_SosFilter):
    """Continuous transfer function ``num(s)/den(s)``, bilinear-discretized.

    Parameters
    ----------
    num, den : sequence of float
        Polynomial coefficients in descending powers of ``s``.
    """

    def __init__(self, num=(1.0,), den=(1.0,)):
        self.num = num
        self.den = den

    def _prepare(self, dt):
        num = np.atleast_1d(np.asarray(self.num, dtype=float))
        den = np.atleast_1d(np.asarray(self.den, dtype=float))
        if len(num) > len(den):
            raise ValueError("transfer function must be proper")
        z, p, k = signal.tf2zpk(num, den)
        zd, pd, kd = signal.bilinear_zpk(z, p, k, fs=1.0 / dt)
        self._set_sos(signal.zpk2sos(zd, pd, kd))

    def frequency_response(self, omega):
        _, h = signal.freqs(self.num, self.den, worN=np.atleast_1d(omega))
        return h


class FilterChain(SignalFilter):
    """Series connection; the first step sees the external input."""

    def __init__(self, steps):
        self.steps = steps

    def _prepare(self, dt):
        for _, f in self.steps:
            f.fit(dt=dt)

    def _transform(self, x):
        for _, f in self.steps:
            x = f._transform(x)
        return x

    def reset(self):
        for _, f in self.steps:
            f.reset()

    def step(self, x):
        for _, f in self.steps:
            x = f.step(x)
        return x


class ParallelSum(SignalFilter):
    """Weighted sum of branches fed by the same input."""

    def __init__(self, branches, weights):
        self.branches = branches
        self.weights = weights

    def _prepare(self, dt):
        if len(self.branches) != len(self.weights):
            raise ValueError("one weight per branch is required")
        for _, f in self.branches:
            f.fit(dt=dt)

    def _transform(self, x):
        out = np.zeros_like(x)
        for (_, f), w in zip(self.branches, self.weights):
            if w != 0:
                out += w * f._transform(x)
        return out

    def reset(self):
        for _, f in self.branches:
            f.reset()

    def step(self, x):
        return sum(w * f.step(x) for (_, f), w in zip(self.branches, self.weights))
