"""Discrete fractional-order operators.

Grünwald-Letnikov sums over a finite signal history realize the
Liouville-Caputo derivative and the Riemann-Liouville integral of order
``0 <= alpha <= 1``.  History before the first stored sample is taken as
zero, i.e. every signal starts from rest.

The module also provides band-limited rational approximations of
``s**(-order)`` (recursive pole/zero ladders in the style of Oustaloup) used
to realize the linear fractional blocks of the generalized HIGS.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal

__all__ = [
    "DEFAULT_CAPACITY", "HistoryBuffer", "RationalFracFilter", "check_order",
    "design_fractional_lowpass", "design_rational_frac_filter", "frac_diff",
    "frac_diff_series", "frac_int", "gl_weights", "sinusoid_frac_rule",
]

DEFAULT_CAPACITY = 2 ** 16


def check_order(order, name="order"):
    """Validate a fractional order and return it as a float in [0, 1]."""
    order = float(order)
    if not 0.0 <= order <= 1.0 or math.isnan(order):
        raise ValueError(f"{name} must lie in [0, 1], got {order}")
    return order


@lru_cache(maxsize=64)
def _cached_weights(order, n):
    w = np.empty(n)
    w[0] = 1.0
    if n > 1:
        k = np.arange(1, n)
        w[1:] = np.cumprod(1.0 - (order + 1.0) / k)
    w.setflags(write=False)
    return w


def gl_weights(order, n):
    """Grünwald-Letnikov weights ``(-1)**k * binom(order, k)``, k < n.

    Positive ``order`` gives derivative weights, negative ``order`` gives
    integral weights.  The recursion ``w[k] = w[k-1] * (1 - (order+1)/k)``
    is exact for integer orders (``order=1`` yields ``[1, -1, 0, ...]``).
    """
    if n < 1:
        raise ValueError("need at least one weight")
    return _cached_weights(float(order), int(n))


class HistoryBuffer:
    """Fixed-step signal history, newest sample last.

    Parameters
    ----------
    dt : float
        Sample period in seconds.
    capacity : int, optional
        Memory truncation length.  Older samples are discarded.
    """

    def __init__(self, dt, capacity=DEFAULT_CAPACITY):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if int(capacity) < 1:
            raise ValueError("capacity must be a positive integer")
        self.dt = float(dt)
        self.capacity = int(capacity)
        # double-length backing store so appends are amortized O(1)
        self._data = np.zeros(2 * self.capacity)
        self._start = 0
        self._stop = 0

    def __len__(self):
        return self._stop - self._start

    @property
    def samples(self):
        """View of the stored samples, oldest first."""
        return self._data[self._start:self._stop]

    def append(self, value):
        if self._stop == self._data.size:
            n = len(self)
            self._data[:n] = self._data[self._start:self._stop]
            self._start, self._stop = 0, n
        self._data[self._stop] = value
        self._stop += 1
        if len(self) > self.capacity:
            self._start += 1

    def extend(self, values):
        for v in np.asarray(values, dtype=float).ravel():
            self.append(v)

    def clear(self):
        self._start = self._stop = 0

    @classmethod
    def from_samples(cls, samples, dt, capacity=None):
        samples = np.asarray(samples, dtype=float).ravel()
        buf = cls(dt, capacity or max(len(samples), 1))
        buf.extend(samples)
        return buf


def _gl_sum(history, order):
    n = len(history)
    if n == 0:
        raise ValueError("insufficient history")
    w = gl_weights(order, n)
    return float(np.dot(w[::-1], history.samples)) * history.dt ** (-order)


def frac_diff(history, order):
    """Fractional derivative of order ``order`` at the newest sample.

    ``order=0`` returns the newest sample, ``order=1`` the backward
    difference.
    """
    return _gl_sum(history, check_order(order))


def frac_int(history, order):
    """Fractional integral of order ``order`` at the newest sample.

    ``order=1`` is the rectangular running sum over the stored history and
    ``order=0`` is the identity.
    """
    return _gl_sum(history, -check_order(order))


def frac_diff_series(x, dt, order, capacity=DEFAULT_CAPACITY):
    """Apply :func:`frac_diff` at every sample of ``x``.

    Equivalent to stepping a :class:`HistoryBuffer` of the given capacity
    through ``x`` (zero history before the first sample) but evaluated with
    an FFT convolution.  Integer orders are computed exactly.
    """
    x = np.asarray(x, dtype=float)
    order = check_order(order)
    if x.size == 0:
        raise ValueError("insufficient history")
    if order == 0.0:
        return x.copy()
    if order == 1.0:
        return np.diff(x, prepend=0.0) / dt
    w = gl_weights(order, min(x.size, int(capacity)))
    y = signal.oaconvolve(x, w)[:x.size]
    # FFT round-off would turn an exact start from rest into +-1e-17 noise,
    # which the switching tests see; the head is cheap to do directly
    head = min(x.size, 512)
    y[:head] = np.convolve(x[:head], w[:head])[:head]
    return y * dt ** (-order)


def sinusoid_frac_rule(amplitude, freq, order):
    """Amplitude and phase shift of ``D**order`` applied to a sinusoid.

    ``D**order [A sin(w t)] = A w**order sin(w t + order*pi/2)``.  A negative
    ``order`` gives the fractional integral.
    """
    if not freq > 0:
        raise ValueError("freq must be positive")
    return amplitude * freq ** order, order * math.pi / 2


@dataclass(frozen=True)
class RationalFracFilter:
    """Cascade of first-order sections approximating a fractional block.

    The transfer function is ``gain * prod((1 + s/zeros[i]) / (1 + s/poles[i]))``
    where an infinite zero means the section is a pure first-order lag and a
    zero pole stands for ``1/s``.
    """

    order: float
    band: tuple
    n_stages: int
    poles: tuple
    zeros: tuple
    gain: float
    max_phase_error_deg: float = 0.0

    def frequency_response(self, omega):
        s = 1j * np.asarray(omega, dtype=float)
        h = np.full(s.shape, self.gain, dtype=complex)
        for p, z in zip(self.poles, self.zeros):
            num = 1.0 if math.isinf(z) else 1.0 + s / z
            h *= num / (s if p == 0.0 else 1.0 + s / p)
        return h

    def sections(self):
        """Continuous first-order sections as ``(num, den)`` polynomials."""
        out = []
        for p, z in zip(self.poles, self.zeros):
            num = [1.0] if math.isinf(z) else [1.0 / z, 1.0]
            out.append((num, [1.0, 0.0] if p == 0.0 else [1.0 / p, 1.0]))
        return out

    def discretize(self, dt):
        """Second-order-section array of the bilinear discretization."""
        sos = []
        for num, den in self.sections():
            b, a = signal.bilinear(num, den, fs=1.0 / dt)
            b = np.pad(b, (0, 3 - b.size))
            a = np.pad(a, (0, 3 - a.size))
            sos.append(np.concatenate([b / a[0], a / a[0]]))
        if not sos:
            return np.array([[self.gain, 0, 0, 1, 0, 0]], dtype=float)
        sos = np.array(sos)
        sos[0, :3] *= self.gain
        return sos


def _ladder(order, lo, hi, n_stages):
    # stage i spans one log-slice; the lag pole sits before the lead zero
    span = math.log(hi / lo) / n_stages
    poles, zeros = [], []
    for i in range(n_stages):
        p = lo * math.exp(span * (i + (1.0 - order) / 2.0))
        poles.append(p)
        zeros.append(p * math.exp(span * order))
    return poles, zeros


def _phase_error(filt, target_deg):
    # interior of the band only; the ladder rolls off near its edges
    lo, hi = filt.band
    w = np.logspace(math.log10(lo), math.log10(hi), 401)[80:-80]
    phase = np.degrees(np.unwrap(np.angle(filt.frequency_response(w))))
    return float(np.max(np.abs(phase - target_deg(w))))


def design_rational_frac_filter(order, band, n_stages=8):
    """Rational approximation of ``s**(-order)`` over ``band`` (rad/s).

    Inside the band the magnitude slope is about ``-20*order`` dB/dec and the
    phase about ``-90*order`` degrees; outside it the response flattens.  The
    gain matches ``|jw|**(-order)`` at the geometric band center.  Orders 0
    and 1 are realized exactly (unity and ``1/s`` respectively).
    """
    order = check_order(order)
    lo, hi = (float(b) for b in band)
    if not 0 < lo < hi:
        raise ValueError(f"degenerate band {band!r}")
    n_stages = int(n_stages)
    if n_stages < 1:
        raise ValueError("n_stages must be >= 1")
    if order == 0.0:
        return RationalFracFilter(0.0, (lo, hi), n_stages, (), (), 1.0)
    if order == 1.0:
        # a zero-frequency pole marks the exact integrator 1/s
        return RationalFracFilter(1.0, (lo, hi), n_stages, (0.0,), (math.inf,),
                                  1.0)
    poles, zeros = _ladder(order, lo, hi, n_stages)
    center = math.sqrt(lo * hi)
    raw = RationalFracFilter(order, (lo, hi), n_stages, tuple(poles),
                             tuple(zeros), 1.0)
    gain = center ** (-order) / abs(raw.frequency_response(center))
    filt = RationalFracFilter(order, (lo, hi), n_stages, tuple(poles),
                              tuple(zeros), float(gain))
    err = _phase_error(filt, lambda w: np.full_like(w, -90.0 * order))
    return RationalFracFilter(order, (lo, hi), n_stages, tuple(poles),
                              tuple(zeros), float(gain), err)


def design_fractional_lowpass(order, cutoff, upper=1e5, n_stages=None):
    """Rational approximation of ``(1 + s/cutoff)**(-order)``.

    A ladder approximating ``x**(-order)`` over ``x in [1e-3, upper]`` is
    mapped through ``x = 1 + s/cutoff``; every section keeps a real stable
    pole and the DC gain is one.  ``order=1`` is the exact first-order lag.
    """
    order = check_order(order)
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    if order == 0.0:
        return RationalFracFilter(0.0, (cutoff, cutoff * upper), 1, (), (), 1.0)
    if order == 1.0:
        return RationalFracFilter(1.0, (cutoff, cutoff * upper), 1,
                                  (float(cutoff),), (math.inf,), 1.0)
    lo = 1e-3
    if n_stages is None:
        n_stages = max(4, int(math.ceil(2 * math.log10(upper / lo))))
    px, zx = _ladder(order, lo, upper, n_stages)
    # (x + a) with x = 1 + s/c becomes (1 + a) (1 + s/(c (1 + a)))
    poles = tuple(cutoff * (1.0 + p) for p in px)
    zeros = tuple(cutoff * (1.0 + z) for z in zx)
    raw = RationalFracFilter(order, (cutoff, cutoff * upper), n_stages, poles,
                             zeros, 1.0)
    gain = 1.0 / abs(raw.frequency_response(0.0))
    filt = RationalFracFilter(order, (cutoff, cutoff * upper), n_stages, poles,
                              zeros, float(gain))

    def target(w):
        return -order * np.degrees(np.arctan(w / cutoff))

    return RationalFracFilter(order, filt.band, n_stages, poles, zeros,
                              float(gain), _phase_error(filt, target))
