"""Closed-form first-harmonic describing functions of the (fractional) HIGS.

For ``e = e_hat*sin(theta)``, ``theta = omega*t``, the steady output over a
half period is the anchored fractional integral
``B*(sin(theta - phi) + sin(phi))`` on ``[0, gamma)`` followed by the gain
arc ``C*sin(theta)`` on ``[gamma, pi)``, with ``phi = pi*alpha/2``,
``B = omega_h*omega**-alpha`` and ``C = k_h`` (per unit amplitude).  The
second half period mirrors the first with opposite sign.

Fourier coefficients use the ``2/T`` normalization, so a pure gain ``k``
has describing function ``k``.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .higs import HigsParams

__all__ = [
    "DfQuery", "FrequencyResponsePoint", "GammaIntermediates", "GammaSolveError",
    "df_classic", "df_fractional", "df_harmonic_n", "gamma_classic",
    "gamma_fractional", "gamma_intermediates", "piecewise_output",
    "switching_angle",
]


class GammaSolveError(ArithmeticError):
    """No admissible switching angle in (0, pi)."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class DfQuery:
    omega: float
    e_hat: float
    params: HigsParams

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not self.e_hat > 0:
            raise ValueError(f"e_hat must be positive, got {self.e_hat}")


@dataclass(frozen=True)
class FrequencyResponsePoint:
    omega: float
    value: complex
    gamma: float = float("nan")
    source: str = "closed_form"

    @property
    def magnitude(self):
        return abs(self.value)

    @property
    def phase_deg(self):
        return math.degrees(cmath.phase(self.value))


@dataclass(frozen=True)
class GammaIntermediates:
    A: float
    B: float
    C: float
    a: float
    b: float
    X: float


def gamma_intermediates(query):
    p = query.params
    A = math.sin(math.pi * p.alpha / 2)
    B = p.omega_h * query.omega ** (-p.alpha)
    C = p.k_h
    a = (B * math.sqrt(max(0.0, 1.0 - A * A)) - C) ** 2
    b = B * B * A * A
    X = (b - a) / (b + a) if a + b > 0 else float("nan")
    return GammaIntermediates(A, B, C, a, b, X)


def gamma_classic(omega, omega_h, k_h):
    """Switching angle ``2*arctan(k_h*omega/omega_h)`` of the classic HIGS."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    if omega_h == 0:
        return math.pi
    return 2.0 * math.atan(k_h * omega / omega_h)


def _continuity_residual(gamma, B, C, phi):
    return B * (math.sin(gamma - phi) + math.sin(phi)) - C * math.sin(gamma)


def gamma_fractional(query, rtol=1e-6):
    """Switching angle solving the integrator/gain continuity condition.

    The candidate ``arccos(X)`` is accepted only if it satisfies
    ``B*(sin(g - phi) + sin(phi)) = C*sin(g)`` to ``rtol`` relative and the
    integrator arc starts inside the sector (``C >= B*cos(phi)``); otherwise
    a bracketing root search on (0, pi) is tried.

    Raises
    ------
    GammaSolveError
        If no admissible root exists in (0, pi).  This happens when the
        filter never leaves gain mode (``B*cos(phi) > C``).
    """
    g = gamma_intermediates(query)
    phi = math.pi * query.params.alpha / 2
    B, C = g.B, g.C
    scale = max(B, C)
    if scale == 0:
        raise GammaSolveError("omega_h and k_h are both zero", 0.0)
    admissible = C - B * math.cos(phi) >= -1e-12 * scale
    if math.isfinite(g.X):
        cand = math.acos(min(1.0, max(-1.0, g.X)))
        if abs(g.X) > 1.0 + 1e-9:
            cand = float("nan")
        if math.isfinite(cand):
            res = _continuity_residual(cand, B, C, phi)
            if admissible and abs(res) <= rtol * scale:
                return cand

    def f(x):
        return _continuity_residual(x, B, C, phi)

    lo, hi = 1e-12, math.pi - 1e-12
    grid = np.linspace(lo, hi, 257)
    vals = [f(x) for x in grid]
    for x0, x1, f0, f1 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if f0 < 0 <= f1:
            return optimize.brentq(f, x0, x1, xtol=1e-15, rtol=4e-16)
    best = min(abs(v) for v in vals)
    raise GammaSolveError(
        f"no switching angle in (0, pi): B*cos(phi)={B * math.cos(phi):.6g} "
        f"vs C={C:.6g}, min |residual| on grid {best:.3g}", best)


def switching_angle(query):
    """Switching angle of the steady response, including degenerate modes.

    Returns 0 when the filter stays in gain mode for the whole period and
    ``pi`` when it integrates for the whole half period.
    """
    p = query.params
    if p.k_h == 0:
        return 0.0
    try:
        return gamma_fractional(query)
    except GammaSolveError:
        g = gamma_intermediates(query)
        phi = math.pi * p.alpha / 2
        return 0.0 if g.B * math.cos(phi) >= g.C else math.pi


def df_classic(omega, omega_h, k_h):
    """Describing function of the classic HIGS (amplitude independent)."""
    gam = gamma_classic(omega, omega_h, k_h)
    e1 = cmath.exp(-1j * gam)
    e2 = cmath.exp(-2j * gam)
    integ = (gam / math.pi + 1j * (e2 - 1) / (2 * math.pi)
             - 4j * (e1 - 1) / (2 * math.pi))
    gain = (math.pi - gam) / math.pi + 1j * (e2 - 1) / (2 * math.pi)
    return omega_h / (1j * omega) * integ + k_h * gain


def _first_harmonic(B, C, gam, phi):
    sp, cp = math.sin(phi), math.cos(phi)
    b1 = (B * (2 * gam * cp - math.sin(2 * gam - phi) + 3 * sp
               - 2 * math.sin(gam + phi) + 2 * math.sin(gam - phi))
          + C * (2 * math.pi - 2 * gam + math.sin(2 * gam))) / (2 * math.pi)
    a1 = (B * (-math.cos(2 * gam - phi) + cp - 2 * gam * sp
               + 2 * math.cos(gam - phi) - 2 * math.cos(gam + phi))
          + C * (math.cos(2 * gam) - 1)) / (2 * math.pi)
    return a1, b1


def df_fractional(query):
    """Describing function ``(b1 + j*a1)/e_hat`` of the fractional HIGS."""
    gam = switching_angle(query)
    g = gamma_intermediates(query)
    phi = math.pi * query.params.alpha / 2
    a1, b1 = _first_harmonic(g.B * query.e_hat, g.C * query.e_hat, gam, phi)
    return FrequencyResponsePoint(query.omega, complex(b1, a1) / query.e_hat,
                                  gam, "closed_form")


def piecewise_output(query, theta):
    """Steady output over one period at phase angles ``theta`` (rad)."""
    gam = switching_angle(query)
    g = gamma_intermediates(query)
    phi = math.pi * query.params.alpha / 2
    th = np.mod(np.asarray(theta, dtype=float), 2 * np.pi)
    sign = np.where(th < np.pi, 1.0, -1.0)
    half = np.where(th < np.pi, th, th - np.pi)
    integ = g.B * (np.sin(half - phi) + np.sin(phi))
    gain = g.C * np.sin(half)
    return query.e_hat * sign * np.where(half < gam, integ, gain)


def _segment_quadrature(func, edges, nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        mid, half = (hi + lo) / 2, (hi - lo) / 2
        total += half * np.dot(w, func(mid + half * x))
    return total


def df_harmonic_n(query, n, nodes=48, rtol=1e-10):
    """n-th harmonic coefficient ``(b_n + j*a_n)/e_hat`` by quadrature.

    Gauss-Legendre quadrature is applied per smooth segment of the
    piecewise output; convergence is checked against a doubled node count.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be a positive integer")
    gam = switching_angle(query)
    edges = sorted({0.0, gam, math.pi, math.pi + gam, 2 * math.pi})

    def coef(nodes):
        def integrand_b(t):
            return piecewise_output(query, t) * np.sin(n * t)

        def integrand_a(t):
            return piecewise_output(query, t) * np.cos(n * t)
        bn = _segment_quadrature(integrand_b, edges, nodes) / math.pi
        an = _segment_quadrature(integrand_a, edges, nodes) / math.pi
        return complex(bn, an) / query.e_hat

    c1, c2 = coef(nodes), coef(2 * nodes)
    scale = max(abs(c2), query.params.k_h, 1e-300)
    if abs(c1 - c2) > rtol * scale:
        raise ArithmeticError(
            f"quadrature did not converge for n={n}: |diff|={abs(c1 - c2):.3g}")
    return c2
