"""Generalized HIGS architectures, the PID controller and the plant.

Architecture a puts a fractional HIGS of order ``alpha`` in series with a
linear fractional low-pass ``(1 + s/omega_r)**-(1 - alpha)``; architecture b
blends a classic HIGS with a first-order low-pass, ``beta*HIGS +
(1-beta)*LPF``.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .base import FilterChain, LinearFilter, ParallelSum, SignalFilter, _SosFilter
from .fractional import check_order, design_fractional_lowpass
from .higs import FractionalHIGS

__all__ = [
    "ArchitectureA", "ArchitectureB", "DoubleIntegrator", "FractionalLowPass",
    "PIDController", "PidParams", "build_pid", "plant_step",
]


class FractionalLowPass(_SosFilter):
    """Rational approximation of ``(1 + s/cutoff)**-order``.

    Orders 0 and 1 are exact (unity and a first-order lag).
    """

    def __init__(self, order=0.5, cutoff=1.0, upper=1e5, n_stages=None):
        self.order = order
        self.cutoff = cutoff
        self.upper = upper
        self.n_stages = n_stages

    def _prepare(self, dt):
        self.design_ = design_fractional_lowpass(self.order, self.cutoff,
                                                 self.upper, self.n_stages)
        self._set_sos(self.design_.discretize(dt))

    def frequency_response(self, omega):
        design = design_fractional_lowpass(self.order, self.cutoff, self.upper,
                                           self.n_stages)
        return design.frequency_response(omega)


class ArchitectureA(SignalFilter):
    """Fractional HIGS followed by the complementary fractional low-pass.

    Parameters
    ----------
    omega_h, k_h, alpha : float
        Fractional HIGS parameters.
    omega_r : float
        Cut-off of the complementary low-pass of order ``1 - alpha``.
    upper : float
        Upper edge of the complement's approximation band, relative to
        ``omega_r``.
    """

    def __init__(self, omega_h=1.0, k_h=1.0, alpha=1.0, omega_r=1.0,
                 upper=1e5, n_stages=None):
        self.omega_h = omega_h
        self.k_h = k_h
        self.alpha = alpha
        self.omega_r = omega_r
        self.upper = upper
        self.n_stages = n_stages

    def _build(self):
        alpha = check_order(self.alpha, "alpha")
        return FilterChain([
            ("higs", FractionalHIGS(self.omega_h, self.k_h, alpha)),
            ("complement", FractionalLowPass(1.0 - alpha, self.omega_r,
                                             self.upper, self.n_stages)),
        ])

    def _prepare(self, dt):
        self.chain_ = self._build().fit(dt=dt)

    def _transform(self, x):
        return self.chain_._transform(x)

    def reset(self):
        check_is_fitted(self, "chain_")
        self.chain_.reset()

    def step(self, x):
        return self.chain_.step(x)

    def describing_function(self, omega, e_hat=1.0, n=1):
        """Closed-form ``n``-th harmonic of the output per unit input.

        The complement is linear and follows the HIGS, so it maps each HIGS
        harmonic through its own response at ``n*omega``.
        """
        from .describing import DfQuery, df_fractional, df_harmonic_n
        from .higs import HigsParams
        query = DfQuery(omega, e_hat, HigsParams(self.omega_h, self.k_h, self.alpha))
        c = df_fractional(query).value if n == 1 else df_harmonic_n(query, n)
        g = FractionalLowPass(1.0 - self.alpha, self.omega_r, self.upper,
                              self.n_stages).frequency_response(n * omega)
        return complex(c * complex(np.ravel(g)[0]))


class ArchitectureB(SignalFilter):
    """Parallel blend of a classic HIGS and a linear first-order low-pass.

    The low-pass ``k_h/(1 + s/cutoff)`` defaults to the HIGS corner
    ``omega_h/k_h`` so both paths share DC gain and corner.
    """

    def __init__(self, omega_h=1.0, k_h=1.0, beta=0.5, cutoff=None):
        self.omega_h = omega_h
        self.k_h = k_h
        self.beta = beta
        self.cutoff = cutoff

    def _build(self):
        beta = float(self.beta)
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {beta}")
        cutoff = self.cutoff
        if cutoff is None:
            if self.k_h == 0:
                raise ValueError("cutoff required when k_h = 0")
            cutoff = self.omega_h / self.k_h
        lpf = LinearFilter([self.k_h], [1.0 / cutoff, 1.0])
        return ParallelSum([("higs", FractionalHIGS(self.omega_h, self.k_h, 1.0)),
                            ("lpf", lpf)], [beta, 1.0 - beta])

    def _prepare(self, dt):
        self.blend_ = self._build().fit(dt=dt)

    def _transform(self, x):
        return self.blend_._transform(x)

    def reset(self):
        check_is_fitted(self, "blend_")
        self.blend_.reset()

    def step(self, x):
        return self.blend_.step(x)

    def describing_function(self, omega, e_hat=1.0, n=1):
        """Closed-form ``n``-th harmonic of the output per unit input."""
        from .describing import DfQuery, df_fractional, df_harmonic_n
        from .higs import HigsParams
        blend = self._build()
        query = DfQuery(omega, e_hat, HigsParams(self.omega_h, self.k_h, 1.0))
        c = df_fractional(query).value if n == 1 else df_harmonic_n(query, n)
        out = self.beta * c
        if n == 1:
            lpf = blend.branches[1][1]
            out += (1.0 - self.beta) * complex(np.ravel(lpf.frequency_response(omega))[0])
        return complex(out)


@dataclass(frozen=True)
class PidParams:
    """Gains of ``K_p * lead * (1 + omega_i * I)`` with ``I = H_f*(1 + omega_r/s)``."""

    omega_c: float
    k_p: float
    omega_d: float
    omega_t: float
    omega_i: float
    omega_r: float
    pd_rolloff: float

    @classmethod
    def defaults(cls, omega_c, omega_r=None):
        if not omega_c > 0:
            raise ValueError("omega_c must be positive")
        omega_i = omega_c / 10
        omega_t = 1.8 * omega_c
        return cls(omega_c=omega_c, k_p=omega_c ** 2 / 1.8, omega_d=omega_c / 1.8,
                   omega_t=omega_t, omega_i=omega_i,
                   omega_r=omega_i if omega_r is None else omega_r,
                   pd_rolloff=100 * omega_t)


class PIDController(SignalFilter):
    """PID with a generalized-HIGS integrator, in lead-reset-lag order.

    ``e -> PD -> v``; ``w = v + omega_i * (1 + omega_r/s) H_f(v)``;
    ``u = K_p * LPF(w)``.  ``H_f`` has DC gain ``1/omega_r`` and corner
    ``omega_r`` so that its linear limit makes the integrator block exactly
    ``1/s``.  With ``architecture='b'`` the blend fraction is ``beta``, or
    ``alpha`` when ``beta`` is not given.
    """

    def __init__(self, omega_c=200 * math.pi, alpha=0.0, omega_r=None,
                 architecture="a", beta=None):
        self.omega_c = omega_c
        self.alpha = alpha
        self.omega_r = omega_r
        self.architecture = architecture
        self.beta = beta

    @property
    def pid_params(self):
        return PidParams.defaults(self.omega_c, self.omega_r)

    def hf_block(self):
        """The generalized HIGS ``H_f`` used inside the integrator."""
        p = self.pid_params
        k_h = 1.0 / p.omega_r
        if self.architecture == "a":
            alpha = check_order(self.alpha, "alpha")
            # integral frequency in s**-alpha units keeps the corner at omega_r
            return ArchitectureA(omega_h=k_h * p.omega_r ** alpha, k_h=k_h,
                                 alpha=alpha, omega_r=p.omega_r)
        if self.architecture == "b":
            beta = self.alpha if self.beta is None else self.beta
            return ArchitectureB(omega_h=1.0, k_h=k_h, beta=beta,
                                 cutoff=p.omega_r)
        raise ValueError(f"unknown architecture {self.architecture!r}")

    def _prepare(self, dt):
        p = self.pid_params
        self.params_ = p
        self.pd_ = LinearFilter([1.0 / p.omega_d, 1.0],
                                [1.0 / p.pd_rolloff, 1.0]).fit(dt=dt)
        self.hf_ = self.hf_block().fit(dt=dt)
        self.pi_ = LinearFilter([1.0, p.omega_r], [1.0, 0.0]).fit(dt=dt)
        self.lpf_ = LinearFilter([1.0], [1.0 / p.omega_t, 1.0]).fit(dt=dt)
        self.reset()

    def _transform(self, x):
        p = self.params_
        v = self.pd_._transform(x)
        w = v + p.omega_i * self.pi_._transform(self.hf_._transform(v))
        return p.k_p * self.lpf_._transform(w)

    def reset(self):
        check_is_fitted(self, "params_")
        for block in (self.pd_, self.hf_, self.pi_, self.lpf_):
            block.reset()

    def step(self, e):
        p = self.params_
        v = self.pd_.step(e)
        w = v + p.omega_i * self.pi_.step(self.hf_.step(v))
        return p.k_p * self.lpf_.step(w)

    def stages(self):
        """Block names in signal order."""
        return ["pd", "hf", "pi", "lpf", "gain"]

    def linear_transfer_function(self):
        """``(num, den)`` of the controller with ``H_f`` replaced by its
        linear limit ``(1/omega_r)/(1 + s/omega_r)``."""
        p = self.params_ if hasattr(self, "params_") else self.pid_params
        pd = (np.array([1.0 / p.omega_d, 1.0]), np.array([1.0 / p.pd_rolloff, 1.0]))
        lpf = (np.array([1.0]), np.array([1.0 / p.omega_t, 1.0]))
        hf = (np.array([1.0 / p.omega_r]), np.array([1.0 / p.omega_r, 1.0]))
        pi = (np.array([1.0, p.omega_r]), np.array([1.0, 0.0]))
        # 1 + omega_i * hf * pi
        integ_num = p.omega_i * np.polymul(hf[0], pi[0])
        integ_den = np.polymul(hf[1], pi[1])
        par_num = np.polyadd(integ_den, integ_num)
        num = p.k_p * np.polymul(np.polymul(pd[0], lpf[0]), par_num)
        den = np.polymul(np.polymul(pd[1], lpf[1]), integ_den)
        return num, den


def build_pid(omega_c, alpha, **kwargs):
    """PID pipeline with the default gains for crossover ``omega_c``."""
    if not omega_c > 0:
        raise ValueError("omega_c must be positive")
    return PIDController(omega_c=omega_c, alpha=alpha, **kwargs)


@dataclass(frozen=True)
class DoubleIntegrator:
    """Single mass ``m*x'' = force``; state is ``(position, velocity)``."""

    mass: float = 1.0
    kind: str = "double_integrator"

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")

    def transfer_function(self):
        return np.array([1.0]), np.array([self.mass, 0.0, 0.0])


def plant_step(plant, state, force, dt):
    """Exact zero-order-hold update over one sample.

    Returns ``(state, position)`` where ``position`` is at the end of the
    sample interval.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x, v = state
    acc = force / plant.mass
    x = x + v * dt + 0.5 * acc * dt * dt
    v = v + acc * dt
    return (x, v), x
