"""Reduced dynamical models for the mirror-cavity system.

Three tiers, all formulated in the frame rotating at the drive frequency:

* mean field  -- classical amplitudes (a, b); blind to vacuum-seeded pair
  creation.
* linear      -- (b, q, n_a) with every bilinear product dropped; captures
  pair creation at lowest order and is exactly superposable.
* cumulant    -- (b, q, n_a) with third-order correlators factorized
  (q*b, q b*, n_a b kept as products); closed and nonlinear.

Free evolution is integrated in the same representation with f0 = 0 and the
frame set to the mirror frequency (see `model.ringdown_drive`): the fast
lab-frame phases e^{-i omega_b t}, e^{-2i omega_a t} are factored out
analytically so step sizes track only the loss rates and omega_c.
"""
from __future__ import annotations

import cmath
import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .model import DriveParams, ModelError, SystemParams, ringdown_drive

__all__ = [
    "Model",
    "Regime",
    "SemiState",
    "MeanFieldState",
    "RingdownRates",
    "SemiTrajectory",
    "mean_field_rhs",
    "mean_field_threshold",
    "mean_field_jacobian",
    "mean_field_onset",
    "cumulant_rhs",
    "cumulant_jacobian",
    "linear_rhs",
    "ringdown_rates",
    "analytic_ringdown",
    "integrate",
    "linear_photon_trajectory",
]

#: radicand below this fraction of 2*omega_c^2 classifies the critical regime
CRITICAL_BAND = 1e-12


class Model(enum.Enum):
    MEAN_FIELD = "meanfield"
    LINEAR = "linear"
    CUMULANT = "cumulant"


class Regime(enum.Enum):
    OVER_DAMPED = "overdamped"
    UNDER_DAMPED = "underdamped"
    CRITICAL = "critical"


@dataclass(frozen=True)
class SemiState:
    """Factorized-model state: mirror amplitude b, pair amplitude q = <a a>,
    photon number n_a."""

    b: complex
    q: complex
    n_a: float

    def as_real(self) -> np.ndarray:
        return np.array([self.b.real, self.b.imag, self.q.real, self.q.imag, self.n_a])

    @classmethod
    def from_real(cls, y) -> "SemiState":
        return cls(b=complex(y[0], y[1]), q=complex(y[2], y[3]), n_a=float(y[4]))


@dataclass(frozen=True)
class MeanFieldState:
    """Classical field and mirror amplitudes."""

    a: complex
    b: complex

    def as_real(self) -> np.ndarray:
        return np.array([self.a.real, self.a.imag, self.b.real, self.b.imag])

    @classmethod
    def from_real(cls, y) -> "MeanFieldState":
        return cls(a=complex(y[0], y[1]), b=complex(y[2], y[3]))


@dataclass(frozen=True)
class RingdownRates:
    """Free-evolution envelope constants at two-photon resonance.

    omega_d is the (possibly imaginary) exchange frequency obeying
    omega_d^2 + (gamma_a - gamma_b/2)^2/4 = 2 omega_c^2; gamma_1 is the
    averaged dissipation rate."""

    omega_d: complex
    gamma_1: float
    regime: Regime


def mean_field_rhs(s: MeanFieldState, p: SystemParams, d: DriveParams) -> MeanFieldState:
    """da/dt = -(gamma_a/2 - i Delta_a) a - 2i omega_c a* b
    db/dt = -(gamma_b/2 - i Delta_b) b - i omega_c a^2 + i f0
    """
    da = -(p.gamma_a / 2 - 1j * d.delta_a(p)) * s.a - 2j * p.omega_c * s.a.conjugate() * s.b
    db = -(p.gamma_b / 2 - 1j * d.delta_b(p)) * s.b - 1j * p.omega_c * s.a**2 + 1j * d.f0
    return MeanFieldState(a=da, b=db)


def mean_field_threshold(p: SystemParams) -> float:
    """Classical instability threshold of the driven mirror amplitude,
    gamma_a*gamma_b/(8*omega_c) = gamma_0^2/(4*omega_c)."""
    if p.omega_c == 0:
        raise ModelError("threshold undefined for omega_c = 0")
    return p.gamma_a * p.gamma_b / (8.0 * p.omega_c)


def mean_field_jacobian(s: MeanFieldState, p: SystemParams, d: DriveParams) -> np.ndarray:
    """Jacobian of mean_field_rhs in the real basis (Re a, Im a, Re b, Im b)."""
    wc = p.omega_c
    da_, db_ = d.delta_a(p), d.delta_b(p)
    ar, ai = s.a.real, s.a.imag
    br, bi = s.b.real, s.b.imag
    jac = np.zeros((4, 4))
    # d(da)/d(a_r, a_i, b_r, b_i); note the a* makes the a-block non-holomorphic
    jac[0] = [-p.gamma_a / 2 + 2 * wc * bi, -da_ + 2 * wc * br, 2 * wc * ai, 2 * wc * ar]
    jac[1] = [da_ - 2 * wc * br, -p.gamma_a / 2 + 2 * wc * bi, -2 * wc * ar, 2 * wc * ai]
    jac[2] = [2 * wc * ai, 2 * wc * ar, -p.gamma_b / 2, -db_]
    jac[3] = [-2 * wc * ar, 2 * wc * ai, db_, -p.gamma_b / 2]
    return jac


def _below_threshold_point(p: SystemParams, d: DriveParams) -> MeanFieldState:
    b = 1j * d.f0 / (p.gamma_b / 2 - 1j * d.delta_b(p))
    return MeanFieldState(a=0.0, b=b)


def mean_field_onset(
    p: SystemParams,
    d_omega: float | None = None,
    bracket_scale: tuple[float, float] = (0.2, 5.0),
    xtol_rel: float = 1e-9,
) -> float:
    """Drive amplitude at which the zero-field branch destabilizes, located by
    bisection on the largest Jacobian eigenvalue real part."""
    omega = p.omega_b if d_omega is None else d_omega
    fth = mean_field_threshold(p)

    def growth(f0: float) -> float:
        drv = DriveParams(f0=f0, omega=omega)
        jac = mean_field_jacobian(_below_threshold_point(p, drv), p, drv)
        return float(np.linalg.eigvals(jac).real.max())

    lo, hi = bracket_scale[0] * fth, bracket_scale[1] * fth
    return brentq(growth, lo, hi, xtol=xtol_rel * fth, rtol=1e-14)


def cumulant_rhs(s: SemiState, p: SystemParams, d: DriveParams) -> SemiState:
    """Closed factorized equations:

    db/dt   = -(gamma_b/2 - i Delta_b) b - i omega_c q + i f0
    dn_a/dt = -gamma_a n_a - 2i omega_c q* b + 2i omega_c q b*
    dq/dt   = -(gamma_a - i Delta_q) q - 4i omega_c n_a b - 2i omega_c b

    The n_a derivative is real by construction.
    """
    wc = p.omega_c
    db = -(p.gamma_b / 2 - 1j * d.delta_b(p)) * s.b - 1j * wc * s.q + 1j * d.f0
    dna_c = -p.gamma_a * s.n_a - 2j * wc * s.q.conjugate() * s.b + 2j * wc * s.q * s.b.conjugate()
    scale = max(1.0, abs(dna_c))
    assert abs(dna_c.imag) < 1e-14 * scale, "n_a flow acquired an imaginary part"
    dq = -(p.gamma_a - 1j * d.delta_q(p)) * s.q - 2j * wc * s.b * (1.0 + 2.0 * s.n_a)
    return SemiState(b=db, q=dq, n_a=dna_c.real)


def linear_rhs(s: SemiState, p: SystemParams, d: DriveParams) -> SemiState:
    """cumulant_rhs with every bilinear product (q*b, q b*, n_a b) removed;
    keeps the drive source i f0 and the spontaneous pair term -2i omega_c b."""
    wc = p.omega_c
    db = -(p.gamma_b / 2 - 1j * d.delta_b(p)) * s.b - 1j * wc * s.q + 1j * d.f0
    dq = -(p.gamma_a - 1j * d.delta_q(p)) * s.q - 2j * wc * s.b
    return SemiState(b=db, q=dq, n_a=-p.gamma_a * s.n_a)


def cumulant_jacobian(s: SemiState, p: SystemParams, d: DriveParams) -> np.ndarray:
    """Jacobian of cumulant_rhs in the real basis (Re b, Im b, Re q, Im q, n_a)."""
    wc = p.omega_c
    db_, dq_ = d.delta_b(p), d.delta_q(p)
    x = 1.0 + 2.0 * s.n_a
    br, bi = s.b.real, s.b.imag
    qr, qi = s.q.real, s.q.imag
    jac = np.zeros((5, 5))
    jac[0] = [-p.gamma_b / 2, -db_, 0.0, wc, 0.0]
    jac[1] = [db_, -p.gamma_b / 2, -wc, 0.0, 0.0]
    jac[2] = [0.0, 2 * wc * x, -p.gamma_a, -dq_, 4 * wc * bi]
    jac[3] = [-2 * wc * x, 0.0, dq_, -p.gamma_a, -4 * wc * br]
    jac[4] = [-4 * wc * qi, 4 * wc * qr, 4 * wc * bi, -4 * wc * br, -p.gamma_a]
    return jac


def ringdown_rates(p: SystemParams) -> RingdownRates:
    """Exchange frequency omega_d = sqrt(2 omega_c^2 - (gamma_a - gamma_b/2)^2/4)
    (principal branch) and the regime it implies."""
    delta = 0.5 * (p.gamma_a - 0.5 * p.gamma_b)
    radicand = 2.0 * p.omega_c**2 - delta**2
    omega_d = cmath.sqrt(complex(radicand))
    if abs(radicand) < CRITICAL_BAND * 2.0 * p.omega_c**2:
        regime = Regime.CRITICAL
    elif radicand > 0:
        regime = Regime.UNDER_DAMPED
    else:
        regime = Regime.OVER_DAMPED
    return RingdownRates(omega_d=omega_d, gamma_1=p.gamma_1, regime=regime)


def analytic_ringdown(b0: complex, p: SystemParams, t) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form free decay of the linear tier from b(0)=b0, q(0)=0, valid at
    two-photon resonance omega_b = 2 omega_a.  Returns lab-frame (b(t), q(t)).

    With delta = (gamma_a - gamma_b/2)/2 the envelopes are
        B(t) = b0 [cos(omega_d t) + delta sin(omega_d t)/omega_d]
        Q(t) = -2i omega_c b0 sin(omega_d t)/omega_d
    under the common factor e^{-i omega_b t - gamma_1 t / 2}.  For imaginary
    omega_d the trigonometric functions continue to hyperbolic ones; at the
    critical point sin(omega_d t)/omega_d -> t.
    """
    if not p.is_resonant():
        raise ModelError("analytic ringdown requires omega_b = 2*omega_a")
    t = np.asarray(t, dtype=float)
    rates = ringdown_rates(p)
    wd = rates.omega_d
    delta = 0.5 * (p.gamma_a - 0.5 * p.gamma_b)
    if rates.regime is Regime.CRITICAL:
        cos_part = np.ones_like(t, dtype=complex)
        sinc_part = t.astype(complex)
    else:
        cos_part = np.cos(wd * t)
        sinc_part = np.sin(wd * t) / wd
    envelope = np.exp(-1j * p.omega_b * t - 0.5 * rates.gamma_1 * t)
    b = envelope * b0 * (cos_part + delta * sinc_part)
    q = envelope * (-2j * p.omega_c * b0) * sinc_part
    return b, q


@dataclass
class SemiTrajectory:
    """Time series of reduced-model states."""

    times: np.ndarray
    states: list
    model: Model

    def field(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.states])

    @property
    def final(self):
        return self.states[-1]


def _rhs_real(model: Model, p: SystemParams, d: DriveParams):
    if model is Model.MEAN_FIELD:

        def f(t, y):
            ds = mean_field_rhs(MeanFieldState.from_real(y), p, d)
            return ds.as_real()

    elif model is Model.LINEAR:

        def f(t, y):
            ds = linear_rhs(SemiState.from_real(y), p, d)
            return ds.as_real()

    else:

        def f(t, y):
            ds = cumulant_rhs(SemiState.from_real(y), p, d)
            return ds.as_real()

    return f


def integrate(
    model: Model,
    s0,
    p: SystemParams,
    d: DriveParams,
    times,
    tol: float = 1e-9,
) -> SemiTrajectory:
    """Adaptive integration (embedded Runge-Kutta, order 8(5,3)) of the chosen
    tier on the given output grid."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 2 or np.any(np.diff(times) <= 0):
        raise ModelError("times must be a strictly increasing grid")
    y0 = s0.as_real()
    sol = solve_ivp(
        _rhs_real(model, p, d),
        (times[0], times[-1]),
        y0,
        t_eval=times,
        method="DOP853",
        rtol=tol,
        atol=tol * 1e-2,
    )
    if not sol.success:
        raise ModelError(f"integration failed: {sol.message}")
    if model is Model.MEAN_FIELD:
        states = [MeanFieldState.from_real(sol.y[:, k]) for k in range(sol.y.shape[1])]
    else:
        states = []
        floor = 0.0
        for k in range(sol.y.shape[1]):
            y = sol.y[:, k].copy()
            if y[4] < 0.0:
                floor = min(floor, y[4])
                y[4] = 0.0
            states.append(SemiState.from_real(y))
        if model is Model.CUMULANT and floor < -1e-9:
            warnings.warn(
                f"photon number clipped at 0 (undershoot {floor:.2e})",
                RuntimeWarning,
                stacklevel=2,
            )
    return SemiTrajectory(times=times, states=states, model=model)


def linear_photon_trajectory(
    b0: complex,
    p: SystemParams,
    d: DriveParams | None = None,
    times=None,
    tol: float = 1e-10,
) -> np.ndarray:
    """Photon number sourced by the linear-tier pair amplitude.

    The closed form for n_a(t) in the linear regime is unwieldy; instead the
    rate equation dn_a/dt = -gamma_a n_a + 4 omega_c Im(q* b) is integrated
    along the linear (b, q) trajectory.  The source is second order in the
    amplitudes, which is the same order as n_a itself, so this is the
    consistent lowest-order photon number (strict `linear_rhs` drops it to
    preserve exact superposability).
    """
    if d is None:
        d = ringdown_drive(p)
    times = np.asarray(times, dtype=float)

    def f(t, y):
        s = SemiState(b=complex(y[0], y[1]), q=complex(y[2], y[3]), n_a=float(y[4]))
        ds = linear_rhs(s, p, d)
        source = 4.0 * p.omega_c * (s.q.conjugate() * s.b).imag
        return [ds.b.real, ds.b.imag, ds.q.real, ds.q.imag, -p.gamma_a * y[4] + source]

    y0 = [complex(b0).real, complex(b0).imag, 0.0, 0.0, 0.0]
    sol = solve_ivp(
        f, (times[0], times[-1]), y0, t_eval=times, method="DOP853", rtol=tol, atol=tol * 1e-2
    )
    if not sol.success:
        raise ModelError(f"integration failed: {sol.message}")
    return np.clip(sol.y[4], 0.0, None)
