"""Superconducting-circuit realization of the model.

A SQUID-terminated coplanar waveguide plays the cavity and an LC resonator,
magnetically coupled to the SQUID loop, plays the mirror: the LC flux shifts
the waveguide's effective electrical length, so the resonator behaves as a
harmonically bound boundary with a very small effective mass.  This module
maps fabrication-level quantities (critical current, impedances, inductances,
bias flux) to the dynamical model's rates and checks the validity conditions.

Everything here is in SI units; conversion to the dynamics modules'
loss-normalized units happens only when assembling an AnalogModel, with the
rate unit recorded explicitly.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import e as ELEMENTARY_CHARGE
from scipy.constants import h as PLANCK
from scipy.constants import hbar as HBAR
from scipy.integrate import quad
from scipy.optimize import brentq

from .model import ModelError, SystemParams

__all__ = [
    "FLUX_QUANTUM",
    "CavityLengthConvention",
    "CircuitParams",
    "AnalogModel",
    "RegimeReport",
    "josephson_energy",
    "effective_position",
    "static_length_shift",
    "flux_to_length_coefficient",
    "analog_coupling",
    "effective_mass",
    "build_analog_model",
    "mode_coupling_g",
    "mode_coupling_g_quadrature",
    "mode_wavevectors",
    "validate_regime",
    "fundamental_cavity_length",
]

FLUX_QUANTUM = PLANCK / (2.0 * ELEMENTARY_CHARGE)  # Wb

#: validity checks warn when a "much smaller than" ratio exceeds this
REGIME_WARN_RATIO = 0.1


class CavityLengthConvention(enum.Enum):
    """Relation between the fundamental frequency and the electrical length.

    The waveguide is open at one end (current node) and effectively shorted at
    the SQUID, so its fundamental is a quarter-wave mode; that convention makes
    the closed-form coupling and the effective-mass route agree identically and
    is the default.  Half- and full-wave conventions are provided for
    sensitivity studies.
    """

    QUARTER_WAVE = 0.25
    HALF_WAVE = 0.5
    FULL_WAVE = 1.0


@dataclass(frozen=True)
class CircuitParams:
    """Fabrication parameters of the SQUID/LC/waveguide system (SI units).

    phi_bias is the static flux through the SQUID loop in units of the flux
    quantum; mutual_ratio is chi = M / L_LC.  omega_lc may be omitted, in which
    case it is derived from 1/sqrt(L_LC * C_LC).  One of ell_wg / c_wg may be
    omitted and is derived from the impedance.
    """

    omega_a: float  # waveguide fundamental, rad/s
    i_crit: float  # single-junction critical current, A
    c_j: float  # total SQUID capacitance, F
    z_wg: float  # waveguide impedance, ohm
    l_lc: float  # LC inductance, H
    c_lc: float  # LC capacitance, F
    mutual_ratio: float  # chi = M / L_LC, dimensionless, in (0, 1)
    phi_bias: float  # bias flux, units of FLUX_QUANTUM
    cavity_length: float  # physical waveguide length, m
    omega_lc: float | None = None  # LC angular frequency, rad/s
    ell_wg: float | None = None  # inductance per unit length, H/m
    c_wg: float | None = None  # capacitance per unit length, F/m
    l_squid: float = 0.0  # SQUID loop self-inductance, H (0: negligible by design)
    bias_guard_band: float = 0.02  # keep |phi_bias| below 0.5 minus this

    def __post_init__(self):
        positive = ("omega_a", "i_crit", "c_j", "z_wg", "l_lc", "c_lc", "cavity_length")
        for name in positive:
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise ModelError(f"{name} must be positive and finite, got {v!r}")
        if not 0.0 < self.mutual_ratio < 1.0:
            raise ModelError(
                "mutual_ratio must lie in (0, 1): the mutual inductance is bounded "
                f"by the self-inductance (got {self.mutual_ratio})"
            )
        if abs(self.phi_bias) >= 0.5 - self.bias_guard_band:
            raise ModelError(
                f"|phi_bias| = {abs(self.phi_bias)} too close to the half-quantum "
                f"Josephson-energy zero (guard band {self.bias_guard_band})"
            )
        if self.ell_wg is None and self.c_wg is None:
            raise ModelError("provide at least one of ell_wg / c_wg")
        ell = self.ell_wg if self.ell_wg is not None else self.z_wg**2 * self.c_wg
        cw = self.c_wg if self.c_wg is not None else self.ell_wg / self.z_wg**2
        if self.ell_wg is not None and self.c_wg is not None:
            z_check = math.sqrt(self.ell_wg / self.c_wg)
            if abs(z_check - self.z_wg) > 1e-9 * self.z_wg:
                raise ModelError(
                    f"z_wg = {self.z_wg} inconsistent with sqrt(ell_wg/c_wg) = {z_check}"
                )
        object.__setattr__(self, "ell_wg", float(ell))
        object.__setattr__(self, "c_wg", float(cw))
        w_lc = self.omega_lc
        if w_lc is None:
            w_lc = 1.0 / math.sqrt(self.l_lc * self.c_lc)
        object.__setattr__(self, "omega_lc", float(w_lc))
        if self.l_squid < 0:
            raise ModelError("l_squid must be non-negative")

    @property
    def wave_velocity(self) -> float:
        """v = 1/sqrt(ell_wg * c_wg)."""
        return 1.0 / math.sqrt(self.ell_wg * self.c_wg)

    @property
    def josephson_energy_single(self) -> float:
        """E_J of one junction, Phi_0 I_c / (2 pi)."""
        return FLUX_QUANTUM * self.i_crit / (2.0 * math.pi)

    @property
    def josephson_inductance(self) -> float:
        """L_J = (Phi_0/2pi)^2 / (2 E_J), the SQUID's kinetic inductance scale."""
        return (FLUX_QUANTUM / (2.0 * math.pi)) ** 2 / (2.0 * self.josephson_energy_single)

    @property
    def plasma_frequency(self) -> float:
        """omega_s = (2 pi / Phi_0) sqrt(2 E_J / C_J)."""
        return (2.0 * math.pi / FLUX_QUANTUM) * math.sqrt(
            2.0 * self.josephson_energy_single / self.c_j
        )

    @property
    def lc_flux_zpf(self) -> float:
        """Zero-point flux scale of the LC, sqrt(hbar * omega_lc * L_LC)."""
        return math.sqrt(HBAR * self.omega_lc * self.l_lc)


def josephson_energy(c: CircuitParams, phi: float) -> float:
    """SQUID Josephson energy 2 E_J |cos(pi phi)| at flux phi (flux-quantum units)."""
    return 2.0 * c.josephson_energy_single * abs(math.cos(math.pi * phi))


def effective_position(c: CircuitParams, phi: float) -> float:
    """Effective boundary displacement x_eff = (Phi_0/2pi)^2 / (ell_wg E_J(phi)).

    Its first-order flux sensitivity is x_eff * tan(pi phi) * pi * dphi.
    """
    ej = josephson_energy(c, phi)
    if ej <= 0:
        raise ModelError("Josephson energy vanishes at this flux; x_eff diverges")
    return (FLUX_QUANTUM / (2.0 * math.pi)) ** 2 / (c.ell_wg * ej)


def static_length_shift(c: CircuitParams) -> float:
    """Bias-point effective length delta_L = L_J / (ell_wg cos(pi phi_b))."""
    return c.josephson_inductance / (c.ell_wg * math.cos(math.pi * c.phi_bias))


def flux_to_length_coefficient(c: CircuitParams) -> float:
    """R such that the drive-induced length shift is Phi_LC / R:
    R = Phi_0 / (tan(pi phi_b) * pi * chi * delta_L)."""
    tan_b = math.tan(math.pi * c.phi_bias)
    if tan_b == 0.0:
        raise ModelError("flux-to-length coefficient diverges at phi_bias = 0")
    return FLUX_QUANTUM / (tan_b * math.pi * c.mutual_ratio * static_length_shift(c))


def analog_coupling(c: CircuitParams) -> float:
    """Pair-conversion coupling rate of the analog model (rad/s):

        omega_c = (omega_a / (4 sqrt(2) pi)) * chi * (omega_a / (I_c Z_wg))
                  * sqrt(hbar omega_LC L_LC) * sin(pi phi_b)/cos^2(pi phi_b)

    Equivalent to omega_a * x_zpf_eff / (2 x_o) with the quarter-wave cavity
    length x_o and the effective-mass zero-point amplitude; the closed form
    avoids the intermediate quantities.
    """
    phi = math.pi * c.phi_bias
    trig = math.sin(phi) / math.cos(phi) ** 2
    value = (
        (c.omega_a / (4.0 * math.sqrt(2.0) * math.pi))
        * c.mutual_ratio
        * (c.omega_a / (c.i_crit * c.z_wg))
        * c.lc_flux_zpf
        * trig
    )
    if value <= 0:
        raise ModelError("analog coupling must be positive; check phi_bias sign")
    return value


def effective_mass(c: CircuitParams) -> float:
    """Inertia of the LC resonator viewed as a mechanical boundary,
    m = C_LC R^2 with R the flux-to-length coefficient."""
    phi = math.pi * c.phi_bias
    if math.sin(phi) == 0.0 or math.cos(phi) == 0.0:
        raise ModelError("effective mass undefined at phi_bias = 0 or +-1/2")
    return c.c_lc * flux_to_length_coefficient(c) ** 2


def fundamental_cavity_length(
    c: CircuitParams,
    convention: CavityLengthConvention = CavityLengthConvention.QUARTER_WAVE,
) -> float:
    """Electrical length x_o consistent with omega_a under the chosen mode
    convention: x_o = fraction * (2 pi v / omega_a)."""
    return convention.value * 2.0 * math.pi * c.wave_velocity / c.omega_a


def coupling_from_mass(
    c: CircuitParams,
    convention: CavityLengthConvention = CavityLengthConvention.QUARTER_WAVE,
) -> float:
    """Cross-derivation of omega_c via omega_a * x_zpf / (2 x_o), with
    x_zpf = sqrt(hbar / (2 m_eff omega_LC)).  Used as a consistency check on
    `analog_coupling`."""
    m = effective_mass(c)
    x_zpf = math.sqrt(HBAR / (2.0 * m * c.omega_lc))
    x_o = fundamental_cavity_length(c, convention)
    return c.omega_a * x_zpf / (2.0 * x_o)


@dataclass(frozen=True)
class AnalogModel:
    """Assembled dynamical parameters of the circuit analog."""

    omega_c: float  # rad/s
    m_eff: float  # kg
    delta_l_bias: float  # m
    r_coeff: float  # Wb/m
    system: SystemParams  # in units of rate_unit
    rate_unit: float  # rad/s corresponding to 1.0 in `system`


def build_analog_model(
    c: CircuitParams,
    gamma_a: float = 2.0 * math.pi * 5.0e4,
    gamma_b: float = 2.0 * math.pi * 5.0e4,
) -> AnalogModel:
    """Assemble the dynamics-layer parameter set from circuit quantities.

    gamma_a / gamma_b are the cavity and LC energy loss rates in rad/s
    (defaults: 2 pi * 50 kHz, typical of superconducting resonators).  The
    returned SystemParams is expressed in units of gamma_a, recorded in
    rate_unit.
    """
    if gamma_a <= 0 or gamma_b <= 0:
        raise ModelError("loss rates must be positive")
    wc = analog_coupling(c)
    unit = gamma_a
    system = SystemParams(
        omega_a=c.omega_a / unit,
        omega_b=c.omega_lc / unit,
        omega_c=wc / unit,
        gamma_a=gamma_a / unit,
        gamma_b=gamma_b / unit,
    )
    return AnalogModel(
        omega_c=wc,
        m_eff=effective_mass(c),
        delta_l_bias=static_length_shift(c),
        r_coeff=flux_to_length_coefficient(c),
        system=system,
        rate_unit=unit,
    )


def mode_coupling_g(n: int, k: int) -> float:
    """Intermode coefficient generated by a moving boundary in the
    instantaneous quarter-wave basis:

        g_nk = ((-1)^(n+k)/2) (1+2k)(1+2n) / (k(k+1) - n(n+1))   for n != k
        g_nn = 0

    Antisymmetric under n <-> k; equals d * integral phi_k d(phi_n)/dd
    over the cavity (see `mode_coupling_g_quadrature`).
    """
    if n < 0 or k < 0:
        raise ModelError("mode indices must be non-negative")
    if n == k:
        return 0.0
    sign = -1.0 if (n + k) % 2 else 1.0
    return 0.5 * sign * (1.0 + 2.0 * k) * (1.0 + 2.0 * n) / (k * (k + 1.0) - n * (n + 1.0))


def mode_coupling_g_quadrature(n: int, k: int, cavity_d: float = 1.0) -> float:
    """Quadrature evaluation of g_nk = d * int_0^d phi_k(x) (d phi_n / dd)(x) dx
    for the normalized modes phi_n = sqrt(2/d) cos(kappa_n x),
    kappa_n = (2n+1) pi / (2d).  Independent oracle for `mode_coupling_g`."""
    dd = cavity_d
    kap_n = (2 * n + 1) * math.pi / (2 * dd)
    kap_k = (2 * k + 1) * math.pi / (2 * dd)
    norm = math.sqrt(2.0 / dd)

    def phi_k(x):
        return norm * math.cos(kap_k * x)

    def dphi_n_dd(x):
        # d/dd [sqrt(2/d) cos((2n+1) pi x / (2d))]
        return (-0.5 / dd) * norm * math.cos(kap_n * x) + norm * math.sin(kap_n * x) * (
            kap_n * x / dd
        )

    val, err = quad(lambda x: phi_k(x) * dphi_n_dd(x), 0.0, dd, limit=400)
    if err > 1e-10:
        raise ModelError(f"quadrature failed to converge (error {err:.1e})")
    return dd * val


def mode_wavevectors(d_eff: float, delta_l: float, n_max: int) -> list[float]:
    """Wavevectors kappa_n of the open/loaded waveguide satisfying
    (kappa delta_l) tan(kappa L) = 1 with L = d_eff - delta_l, solved by
    bracketed bisection on each branch.

    For delta_l -> 0 the roots reduce to the hard-wall values
    kappa_n = (2n+1) pi / (2 d_eff).
    """
    if d_eff <= 0:
        raise ModelError("d_eff must be positive")
    if delta_l < 0:
        raise ModelError("delta_l must be non-negative")
    if delta_l >= d_eff:
        raise ModelError("delta_l must be smaller than d_eff")
    length = d_eff - delta_l
    if delta_l == 0.0:
        return [(2 * n + 1) * math.pi / (2.0 * length) for n in range(n_max + 1)]

    roots = []
    for n in range(n_max + 1):
        lo = n * math.pi / length + 1e-12 / length
        hi = (n + 0.5) * math.pi / length - 1e-12 / length

        def bc(kappa):
            return kappa * delta_l * math.tan(kappa * length) - 1.0

        roots.append(brentq(bc, lo, hi, xtol=1e-15 * (1 + 1 / length), rtol=8.9e-16))
    return roots


@dataclass
class RegimeReport:
    """Outcome of the validity checks; each entry is (ratio, threshold, ok)."""

    checks: dict[str, tuple[float, float, bool]]

    @property
    def passed(self) -> bool:
        return all(ok for _, _, ok in self.checks.values())

    def warnings(self) -> list[str]:
        return [name for name, (_, _, ok) in self.checks.items() if not ok]

    def as_dict(self) -> dict:
        return {
            name: {"ratio": ratio, "warn_above": thr, "ok": ok}
            for name, (ratio, thr, ok) in self.checks.items()
        }


def validate_regime(c: CircuitParams) -> RegimeReport:
    """Check the assumptions behind the analog mapping.

    * both mode frequencies far below the SQUID plasma frequency,
    * SQUID self-inductance far below the kinetic scale (Phi_0/2pi)^2/E_J,
    * zero-point flux excursion chi * Phi_zpf a small fraction of Phi_0
      (the total flux through the loop must not change sign),
    * bias flux comfortably inside the guard band.
    Ratios above REGIME_WARN_RATIO (bias: above 90% of the guard limit) warn.
    """
    ws = c.plasma_frequency
    checks: dict[str, tuple[float, float, bool]] = {}

    def add(name, ratio, threshold=REGIME_WARN_RATIO):
        checks[name] = (float(ratio), float(threshold), bool(ratio <= threshold))

    add("cavity_below_plasma", c.omega_a / ws)
    add("lc_below_plasma", c.omega_lc / ws)
    kinetic = (FLUX_QUANTUM / (2.0 * math.pi)) ** 2 / c.josephson_energy_single
    add("squid_self_inductance", c.l_squid / kinetic)
    add("flux_excursion", c.mutual_ratio * c.lc_flux_zpf / FLUX_QUANTUM)
    limit = 0.5 - c.bias_guard_band
    add("bias_margin", abs(c.phi_bias) / limit, 0.9)
    return RegimeReport(checks=checks)
