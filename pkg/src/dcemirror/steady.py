"""Stationary response of the driven mirror.

Linear tier in closed form; beyond it, the factorized model's fixed points are
the real roots x = 1 + 2 n_a of a cubic obtained by eliminating (b, q) from the
stationarity conditions, with dynamical stability read off the Jacobian.  All
closed-form results here assume the two-photon resonance omega_b = 2 omega_a
unless a drive frequency is supplied explicitly.
"""
from __future__ import annotations

import cmath
import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .model import DriveParams, ModelError, SystemParams
from .semiclassical import SemiState, cumulant_jacobian, cumulant_rhs

__all__ = [
    "Stability",
    "ResponseCurve",
    "BranchSolution",
    "linear_response",
    "linear_steady_state",
    "response_curve",
    "response_fwhm",
    "effective_linewidth",
    "doublet_splitting",
    "locate_response_peaks",
    "steady_cubic_coeffs",
    "solve_cubic",
    "branch_solutions",
    "modified_threshold",
    "threshold_from_asymptotes",
    "fixed_points_newton",
    "sweep",
]

#: eigenvalue real parts within +-STABILITY_MARGIN are treated as critical
STABILITY_MARGIN = 1e-10
#: discriminate real cubic roots: |Im x| below this fraction of |x|
ROOT_IMAG_TOL = 1e-10


class Stability(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


def linear_response(p: SystemParams, omega: float) -> complex:
    """Linear-tier mirror response R(omega), with b = R(omega) f0.

    General-detuning form (Delta_b = omega - omega_b, Delta_q = omega - 2 omega_a):

        R = -(Delta_q + i gamma_a) /
            [Delta_b Delta_q + i (gamma_a Delta_b + gamma_b Delta_q / 2)
             - (2 omega_c^2 + gamma_0^2)]

    The denominator cannot vanish for positive rates.
    """
    d = DriveParams(f0=0.0, omega=float(omega))
    db, dq = d.delta_b(p), d.delta_q(p)
    denom = db * dq + 1j * (p.gamma_a * db + 0.5 * p.gamma_b * dq) - (
        2.0 * p.omega_c**2 + p.gamma_0**2
    )
    return -(dq + 1j * p.gamma_a) / denom


def linear_steady_state(p: SystemParams, f0: float, omega: float) -> SemiState:
    """Stationary (b, q, n_a) of the linear tier at drive (f0, omega)."""
    b = linear_response(p, omega) * f0
    d = DriveParams(f0=0.0, omega=float(omega))
    q = -2j * p.omega_c * b / (p.gamma_a - 1j * d.delta_q(p))
    n_a = 4.0 * p.omega_c * (q.conjugate() * b).imag / p.gamma_a
    return SemiState(b=b, q=q, n_a=n_a)


@dataclass
class ResponseCurve:
    """Sampled linear response on a drive-frequency grid."""

    omegas: np.ndarray
    response: np.ndarray
    squared_amp: np.ndarray
    f0: float = 1.0


def response_curve(p: SystemParams, omegas, f0: float = 1.0) -> ResponseCurve:
    omegas = np.asarray(omegas, dtype=float)
    resp = np.array([linear_response(p, w) for w in omegas])
    return ResponseCurve(omegas=omegas, response=resp, squared_amp=np.abs(resp * f0) ** 2, f0=f0)


def effective_linewidth(p: SystemParams) -> float:
    """Back-action-broadened mirror linewidth (gamma_0^2 + 2 omega_c^2)/gamma_1,
    which reduces to roughly gamma_b + 2 omega_c^2/gamma_a for gamma_b << gamma_a.

    Derived for omega_c << gamma_1; a warning is issued outside that regime.
    """
    if p.omega_c >= p.gamma_1:
        warnings.warn(
            "effective_linewidth derived for omega_c << gamma_1; "
            f"omega_c/gamma_1 = {p.omega_c / p.gamma_1:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return (p.gamma_0**2 + 2.0 * p.omega_c**2) / p.gamma_1


def _golden_refine(fun, lo, hi) -> float:
    res = minimize_scalar(lambda w: -fun(w), bracket=None, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * max(1.0, abs(hi - lo))})
    return float(res.x)


def response_fwhm(p: SystemParams, n_grid: int = 4001, span: float | None = None) -> float:
    """Full width at half maximum of |R(omega)|^2, measured numerically around
    the mirror resonance."""
    width_guess = max((p.gamma_0**2 + 2.0 * p.omega_c**2) / p.gamma_1, 1e-12)
    if span is None:
        span = 30.0 * width_guess + 4.0 * math.sqrt(2.0) * p.omega_c
    center = p.omega_b
    omegas = np.linspace(center - span, center + span, n_grid)
    amp2 = np.abs([linear_response(p, w) for w in omegas]) ** 2
    k_pk = int(np.argmax(amp2))
    peak_w = _golden_refine(lambda w: abs(linear_response(p, w)) ** 2,
                            omegas[max(k_pk - 2, 0)], omegas[min(k_pk + 2, n_grid - 1)])
    peak = abs(linear_response(p, peak_w)) ** 2
    half = peak / 2.0

    def cross(lo, hi):
        # bisection on |R|^2 - half
        flo = abs(linear_response(p, lo)) ** 2 - half
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = abs(linear_response(p, mid)) ** 2 - half
            if flo * fm <= 0:
                hi = mid
            else:
                lo, flo = mid, fm
            if abs(hi - lo) < 1e-13 * max(1.0, abs(center)):
                break
        return 0.5 * (lo + hi)

    below = omegas[omegas < peak_w]
    amp_below = amp2[omegas < peak_w]
    lo_idx = np.nonzero(amp_below < half)[0]
    if len(lo_idx) == 0:
        raise ModelError("half-maximum crossing not bracketed on the low side; widen span")
    left = cross(below[lo_idx[-1]], peak_w)
    above = omegas[omegas > peak_w]
    amp_above = amp2[omegas > peak_w]
    hi_idx = np.nonzero(amp_above < half)[0]
    if len(hi_idx) == 0:
        raise ModelError("half-maximum crossing not bracketed on the high side; widen span")
    right = cross(above[hi_idx[0]], peak_w)
    return float(right - left)


def doublet_splitting(p: SystemParams) -> float:
    """Strong-coupling splitting of the mirror response doublet, 2*sqrt(2)*omega_c.

    Meaningful for omega_c well above both loss rates; see
    `locate_response_peaks` for the companion numerical check.
    """
    return 2.0 * math.sqrt(2.0) * p.omega_c


def locate_response_peaks(p: SystemParams, n_grid: int = 2001) -> list[float]:
    """Local maxima of |R(omega)|^2 over Delta in [-4 sqrt(2) omega_c, +4 sqrt(2) omega_c],
    located on a uniform grid and refined by bounded golden-section search.
    Returned as detunings Delta = omega - omega_b."""
    span = 4.0 * math.sqrt(2.0) * p.omega_c
    deltas = np.linspace(-span, span, n_grid)
    amp2 = np.abs([linear_response(p, p.omega_b + dd) for dd in deltas]) ** 2
    peaks = []
    for k in range(1, n_grid - 1):
        if amp2[k] > amp2[k - 1] and amp2[k] > amp2[k + 1]:
            refined = _golden_refine(
                lambda dd: abs(linear_response(p, p.omega_b + dd)) ** 2,
                deltas[k - 1],
                deltas[k + 1],
            )
            peaks.append(refined)
    return peaks


def steady_cubic_coeffs(p: SystemParams, f0: float, delta: float) -> tuple[float, float, float, float]:
    """Coefficients (c3, c2, c1, c0) of the stationarity cubic in x = 1 + 2 n_a
    at two-photon resonance, obtained by eliminating (b, q) from the factorized
    fixed-point conditions:

        (x - 1) [(2 omega_c^2 x - A)^2 + Delta^2 gamma_1^2] = 16 omega_c^2 f0^2 x,

    with A = Delta^2 - gamma_0^2.  Expanded and divided by 4:

        c3 = omega_c^4
        c2 = -omega_c^2 (omega_c^2 + A)
        c1 = A^2/4 + Delta^2 gamma_1^2/4 + omega_c^2 A - 4 omega_c^2 f0^2
        c0 = -(A^2 + Delta^2 gamma_1^2)/4
    """
    wc2 = p.omega_c**2
    a_ = delta**2 - p.gamma_0**2
    c3 = wc2 * wc2
    c2 = -wc2 * (wc2 + a_)
    c1 = a_**2 / 4.0 + delta**2 * p.gamma_1**2 / 4.0 + wc2 * a_ - 4.0 * wc2 * f0**2
    c0 = -(a_**2 + delta**2 * p.gamma_1**2) / 4.0
    return (c3, c2, c1, c0)


def solve_cubic(coeffs: tuple[float, float, float, float]) -> list[float]:
    """Real roots of c3 x^3 + c2 x^2 + c1 x + c0 (closed form, one Newton polish).

    Roots with |Im x| > ROOT_IMAG_TOL * max(1, |x|) are discarded.
    """
    c3, c2, c1, c0 = (float(c) for c in coeffs)
    if c3 == 0.0:
        raise ModelError("leading cubic coefficient vanished")
    b2, b1, b0 = c2 / c3, c1 / c3, c0 / c3
    # depressed form t^3 + p t + q with x = t - b2/3
    shift = b2 / 3.0
    pp = b1 - b2 * b2 / 3.0
    qq = 2.0 * b2**3 / 27.0 - b2 * b1 / 3.0 + b0
    disc = (qq / 2.0) ** 2 + (pp / 3.0) ** 3
    roots: list[complex]
    if disc > 0.0:
        # one real root (Cardano)
        s = math.sqrt(disc)
        u = math.copysign(abs(-qq / 2.0 + s) ** (1.0 / 3.0), -qq / 2.0 + s)
        v = math.copysign(abs(-qq / 2.0 - s) ** (1.0 / 3.0), -qq / 2.0 - s)
        roots = [u + v - shift]
    elif pp == 0.0:
        roots = [-shift] * 3
    else:
        # three real roots (trigonometric form)
        m = 2.0 * math.sqrt(-pp / 3.0)
        arg = 3.0 * qq / (pp * m)
        arg = min(1.0, max(-1.0, arg))
        theta = math.acos(arg) / 3.0
        roots = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) - shift for k in range(3)]

    def poly(x):
        return ((c3 * x + c2) * x + c1) * x + c0

    def dpoly(x):
        return (3.0 * c3 * x + 2.0 * c2) * x + c1

    polished = []
    for r in roots:
        x = float(np.real(r))
        d = dpoly(x)
        if d != 0.0:
            x -= poly(x) / d
        polished.append(x)
    # deduplicate multiple roots produced by the trig branch at degeneracies
    polished.sort()
    out: list[float] = []
    for x in polished:
        if not out or abs(x - out[-1]) > 1e-9 * max(1.0, abs(x)):
            out.append(x)
    return out


@dataclass
class BranchSolution:
    """One stationary branch of the factorized model at fixed (f0, Delta)."""

    x: float
    n_a: float
    b: complex
    q: complex
    stability: Stability
    max_eig_real: float = field(default=math.nan)

    CUBIC_RESIDUAL_TOL = 1e-9
    FIXED_POINT_TOL = 1e-9


def _branch_amplitudes(p: SystemParams, f0: float, delta: float, x: float) -> tuple[complex, complex]:
    denom = (2.0 * p.omega_c**2 * x - (delta**2 - p.gamma_0**2)) - 1j * delta * p.gamma_1
    b = (delta + 1j * p.gamma_a) * f0 / denom
    q = 2.0 * p.omega_c * x * f0 / denom
    return b, q


def branch_solutions(p: SystemParams, f0: float, delta: float) -> list[BranchSolution]:
    """All physical stationary branches (real cubic roots with x >= 1), with
    amplitudes b = (Delta + i gamma_a) f0 / [(2 omega_c^2 x - (Delta^2 - gamma_0^2)) - i Delta gamma_1],
    q = -2i omega_c x b / (gamma_a - i Delta), and dynamical stability from the
    five-dimensional Jacobian of the factorized flow.
    """
    coeffs = steady_cubic_coeffs(p, f0, delta)
    roots = [x for x in solve_cubic(coeffs) if x >= 1.0 - 1e-12]
    if not roots:
        raise ModelError(
            "no stationary branch with x >= 1 found; the x = 1 vacuum branch "
            "exists at f0 = 0 and moves continuously, so this indicates a "
            "parameter or algebra error"
        )
    drive = DriveParams(f0=f0, omega=p.omega_b + delta)
    scale = max(1.0, abs(coeffs[0]), abs(coeffs[1]), abs(coeffs[2]), abs(coeffs[3]))
    out = []
    for x in roots:
        x = max(x, 1.0)
        resid = abs(((coeffs[0] * x + coeffs[1]) * x + coeffs[2]) * x + coeffs[3]) / scale
        if resid > BranchSolution.CUBIC_RESIDUAL_TOL:
            raise ModelError(f"cubic residual {resid:.2e} too large at x = {x}")
        b, q = _branch_amplitudes(p, f0, delta, x)
        n_a = (x - 1.0) / 2.0
        state = SemiState(b=b, q=q, n_a=n_a)
        flow = cumulant_rhs(state, p, drive)
        fp_resid = max(abs(flow.b), abs(flow.q), abs(flow.n_a))
        if fp_resid > BranchSolution.FIXED_POINT_TOL * max(1.0, f0):
            raise ModelError(f"branch at x = {x} is not stationary (residual {fp_resid:.2e})")
        eigs = np.linalg.eigvals(cumulant_jacobian(state, p, drive))
        max_real = float(eigs.real.max())
        if max_real < -STABILITY_MARGIN:
            stab = Stability.STABLE
        elif max_real > STABILITY_MARGIN:
            stab = Stability.UNSTABLE
        else:
            warnings.warn(
                f"marginal branch at x = {x:.6g} (max Re eig = {max_real:.2e}); "
                "classified unstable",
                RuntimeWarning,
                stacklevel=2,
            )
            stab = Stability.UNSTABLE
        out.append(BranchSolution(x=x, n_a=n_a, b=b, q=q, stability=stab, max_eig_real=max_real))
    out.sort(key=lambda s: s.x)
    return out


def modified_threshold(p: SystemParams) -> float:
    """Fluctuation-corrected crossover drive (omega_c + gamma_0^2/(2 omega_c))/2;
    tends to the classical threshold gamma_0^2/(4 omega_c) as omega_c -> 0."""
    if p.omega_c == 0:
        raise ModelError("threshold undefined for omega_c = 0")
    return 0.5 * (p.omega_c + p.gamma_0**2 / (2.0 * p.omega_c))


def threshold_from_asymptotes(p: SystemParams) -> float:
    """Crossover drive obtained by intersecting the weak-drive mirror amplitude
    gamma_a f0 / (gamma_0^2 + 2 omega_c^2) with the saturated amplitude
    gamma_a / (4 omega_c)."""
    return (p.gamma_0**2 + 2.0 * p.omega_c**2) / (4.0 * p.omega_c)


def fixed_points_newton(
    p: SystemParams,
    f0: float,
    delta: float,
    extra_starts: int = 24,
    tol: float = 1e-12,
    max_iter: int = 80,
) -> list[SemiState]:
    """All non-negative-occupation fixed points of the factorized flow found by
    damped Newton iteration from a deterministic multi-start set.

    Starts combine the cubic-root predictions with a fixed lattice of states
    spanning the physically relevant amplitude range, so the search does not
    presuppose the cubic reduction.
    """
    drive = DriveParams(f0=f0, omega=p.omega_b + delta)

    def flow_vec(y):
        s = SemiState.from_real(y)
        ds = cumulant_rhs(s, p, drive)
        return ds.as_real()

    starts: list[np.ndarray] = []
    try:
        for x in solve_cubic(steady_cubic_coeffs(p, f0, delta)):
            if x >= 1.0 - 1e-9:
                b, q = _branch_amplitudes(p, f0, delta, max(x, 1.0))
                base = np.array([b.real, b.imag, q.real, q.imag, (max(x, 1.0) - 1.0) / 2.0])
                starts.append(base)
                starts.append(base * 1.05 + 1e-3)
    except ModelError:
        pass
    scale_b = f0 / max(p.gamma_b / 2.0, 1e-12)
    scale_n = max(1.0, f0 / p.omega_c)
    k = 0
    while len(starts) < extra_starts:
        # deterministic low-discrepancy-ish lattice over the relevant range
        frac = (k * 0.6180339887498949) % 1.0
        frac2 = (k * 0.3819660112501051) % 1.0
        amp = scale_b * (0.05 + 0.95 * frac)
        ang = 2.0 * math.pi * frac2
        starts.append(
            np.array(
                [
                    amp * math.cos(ang),
                    amp * math.sin(ang),
                    -amp * math.sin(ang),
                    amp * math.cos(ang),
                    scale_n * frac,
                ]
            )
        )
        k += 1

    found: list[np.ndarray] = []
    norm0 = max(1.0, f0)
    for y0 in starts:
        y = np.array(y0, dtype=float)
        ok = False
        for _ in range(max_iter):
            r = flow_vec(y)
            if np.abs(r).max() < tol * norm0:
                ok = True
                break
            jac = cumulant_jacobian(SemiState.from_real(y), p, drive)
            try:
                step = np.linalg.solve(jac, -r)
            except np.linalg.LinAlgError:
                break
            # damped update to stabilize far-from-solution starts
            lam = 1.0
            base_norm = np.abs(r).max()
            for _ in range(30):
                cand = y + lam * step
                if np.abs(flow_vec(cand)).max() < base_norm:
                    y = cand
                    break
                lam *= 0.5
            else:
                break
        if not ok or y[4] < -1e-9:
            continue
        for prev in found:
            if np.abs(prev - y).max() < 1e-6 * max(1.0, np.abs(y).max()):
                break
        else:
            found.append(y)
    return [SemiState.from_real(y) for y in sorted(found, key=lambda v: v[4])]


def sweep(
    p: SystemParams,
    f0: float,
    omega_grid,
    tiers,
    fock=None,
    workers: int = 1,
    steady_kwargs: dict | None = None,
) -> dict[str, list[dict]]:
    """Stationary response tables over a drive-frequency grid.

    tiers is a subset of {"linear", "branches", "master"}; the master tier
    needs a Fock truncation and is solved with the quantum steady-state
    machinery.  Per-point failures are recorded in the row (error field)
    without aborting the sweep.  Rows follow the sweep table schema
    (omega, tier, branch_index, x, n_a, abs_b2, Re_b, Im_b, Re_q, Im_q, stability).
    """
    tiers = set(tiers)
    unknown = tiers - {"linear", "branches", "master"}
    if unknown:
        raise ModelError(f"unknown tiers: {sorted(unknown)}")
    omega_grid = np.asarray(omega_grid, dtype=float)
    if omega_grid.ndim != 1 or len(omega_grid) == 0 or np.any(np.diff(omega_grid) <= 0):
        raise ModelError("omega grid must be non-empty and strictly increasing")
    tables: dict[str, list[dict]] = {}

    if "linear" in tiers:
        rows = []
        for w in omega_grid:
            s = linear_steady_state(p, f0, w)
            rows.append(_row(w, "linear", 0, 1.0 + 2.0 * s.n_a, s))
        tables["linear"] = rows

    if "branches" in tiers:
        rows = []
        for w in omega_grid:
            try:
                for idx, br in enumerate(branch_solutions(p, f0, w - p.omega_b)):
                    rows.append(
                        _row(
                            w,
                            "branches",
                            idx,
                            br.x,
                            SemiState(b=br.b, q=br.q, n_a=br.n_a),
                            br.stability.value,
                        )
                    )
            except ModelError as exc:
                rows.append({"omega": float(w), "tier": "branches", "error": str(exc)})
        tables["branches"] = rows

    if "master" in tiers:
        if fock is None:
            raise ModelError("master tier requires a Fock truncation")
        from . import quantum  # deferred to keep the analytic path dependency-light

        kwargs = dict(steady_kwargs or {})
        points = [
            (p, DriveParams(f0=f0, omega=float(w)), fock, kwargs) for w in omega_grid
        ]
        if workers > 1:
            import concurrent.futures

            with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_master_point, points))
        else:
            results = [_master_point(pt) for pt in points]
        rows = []
        for w, res in zip(omega_grid, results):
            if isinstance(res, str):
                rows.append({"omega": float(w), "tier": "master", "error": res})
            else:
                rows.append(_row(w, "master", 0, 1.0 + 2.0 * res.n_a, res))
        tables["master"] = rows
    return tables


def _master_point(point):
    p, drive, fock, kwargs = point
    from . import quantum
    from .model import build_liouvillian

    try:
        liou = build_liouvillian(p, drive, fock)
        state = quantum.steady_state(liou, fock, **kwargs)
        obs = quantum.measure(state)
        return SemiState(b=obs.b_amp, q=obs.q_amp, n_a=obs.n_a)
    except Exception as exc:  # per-point failure, reported in the table
        return f"{type(exc).__name__}: {exc}"


def _row(omega, tier, branch_index, x, s: SemiState, stability: str = "") -> dict:
    return {
        "omega": float(omega),
        "tier": tier,
        "branch_index": int(branch_index),
        "x": float(x),
        "n_a": float(s.n_a),
        "abs_b2": float(abs(s.b) ** 2),
        "Re_b": float(s.b.real),
        "Im_b": float(s.b.imag),
        "Re_q": float(s.q.real),
        "Im_q": float(s.q.imag),
        "stability": stability,
    }
