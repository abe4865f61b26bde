"""Density-matrix propagation, stationary states, and observable extraction.

Evolution uses an adaptive embedded Runge-Kutta pair acting on the vectorized
density matrix through the matrix-free generator.  Stationary states come
either from long-time evolution with a settling check or from the null space
of the sparse vectorized generator with the trace condition imposed.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .model import (
    DriveParams,
    FockConfig,
    Frame,
    Liouvillian,
    ModelError,
    QuantumState,
    SystemParams,
    build_liouvillian,
    make_ladder_ops,
    number_diagonals,
)

__all__ = [
    "NumericalError",
    "Observables",
    "Trajectory",
    "LongTimeEvolution",
    "NullSpace",
    "measure",
    "evolve",
    "steady_state",
    "convergence_report",
    "ConvergenceReport",
]

#: product |n_a * b| (or |q* b|) below which a normalized cumulant is undefined
CUMULANT_DENOM_FLOOR = 1e-12


class NumericalError(RuntimeError):
    """Integration or linear-algebra failure with diagnostic context."""


@dataclass(frozen=True)
class Observables:
    """Single-time expectation values used throughout the analysis."""

    n_a: float
    n_b: float
    b_amp: complex
    q_amp: complex
    a_amp: complex
    corr_nab: complex
    corr_qdagb: complex

    def cumulant_nab(self) -> complex | None:
        """Normalized field-mirror cumulant <n_a b>/(n_a b) - 1, or None when
        the denominator is numerically zero (e.g. undriven below threshold)."""
        denom = self.n_a * self.b_amp
        if abs(denom) < CUMULANT_DENOM_FLOOR:
            return None
        return self.corr_nab / denom - 1.0

    def cumulant_qdagb(self) -> complex | None:
        """Normalized pair-mirror cumulant <a'a' b>/(q* b) - 1, or None when
        the denominator is numerically zero."""
        denom = self.q_amp.conjugate() * self.b_amp
        if abs(denom) < CUMULANT_DENOM_FLOOR:
            return None
        return self.corr_qdagb / denom - 1.0


class _Measurer:
    """Precomputed operators for fast repeated expectation values."""

    def __init__(self, config: FockConfig):
        ops = make_ladder_ops(config)
        self.na_diag, self.nb_diag = number_diagonals(config)
        self.a = ops["a"]
        self.b = ops["b"]
        self.q = (ops["a"] @ ops["a"]).tocsr()
        self.nab = (sp.diags(self.na_diag.astype(complex)) @ ops["b"]).tocsr()
        self.qdagb = (self.q.conj().T @ ops["b"]).tocsr()

    @staticmethod
    def _expect(op: sp.csr_matrix, rho: np.ndarray) -> complex:
        # Tr(op rho) via the sparse product's diagonal
        return complex((op @ rho).diagonal().sum())

    def observables(self, rho: np.ndarray) -> Observables:
        diag = np.real(np.diag(rho))
        return Observables(
            n_a=float(self.na_diag @ diag),
            n_b=float(self.nb_diag @ diag),
            b_amp=self._expect(self.b, rho),
            q_amp=self._expect(self.q, rho),
            a_amp=self._expect(self.a, rho),
            corr_nab=self._expect(self.nab, rho),
            corr_qdagb=self._expect(self.qdagb, rho),
        )


_MEASURER_CACHE: dict[tuple[int, int], _Measurer] = {}


def _measurer(config: FockConfig) -> _Measurer:
    key = (config.n_cav, config.n_mech)
    if key not in _MEASURER_CACHE:
        _MEASURER_CACHE[key] = _Measurer(config)
    return _MEASURER_CACHE[key]


def measure(state: QuantumState) -> Observables:
    """All tracked expectation values of a state, computed at its truncation."""
    return _measurer(state.config).observables(state.rho)


@dataclass
class Trajectory:
    """Observables sampled on a strictly increasing time grid."""

    times: np.ndarray
    records: list[Observables]
    final_state: QuantumState
    trace_drift: float = 0.0
    hermiticity_drift: float = 0.0
    min_eigenvalue: float = 0.0

    def field(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def evolve(
    liou: Liouvillian,
    rho0: QuantumState,
    times,
    tol: float = 1e-9,
    check_invariants: bool = True,
) -> Trajectory:
    """Integrate d rho/dt = L rho on the output grid.

    Per-step error is controlled at `tol` by the adaptive pair; trace drift is
    reported on the trajectory and never corrected.  Invariant violations
    beyond 100*tol abort with a diagnostic.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 2 or np.any(np.diff(times) <= 0):
        raise ModelError("times must be a strictly increasing grid")
    if times[0] != 0.0:
        raise ModelError("trajectory grids start at t = 0")
    rho0.validate()
    d = liou.dim
    if rho0.config.dim != d:
        raise ModelError("state and generator truncations differ")

    def rhs(t, y):
        rho = y.reshape(d, d)
        # project out anti-Hermitian roundoff; the flow preserves Hermiticity
        rho = 0.5 * (rho + rho.conj().T)
        return liou.apply(rho).reshape(-1)

    sol = solve_ivp(
        rhs,
        (times[0], times[-1]),
        rho0.rho.reshape(-1),
        t_eval=times,
        method="DOP853",
        rtol=tol,
        atol=tol * 1e-2,
    )
    if not sol.success:
        raise NumericalError(f"density-matrix integration failed: {sol.message}")

    meas = _measurer(rho0.config)
    records = []
    trace_drift = 0.0
    herm_drift = 0.0
    min_eig = np.inf
    for k in range(sol.y.shape[1]):
        rho = sol.y[:, k].reshape(d, d)
        records.append(meas.observables(rho))
        if check_invariants:
            trace_drift = max(trace_drift, abs(np.trace(rho) - 1.0))
            herm_drift = max(herm_drift, float(np.abs(rho - rho.conj().T).max()))
            eig_min = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
            min_eig = min(min_eig, eig_min)
            guard = 100.0 * tol
            if trace_drift > guard or herm_drift > guard or eig_min < -guard:
                raise NumericalError(
                    f"invariant violation at t = {times[k]:.6g}: "
                    f"trace drift {trace_drift:.2e}, hermiticity {herm_drift:.2e}, "
                    f"min eigenvalue {eig_min:.2e} (guard {guard:.1e})"
                )
    final = QuantumState(sol.y[:, -1].reshape(d, d), rho0.config, rho0.frame)
    return Trajectory(
        times=times,
        records=records,
        final_state=final,
        trace_drift=float(trace_drift),
        hermiticity_drift=float(herm_drift),
        min_eigenvalue=float(min_eig if np.isfinite(min_eig) else 0.0),
    )


@dataclass(frozen=True)
class LongTimeEvolution:
    """Relax toward stationarity by integrating in chunks until the generator
    residual drops below settle_tol."""

    t_max: float | None = None
    settle_tol: float = 1e-9
    tol: float = 1e-10


@dataclass(frozen=True)
class NullSpace:
    """Solve L rho = 0 with Tr rho = 1 on the sparse vectorized generator.

    Allowed only for total dimension <= 1024.  Uniqueness of the stationary
    state is checked through the two smallest-magnitude eigenvalues whenever
    the vectorized dimension is at most `uniqueness_dim_max` (the check is
    expensive beyond that and is skipped with a note).
    """

    settle_tol: float = 1e-9
    uniqueness_dim_max: int = 4096
    direct_dim_max: int = 4096  # above this, ILU-preconditioned LGMRES first


def steady_state(
    liou: Liouvillian,
    config: FockConfig,
    strategy: LongTimeEvolution | NullSpace | None = None,
    p: SystemParams | None = None,
) -> QuantumState:
    """Stationary state of the generator under the chosen strategy.

    Default strategy: LongTimeEvolution with settle tolerance 1e-9 and
    t_max = 50 / (slowest loss rate inferred from the collapse terms).
    """
    if strategy is None:
        strategy = LongTimeEvolution()
    if isinstance(strategy, NullSpace):
        if config.dim > 1024:
            raise ModelError("null-space strategy restricted to total dimension <= 1024")
        return _steady_null_space(liou, config, strategy)
    return _steady_long_time(liou, config, strategy, p)


def _steady_long_time(
    liou: Liouvillian, config: FockConfig, strategy: LongTimeEvolution, p: SystemParams | None
) -> QuantumState:
    if strategy.t_max is not None:
        t_max = strategy.t_max
    elif p is not None:
        t_max = 50.0 / min(p.gamma_a, p.gamma_b)
    else:
        rates = [g for g, _ in liou.collapse if g > 0]
        if not rates:
            raise ModelError("cannot infer t_max without loss rates; pass t_max")
        t_max = 50.0 / min(rates)
    d = liou.dim
    rho = QuantumState.vacuum(config).rho

    def rhs(t, y):
        m = y.reshape(d, d)
        m = 0.5 * (m + m.conj().T)
        return liou.apply(m).reshape(-1)

    chunk = t_max / 10.0
    t_done = 0.0
    while t_done < t_max + 1e-12:
        sol = solve_ivp(
            rhs,
            (0.0, chunk),
            rho.reshape(-1),
            method="DOP853",
            rtol=strategy.tol,
            atol=strategy.tol * 1e-2,
        )
        if not sol.success:
            raise NumericalError(f"steady-state relaxation failed: {sol.message}")
        rho = sol.y[:, -1].reshape(d, d)
        rho = 0.5 * (rho + rho.conj().T)
        t_done += chunk
        if liou.residual_norm(rho) < strategy.settle_tol:
            break
    resid = liou.residual_norm(rho)
    if resid >= strategy.settle_tol:
        raise NumericalError(
            f"stationary state not reached within t_max = {t_max:.3g}: "
            f"residual {resid:.2e} >= {strategy.settle_tol:.1e}"
        )
    rho = rho / np.trace(rho).real
    return QuantumState(rho, config, Frame.ROTATING_AT_DRIVE)


def _steady_null_space(liou: Liouvillian, config: FockConfig, strategy: NullSpace) -> QuantumState:
    d = liou.dim
    n = d * d
    lmat = liou.matrix().tocoo()
    # replace the first row (a redundant one: the rows obey tr . L = 0)
    # by the trace functional, keeping the system sparse
    keep = lmat.row != 0
    rows = np.concatenate([lmat.row[keep], np.zeros(d, dtype=lmat.row.dtype)])
    cols = np.concatenate([lmat.col[keep], (np.arange(d) * (d + 1)).astype(lmat.col.dtype)])
    data = np.concatenate([lmat.data[keep], np.ones(d, dtype=complex)])
    bordered = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsc()
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = 1.0

    vec = None
    if n > strategy.direct_dim_max:
        try:
            ilu = spla.spilu(bordered, drop_tol=1e-4, fill_factor=10)
            precond = spla.LinearOperator((n, n), matvec=ilu.solve, dtype=complex)
            sol, info = spla.lgmres(bordered, rhs, M=precond, rtol=1e-12, atol=0.0, maxiter=300)
            if info == 0:
                vec = sol
        except RuntimeError:
            vec = None
    if vec is None:
        vec = spla.splu(bordered).solve(rhs)

    rho = vec.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    resid = liou.residual_norm(rho)
    if resid >= strategy.settle_tol:
        raise NumericalError(f"null-space residual {resid:.2e} >= {strategy.settle_tol:.1e}")

    if n <= strategy.uniqueness_dim_max:
        vals = spla.eigs(
            liou.matrix().tocsc(), k=2, sigma=1e-12, which="LM", return_eigenvectors=False
        )
        small = np.sort(np.abs(vals))
        if small[1] < 1e-10:
            raise NumericalError(
                f"stationary subspace is degenerate (|lambda_1| = {small[1]:.2e}); "
                "a symmetry splits the null space"
            )
    return QuantumState(rho, config, Frame.ROTATING_AT_DRIVE)


@dataclass
class ConvergenceReport:
    """Per-observable relative changes across a ladder of truncations."""

    rungs: list[FockConfig]
    changes: list[dict[str, float]]  # len(rungs) - 1 entries
    max_transient_n_a: list[float]
    passed: bool

    OBSERVABLE_NAMES = ("n_a", "n_b", "abs_b", "abs_q")


def convergence_report(
    p: SystemParams,
    d: DriveParams,
    base: FockConfig,
    ladder,
    b0: complex = 2.0,
    t_final: float | None = None,
    n_times: int = 81,
    tol: float = 1e-9,
    threshold: float = 1e-3,
) -> ConvergenceReport:
    """Truncation study for the standard protocol (cavity vacuum, mirror
    displaced by b0, drive per `d`): relative sup-norm change of each tracked
    observable between successive cutoffs.  Passes when every change on the
    final rung is below `threshold`.
    """
    rungs = [base] + list(ladder)
    for lo, hi in zip(rungs, rungs[1:]):
        if hi.n_cav < lo.n_cav or hi.n_mech < lo.n_mech or hi.dim <= lo.dim:
            raise ModelError("ladder must increase the truncation at every step")
    if t_final is None:
        t_final = 5.0 / p.gamma_1
    times = np.linspace(0.0, t_final, n_times)

    series = []
    max_na = []
    for cfg in rungs:
        liou = build_liouvillian(p, d, cfg)
        rho0 = QuantumState.coherent(cfg, 0.0, b0)
        traj = evolve(liou, rho0, times, tol=tol)
        data = {
            "n_a": traj.field("n_a"),
            "n_b": traj.field("n_b"),
            "abs_b": np.abs(traj.field("b_amp")),
            "abs_q": np.abs(traj.field("q_amp")),
        }
        series.append(data)
        max_na.append(float(data["n_a"].max()))

    changes = []
    for lo, hi in zip(series, series[1:]):
        entry = {}
        for name in ConvergenceReport.OBSERVABLE_NAMES:
            scale = float(np.abs(hi[name]).max())
            diff = float(np.abs(hi[name] - lo[name]).max())
            entry[name] = diff / scale if scale > 0 else diff
        changes.append(entry)
    passed = all(v < threshold for v in changes[-1].values()) if changes else True
    return ConvergenceReport(rungs=rungs, changes=changes, max_transient_n_a=max_na, passed=passed)
