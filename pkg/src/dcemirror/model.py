"""Core model layer: parameter sets, truncated Fock-space operators, the system
Hamiltonian and its Lindblad generator.

Unit convention: every rate and frequency is a plain angular frequency expressed
in one user-chosen unit (hbar = 1 internally).  Bundled configurations use
gamma_a = 1 as the unit.  The drive amplitude is taken real and non-negative;
any drive phase can be absorbed into a global phase rotation of the mirror mode.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

__all__ = [
    "DEFAULT_DIMENSION_CEILING",
    "SPARSE_REQUIRED_ABOVE",
    "CONFIG_KEYS",
    "ModelError",
    "DimensionError",
    "FrameError",
    "Frame",
    "SystemParams",
    "DriveParams",
    "FockConfig",
    "QuantumState",
    "make_ladder_ops",
    "build_hamiltonian",
    "build_liouvillian",
    "Liouvillian",
    "params_to_dict",
    "params_from_dict",
    "load_params",
    "save_params",
]

DEFAULT_DIMENSION_CEILING = 4096
# Above this total Hilbert dimension a dense vectorized generator would exceed
# the memory budget; only the sparse/matrix-free paths are allowed.
SPARSE_REQUIRED_ABOVE = 1024


class ModelError(ValueError):
    """Invalid model parameters or states."""


class DimensionError(ModelError):
    """Requested truncation exceeds the configured dimension ceiling."""


class FrameError(ModelError):
    """Operation requested in an unsupported reference frame."""


class Frame(enum.Enum):
    LAB = "lab"
    ROTATING_AT_DRIVE = "rotating_at_drive"


@dataclass(frozen=True)
class SystemParams:
    """The five rates of the model.

    omega_a : cavity angular frequency
    omega_b : mirror angular frequency
    omega_c : pair-conversion (optomechanical) coupling rate
    gamma_a : cavity loss rate
    gamma_b : mechanical loss rate
    """

    omega_a: float
    omega_b: float
    omega_c: float
    gamma_a: float
    gamma_b: float

    def __post_init__(self):
        for name in ("omega_a", "omega_b", "omega_c", "gamma_a", "gamma_b"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0.0:
                raise ModelError(f"{name} must be strictly positive and finite, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def gamma_0(self) -> float:
        """Geometric mean loss rate, gamma_0 = sqrt(gamma_a*gamma_b/2)."""
        return math.sqrt(self.gamma_a * self.gamma_b / 2.0)

    @property
    def gamma_1(self) -> float:
        """Averaged dissipation rate, gamma_1 = gamma_a + gamma_b/2."""
        return self.gamma_a + self.gamma_b / 2.0

    @property
    def mirror_cavity_detuning(self) -> float:
        """omega_b - 2*omega_a; zero at the two-photon resonance."""
        return self.omega_b - 2.0 * self.omega_a

    @property
    def weak_coupling(self) -> bool:
        """Diagnostic flag: coupling well below both mode frequencies.

        Never blocks any computation.
        """
        return (self.omega_c / self.omega_a < 0.1) and (self.omega_c / self.omega_b < 0.1)

    def is_resonant(self, rtol: float = 1e-9) -> bool:
        return abs(self.mirror_cavity_detuning) <= rtol * self.omega_b


@dataclass(frozen=True)
class DriveParams:
    """Monochromatic mechanical drive: amplitude f0 >= 0 (real, rate units) and
    angular frequency omega."""

    f0: float
    omega: float

    def __post_init__(self):
        if not math.isfinite(self.f0) or self.f0 < 0.0:
            raise ModelError(f"f0 must be real non-negative, got {self.f0!r}")
        if not math.isfinite(self.omega):
            raise ModelError(f"omega must be finite, got {self.omega!r}")

    def delta_a(self, p: SystemParams) -> float:
        """Cavity detuning omega/2 - omega_a."""
        return self.omega / 2.0 - p.omega_a

    def delta_b(self, p: SystemParams) -> float:
        """Mirror detuning omega - omega_b."""
        return self.omega - p.omega_b

    def delta_q(self, p: SystemParams) -> float:
        """Pair detuning omega - 2*omega_a."""
        return self.omega - 2.0 * p.omega_a


def ringdown_drive(p: SystemParams) -> DriveParams:
    """Drive bookkeeping for free evolution: zero amplitude, frame co-rotating
    with the mirror (omega = omega_b).

    At two-photon resonance this removes all fast phases, leaving only the
    slow envelope dynamics set by the loss rates and omega_c.
    """
    return DriveParams(f0=0.0, omega=p.omega_b)


@dataclass(frozen=True)
class FockConfig:
    """Truncation of the two-mode Fock space.

    n_cav / n_mech are the highest retained Fock levels, so the factor
    dimensions are n_cav+1 and n_mech+1.
    """

    n_cav: int
    n_mech: int
    ceiling: int = DEFAULT_DIMENSION_CEILING

    def __post_init__(self):
        if self.n_cav < 1 or self.n_mech < 1:
            raise ModelError("n_cav and n_mech must be >= 1")
        if self.dim > self.ceiling:
            raise DimensionError(
                f"total dimension {self.dim} exceeds ceiling {self.ceiling}"
            )

    @property
    def dim_cav(self) -> int:
        return self.n_cav + 1

    @property
    def dim_mech(self) -> int:
        return self.n_mech + 1

    @property
    def dim(self) -> int:
        return self.dim_cav * self.dim_mech

    def requires_sparse(self) -> bool:
        return self.dim > SPARSE_REQUIRED_ABOVE


def _ladder(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def make_ladder_ops(config: FockConfig) -> dict[str, sp.csr_matrix]:
    """Annihilation/creation operators on the tensor-product space.

    Returns {"a", "a_dag", "b", "b_dag"} as sparse matrices of full dimension
    (cavity factor first, mirror second).
    """
    a1 = sp.csr_matrix(_ladder(config.dim_cav))
    b1 = sp.csr_matrix(_ladder(config.dim_mech))
    ic = sp.identity(config.dim_cav, format="csr", dtype=complex)
    im = sp.identity(config.dim_mech, format="csr", dtype=complex)
    a = sp.kron(a1, im, format="csr")
    b = sp.kron(ic, b1, format="csr")
    return {"a": a, "a_dag": a.conj().T.tocsr(), "b": b, "b_dag": b.conj().T.tocsr()}


def number_diagonals(config: FockConfig) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of the cavity and mirror number operators."""
    na = np.kron(np.arange(config.dim_cav, dtype=float), np.ones(config.dim_mech))
    nb = np.kron(np.ones(config.dim_cav), np.arange(config.dim_mech, dtype=float))
    return na, nb


@dataclass
class QuantumState:
    """Density matrix on the truncated two-mode space, tagged with its frame."""

    rho: np.ndarray
    config: FockConfig
    frame: Frame = Frame.ROTATING_AT_DRIVE

    HERMITICITY_TOL = 1e-12
    TRACE_TOL = 1e-10
    POSITIVITY_TOL = 1e-10

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (self.config.dim, self.config.dim):
            raise ModelError(
                f"rho shape {self.rho.shape} does not match dimension {self.config.dim}"
            )

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.rho - self.rho.conj().T).max())

    def trace_defect(self) -> float:
        return float(abs(np.trace(self.rho) - 1.0))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.rho + self.rho.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def validate(
        self,
        hermiticity_tol: float | None = None,
        trace_tol: float | None = None,
        positivity_tol: float | None = None,
    ) -> None:
        """Raise ModelError if the state violates its invariants."""
        htol = self.HERMITICITY_TOL if hermiticity_tol is None else hermiticity_tol
        ttol = self.TRACE_TOL if trace_tol is None else trace_tol
        ptol = self.POSITIVITY_TOL if positivity_tol is None else positivity_tol
        h = self.hermiticity_defect()
        if h >= htol:
            raise ModelError(f"state not Hermitian: defect {h:.3e} >= {htol:.1e}")
        t = self.trace_defect()
        if t >= ttol:
            raise ModelError(f"state trace defect {t:.3e} >= {ttol:.1e}")
        m = self.min_eigenvalue()
        if m <= -ptol:
            raise ModelError(f"state not positive: min eigenvalue {m:.3e} <= -{ptol:.1e}")

    @classmethod
    def vacuum(cls, config: FockConfig, frame: Frame = Frame.ROTATING_AT_DRIVE) -> "QuantumState":
        rho = np.zeros((config.dim, config.dim), dtype=complex)
        rho[0, 0] = 1.0
        return cls(rho, config, frame)

    @classmethod
    def coherent(
        cls,
        config: FockConfig,
        alpha_cav: complex = 0.0,
        alpha_mech: complex = 0.0,
        frame: Frame = Frame.ROTATING_AT_DRIVE,
    ) -> "QuantumState":
        """Product of truncated coherent states (renormalized after truncation)."""
        psi = np.kron(
            _coherent_vector(alpha_cav, config.dim_cav),
            _coherent_vector(alpha_mech, config.dim_mech),
        )
        rho = np.outer(psi, psi.conj())
        return cls(rho, config, frame)


def _coherent_vector(alpha: complex, dim: int) -> np.ndarray:
    n = np.arange(dim)
    log_fact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, dim)))))
    if alpha == 0:
        vec = np.zeros(dim, dtype=complex)
        vec[0] = 1.0
        return vec
    log_amp = n * np.log(complex(alpha)) - 0.5 * log_fact
    vec = np.exp(log_amp)
    return vec / np.linalg.norm(vec)


def build_hamiltonian(
    p: SystemParams,
    d: DriveParams,
    frame: Frame,
    config: FockConfig,
) -> sp.csr_matrix:
    """System Hamiltonian on the truncated space (hbar = 1).

    Lab frame (only for f0 = 0, anything else is time dependent):
        H = omega_a n_a + omega_b n_b + omega_c (b' a a + b a' a')
    Frame rotating at the drive (a -> a e^{-i omega t/2}, b -> b e^{-i omega t}):
        H = -Delta_a n_a - Delta_b n_b + omega_c (b' a a + b a' a') - f0 (b + b')
    with Delta_a = omega/2 - omega_a and Delta_b = omega - omega_b.
    """
    ops = make_ladder_ops(config)
    a, a_dag, b, b_dag = ops["a"], ops["a_dag"], ops["b"], ops["b_dag"]
    na_diag, nb_diag = number_diagonals(config)
    coupling = p.omega_c * (b_dag @ (a @ a) + b @ (a_dag @ a_dag))
    if frame is Frame.LAB:
        if d.f0 != 0.0:
            raise FrameError("lab-frame Hamiltonian is time dependent for f0 > 0")
        diag = p.omega_a * na_diag + p.omega_b * nb_diag
        h = sp.diags(diag.astype(complex)) + coupling
    elif frame is Frame.ROTATING_AT_DRIVE:
        diag = -d.delta_a(p) * na_diag - d.delta_b(p) * nb_diag
        h = sp.diags(diag.astype(complex)) + coupling
        if d.f0 != 0.0:
            h = h - d.f0 * (b + b_dag)
    else:  # pragma: no cover
        raise FrameError(f"unknown frame {frame!r}")
    return h.tocsr()


class Liouvillian:
    """Generator of the dissipative evolution, rho -> d rho/dt.

    Provides both a matrix-free action (`apply`) and an explicit sparse
    matrix over the row-major vectorized density matrix (`matrix`); the two
    agree to machine precision.
    """

    def __init__(
        self,
        hamiltonian: sp.spmatrix,
        collapse: Iterable[tuple[float, sp.spmatrix]],
        config: FockConfig,
    ):
        self.hamiltonian = sp.csr_matrix(hamiltonian)
        self.collapse = [(float(g), sp.csr_matrix(o)) for g, o in collapse]
        self.config = config
        self._dissipator_parts = [
            (g, o, o.conj().T.tocsr(), (o.conj().T @ o).tocsr()) for g, o in self.collapse
        ]
        self._matrix: sp.csr_matrix | None = None

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Matrix-free action; valid for arbitrary (not necessarily Hermitian) rho."""
        h = self.hamiltonian
        out = -1j * (h @ rho - rho @ h)
        for g, o, o_dag, odo in self._dissipator_parts:
            out += g * (o @ rho @ o_dag) - 0.5 * g * (odo @ rho + rho @ odo)
        return out

    def matrix(self) -> sp.csr_matrix:
        """Sparse superoperator over vec(rho) with row-major (C-order) stacking."""
        if self._matrix is None:
            d = self.dim
            ident = sp.identity(d, format="csr", dtype=complex)
            h = self.hamiltonian
            mat = -1j * (sp.kron(h, ident) - sp.kron(ident, h.T))
            for g, o, o_dag, odo in self._dissipator_parts:
                mat = mat + g * (
                    sp.kron(o, o.conj())
                    - 0.5 * sp.kron(odo, ident)
                    - 0.5 * sp.kron(ident, odo.T)
                )
            self._matrix = mat.tocsr()
        return self._matrix

    def residual_norm(self, rho: np.ndarray) -> float:
        """max |(L rho)_ij|, used as a stationarity measure."""
        return float(np.abs(self.apply(rho)).max())


def build_liouvillian(p: SystemParams, d: DriveParams, config: FockConfig) -> Liouvillian:
    """Lindblad generator in the frame rotating at the drive.

    Action on rho:  -i [H, rho] + sum_{o in {a, b}} (gamma_o/2)(2 o rho o' - o'o rho - rho o'o).
    """
    h = build_hamiltonian(p, d, Frame.ROTATING_AT_DRIVE, config)
    ops = make_ladder_ops(config)
    return Liouvillian(h, [(p.gamma_a, ops["a"]), (p.gamma_b, ops["b"])], config)


# --------------------------------------------------------------------------
# Flat parameter-set serialization (TOML or JSON).
# --------------------------------------------------------------------------

CONFIG_KEYS = (
    "omega_a",
    "omega_b",
    "omega_c",
    "gamma_a",
    "gamma_b",
    "f0",
    "omega_drive",
    "n_cav",
    "n_mech",
)


def params_to_dict(p: SystemParams, d: DriveParams, fock: FockConfig) -> dict:
    return {
        "omega_a": p.omega_a,
        "omega_b": p.omega_b,
        "omega_c": p.omega_c,
        "gamma_a": p.gamma_a,
        "gamma_b": p.gamma_b,
        "f0": d.f0,
        "omega_drive": d.omega,
        "n_cav": fock.n_cav,
        "n_mech": fock.n_mech,
    }


def params_from_dict(raw: Mapping) -> tuple[SystemParams, DriveParams, FockConfig]:
    missing = [k for k in CONFIG_KEYS if k not in raw]
    if missing:
        raise ModelError(f"missing parameter keys: {missing}")
    unknown = [k for k in raw if k not in CONFIG_KEYS]
    if unknown:
        raise ModelError(f"unknown parameter keys: {unknown}")
    p = SystemParams(
        omega_a=float(raw["omega_a"]),
        omega_b=float(raw["omega_b"]),
        omega_c=float(raw["omega_c"]),
        gamma_a=float(raw["gamma_a"]),
        gamma_b=float(raw["gamma_b"]),
    )
    d = DriveParams(f0=float(raw["f0"]), omega=float(raw["omega_drive"]))
    fock = FockConfig(n_cav=int(raw["n_cav"]), n_mech=int(raw["n_mech"]))
    return p, d, fock


def load_params(path: str | Path) -> tuple[SystemParams, DriveParams, FockConfig]:
    """Load a flat parameter file; the format is chosen by suffix (.toml/.json)."""
    path = Path(path)
    if path.suffix == ".toml":
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    elif path.suffix == ".json":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        raise ModelError(f"unsupported parameter file suffix: {path.suffix!r}")
    return params_from_dict(raw)


def save_params(path: str | Path, p: SystemParams, d: DriveParams, fock: FockConfig) -> None:
    path = Path(path)
    data = params_to_dict(p, d, fock)
    if path.suffix == ".toml":
        lines = []
        for key in CONFIG_KEYS:
            value = data[key]
            lines.append(f"{key} = {value!r}" if isinstance(value, int) else f"{key} = {value}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif path.suffix == ".json":
        path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    else:
        raise ModelError(f"unsupported parameter file suffix: {path.suffix!r}")
