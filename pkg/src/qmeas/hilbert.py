"""Finite-dimensional complex linear algebra and core quantum types.

Everything here is dense and immutable: operators and states wrap read-only
numpy arrays and all operations are pure functions, so values can be shared
freely across threads and worker processes. Target dimensions are small
(2-64); no sparse storage is provided. Natural units with hbar = 1 are used
throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm as _scipy_expm

from .errors import DimensionMismatchError, ValidationError

HERMITICITY_ATOL = 1e-12
TRACE_ATOL = 1e-10
POSITIVITY_ATOL = 1e-9
NORM_ATOL = 1e-10


def _as_complex_matrix(entries, name: str) -> np.ndarray:
    m = np.asarray(entries, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {m.shape}")
    return m


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HermitianOperator:
    """Dense complex Hermitian matrix (Hamiltonians, measured observables)."""

    entries: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        m = _as_complex_matrix(self.entries, "HermitianOperator")
        if m.shape[0] < 2:
            raise ValidationError(f"operator dimension must be >= 2, got {m.shape[0]}")
        defect = np.max(np.abs(m - m.conj().T))
        if defect > HERMITICITY_ATOL:
            i, j = np.unravel_index(
                np.argmax(np.abs(m - m.conj().T)), m.shape
            )
            raise ValidationError(
                f"matrix is not Hermitian: entry ({i},{j})={m[i, j]:.6g} does not "
                f"conjugate-match ({j},{i})={m[j, i]:.6g} (defect {defect:.3g})"
            )
        object.__setattr__(self, "entries", _frozen(0.5 * (m + m.conj().T)))
        object.__setattr__(self, "dim", m.shape[0])

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (ascending) and orthonormal eigenvector columns."""
        return np.linalg.eigh(self.entries)

    def spectral_norm(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(self.entries))))


@dataclass(frozen=True)
class NonHermitianOperator:
    """Dense complex matrix with no symmetry constraint (effective complex
    Hamiltonians, measurement-conditioned propagators)."""

    entries: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        m = _as_complex_matrix(self.entries, "NonHermitianOperator")
        if m.shape[0] < 2:
            raise ValidationError(f"operator dimension must be >= 2, got {m.shape[0]}")
        object.__setattr__(self, "entries", _frozen(m))
        object.__setattr__(self, "dim", m.shape[0])


@dataclass(frozen=True)
class QuantumState:
    """Pure state as a unit complex amplitude vector plus a log-norm.

    The physical (unnormalized) vector is ``exp(log_norm) * amplitudes``.
    Keeping the norm in log form lets strongly damped monitored evolutions
    run for long times without underflow; ordinary normalized states carry
    ``log_norm = 0``.
    """

    amplitudes: np.ndarray
    log_norm: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex)
        if v.ndim != 1 or v.size < 2:
            raise ValidationError(f"state must be a vector of length >= 2, got shape {v.shape}")
        n = float(np.linalg.norm(v))
        if abs(n - 1.0) > NORM_ATOL:
            raise ValidationError(f"stored amplitudes must be normalized: |norm - 1| = {abs(n - 1.0):.3g}")
        if not np.isfinite(self.log_norm):
            raise ValidationError("log_norm must be finite")
        object.__setattr__(self, "amplitudes", _frozen(v))
        object.__setattr__(self, "log_norm", float(self.log_norm))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @staticmethod
    def from_vector(v, log_norm: float = 0.0) -> "QuantumState":
        """Normalize an arbitrary nonzero vector, folding its norm into log_norm."""
        v = np.asarray(v, dtype=complex)
        n = float(np.linalg.norm(v))
        if n == 0.0 or not np.isfinite(n):
            raise ValidationError("cannot normalize a zero or non-finite vector")
        return QuantumState(v / n, log_norm + np.log(n))

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True)
class DensityMatrix:
    """Dense positive semidefinite unit-trace matrix."""

    entries: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        m = _as_complex_matrix(self.entries, "DensityMatrix")
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_ATOL:
            raise ValidationError("density matrix must be Hermitian to 1e-12")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValidationError(f"density matrix trace must be 1: got {tr:.12g}")
        lo = float(np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T))))
        if lo < -POSITIVITY_ATOL:
            raise ValidationError(f"density matrix has negative eigenvalue {lo:.3g}")
        object.__setattr__(self, "entries", _frozen(0.5 * (m + m.conj().T)))
        object.__setattr__(self, "dim", m.shape[0])

    @staticmethod
    def from_state(state: QuantumState) -> "DensityMatrix":
        return DensityMatrix(state.projector())

    @staticmethod
    def maximally_mixed(dim: int) -> "DensityMatrix":
        return DensityMatrix(np.eye(dim) / dim)


def _check_same_dim(a, b):
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")


def expectation(state: QuantumState, obs: HermitianOperator) -> float:
    """Expectation value <psi|A|psi> of the normalized stored amplitudes.

    The result must be real up to roundoff; an imaginary part above 1e-9
    indicates a non-Hermitian operand and raises.
    """
    _check_same_dim(state, obs)
    val = complex(np.vdot(state.amplitudes, obs.entries @ state.amplitudes))
    if abs(val.imag) > 1e-9:
        raise ValidationError(f"expectation value has imaginary part {val.imag:.3g}; operator not Hermitian?")
    return val.real


def matrix_exponential(op: NonHermitianOperator, t: float = 1.0) -> NonHermitianOperator:
    """exp(M * t) by Pade approximation with scaling and squaring.

    Backed by scipy's expm; relative accuracy is ~1e-13 for moderate
    ||M * t|| and comfortably within 1e-10 for ||M * t|| <= 10.
    """
    if not np.all(np.isfinite(op.entries)):
        raise ValidationError("matrix exponential requires finite entries")
    if not np.isfinite(t):
        raise ValidationError("time argument must be finite")
    return NonHermitianOperator(_scipy_expm(op.entries * t))


def trace_distance(r1: DensityMatrix, r2: DensityMatrix) -> float:
    """Half the sum of absolute eigenvalues of r1 - r2; lies in [0, 1]."""
    _check_same_dim(r1, r2)
    diff = r1.entries - r2.entries
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def double_commutator(a: HermitianOperator, rho: DensityMatrix) -> np.ndarray:
    """[A, [A, rho]] = A^2 rho - 2 A rho A + rho A^2 (Hermitian, traceless)."""
    _check_same_dim(a, rho)
    am = a.entries
    rm = rho.entries
    return am @ (am @ rm) - 2.0 * (am @ rm @ am) + (rm @ am) @ am


# Two-level building blocks used across tests and presets.

def pauli_x() -> HermitianOperator:
    return HermitianOperator(np.array([[0.0, 1.0], [1.0, 0.0]]))


def pauli_y() -> HermitianOperator:
    return HermitianOperator(np.array([[0.0, -1.0j], [1.0j, 0.0]]))


def pauli_z() -> HermitianOperator:
    return HermitianOperator(np.array([[1.0, 0.0], [0.0, -1.0]]))


def basis_state(dim: int, index: int) -> QuantumState:
    if not 0 <= index < dim:
        raise ValidationError(f"basis index {index} out of range for dim {dim}")
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return QuantumState(v)


def plus_state(dim: int = 2) -> QuantumState:
    """Equal-amplitude superposition of all basis states."""
    return QuantumState(np.full(dim, 1.0 / np.sqrt(dim), dtype=complex))
