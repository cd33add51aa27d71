"""Nonselective evolution: master equation for a continuously measured system.

For a single continuously monitored Hermitian observable A with resolution
constant kappa, the density matrix obeys

    d rho / dt = -i [H, rho] - (kappa/2) [A, [A, rho]]

(hbar = 1). The kappa/2 coefficient is the package-wide convention anchor:
the selective descriptions in :mod:`qmeas.chm` and :mod:`qmeas.sse` are
calibrated so that readout averaging reproduces exactly this equation.
Integration is fixed-step classical RK4 for reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, IntegrationError, ValidationError
from .hilbert import DensityMatrix, HermitianOperator, double_commutator
from .readout import TimeGrid

POSITIVITY_ABORT = -1e-6


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian H, monitored observable A and measurement resolution kappa.

    kappa has units 1/(A^2 * time); larger kappa means a sharper (faster)
    measurement.
    """

    H: HermitianOperator
    A: HermitianOperator
    kappa: float

    def __post_init__(self):
        if self.H.dim != self.A.dim:
            raise DimensionMismatchError(f"H dim {self.H.dim} != A dim {self.A.dim}")
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise ValidationError("kappa must be positive and finite")

    @property
    def dim(self) -> int:
        return self.H.dim


def lindblad_rhs(model: LindbladModel, rho: DensityMatrix) -> np.ndarray:
    """-i[H, rho] - (kappa/2) [A, [A, rho]]; Hermitian and traceless."""
    if model.dim != rho.dim:
        raise DimensionMismatchError(f"model dim {model.dim} != rho dim {rho.dim}")
    h = model.H.entries
    r = rho.entries
    return -1j * (h @ r - r @ h) - 0.5 * model.kappa * double_commutator(model.A, rho)


def _rhs_raw(h: np.ndarray, a: np.ndarray, kappa: float, r: np.ndarray) -> np.ndarray:
    dc = a @ (a @ r) - 2.0 * (a @ r @ a) + (r @ a) @ a
    return -1j * (h @ r - r @ h) - 0.5 * kappa * dc


def integrate_lindblad(
    model: LindbladModel,
    rho0: DensityMatrix,
    grid: TimeGrid,
    store_every: int = 1,
) -> list[DensityMatrix]:
    """Fixed-step RK4 integration of the master equation over the grid.

    Returns the state at t0 and after every ``store_every``-th step (the final
    state is always included). Each stored state is re-symmetrized and
    trace-renormalized; the trace drift before renormalization is checked to
    stay below 1e-9 per step. An eigenvalue of rho below -1e-6 aborts with a
    step-size diagnosis instead of silently projecting back.
    """
    if model.dim != rho0.dim:
        raise DimensionMismatchError(f"model dim {model.dim} != rho0 dim {rho0.dim}")
    if store_every < 1:
        raise ValidationError("store_every must be >= 1")
    h = model.H.entries
    a = model.A.entries
    kappa = model.kappa
    dt = grid.dt
    rho = rho0.entries.copy()
    out = [rho0]
    for k in range(grid.n_steps):
        k1 = _rhs_raw(h, a, kappa, rho)
        k2 = _rhs_raw(h, a, kappa, rho + 0.5 * dt * k1)
        k3 = _rhs_raw(h, a, kappa, rho + 0.5 * dt * k2)
        k4 = _rhs_raw(h, a, kappa, rho + (dt * k3))
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(rho)):
            raise IntegrationError(
                f"non-finite density matrix at step {k + 1}; dt={dt:.3g} is too "
                f"large for kappa={kappa:.3g} (RK4 unstable)"
            )
        drift = abs(complex(np.trace(rho)) - 1.0)
        if drift > 1e-9:
            raise IntegrationError(
                f"trace drift {drift:.3g} at step {k + 1} exceeds 1e-9; reduce dt"
            )
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real
        lo = float(np.min(np.linalg.eigvalsh(rho)))
        if lo < POSITIVITY_ABORT:
            raise IntegrationError(
                f"positivity violated at step {k + 1} (eigenvalue {lo:.3g} < {POSITIVITY_ABORT}); "
                f"dt={dt:.3g} is too large for the dissipation rate ~{kappa:.3g}*(spread of A)^2"
            )
        if (k + 1) % store_every == 0 or k + 1 == grid.n_steps:
            out.append(DensityMatrix(rho))
    return out


def kappa_from_brownian(eta: float, temperature: float) -> float:
    """Resolution constant 2 * eta * kT for quantum-diffusion decoherence by
    a thermal medium with damping coefficient eta (hbar = 1)."""
    if eta <= 0 or temperature <= 0:
        raise ValidationError("eta and temperature must be positive")
    return 2.0 * eta * temperature


def kappa_from_atoms(interaction_radius: float, relaxation_time: float) -> float:
    """Resolution constant 2 / (lambda^2 * tau) for position monitoring by
    surrounding atoms with interaction radius lambda and relaxation time tau."""
    if interaction_radius <= 0 or relaxation_time <= 0:
        raise ValidationError("interaction_radius and relaxation_time must be positive")
    return 2.0 / (interaction_radius**2 * relaxation_time)
