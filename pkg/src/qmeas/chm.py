"""Selective evolution conditioned on a measurement readout.

A monitored system with readout record a(t) evolves under the linear
non-Hermitian equation

    d psi / dt = [-i H - kappa (A - a(t))^2] psi      (hbar = 1)

whose solution is unnormalized: the squared final norm, weighted by the
per-step Gaussian reference measure of :mod:`qmeas.readout`, is the
probability density of the record. The same dynamics has a time-sliced
product form, one contraction factor exp(-kappa*(A-a_k)^2*dt) and one
unitary factor exp(-i*H*dt) per slice, which is the discrete chain of fuzzy
measurements interleaved with free evolution. Integrating the sliced density
matrix over all readouts recovers the nonselective master equation of
:mod:`qmeas.lindblad`; completeness of the readout family (generalized
unitarity) is checked by Gauss-Hermite quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm as _expm

from .errors import (
    DimensionMismatchError,
    IntegrationError,
    QuadratureError,
    ResolutionMismatchError,
    ValidationError,
)
from .hilbert import (
    DensityMatrix,
    HermitianOperator,
    NonHermitianOperator,
    QuantumState,
)
from .readout import (
    ReadoutDensity,
    ReadoutRecord,
    TimeGrid,
    constant_record,
    reference_log_weight,
)

RESOLUTION_GUARD = 0.5
SUBSTEP_TARGET = 0.05
DEFAULT_QUAD_ORDER = 40


@dataclass(frozen=True)
class MonitoringModel:
    """Hamiltonian H, monitored observable A and resolution constant kappa
    for the selective (readout-conditioned) description."""

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


@dataclass(frozen=True)
class PartialPropagator:
    """Non-unitary contraction mapping the initial state to the unnormalized
    state conditioned on a readout record. Singular values never exceed 1."""

    matrix: NonHermitianOperator
    record: ReadoutRecord

    def __post_init__(self):
        top = float(np.linalg.norm(self.matrix.entries, 2))
        if top > 1.0 + 1e-9:
            raise ValidationError(
                f"partial propagator must be a contraction: largest singular value {top:.12g}"
            )


def effective_hamiltonian(model: MonitoringModel, a: float) -> NonHermitianOperator:
    """H - i * kappa * (A - a)^2, the complex generator for readout value a."""
    if not np.isfinite(a):
        raise ValidationError("readout value must be finite")
    shifted = model.A.entries - a * np.eye(model.dim)
    return NonHermitianOperator(model.H.entries - 1j * model.kappa * (shifted @ shifted))


def _generator(model: MonitoringModel, a: float) -> np.ndarray:
    shifted = model.A.entries - a * np.eye(model.dim)
    return -1j * model.H.entries - model.kappa * (shifted @ shifted)


def _stiffness(model: MonitoringModel, a_max: float) -> float:
    return model.kappa * (model.A.spectral_norm() + a_max) ** 2 + model.H.spectral_norm()


def _check_resolution(model: MonitoringModel, record: ReadoutRecord):
    a_max = float(np.max(np.abs(record.values)))
    budget = model.kappa * (model.A.spectral_norm() + a_max) ** 2 * record.grid.dt
    if budget > RESOLUTION_GUARD:
        raise ResolutionMismatchError(
            f"kappa*(||A|| + |a|)^2*dt = {budget:.3g} exceeds {RESOLUTION_GUARD}; "
            "the record grid is too coarse for this measurement strength"
        )


def _rk4_matrix(gen: np.ndarray, m: np.ndarray, dt: float, n_sub: int) -> np.ndarray:
    h = dt / n_sub
    for _ in range(n_sub):
        k1 = gen @ m
        k2 = gen @ (m + 0.5 * h * k1)
        k3 = gen @ (m + 0.5 * h * k2)
        k4 = gen @ (m + h * k3)
        m = m + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return m


def propagate_chm(
    model: MonitoringModel, psi0: QuantumState, record: ReadoutRecord
) -> tuple[QuantumState, ReadoutDensity]:
    """Integrate the monitoring equation along a readout record.

    a(t) is held constant within each record slice and the linear ODE is
    advanced by RK4 (internally substepped so the per-substep damping
    exponent stays small). The state is renormalized after every slice with
    the norm folded into log_norm; the returned log-density is
    2*log_norm + reference_log_weight(record, kappa).
    """
    if model.dim != psi0.dim:
        raise DimensionMismatchError(f"model dim {model.dim} != state dim {psi0.dim}")
    _check_resolution(model, record)
    dt = record.grid.dt
    psi = psi0.amplitudes.copy()
    log_norm = psi0.log_norm
    for k, a in enumerate(record.values):
        gen = _generator(model, float(a))
        n_sub = max(1, int(np.ceil(_stiffness(model, abs(float(a))) * dt / SUBSTEP_TARGET)))
        psi = _rk4_matrix(gen, psi, dt, n_sub)
        n = float(np.linalg.norm(psi))
        if not np.isfinite(n) or n == 0.0:
            raise IntegrationError(f"state norm lost at record step {k + 1}")
        if n > 1.0 + 1e-6:
            raise IntegrationError(
                f"norm grew by {n - 1.0:.3g} in record step {k + 1}; integration unstable"
            )
        log_norm += np.log(n)
        psi = psi / n
    state = QuantumState(psi, log_norm)
    density = ReadoutDensity(2.0 * log_norm + reference_log_weight(record, model.kappa))
    return state, density


def propagate_chm_series(
    model: MonitoringModel, psi0: QuantumState, record: ReadoutRecord
) -> tuple[np.ndarray, np.ndarray]:
    """Like :func:`propagate_chm` but returning the full per-step history:
    (log_norms, amplitudes) arrays of shapes (n_steps+1,) and (n_steps+1, dim)."""
    if model.dim != psi0.dim:
        raise DimensionMismatchError(f"model dim {model.dim} != state dim {psi0.dim}")
    _check_resolution(model, record)
    dt = record.grid.dt
    n = record.grid.n_steps
    amps = np.empty((n + 1, model.dim), dtype=complex)
    logs = np.empty(n + 1)
    psi = psi0.amplitudes.copy()
    log_norm = psi0.log_norm
    amps[0] = psi
    logs[0] = log_norm
    for k, a in enumerate(record.values):
        gen = _generator(model, float(a))
        n_sub = max(1, int(np.ceil(_stiffness(model, abs(float(a))) * dt / SUBSTEP_TARGET)))
        psi = _rk4_matrix(gen, psi, dt, n_sub)
        nn = float(np.linalg.norm(psi))
        if not np.isfinite(nn) or nn == 0.0:
            raise IntegrationError(f"state norm lost at record step {k + 1}")
        if nn > 1.0 + 1e-6:
            raise IntegrationError(
                f"norm grew by {nn - 1.0:.3g} in record step {k + 1}; integration unstable"
            )
        log_norm += np.log(nn)
        psi = psi / nn
        amps[k + 1] = psi
        logs[k + 1] = log_norm
    return logs, amps


def ode_propagator(model: MonitoringModel, record: ReadoutRecord, substeps: int = 1) -> np.ndarray:
    """Propagator matrix of the monitoring ODE along a record, by the same
    per-slice RK4 scheme as :func:`propagate_chm` (no renormalization).

    ``substeps`` forces at least that many RK4 substeps per slice; it serves
    as the reference against which the sliced product form converges.
    """
    m = np.eye(model.dim, dtype=complex)
    dt = record.grid.dt
    for a in record.values:
        gen = _generator(model, float(a))
        auto = int(np.ceil(_stiffness(model, abs(float(a))) * dt / SUBSTEP_TARGET))
        m = _rk4_matrix(gen, m, dt, max(substeps, auto, 1))
    return m


def sliced_propagator(model: MonitoringModel, record: ReadoutRecord) -> PartialPropagator:
    """Time-sliced product form of the readout-conditioned propagator.

    Each slice contributes exp(-i*H*dt) * exp(-kappa*(A-a_k)^2*dt), the
    unitary factor acting after the measurement factor. For [H, A] = 0 the
    product equals the exact ODE propagator; otherwise it converges to it at
    first order in dt.
    """
    d = model.dim
    dt = record.grid.dt
    u = _expm(-1j * model.H.entries * dt)
    evals, q = model.A.eigh()
    prod = np.eye(d, dtype=complex)
    # measurement factor diagonalizes in the A eigenbasis; cache per distinct value
    cache: dict[float, np.ndarray] = {}
    for a in record.values:
        a = float(a)
        step = cache.get(a)
        if step is None:
            r = (q * np.exp(-model.kappa * (evals - a) ** 2 * dt)) @ q.conj().T
            step = u @ r
            cache[a] = step
        prod = step @ prod
    return PartialPropagator(NonHermitianOperator(prod), record)


def single_step_log_density(
    model: MonitoringModel, a: float, dt: float, psi0: QuantumState
) -> float:
    """Log readout density of a single constant-record slice, computed from
    the exact one-slice product operator.

    Integrated over a against the reference measure (which is already folded
    in) this density is normalized to 1 for any H, because the measurement
    factor resolves the identity and the unitary factor preserves norms.
    """
    grid = TimeGrid(t0=0.0, dt=dt, n_steps=1)
    evals, q = model.A.eigh()
    r = (q * np.exp(-model.kappa * (evals - a) ** 2 * dt)) @ q.conj().T
    v = _expm(-1j * model.H.entries * dt) @ (r @ psi0.amplitudes)
    n = float(np.linalg.norm(v))
    return 2.0 * np.log(n) + reference_log_weight(constant_record(grid, a), model.kappa)


def _hermgauss_kernel(
    a_op: HermitianOperator, kappa: float, dt: float, order: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quadrature data for readout integrals of one slice.

    Returns (eigenvalues, eigenvectors, K) where K_mn approximates
    integral da sqrt(2*kappa*dt/pi) exp(-kappa*dt*[(a-a_m)^2 + (a-a_n)^2]),
    i.e. the per-slice dephasing kernel in the A eigenbasis (exactly
    exp(-(kappa/2)*(a_m-a_n)^2*dt) in the order -> infinity limit).
    """
    evals, q = a_op.eigh()
    center = 0.5 * (evals[0] + evals[-1])
    b = np.sqrt(2.0 * kappa * dt) * (evals - center)
    x, w = np.polynomial.hermite.hermgauss(order)
    g = np.exp(np.outer(x, b) - 0.5 * b**2)  # (order, dim)
    k = np.einsum("i,im,in->mn", w / np.sqrt(np.pi), g, g)
    return evals, q, k


def generalized_unitarity_defect(
    model: MonitoringModel, dt: float, quad_order: int = DEFAULT_QUAD_ORDER
) -> float:
    """Max-norm deviation of the readout-integrated R_a^dag R_a from identity
    for a single slice, by Gauss-Hermite quadrature.

    This is the completeness (generalized unitarity) check of the
    measurement-operator family. Raises if the quadrature has not converged,
    i.e. the defect exceeds 1e-8 yet fails to decrease from order/2 to order.
    """
    if quad_order < 10:
        raise ValidationError("quad_order must be >= 10")
    if dt <= 0:
        raise ValidationError("dt must be positive")

    evals = np.linalg.eigvalsh(model.A.entries)
    center = 0.5 * (evals[0] + evals[-1])
    b = np.sqrt(2.0 * model.kappa * dt) * (evals - center)

    def defect(order: int) -> float:
        x, w = np.polynomial.hermite.hermgauss(order)
        s = np.einsum("i,im->m", w / np.sqrt(np.pi), np.exp(2.0 * np.outer(x, b) - b**2))
        return float(np.max(np.abs(s - 1.0)))

    d_full = defect(quad_order)
    if d_full > 1e-8:
        d_half = defect(max(10, quad_order // 2))
        if d_full >= d_half:
            raise QuadratureError(
                f"unitarity defect {d_full:.3g} not decreasing with quadrature order "
                f"(order {quad_order} vs {max(10, quad_order // 2)}: {d_half:.3g})"
            )
    return d_full


def marginalize_readouts(
    model: MonitoringModel,
    rho0: DensityMatrix,
    grid: TimeGrid,
    quad_order: int = DEFAULT_QUAD_ORDER,
) -> list[DensityMatrix]:
    """Readout-integrated selective evolution: the density matrix obtained by
    summing the sliced conditional evolution over all records with their
    reference-measure weight.

    Per slice the readout integral of R_a rho R_a is evaluated by
    Gauss-Hermite quadrature (an elementwise positive-semidefinite kernel in
    the A eigenbasis) and the unitary factor is applied in symmetric
    half-steps around it, so the iterated map matches the master equation of
    :mod:`qmeas.lindblad` to second order in dt.
    """
    if model.dim != rho0.dim:
        raise DimensionMismatchError(f"model dim {model.dim} != rho0 dim {rho0.dim}")
    if quad_order < 10:
        raise ValidationError("quad_order must be >= 10")
    defect = generalized_unitarity_defect(model, grid.dt, quad_order)
    if defect > 1e-6:
        raise QuadratureError(
            f"quadrature kernel is not complete to 1e-6 (defect {defect:.3g}); raise quad_order"
        )
    _, q, kernel = _hermgauss_kernel(model.A, model.kappa, grid.dt, quad_order)
    u_half = _expm(-0.5j * model.H.entries * grid.dt)
    qh = q.conj().T
    rho = rho0.entries.copy()
    out = [rho0]
    for k in range(grid.n_steps):
        rho = u_half @ rho @ u_half.conj().T
        rho = q @ (kernel * (qh @ rho @ q)) @ qh
        rho = u_half @ rho @ u_half.conj().T
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real
        lo = float(np.min(np.linalg.eigvalsh(rho)))
        if lo < -1e-9:
            raise IntegrationError(
                f"marginalized state lost positivity at step {k + 1} (eigenvalue {lo:.3g})"
            )
        out.append(DensityMatrix(rho))
    return out
