"""Discrete-time decoherence: repeated fuzzy measurements and weak-coupling
ancilla series.

A fuzzy shot applies the Gaussian Kraus operator R_a = exp(-s (A - a)^2) with
outcome a drawn from the exact Born density; a long chain of such shots
gradually decoheres a superposition into a single eigenspace (each eigenspace
population is a martingale whose terminal distribution realizes the Born
rule). A chain of n shots of strength s is statistically equivalent to
continuous monitoring with kappa * T = n * s.

The weak-ancilla realization couples the system to a fresh two-level probe
per shot via exp(-i g (A x sigma_y)) and reads the probe out; the branch
operators are cos(g A) and sin(g A). Post-selecting on null outcomes yields a
cumulative operator whose accumulated complex Hamiltonian has an imaginary
part that is quadratic in A up to O(g^4) corrections - the fit helper
quantifies how universal that quadratic form is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .hilbert import HermitianOperator, NonHermitianOperator, QuantumState

_COMPLETENESS_ORDER = 60


@dataclass(frozen=True)
class FuzzyKraus:
    """Gaussian fuzzy measurement of A with per-shot strength s: outcome
    density ~ exp(-2 s (a - a_m)^2) on each eigenspace (variance 1/(4s))."""

    A: HermitianOperator
    strength: float

    def __post_init__(self):
        if not (np.isfinite(self.strength) and self.strength > 0):
            raise ValidationError("strength must be positive and finite")
        # quadrature check of POVM completeness, same Gaussian identity that
        # normalizes continuous readout densities
        evals = np.linalg.eigvalsh(self.A.entries)
        center = 0.5 * (evals[0] + evals[-1])
        b = np.sqrt(2.0 * self.strength) * (evals - center)
        x, w = np.polynomial.hermite.hermgauss(_COMPLETENESS_ORDER)
        s = np.einsum("i,im->m", w / np.sqrt(np.pi), np.exp(2.0 * np.outer(x, b) - b**2))
        defect = float(np.max(np.abs(s - 1.0)))
        if defect > 1e-8:
            raise ValidationError(
                f"fuzzy POVM completeness defect {defect:.3g} exceeds 1e-8 "
                "(strength too large for the spectral spread)"
            )

    @property
    def dim(self) -> int:
        return self.A.dim


@dataclass(frozen=True)
class ChainOutcome:
    """Result of a decoherence chain: final state, readout sequence, and the
    eigenvalue index collapsed to (None if no collapse within the chain)."""

    final_state: QuantumState
    readouts: np.ndarray
    collapsed_to: int | None


@dataclass(frozen=True)
class AncillaScheme:
    """Series of weak probe couplings: per-shot dimensionless strength g,
    number of shots, two-level probes."""

    coupling: float
    n_shots: int
    ancilla_dim: int = 2

    def __post_init__(self):
        if self.coupling < 0:
            raise ValidationError("coupling must be >= 0")
        if self.n_shots < 1:
            raise ValidationError("n_shots must be >= 1")
        if self.ancilla_dim != 2:
            raise ValidationError("only two-level ancillas are supported")


def _eigensystem(k: FuzzyKraus) -> tuple[np.ndarray, np.ndarray]:
    evals, q = k.A.eigh()
    gaps = np.diff(evals)
    if np.any(gaps < 1e-9):
        raise ValidationError("fuzzy chains require a nondegenerate spectrum")
    return evals, q


def sample_fuzzy_shot(
    k: FuzzyKraus, psi: QuantumState, rng: np.random.Generator
) -> tuple[QuantumState, float, float]:
    """Apply one fuzzy shot: sample outcome a from the exact density
    p(a) = sqrt(2s/pi) * ||R_a psi||^2, apply R_a, renormalize.

    Returns (post-measurement state, outcome, density at the outcome). The
    outcome law is a mixture of Gaussians N(a_m, 1/(4s)) weighted by the
    eigenspace populations; sampling draws one uniform then one normal
    variate from rng.
    """
    if k.dim != psi.dim:
        raise DimensionMismatchError(f"observable dim {k.dim} != state dim {psi.dim}")
    evals, q = _eigensystem(k)
    amps = q.conj().T @ psi.amplitudes
    pops = np.abs(amps) ** 2
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(pops), u))
    idx = min(idx, len(evals) - 1)
    a = float(evals[idx] + rng.standard_normal() / (2.0 * np.sqrt(k.strength)))
    weights = np.exp(-k.strength * (evals - a) ** 2)
    new_amps = amps * weights
    density = float(
        np.sqrt(2.0 * k.strength / np.pi) * np.sum(pops * weights**2)
    )
    v = q @ new_amps
    return QuantumState(v / np.linalg.norm(v)), a, density


def run_decoherence_chain(
    k: FuzzyKraus,
    psi0: QuantumState,
    n_steps: int,
    seed: int,
    collapse_threshold: float = 1e-4,
) -> ChainOutcome:
    """Iterate fuzzy shots for n_steps, declaring collapse onto eigenspace m
    once its population first exceeds 1 - collapse_threshold.

    Reproducible per seed: the Philox stream keyed by the seed supplies
    n_steps uniforms followed by n_steps normals, the layout also used by the
    vectorized ensemble runner.
    """
    finals, readouts, collapsed, _ = _run_chain_batch(
        k, psi0, n_steps, [seed], collapse_threshold
    )
    c = int(collapsed[0])
    return ChainOutcome(
        final_state=QuantumState(finals[0]),
        readouts=readouts[0],
        collapsed_to=None if c < 0 else c,
    )


def _run_chain_batch(
    k: FuzzyKraus,
    psi0: QuantumState,
    n_steps: int,
    seeds: list[int],
    collapse_threshold: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized chains, one Philox stream per seed (n uniforms then n
    normals). Returns final amplitudes (batch, dim) in the original basis,
    readouts (batch, n), collapsed index per chain (-1 for none), and
    eigenspace population sums over the batch per shot (n + 1, dim)."""
    if k.dim != psi0.dim:
        raise DimensionMismatchError(f"observable dim {k.dim} != state dim {psi0.dim}")
    if n_steps < 1:
        raise ValidationError("n_steps must be >= 1")
    if not 0 < collapse_threshold < 1:
        raise ValidationError("collapse_threshold must be in (0, 1)")
    evals, q = _eigensystem(k)
    b = len(seeds)
    us = np.empty((b, n_steps))
    zs = np.empty((b, n_steps))
    for i, s in enumerate(seeds):
        if s < 0:
            raise ValidationError("seeds must be non-negative")
        gen = np.random.Generator(np.random.Philox(key=int(s)))
        us[i] = gen.random(n_steps)
        zs[i] = gen.standard_normal(n_steps)
    amps = np.tile(q.conj().T @ psi0.amplitudes, (b, 1))
    readouts = np.empty((b, n_steps))
    collapsed = np.full(b, -1, dtype=int)
    sigma = 1.0 / (2.0 * np.sqrt(k.strength))
    pop_sums = np.zeros((n_steps + 1, k.dim))
    pops = np.abs(amps) ** 2
    pop_sums[0] = pops.sum(axis=0)
    for step in range(n_steps):
        cum = np.cumsum(pops, axis=1)
        idx = np.minimum((us[:, step, None] > cum).sum(axis=1), len(evals) - 1)
        a = evals[idx] + zs[:, step] * sigma
        readouts[:, step] = a
        amps = amps * np.exp(-k.strength * (evals[None, :] - a[:, None]) ** 2)
        amps = amps / np.sqrt((np.abs(amps) ** 2).sum(axis=1))[:, None]
        pops = np.abs(amps) ** 2
        pop_sums[step + 1] = pops.sum(axis=0)
        top = pops.max(axis=1)
        hit = (top > 1.0 - collapse_threshold) & (collapsed < 0)
        collapsed[hit] = pops.argmax(axis=1)[hit]
    return amps @ q.T, readouts, collapsed, pop_sums


def run_chain_ensemble(
    k: FuzzyKraus,
    psi0: QuantumState,
    n_steps: int,
    n_chains: int,
    seed_base: int,
    collapse_threshold: float = 1e-4,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run n_chains independent chains with seeds seed_base + i.

    Returns (collapsed indices (n_chains,), final eigenspace populations
    (n_chains, dim), mean eigenspace populations per shot (n_steps + 1, dim));
    the last is the Born-martingale diagnostic. Chain i is bit-identical to
    run_decoherence_chain with seed seed_base + i.
    """
    _, q = _eigensystem(k)
    seeds = [seed_base + i for i in range(n_chains)]
    block = 2048
    collapsed_all = np.empty(n_chains, dtype=int)
    pops_final = np.empty((n_chains, k.dim))
    pop_sums = np.zeros((n_steps + 1, k.dim))
    for lo in range(0, n_chains, block):
        chunk = seeds[lo : lo + block]
        finals, _, collapsed, sums = _run_chain_batch(
            k, psi0, n_steps, chunk, collapse_threshold
        )
        collapsed_all[lo : lo + len(chunk)] = collapsed
        pops_final[lo : lo + len(chunk)] = np.abs(finals @ q.conj()) ** 2
        pop_sums += sums
    return collapsed_all, pops_final, pop_sums / n_chains


def weak_ancilla_shot(
    scheme: AncillaScheme, a_op: HermitianOperator, psi: QuantumState
) -> list[tuple[QuantumState, float, int]]:
    """Couple one fresh probe in |0> via exp(-i g (A x sigma_y)), measure it,
    and return the surviving branches as (state, probability, outcome).

    The branch operators are M_0 = cos(g A) and M_1 = sin(g A), which satisfy
    M_0^2 + M_1^2 = identity exactly. Requires the weakness condition
    g * ||A|| <= pi/4 (below the fully-resolving probe rotation).
    """
    if a_op.dim != psi.dim:
        raise DimensionMismatchError(f"observable dim {a_op.dim} != state dim {psi.dim}")
    g = scheme.coupling
    norm_a = a_op.spectral_norm()
    # one shot must stay below the fully-resolving rotation pi/4
    if g * norm_a > 0.25 * np.pi + 1e-9:
        raise ValidationError(
            f"weakness condition violated: g*||A|| = {g * norm_a:.3g} > pi/4"
        )
    m0, m1 = ancilla_branch_operators(a_op, g)
    branches: list[tuple[QuantumState, float, int]] = []
    for outcome, m in ((0, m0), (1, m1)):
        v = m @ psi.amplitudes
        p = float(np.vdot(v, v).real)
        if p > 0.0:
            branches.append((QuantumState(v / np.sqrt(p)), p, outcome))
    return branches


def ancilla_branch_operators(a_op: HermitianOperator, g: float) -> tuple[np.ndarray, np.ndarray]:
    """(cos(g A), sin(g A)) - the probe-conditioned branch operators."""
    evals, q = a_op.eigh()
    m0 = (q * np.cos(g * evals)) @ q.conj().T
    m1 = (q * np.sin(g * evals)) @ q.conj().T
    return m0, m1


def fit_effective_quadratic(
    cumulative_log_operator: NonHermitianOperator,
    a_op: HermitianOperator,
    center: float = 0.0,
    total_time: float = 1.0,
) -> tuple[float, float, float]:
    """Fit the damping spectrum of an accumulated complex Hamiltonian to a
    quadratic in the measured observable.

    ``cumulative_log_operator`` is H_eff * T, i.e. i times the matrix log of
    the cumulative (post-selected) evolution operator. Its negative imaginary
    eigenvalues, taken in the A eigenbasis, are least-squares fitted to
    kappa_eff * (a_m - center)^2 * total_time + offset. Returns
    (kappa_eff, offset, max residual). The input must be diagonal in the A
    eigenbasis within tolerance (guaranteed when no Hamiltonian acts during
    the series); otherwise an error is raised.
    """
    if cumulative_log_operator.dim != a_op.dim:
        raise DimensionMismatchError(
            f"operator dim {cumulative_log_operator.dim} != observable dim {a_op.dim}"
        )
    if total_time <= 0:
        raise ValidationError("total_time must be positive")
    evals, q = a_op.eigh()
    rotated = q.conj().T @ cumulative_log_operator.entries @ q
    diag = np.diag(rotated)
    scale = max(float(np.max(np.abs(diag))), 1e-30)
    off = rotated - np.diag(diag)
    off_max = float(np.max(np.abs(off)))
    if off_max > 1e-8 * max(scale, 1.0):
        raise ValidationError(
            f"operator is not diagonal in the observable eigenbasis "
            f"(off-diagonal magnitude {off_max:.3g})"
        )
    damping = -diag.imag
    design = np.stack([(evals - center) ** 2 * total_time, np.ones_like(evals)], axis=1)
    coeffs, *_ = np.linalg.lstsq(design, damping, rcond=None)
    residual = float(np.max(np.abs(damping - design @ coeffs)))
    return float(coeffs[0]), float(coeffs[1]), residual
