import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmeas.errors import DimensionMismatchError, ValidationError
from qmeas.hilbert import (
    DensityMatrix,
    HermitianOperator,
    NonHermitianOperator,
    QuantumState,
    basis_state,
    double_commutator,
    expectation,
    matrix_exponential,
    pauli_x,
    pauli_z,
    plus_state,
    trace_distance,
)


def rand_hermitian(dim, rng):
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return HermitianOperator(0.5 * (m + m.conj().T))


def rand_density(dim, rng):
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = m @ m.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


class TestTypes:
    def test_hermitian_rejects_asymmetric(self):
        with pytest.raises(ValidationError, match="not Hermitian"):
            HermitianOperator(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_hermitian_rejects_dim_one(self):
        with pytest.raises(ValidationError):
            HermitianOperator(np.array([[1.0]]))

    def test_constructed_operators_are_exactly_hermitian(self):
        rng = np.random.default_rng(1)
        for dim in (2, 3, 5, 8):
            op = rand_hermitian(dim, rng)
            assert np.max(np.abs(op.entries - op.entries.conj().T)) <= 1e-12

    def test_state_requires_unit_norm(self):
        with pytest.raises(ValidationError, match="normalized"):
            QuantumState(np.array([1.0, 1.0]))

    def test_state_from_vector_folds_norm(self):
        st_ = QuantumState.from_vector(np.array([3.0, 4.0]))
        assert np.isclose(np.linalg.norm(st_.amplitudes), 1.0)
        assert np.isclose(st_.log_norm, np.log(5.0))

    def test_density_matrix_validates(self):
        with pytest.raises(ValidationError, match="trace"):
            DensityMatrix(np.eye(2))
        with pytest.raises(ValidationError, match="eigenvalue"):
            DensityMatrix(np.diag([1.5, -0.5]))

    def test_immutability(self):
        op = pauli_z()
        with pytest.raises(ValueError):
            op.entries[0, 0] = 2.0


class TestExpectation:
    def test_eigenstate(self):
        assert expectation(basis_state(2, 0), pauli_z()) == pytest.approx(1.0)

    def test_symmetric_superposition(self):
        assert expectation(plus_state(2), pauli_z()) == pytest.approx(0.0, abs=1e-12)

    def test_hand_evaluated(self):
        st_ = QuantumState(np.array([0.6, 0.8], dtype=complex))
        assert expectation(st_, pauli_z()) == pytest.approx(-0.28, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            expectation(basis_state(3, 0), pauli_z())

    @given(phase=st.floats(0.0, 2 * np.pi))
    @settings(max_examples=10, deadline=None)
    def test_global_phase_invariance(self, phase):
        st_ = QuantumState(np.array([0.6, 0.8], dtype=complex))
        rotated = QuantumState(st_.amplitudes * np.exp(1j * phase))
        assert expectation(rotated, pauli_z()) == pytest.approx(
            expectation(st_, pauli_z()), abs=1e-12
        )


class TestMatrixExponential:
    def test_zero_matrix(self):
        out = matrix_exponential(NonHermitianOperator(np.zeros((3, 3))), 2.0)
        assert np.allclose(out.entries, np.eye(3), atol=1e-14)

    def test_diagonal(self):
        out = matrix_exponential(NonHermitianOperator(np.diag([-1.0, -2.0])), 1.0)
        assert np.allclose(out.entries, np.diag([np.exp(-1.0), np.exp(-2.0)]), rtol=1e-12)

    def test_rotation_closed_form(self):
        gen = NonHermitianOperator(-1j * pauli_x().entries * np.pi / 2)
        out = matrix_exponential(gen, 1.0)
        assert np.allclose(out.entries, -1j * pauli_x().entries, atol=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            matrix_exponential(NonHermitianOperator(np.array([[np.inf, 0], [0, 1.0]])), 1.0)

    def test_semigroup_property(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            m = NonHermitianOperator(m / np.linalg.norm(m, 2))  # ||M|| = 1
            t1, t2 = rng.uniform(0.2, 2.0, size=2)  # ||M(t1+t2)|| <= 4 < 5
            lhs = matrix_exponential(m, t1).entries @ matrix_exponential(m, t2).entries
            rhs = matrix_exponential(m, t1 + t2).entries
            assert np.max(np.abs(lhs - rhs)) <= 1e-9


class TestTraceDistance:
    def test_identical(self):
        rho = rand_density(3, np.random.default_rng(3))
        assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-14)

    def test_orthogonal_pure_states(self):
        r0 = DensityMatrix.from_state(basis_state(2, 0))
        r1 = DensityMatrix.from_state(basis_state(2, 1))
        assert trace_distance(r0, r1) == pytest.approx(1.0)

    def test_pure_vs_maximally_mixed(self):
        r0 = DensityMatrix.from_state(basis_state(2, 0))
        assert trace_distance(r0, DensityMatrix.maximally_mixed(2)) == pytest.approx(0.5)

    def test_bounds(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            d = trace_distance(rand_density(4, rng), rand_density(4, rng))
            assert 0.0 <= d <= 1.0


class TestDoubleCommutator:
    def test_commuting_gives_zero(self):
        rho = DensityMatrix(np.diag([0.3, 0.7]))
        assert np.allclose(double_commutator(pauli_z(), rho), 0.0, atol=1e-14)

    def test_identity_gives_zero(self):
        rho = rand_density(2, np.random.default_rng(5))
        ident = HermitianOperator(np.eye(2))
        assert np.allclose(double_commutator(ident, rho), 0.0, atol=1e-14)

    def test_offdiagonal_eigenbasis_formula(self):
        c = 0.21 + 0.13j
        rho = DensityMatrix(np.array([[0.5, c], [np.conj(c), 0.5]]))
        out = double_commutator(pauli_z(), rho)
        # (a_m - a_n)^2 rho_mn with gap 2 -> factor 4 off-diagonal, 0 diagonal
        assert out[0, 1] == pytest.approx(4 * c, abs=1e-14)
        assert abs(out[0, 0]) <= 1e-14 and abs(out[1, 1]) <= 1e-14

    def test_hermitian_and_traceless(self):
        rng = np.random.default_rng(17)
        for dim in (2, 3, 6):
            out = double_commutator(rand_hermitian(dim, rng), rand_density(dim, rng))
            assert np.max(np.abs(out - out.conj().T)) <= 1e-12
            assert abs(np.trace(out)) <= 1e-12
