import numpy as np
import pytest

from qmeas.errors import IntegrationError, ValidationError
from qmeas.hilbert import DensityMatrix, HermitianOperator, basis_state, pauli_x, pauli_z, plus_state
from qmeas.lindblad import (
    LindbladModel,
    integrate_lindblad,
    kappa_from_atoms,
    kappa_from_brownian,
    lindblad_rhs,
)
from qmeas.readout import TimeGrid

H_ZERO = HermitianOperator(np.zeros((2, 2)))


class TestRhs:
    def test_diagonal_state_untouched_by_dephasing(self):
        model = LindbladModel(H_ZERO, pauli_z(), 1.3)
        rho = DensityMatrix(np.diag([0.2, 0.8]))
        assert np.allclose(lindblad_rhs(model, rho), 0.0, atol=1e-14)

    def test_offdiagonal_decay_rate(self):
        model = LindbladModel(H_ZERO, pauli_z(), 0.5)
        rho = DensityMatrix(np.array([[0.5, 0.5], [0.5, 0.5]]))
        out = lindblad_rhs(model, rho)
        # -(kappa/2) (gap)^2 rho01 = -2 kappa rho01 = -0.5
        assert out[0, 1] == pytest.approx(-0.5, abs=1e-14)

    def test_identity_observable_is_pure_unitary(self):
        model = LindbladModel(pauli_x(), HermitianOperator(np.eye(2)), 1.0)
        rho = DensityMatrix(np.array([[0.5, 0.2], [0.2, 0.5]]))
        h, r = pauli_x().entries, rho.entries
        assert np.allclose(lindblad_rhs(model, rho), -1j * (h @ r - r @ h), atol=1e-14)

    def test_hermitian_traceless(self):
        rng = np.random.default_rng(2)
        m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        model = LindbladModel(
            HermitianOperator(0.5 * (m + m.conj().T)),
            HermitianOperator(np.diag([0.0, 1.0, 3.0])),
            0.7,
        )
        w = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        rho = DensityMatrix((w @ w.conj().T) / np.trace(w @ w.conj().T).real)
        out = lindblad_rhs(model, rho)
        assert np.max(np.abs(out - out.conj().T)) <= 1e-12
        assert abs(np.trace(out)) <= 1e-12


class TestIntegration:
    def test_dephasing_closed_form(self):
        model = LindbladModel(H_ZERO, pauli_z(), 0.5)
        rho0 = DensityMatrix.from_state(plus_state(2))
        out = integrate_lindblad(model, rho0, TimeGrid(0.0, 0.005, 200))
        assert out[-1].entries[0, 1].real == pytest.approx(0.5 * np.exp(-1.0), rel=1e-8)

    def test_unitary_limit_full_flip(self):
        # kappa -> 0 limit: tiny kappa, H = sigma_x, T = pi/2 flips |0> to |1>
        model = LindbladModel(pauli_x(), pauli_z(), 1e-9)
        rho0 = DensityMatrix.from_state(basis_state(2, 0))
        out = integrate_lindblad(model, rho0, TimeGrid(0.0, np.pi / 2 / 500, 500))
        target = DensityMatrix.from_state(basis_state(2, 1))
        assert np.max(np.abs(out[-1].entries - target.entries)) <= 1e-7

    def test_maximally_mixed_fixed_point(self):
        model = LindbladModel(HermitianOperator(np.diag([1.0, -1.0])), pauli_z(), 2.0)
        rho0 = DensityMatrix.maximally_mixed(2)
        out = integrate_lindblad(model, rho0, TimeGrid(0.0, 0.01, 100))
        for rho in out:
            assert np.allclose(rho.entries, np.eye(2) / 2, atol=1e-12)

    def test_trace_and_hermiticity_preserved(self):
        model = LindbladModel(pauli_x(), pauli_z(), 0.5)
        rho0 = DensityMatrix.from_state(basis_state(2, 0))
        for rho in integrate_lindblad(model, rho0, TimeGrid(0.0, 0.01, 200)):
            assert abs(np.trace(rho.entries) - 1.0) <= 1e-10
            assert np.max(np.abs(rho.entries - rho.entries.conj().T)) <= 1e-10

    def test_purity_monotone_under_pure_dephasing(self):
        model = LindbladModel(HermitianOperator(np.diag([0.7, -0.7])), pauli_z(), 0.8)
        rho0 = DensityMatrix.from_state(plus_state(2))
        purities = [
            float(np.trace(r.entries @ r.entries).real)
            for r in integrate_lindblad(model, rho0, TimeGrid(0.0, 0.01, 300))
        ]
        assert all(b <= a + 1e-12 for a, b in zip(purities, purities[1:]))

    def test_fitted_decay_rate_within_half_percent(self):
        kappa = 0.8
        a = HermitianOperator(np.diag([0.5, -1.5]))  # gap 2
        model = LindbladModel(H_ZERO, a, kappa)
        dt = 0.01 / (kappa * 4)
        rho0 = DensityMatrix.from_state(plus_state(2))
        out = integrate_lindblad(model, rho0, TimeGrid(0.0, dt, 300))
        coh = np.array([abs(r.entries[0, 1]) for r in out])
        t = np.arange(301) * dt
        rate = -np.polyfit(t, np.log(coh), 1)[0]
        assert rate == pytest.approx(0.5 * kappa * 4.0, rel=0.005)

    def test_fourth_order_convergence(self):
        model = LindbladModel(pauli_x(), pauli_z(), 0.5)
        rho0 = DensityMatrix.from_state(basis_state(2, 0))
        t_final = 1.0
        dts = [0.1, 0.05, 0.025, 0.0125]
        ref = integrate_lindblad(
            model, rho0, TimeGrid(0.0, dts[-1] / 16, int(round(t_final / (dts[-1] / 16))))
        )[-1]
        errs = []
        for dt in dts:
            out = integrate_lindblad(model, rho0, TimeGrid(0.0, dt, int(round(t_final / dt))))
            errs.append(np.max(np.abs(out[-1].entries - ref.entries)))
        slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
        assert slope == pytest.approx(4.0, abs=0.2)

    def test_positivity_abort_on_oversized_step(self):
        model = LindbladModel(H_ZERO, pauli_z(), 100.0)
        rho0 = DensityMatrix.from_state(plus_state(2))
        with pytest.raises(IntegrationError):
            integrate_lindblad(model, rho0, TimeGrid(0.0, 0.05, 50))

    def test_store_every_thins_output(self):
        model = LindbladModel(pauli_x(), pauli_z(), 0.5)
        rho0 = DensityMatrix.from_state(basis_state(2, 0))
        full = integrate_lindblad(model, rho0, TimeGrid(0.0, 0.01, 100))
        thin = integrate_lindblad(model, rho0, TimeGrid(0.0, 0.01, 100), store_every=100)
        assert len(thin) == 2
        assert np.allclose(thin[-1].entries, full[-1].entries, atol=1e-14)


class TestKappaConstructors:
    def test_brownian_values(self):
        assert kappa_from_brownian(1.0, 0.5) == pytest.approx(1.0)
        assert kappa_from_brownian(0.5, 1.0) == pytest.approx(1.0)
        assert kappa_from_brownian(2.0, 3.0) == pytest.approx(12.0)

    def test_atomic_values(self):
        assert kappa_from_atoms(1.0, 2.0) == pytest.approx(1.0)
        assert kappa_from_atoms(2.0, 0.5) == pytest.approx(1.0)
        assert kappa_from_atoms(1.0, 1.0) == pytest.approx(2.0)

    def test_reject_nonpositive(self):
        with pytest.raises(ValidationError):
            kappa_from_brownian(-1.0, 1.0)
        with pytest.raises(ValidationError):
            kappa_from_atoms(1.0, 0.0)
