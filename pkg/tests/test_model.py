"""Schedule, channel, state, and detector construction checks."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from quasiwork.errors import (
    BadProbabilityError,
    DimensionMismatchError,
    NonHermitianSampleError,
    WrongDimensionError,
    ZeroCoherenceError,
)
from quasiwork.model import (
    PAULI_X,
    PAULI_Z,
    DetectorSpec,
    HamiltonianSchedule,
    KrausChannel,
    SystemState,
    amplitude_damping,
    amplitude_damping_channel,
    closed_channel,
    discretize_drive,
    require_valid_channel,
    validate_channel,
)


def ramp_schedule(steps: int = 3, total_time: float = 2.0) -> HamiltonianSchedule:
    hams = [0.5 * PAULI_Z + (s / max(steps, 1)) * 0.2 * PAULI_X
            for s in range(steps + 1)]
    return HamiltonianSchedule(total_time=total_time, hams=tuple(hams))


class TestSchedule:
    def test_basic_geometry(self):
        sched = ramp_schedule(steps=4, total_time=2.0)
        assert sched.steps == 4
        assert sched.dim == 2
        assert sched.dt == pytest.approx(0.5)

    def test_single_sample_uses_full_duration(self):
        sched = HamiltonianSchedule(total_time=3.0, hams=(0.5 * PAULI_Z,))
        assert sched.steps == 0
        assert sched.dt == 3.0

    def test_eig_is_cached_and_gauged(self):
        sched = ramp_schedule()
        assert sched.eig(1) is sched.eig(1)
        assert_allclose(sched.eig(0).values, [-0.5, 0.5], atol=1e-14, rtol=0.0)

    def test_energy_scale_is_largest_eigenvalue(self):
        sched = HamiltonianSchedule(total_time=1.0,
                                    hams=(0.5 * PAULI_Z, 2.0 * PAULI_X))
        assert sched.energy_scale() == pytest.approx(2.0)

    def test_rejects_bad_input(self):
        with pytest.raises(WrongDimensionError):
            HamiltonianSchedule(total_time=0.0, hams=(PAULI_Z,))
        with pytest.raises(WrongDimensionError):
            HamiltonianSchedule(total_time=1.0, hams=())
        with pytest.raises(NonHermitianSampleError):
            HamiltonianSchedule(total_time=1.0,
                                hams=(np.array([[0.0, 1.0], [0.0, 0.0]]),))
        with pytest.raises(DimensionMismatchError):
            HamiltonianSchedule(total_time=1.0, hams=(PAULI_Z, np.eye(3)))

    def test_discretize_roundtrip(self):
        sched = ramp_schedule(steps=5)
        again = discretize_drive(sched.step_function(), sched.total_time, 5)
        for s in range(6):
            assert np.array_equal(sched.hams[s], again.hams[s])


class TestAmplitudeDamping:
    def test_diagonal_basis_frozen(self):
        eig = HamiltonianSchedule(total_time=1.0, hams=(-0.5 * PAULI_Z,)).eig(0)
        keep, drop = amplitude_damping(0.36, eig)
        assert_allclose(keep, np.diag([1.0, 0.8]), atol=1e-15, rtol=0.0)
        assert_allclose(drop, [[0.0, 0.6], [0.0, 0.0]], atol=1e-15, rtol=0.0)

    def test_rotated_basis_full_decay(self):
        eig = HamiltonianSchedule(total_time=1.0, hams=(0.5 * PAULI_X,)).eig(0)
        keep, drop = amplitude_damping(1.0, eig)
        assert_allclose(drop, [[0.5, 0.5], [-0.5, -0.5]], atol=1e-14, rtol=0.0)
        assert_allclose(keep, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-14, rtol=0.0)

    def test_rejects_bad_probability(self):
        eig = HamiltonianSchedule(total_time=1.0, hams=(PAULI_Z,)).eig(0)
        for p in (-0.1, 1.5, float("nan")):
            with pytest.raises(BadProbabilityError):
                amplitude_damping(p, eig)

    def test_channel_completeness(self):
        sched = ramp_schedule(steps=3)
        for p in (0.0, 0.3, 1.0):
            ch = amplitude_damping_channel(sched, p)
            assert ch.steps == sched.steps
            report = validate_channel(ch)
            assert report.ok
            assert report.worst < 1e-14

    def test_channel_per_step_probabilities(self):
        sched = ramp_schedule(steps=2)
        ch = amplitude_damping_channel(sched, [0.0, 0.5, 1.0])
        require_valid_channel(ch)
        with pytest.raises(DimensionMismatchError):
            amplitude_damping_channel(sched, [0.1, 0.2])

    def test_broken_channel_is_rejected(self):
        sched = ramp_schedule(steps=1)
        ch = amplitude_damping_channel(sched, 0.5)
        bad = KrausChannel(ops=tuple(
            tuple(1.1 * np.asarray(m) for m in step) for step in ch.ops
        ))
        assert not validate_channel(bad).ok
        with pytest.raises(BadProbabilityError):
            require_valid_channel(bad)

    def test_closed_channel_is_identity(self):
        sched = ramp_schedule(steps=2)
        ch = closed_channel(sched)
        for step in ch.ops:
            assert len(step) == 1
            assert np.array_equal(step[0], np.eye(2))


class TestSystemState:
    def test_named_states(self):
        sched = HamiltonianSchedule(total_time=1.0, hams=(-0.5 * PAULI_Z,))
        ground = SystemState.ground(sched)
        excited = SystemState.excited(sched)
        assert_allclose(ground.rho, np.diag([1.0, 0.0]), atol=1e-14, rtol=0.0)
        assert_allclose(excited.rho, np.diag([0.0, 1.0]), atol=1e-14, rtol=0.0)
        plus = SystemState.plus_x(sched)
        assert_allclose(plus.rho, np.full((2, 2), 0.5), atol=1e-14, rtol=0.0)

    def test_thermal_populations(self):
        sched = HamiltonianSchedule(total_time=1.0, hams=(-0.5 * PAULI_Z,))
        state = SystemState.thermal(sched, beta=2.0)
        z = np.exp(1.0) + np.exp(-1.0)
        assert_allclose(np.diag(state.rho).real,
                        [np.exp(1.0) / z, np.exp(-1.0) / z],
                        atol=1e-14, rtol=0.0)
        assert state.rho[0, 1] == 0.0

    def test_dephased_keeps_populations(self):
        sched = HamiltonianSchedule(total_time=1.0, hams=(0.5 * PAULI_X,))
        state = SystemState.from_matrix(np.array([[0.7, 0.2j], [-0.2j, 0.3]]))
        deph = state.dephased(sched)
        v = sched.eig(0).vectors
        in_basis = v.conj().T @ deph.rho @ v
        assert_allclose(in_basis - np.diag(np.diag(in_basis)),
                        np.zeros((2, 2)), atol=1e-15, rtol=0.0)
        assert_allclose(np.diag(in_basis), np.diag(v.conj().T @ state.rho @ v),
                        atol=1e-15, rtol=0.0)

    def test_rejects_invalid_density_matrices(self):
        with pytest.raises(BadProbabilityError):
            SystemState.from_matrix(np.diag([0.6, 0.6]))
        with pytest.raises(BadProbabilityError):
            SystemState.from_matrix(np.diag([1.5, -0.5]))


class TestDetector:
    def test_standard_coherence(self):
        det = DetectorSpec.standard()
        assert det.coherence() == pytest.approx(0.5)
        assert det.eigen_indices() == (1, 0)

    def test_eigen_index_resolution(self):
        det = DetectorSpec(hamiltonian=2.0 * PAULI_Z, lam=2.0, lam_prime=-2.0,
                           rho=np.full((2, 2), 0.5, dtype=complex))
        assert det.eigen_indices() == (1, 0)
        with pytest.raises(DimensionMismatchError):
            DetectorSpec(hamiltonian=PAULI_Z, lam=0.7, lam_prime=-1.0,
                         rho=np.full((2, 2), 0.5, dtype=complex)).eigen_indices()

    def test_degenerate_eigenvalues_rejected(self):
        with pytest.raises(DimensionMismatchError):
            DetectorSpec(hamiltonian=np.eye(2, dtype=complex), lam=1.0,
                         lam_prime=1.0,
                         rho=np.full((2, 2), 0.5, dtype=complex)).eigen_indices()

    def test_zero_coherence_is_caught(self):
        det = DetectorSpec(hamiltonian=PAULI_Z, lam=1.0, lam_prime=-1.0,
                           rho=np.diag([1.0, 0.0]).astype(complex))
        with pytest.raises(ZeroCoherenceError):
            det.require_coherence()
