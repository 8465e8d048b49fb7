"""Generating-function evolution checks, including route cross-validation."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from quasiwork._backend import BACKEND
from quasiwork.errors import GridTooCoarseError, ZeroCoherenceError
from quasiwork.model import (
    PAULI_X,
    PAULI_Z,
    DetectorSpec,
    HamiltonianSchedule,
    SystemState,
    amplitude_damping_channel,
)
from quasiwork.protocol import (
    Event,
    EventKind,
    ProtocolKind,
    _stack_step_data,
    _tilted_sweep_jit,
    _tilted_sweep_numpy,
    build_schedule,
    default_chi_grid,
    qcgf,
)

KINDS = list(ProtocolKind)


def driven_setup(steps: int = 2, p: float = 0.4):
    hams = tuple(-0.5 * PAULI_Z + 0.2 * (s / max(steps, 1)) * PAULI_X
                 for s in range(steps + 1))
    sched = HamiltonianSchedule(total_time=1.7, hams=hams)
    ch = amplitude_damping_channel(sched, p)
    state = SystemState.plus_x(sched)
    return sched, ch, state


def constant_setup(p: float):
    sched = HamiltonianSchedule(total_time=1.0,
                                hams=(-0.5 * PAULI_Z,) * 3)
    ch = amplitude_damping_channel(sched, p)
    state = SystemState.from_matrix(np.diag([0.3, 0.7]).astype(complex))
    return sched, ch, state


class TestEventLayout:
    def test_internal_energy_sandwiches_everything(self):
        sched, _, _ = driven_setup(steps=2)
        ps = build_schedule(ProtocolKind.INTERNAL_ENERGY, sched)
        assert ps.events == (
            Event(EventKind.COUPLE_MINUS, 0),
            Event(EventKind.UNITARY, 0), Event(EventKind.DISSIPATE, 0),
            Event(EventKind.UNITARY, 1), Event(EventKind.DISSIPATE, 1),
            Event(EventKind.UNITARY, 2), Event(EventKind.DISSIPATE, 2),
            Event(EventKind.COUPLE_PLUS, 2),
        )

    def test_heat_wraps_each_dissipator(self):
        sched, _, _ = driven_setup(steps=1)
        ps = build_schedule(ProtocolKind.HEAT, sched)
        assert ps.events == (
            Event(EventKind.UNITARY, 0), Event(EventKind.COUPLE_PLUS, 0),
            Event(EventKind.DISSIPATE, 0), Event(EventKind.COUPLE_MINUS, 0),
            Event(EventKind.UNITARY, 1), Event(EventKind.COUPLE_PLUS, 1),
            Event(EventKind.DISSIPATE, 1), Event(EventKind.COUPLE_MINUS, 1),
        )

    def test_work_combines_both(self):
        sched, _, _ = driven_setup(steps=1)
        ps = build_schedule(ProtocolKind.WORK, sched)
        assert ps.events[0] == Event(EventKind.COUPLE_MINUS, 0)
        assert ps.events[-1] == Event(EventKind.COUPLE_PLUS, 1)
        inner = ps.events[1:-1]
        heat = build_schedule(ProtocolKind.HEAT, sched).events
        assert inner == heat

    def test_injection_flips_sandwich_couplings_only(self):
        sched, _, _ = driven_setup(steps=1)
        ps = build_schedule(ProtocolKind.WORK, sched, inject="heat-sign-flip")
        assert ps.events[0] == Event(EventKind.COUPLE_MINUS, 0)
        assert ps.events[-1] == Event(EventKind.COUPLE_PLUS, 1)
        assert ps.events[2] == Event(EventKind.COUPLE_MINUS, 0)
        assert ps.events[4] == Event(EventKind.COUPLE_PLUS, 0)
        with pytest.raises(ValueError):
            build_schedule(ProtocolKind.HEAT, sched, inject="nonsense")


class TestChiGrid:
    def test_default_grid_shape(self):
        sched, _, _ = driven_setup()
        grid = default_chi_grid(sched)
        assert grid.shape == (257,)
        assert grid[128] == 0.0
        assert_allclose(grid, -grid[::-1], atol=1e-12, rtol=0.0)

    def test_rejects_even_or_tiny(self):
        sched, _, _ = driven_setup()
        for points in (2, 4, 1, -3):
            with pytest.raises(GridTooCoarseError):
                default_chi_grid(sched, points)


class TestQcgf:
    @pytest.mark.parametrize("kind", KINDS)
    def test_origin_and_bound(self, kind):
        sched, ch, state = driven_setup()
        det = DetectorSpec.standard()
        g = qcgf(state, det, kind, ch, sched, default_chi_grid(sched, 65))
        assert g.values[32] == pytest.approx(1.0, abs=1e-13)
        assert np.max(np.abs(g.values)) <= 1.0 + 1e-9

    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("p", [0.0, 0.4, 1.0])
    def test_tilted_matches_joint(self, kind, p):
        sched, ch, state = driven_setup(p=p)
        det = DetectorSpec.standard()
        grid = np.linspace(-5.0, 5.0, 21)
        tilted = qcgf(state, det, kind, ch, sched, grid, route="tilted")
        joint = qcgf(state, det, kind, ch, sched, grid, route="joint")
        assert_allclose(tilted.values, joint.values, atol=1e-13, rtol=0.0)

    def test_strong_damping_internal_energy_closed_form(self):
        sched, ch, state = constant_setup(p=1.0)
        det = DetectorSpec.standard()
        grid = np.linspace(-3.0, 3.0, 31)
        g = qcgf(state, det, ProtocolKind.INTERNAL_ENERGY, ch, sched, grid)
        expected = 0.3 + 0.7 * np.exp(-1j * grid)
        assert_allclose(g.values, expected, atol=1e-12, rtol=0.0)

    def test_closed_drive_heat_is_unity(self):
        sched, ch, state = driven_setup(p=0.0)
        det = DetectorSpec.standard()
        grid = np.linspace(-4.0, 4.0, 17)
        g = qcgf(state, det, ProtocolKind.HEAT, ch, sched, grid)
        assert_allclose(g.values, np.ones(17), atol=1e-12, rtol=0.0)

    def test_coupling_strength_rescales_chi(self):
        sched, ch, state = driven_setup()
        chis = np.linspace(-2.0, 2.0, 9)
        lam = 1.75
        det_scaled = DetectorSpec(hamiltonian=lam * PAULI_Z, lam=lam,
                                  lam_prime=-lam,
                                  rho=np.full((2, 2), 0.5, dtype=complex))
        g_scaled = qcgf(state, det_scaled, ProtocolKind.WORK, ch, sched, chis)
        g_unit = qcgf(state, DetectorSpec.standard(), ProtocolKind.WORK, ch,
                      sched, lam * chis)
        assert_allclose(g_scaled.values, g_unit.values, atol=1e-13, rtol=0.0)

    def test_zero_coherence_rejected(self):
        sched, ch, state = driven_setup()
        det = DetectorSpec(hamiltonian=PAULI_Z, lam=1.0, lam_prime=-1.0,
                           rho=np.diag([1.0, 0.0]).astype(complex))
        with pytest.raises(ZeroCoherenceError):
            qcgf(state, det, ProtocolKind.WORK, ch, sched, [0.0, 1.0])

    def test_grid_validation(self):
        sched, ch, state = driven_setup()
        det = DetectorSpec.standard()
        with pytest.raises(GridTooCoarseError):
            qcgf(state, det, ProtocolKind.WORK, ch, sched, [])
        with pytest.raises(GridTooCoarseError):
            qcgf(state, det, ProtocolKind.WORK, ch, sched, [0.0, np.nan])
        with pytest.raises(GridTooCoarseError):
            qcgf(state, det, ProtocolKind.WORK, ch, sched,
                 np.zeros((3, 3)))


@pytest.mark.skipif(BACKEND != "numba", reason="needs the accelerated lane")
def test_sweep_lanes_agree():
    sched, ch, state = driven_setup(steps=3, p=0.3)
    det = DetectorSpec.standard()
    ps = build_schedule(ProtocolKind.WORK, sched)
    energies, vectors, unitaries, kraus, counts = _stack_step_data(sched, ch)
    from quasiwork.protocol import _encode_events

    ev_kinds, ev_steps = _encode_events(ps)
    chis = np.linspace(-6.0, 6.0, 41)
    args = (chis, np.ascontiguousarray(state.rho), energies, vectors,
            unitaries, kraus, counts, ev_kinds, ev_steps, det.lam,
            det.lam_prime)
    fast = np.asarray(_tilted_sweep_jit(*args))
    plain = np.asarray(_tilted_sweep_numpy(*args))
    assert_allclose(fast, plain, atol=1e-14, rtol=0.0)
