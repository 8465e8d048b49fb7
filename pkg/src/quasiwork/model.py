"""Physical model objects: drive schedules, Kraus channels, detector
and system preparations.

A protocol run is specified by a piecewise-constant Hamiltonian
schedule (N + 1 samples over a total time T), a per-step Kraus channel
acting between drive blocks, a system density matrix, and a two-level
detector whose off-diagonal coherence carries the generating function.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BadProbabilityError,
    DimensionMismatchError,
    NonHermitianSampleError,
    WrongDimensionError,
    ZeroCoherenceError,
)
from .linalg import (
    HERMITICITY_TOL,
    HermitianEig,
    as_complex_matrix,
    hermitian_eig,
    require_hermitian,
)

#: Largest system dimension the model layer accepts.  The joint space
#: with the qubit detector then stays within the dense-solver cap.
MAX_SYSTEM_DIM = 8

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
IDENTITY2 = np.eye(2, dtype=np.complex128)


def _validate_system_dim(d: int, name: str) -> None:
    if d < 2 or d > MAX_SYSTEM_DIM:
        raise WrongDimensionError(
            f"{name} dimension {d} outside supported system range 2..{MAX_SYSTEM_DIM}"
        )


@dataclass(frozen=True)
class HamiltonianSchedule:
    """Piecewise-constant drive: samples ``hams[s]`` for s = 0..N.

    ``total_time`` is the nominal protocol duration T; each of the
    N + 1 blocks evolves for ``dt = T / max(N, 1)`` (a single block of
    length T when N = 0).  Eigendecompositions of the samples are
    computed once on first use and shared by every consumer, so all
    routes see identical eigenbases.
    """

    total_time: float
    hams: tuple[np.ndarray, ...]
    _eigs: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if not np.isfinite(self.total_time) or self.total_time <= 0.0:
            raise WrongDimensionError(
                f"total_time must be positive and finite, got {self.total_time}"
            )
        if len(self.hams) < 1:
            raise WrongDimensionError("schedule needs at least one Hamiltonian sample")
        checked = []
        d = None
        for s, h in enumerate(self.hams):
            try:
                hm = require_hermitian(h, HERMITICITY_TOL, name=f"sample {s}")
            except Exception as exc:
                raise NonHermitianSampleError(str(exc)) from exc
            if d is None:
                d = hm.shape[0]
                _validate_system_dim(d, "system Hamiltonian")
            elif hm.shape[0] != d:
                raise DimensionMismatchError(
                    f"sample {s} has dimension {hm.shape[0]}, expected {d}"
                )
            hm.flags.writeable = False
            checked.append(hm)
        object.__setattr__(self, "hams", tuple(checked))

    @property
    def steps(self) -> int:
        """N: number of inter-sample intervals (samples run s = 0..N)."""
        return len(self.hams) - 1

    @property
    def dim(self) -> int:
        return self.hams[0].shape[0]

    @property
    def dt(self) -> float:
        return self.total_time / max(self.steps, 1)

    def eig(self, s: int) -> HermitianEig:
        """Cached eigendecomposition of sample ``s``."""
        if not self._eigs:
            self._eigs.extend(hermitian_eig(h) for h in self.hams)
        return self._eigs[s]

    def energy_scale(self) -> float:
        """Largest |eigenvalue| across all samples (0 for the null drive)."""
        return max(
            (float(np.max(np.abs(self.eig(s).values))) for s in range(self.steps + 1)),
            default=0.0,
        )

    def step_function(self) -> Callable[[float], np.ndarray]:
        """Return ``h(t)`` that reproduces the samples at t = s * dt.

        Re-discretizing the returned function with the same T and N
        gives back the stored samples exactly, which makes round trips
        through :func:`discretize_drive` idempotent.
        """
        dt = self.dt
        n = self.steps

        def h_of_t(t: float) -> np.ndarray:
            s = int(round(t / dt))
            return self.hams[min(max(s, 0), n)]

        return h_of_t


def discretize_drive(h_of_t: Callable[[float], np.ndarray], total_time: float,
                     steps: int) -> HamiltonianSchedule:
    """Sample a time-dependent Hamiltonian into a schedule.

    ``h_of_t`` is evaluated at t = s * dt for s = 0..steps with
    ``dt = total_time / max(steps, 1)``.  Every sample must be
    Hermitian within the standard tolerance and share one dimension.
    """
    if steps < 0:
        raise WrongDimensionError(f"steps must be >= 0, got {steps}")
    if not np.isfinite(total_time) or total_time <= 0.0:
        raise WrongDimensionError(f"total_time must be positive, got {total_time}")
    dt = total_time / max(steps, 1)
    samples = tuple(np.asarray(h_of_t(s * dt)) for s in range(steps + 1))
    return HamiltonianSchedule(total_time=float(total_time), hams=samples)


@dataclass(frozen=True)
class KrausChannel:
    """Per-step Kraus families: ``ops[s]`` lists the operators applied
    after drive block s, for s = 0..N.

    Construction validates shapes only; completeness (each family
    summing to the identity) is checked by :func:`validate_channel`,
    which the protocol engines call before use.
    """

    ops: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        if len(self.ops) < 1:
            raise WrongDimensionError("channel needs at least one step")
        d = None
        checked_steps = []
        for s, family in enumerate(self.ops):
            if len(family) < 1:
                raise WrongDimensionError(f"step {s} has no Kraus operators")
            checked = []
            for k, op in enumerate(family):
                m = as_complex_matrix(op, name=f"Kraus operator {k} at step {s}")
                if d is None:
                    d = m.shape[0]
                    _validate_system_dim(d, "Kraus operator")
                elif m.shape[0] != d:
                    raise DimensionMismatchError(
                        f"Kraus operator {k} at step {s} has dimension {m.shape[0]},"
                        f" expected {d}"
                    )
                m.flags.writeable = False
                checked.append(m)
            checked_steps.append(tuple(checked))
        object.__setattr__(self, "ops", tuple(checked_steps))

    @property
    def steps(self) -> int:
        return len(self.ops) - 1

    @property
    def dim(self) -> int:
        return self.ops[0][0].shape[0]


@dataclass(frozen=True)
class ChannelReport:
    """Completeness diagnostics from :func:`validate_channel`."""

    residuals: tuple[float, ...]
    tol: float

    @property
    def worst(self) -> float:
        return max(self.residuals)

    @property
    def ok(self) -> bool:
        return self.worst <= self.tol


def validate_channel(channel: KrausChannel, tol: float = 1e-12) -> ChannelReport:
    """Check trace preservation per step: ``sum_k K^H K == I``.

    Returns a report with the max-norm residual for every step; the
    engines raise :class:`BadProbabilityError` when ``report.ok`` is
    false.
    """
    eye = np.eye(channel.dim)
    residuals = []
    for family in channel.ops:
        acc = np.zeros((channel.dim, channel.dim), dtype=np.complex128)
        for op in family:
            acc += op.conj().T @ op
        residuals.append(float(np.max(np.abs(acc - eye))))
    return ChannelReport(residuals=tuple(residuals), tol=tol)


def require_valid_channel(channel: KrausChannel, tol: float = 1e-12) -> None:
    report = validate_channel(channel, tol)
    if not report.ok:
        raise BadProbabilityError(
            f"Kraus families are not trace preserving: worst residual"
            f" {report.worst:.3e} exceeds {tol:.1e}"
        )


def amplitude_damping(p: float, step_eig: HermitianEig) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude-damping Kraus pair in the lab frame of one drive step.

    Decay acts in the instantaneous eigenbasis of the step Hamiltonian:
    with probability ``p`` the excited eigenstate drops to the ground
    eigenstate.  Only two-level systems are supported; larger systems
    need hand-built Kraus families.
    """
    if not 0.0 <= p <= 1.0:
        raise BadProbabilityError(f"decay probability must lie in [0, 1], got {p}")
    if step_eig.dim != 2:
        raise WrongDimensionError(
            f"amplitude damping is defined for dimension 2, got {step_eig.dim}"
        )
    v = step_eig.vectors
    keep = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - p)]], dtype=np.complex128)
    drop = np.array([[0.0, np.sqrt(p)], [0.0, 0.0]], dtype=np.complex128)
    return v @ keep @ v.conj().T, v @ drop @ v.conj().T


def amplitude_damping_channel(sched: HamiltonianSchedule,
                              p: float | Sequence[float]) -> KrausChannel:
    """Amplitude damping after every drive block.

    ``p`` may be a single probability shared by all steps or a sequence
    of length N + 1.
    """
    n = sched.steps
    if np.isscalar(p):
        probs = [float(p)] * (n + 1)
    else:
        probs = [float(x) for x in p]
        if len(probs) != n + 1:
            raise DimensionMismatchError(
                f"need {n + 1} decay probabilities, got {len(probs)}"
            )
    ops = tuple(amplitude_damping(probs[s], sched.eig(s)) for s in range(n + 1))
    return KrausChannel(ops=ops)


def closed_channel(sched: HamiltonianSchedule) -> KrausChannel:
    """The do-nothing channel (a single identity Kraus at every step)."""
    eye = np.eye(sched.dim, dtype=np.complex128)
    return KrausChannel(ops=tuple((eye,) for _ in range(sched.steps + 1)))


@dataclass(frozen=True)
class SystemState:
    """Validated system density matrix."""

    rho: np.ndarray

    def __post_init__(self):
        m = require_hermitian(self.rho, name="density matrix")
        _validate_system_dim(m.shape[0], "density matrix")
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > 1e-12:
            raise BadProbabilityError(f"density matrix trace is {tr!r}, expected 1")
        w = hermitian_eig(m).values
        if float(w.min()) < -1e-10:
            raise BadProbabilityError(
                f"density matrix has a negative eigenvalue {w.min():.3e}"
            )
        m.flags.writeable = False
        object.__setattr__(self, "rho", m)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def from_matrix(cls, rho) -> "SystemState":
        return cls(rho=np.asarray(rho))

    @classmethod
    def ground(cls, sched: HamiltonianSchedule) -> "SystemState":
        """Lowest eigenstate of the initial Hamiltonian."""
        v = sched.eig(0).vectors[:, 0]
        return cls(rho=np.outer(v, v.conj()))

    @classmethod
    def excited(cls, sched: HamiltonianSchedule) -> "SystemState":
        """Highest eigenstate of the initial Hamiltonian."""
        v = sched.eig(0).vectors[:, -1]
        return cls(rho=np.outer(v, v.conj()))

    @classmethod
    def plus_x(cls, sched: HamiltonianSchedule) -> "SystemState":
        """Equal superposition of the two initial energy eigenstates.

        Defined for two-level systems; the deterministic eigenvector
        gauge makes the relative phase reproducible.
        """
        eig = sched.eig(0)
        if eig.dim != 2:
            raise WrongDimensionError(
                f"plus_x preparation is defined for dimension 2, got {eig.dim}"
            )
        v = (eig.vectors[:, 0] + eig.vectors[:, 1]) / np.sqrt(2.0)
        return cls(rho=np.outer(v, v.conj()))

    @classmethod
    def thermal(cls, sched: HamiltonianSchedule, beta: float) -> "SystemState":
        """Gibbs state of the initial Hamiltonian at inverse temperature beta."""
        eig = sched.eig(0)
        w = np.exp(-beta * (eig.values - eig.values.min()))
        w /= w.sum()
        return cls(rho=(eig.vectors * w) @ eig.vectors.conj().T)

    def dephased(self, sched: HamiltonianSchedule) -> "SystemState":
        """Drop coherences between initial energy eigenstates.

        The populations in the eigenbasis of the first schedule sample
        are kept, every off-diagonal element there is zeroed.  This is
        the preparation an initial projective energy measurement leaves
        behind, so distributions computed from it are directly
        comparable to two-measurement statistics.
        """
        v = sched.eig(0).vectors
        pops = np.real(np.diag(v.conj().T @ self.rho @ v))
        return SystemState(rho=(v * pops) @ v.conj().T)


@dataclass(frozen=True)
class DetectorSpec:
    """Two-level detector: Hamiltonian, selected eigenvalue pair, and
    initial state.

    The generating function lives on the ``(lam, lam_prime)``
    off-diagonal element of the detector density matrix, so the
    preparation must have nonzero coherence there and the two selected
    eigenvalues must be distinct eigenvalues of the detector
    Hamiltonian.
    """

    hamiltonian: np.ndarray
    lam: float
    lam_prime: float
    rho: np.ndarray

    def __post_init__(self):
        h = require_hermitian(self.hamiltonian, name="detector Hamiltonian")
        if h.shape[0] != 2:
            raise WrongDimensionError(
                f"detector must be two-level, got dimension {h.shape[0]}"
            )
        r = require_hermitian(self.rho, name="detector state")
        if r.shape[0] != 2:
            raise WrongDimensionError(
                f"detector state must be 2x2, got dimension {r.shape[0]}"
            )
        tr = float(np.trace(r).real)
        if abs(tr - 1.0) > 1e-12:
            raise BadProbabilityError(f"detector state trace is {tr!r}, expected 1")
        w = hermitian_eig(r).values
        if float(w.min()) < -1e-10:
            raise BadProbabilityError(
                f"detector state has a negative eigenvalue {w.min():.3e}"
            )
        h.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "rho", r)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "lam_prime", float(self.lam_prime))
        # Resolve the selected eigenvalues now so bad pairs fail fast.
        self.eigen_indices()

    def eig(self) -> HermitianEig:
        return hermitian_eig(self.hamiltonian)

    def eigen_indices(self, tol: float = 1e-9) -> tuple[int, int]:
        """Indices of ``lam`` and ``lam_prime`` in the detector spectrum."""
        values = self.eig().values
        out = []
        for target, label in ((self.lam, "lam"), (self.lam_prime, "lam_prime")):
            hits = np.flatnonzero(np.abs(values - target) <= tol)
            if hits.size == 0:
                raise DimensionMismatchError(
                    f"{label}={target} is not an eigenvalue of the detector"
                    f" Hamiltonian (spectrum {values.tolist()})"
                )
            out.append(int(hits[0]))
        if out[0] == out[1]:
            raise DimensionMismatchError(
                "lam and lam_prime resolve to the same detector eigenstate;"
                " the protocol needs a coherence between two distinct levels"
            )
        return out[0], out[1]

    def coherence(self) -> complex:
        """Initial off-diagonal element ``<lam| rho |lam_prime>``."""
        eig = self.eig()
        i, j = self.eigen_indices()
        vi = eig.vectors[:, i]
        vj = eig.vectors[:, j]
        return complex(vi.conj() @ self.rho @ vj)

    def require_coherence(self, tol: float = 1e-12) -> complex:
        c = self.coherence()
        if abs(c) <= tol:
            raise ZeroCoherenceError(
                "detector preparation has no coherence between the selected"
                f" eigenstates (|<lam|rho|lam'>| = {abs(c):.3e})"
            )
        return c

    @classmethod
    def standard(cls) -> "DetectorSpec":
        """Pauli-Z detector with the (+1, -1) pair and a balanced
        superposition preparation."""
        plus = np.full((2, 2), 0.5, dtype=np.complex128)
        return cls(hamiltonian=PAULI_Z, lam=1.0, lam_prime=-1.0, rho=plus)
