"""Derived quantities: moments, comb recovery, balance checks,
negativity diagnostics, and reference distributions.

The generating function and the delta combs describe the same object,
so every quantity here can be cross-checked between representations:
stencil derivatives of G must match comb-weighted averages, a comb
recovered from G samples must match the directly computed comb, and
the three average energies must balance exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    GridTooCoarseError,
    IllConditionedError,
    InvariantViolationError,
    WrongDimensionError,
)
from .linalg import phase_conjugate
from .model import HamiltonianSchedule, KrausChannel, SystemState
from .pathsum import POSITION_TOL, ZERO_TOL, DeltaComb
from .protocol import ProtocolKind, QcgfSamples

#: Conditioning cap for comb recovery.  Beyond this, least-squares
#: weight errors can exceed what the fit residual suggests, so the
#: recovery refuses rather than returning sloppy weights.
COND_CAP = 1e8

#: Residual cap for comb recovery: larger residuals mean the candidate
#: set does not span the true support or the fit is too noisy.
RECOVERY_RESIDUAL_TOL = 1e-10

#: Default cap on candidate-set size during recovery preprocessing.
CANDIDATE_CAP = 800


def comb_average(comb: DeltaComb, power: int = 1) -> float:
    """Weighted power mean ``sum_c w_c v_c^power``.

    ``power=0`` returns the total weight (1 for a normalized comb),
    ``power=1`` the quasi-expectation value, and so on.
    """
    if not isinstance(power, (int, np.integer)) or power < 0:
        raise ValueError(f"power must be a nonnegative integer, got {power!r}")
    return float(np.sum(comb.weights * comb.values.astype(np.float64) ** power))


def _center_index(chis: np.ndarray) -> int:
    hits = np.flatnonzero(chis == 0.0)
    if hits.size == 0:
        raise GridTooCoarseError(
            "quasi-moment stencils need an exact chi = 0 sample on the grid"
        )
    return int(hits[0])


def quasi_moment(g: QcgfSamples, order: int) -> float:
    """n-th quasi-moment from G samples: ``(-i)^n d^n G / d chi^n`` at 0.

    Uses central finite differences on the five samples around chi = 0
    (fourth-order accurate for orders 1 and 2, second-order for 3 and
    4).  The grid must contain chi = 0 exactly, extend two samples to
    each side of it, and be uniform there.
    """
    if order not in (1, 2, 3, 4):
        raise ValueError(f"order must be 1..4, got {order}")
    chis = g.chis
    vals = g.values
    i0 = _center_index(chis)
    if i0 < 2 or i0 + 2 >= chis.shape[0]:
        raise GridTooCoarseError(
            "need two grid samples on each side of chi = 0 for the stencils"
        )
    local = chis[i0 - 2:i0 + 3]
    spacings = np.diff(local)
    h = float(spacings.mean())
    if h <= 0 or np.max(np.abs(spacings - h)) > 1e-9 * abs(h):
        raise GridTooCoarseError(
            "grid must be uniform across the five samples around chi = 0"
        )
    gm2, gm1, g0, gp1, gp2 = (vals[i0 - 2], vals[i0 - 1], vals[i0],
                              vals[i0 + 1], vals[i0 + 2])
    if order == 1:
        deriv = (-gp2 + 8.0 * gp1 - 8.0 * gm1 + gm2) / (12.0 * h)
    elif order == 2:
        deriv = (-gp2 + 16.0 * gp1 - 30.0 * g0 + 16.0 * gm1 - gm2) / (12.0 * h * h)
    elif order == 3:
        deriv = (gp2 - 2.0 * gp1 + 2.0 * gm1 - gm2) / (2.0 * h ** 3)
    else:
        deriv = (gp2 - 4.0 * gp1 + 6.0 * g0 - 4.0 * gm1 + gm2) / h ** 4
    moment = (-1j) ** order * deriv
    if abs(moment.imag) > 1e-6 * max(1.0, abs(moment.real)):
        raise InvariantViolationError(
            f"order-{order} quasi-moment kept imaginary part {moment.imag:.3e};"
            " the underlying comb weights should be real"
        )
    return float(moment.real)


def stencil_chi_grid(sched: HamiltonianSchedule, lam: float = 1.0,
                     step_scale: float = 1e-3) -> np.ndarray:
    """Five-point grid around chi = 0 sized for accurate stencils.

    The step shrinks with the largest comb value the protocol can
    reach, keeping the truncation error of the fourth-order stencils
    near 1e-10 independent of the energy scale.
    """
    bound = max(1.0, abs(lam) * 2.0 * sched.energy_scale() * (sched.steps + 2))
    h = step_scale / bound
    return np.array([-2.0 * h, -h, 0.0, h, 2.0 * h])


def recover_comb(g: QcgfSamples, candidate_values, cond_cap: float = COND_CAP,
                 residual_tol: float = RECOVERY_RESIDUAL_TOL) -> DeltaComb:
    """Fit peak weights at known candidate positions to the G samples.

    Solves the real-valued least-squares system built from
    ``G(chi) = sum_c w_c e^{+i chi f_c}`` with the real and imaginary
    parts stacked.  Raises :class:`GridTooCoarseError` when the grid
    has fewer samples than candidates, :class:`IllConditionedError`
    when the design matrix conditioning exceeds ``cond_cap`` or the fit
    residual exceeds ``residual_tol`` (candidates that do not span the
    true support show up this way).
    """
    cands = np.sort(np.asarray(candidate_values, dtype=np.float64).ravel())
    if cands.size == 0:
        raise ValueError("need at least one candidate value")
    if g.chis.shape[0] < cands.size:
        raise GridTooCoarseError(
            f"{g.chis.shape[0]} grid samples cannot resolve {cands.size}"
            " candidate peaks"
        )
    e = np.exp(1j * np.outer(g.chis, cands))
    design = np.vstack([e.real, e.imag])
    target = np.concatenate([g.values.real, g.values.imag])
    cond = float(np.linalg.cond(design))
    if cond > cond_cap:
        raise IllConditionedError(
            f"recovery design matrix conditioning {cond:.3e} exceeds"
            f" {cond_cap:.1e}; candidate values are too close or too many"
        )
    weights, *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.max(np.abs(e @ weights - g.values)))
    if residual > residual_tol:
        raise IllConditionedError(
            f"recovery residual {residual:.3e} exceeds {residual_tol:.1e};"
            " the candidate set misses part of the true support"
        )
    return DeltaComb.from_complex(
        cands, weights.astype(np.complex128),
        merge_tol=1e-12 * max(1.0, float(np.max(np.abs(cands)))),
        prune_tol=1e-10, total_tol=1e-8,
    )


def _dedup(values: np.ndarray, tol: float) -> np.ndarray:
    if values.size == 0:
        return values
    v = np.sort(values)
    groups = np.flatnonzero(np.diff(v) > tol)
    starts = np.concatenate(([0], groups + 1))
    stops = np.concatenate((groups + 1, [v.size]))
    return np.array([v[a:b].mean() for a, b in zip(starts, stops)])


def candidate_values(sched: HamiltonianSchedule, ch: KrausChannel,
                     kind: ProtocolKind, lam: float = 1.0,
                     zero_tol: float = ZERO_TOL,
                     cap: int = CANDIDATE_CAP) -> np.ndarray:
    """Reachable comb positions for ``kind``, from the channel structure.

    Heat positions come from per-step jump increments (energy gaps the
    Kraus operators actually connect), summed along the protocol with
    de-duplication per step; internal-energy positions pair every final
    eigenvalue with every initial bra/ket eigenvalue pair; work
    positions are sums of the two.  Raises
    :class:`IllConditionedError` when the running set exceeds ``cap``,
    which happens for generic drives at large step counts; recovery is
    simply not well posed there.
    """
    lam = float(lam)
    n = sched.steps
    e0 = sched.eig(0).values
    en = sched.eig(n).values
    scale = max(1.0, abs(lam) * 2.0 * sched.energy_scale() * (n + 2))
    tol = 1e-10 * scale

    du_pairs = _dedup(np.array([
        lam * (en[e] - 0.5 * (e0[a] + e0[b]))
        for e in range(en.size) for a in range(e0.size) for b in range(e0.size)
    ]), tol)

    if kind == ProtocolKind.INTERNAL_ENERGY:
        return du_pairs

    side = np.array([0.0])
    for s in range(n + 1):
        eig = sched.eig(s)
        incs = set()
        for m in ch.ops[s]:
            k_eig = eig.vectors.conj().T @ m @ eig.vectors
            for nn in range(eig.dim):
                for ii in range(eig.dim):
                    if abs(k_eig[nn, ii]) > zero_tol:
                        incs.add(float(eig.values[ii] - eig.values[nn]))
        inc_arr = _dedup(np.array(sorted(incs)), tol)
        side = _dedup((side[:, None] + inc_arr[None, :]).ravel(), tol)
        if side.size > cap:
            raise IllConditionedError(
                f"per-side heat candidate set grew to {side.size} (> {cap})"
                f" at step {s}; recovery is not well posed for this drive"
            )
    heat_pairs = _dedup(
        (0.5 * lam * (side[:, None] + side[None, :])).ravel(), tol
    )
    if heat_pairs.size > cap:
        raise IllConditionedError(
            f"heat candidate set has {heat_pairs.size} values (> {cap})"
        )
    if kind == ProtocolKind.HEAT:
        return heat_pairs

    work = _dedup((heat_pairs[:, None] + du_pairs[None, :]).ravel(), tol)
    if work.size > cap:
        raise IllConditionedError(
            f"work candidate set has {work.size} values (> {cap})"
        )
    return work


@dataclass(frozen=True)
class EnergyAccount:
    """First moments of the three distributions and their balance."""

    internal_energy: float
    heat: float
    work: float

    @property
    def residual(self) -> float:
        """work - heat - internal energy change; zero when balanced."""
        return self.work - self.heat - self.internal_energy

    def balanced(self, tol: float = 1e-10) -> bool:
        return abs(self.residual) <= tol


def energy_account(du_comb: DeltaComb, q_comb: DeltaComb,
                   w_comb: DeltaComb) -> EnergyAccount:
    """Average internal energy change, heat, and work from the combs."""
    return EnergyAccount(
        internal_energy=comb_average(du_comb),
        heat=comb_average(q_comb),
        work=comb_average(w_comb),
    )


@dataclass(frozen=True)
class NegativityReport:
    """Where and how strongly a comb leaves the classical range.

    ``negativity`` is the total negative mass (a nonnegative number)
    and ``negative_values`` the positions carrying it.
    ``half_quantum_weight`` is the total absolute weight sitting within
    tolerance of the two half-gap positions, which classical two-time
    statistics cannot populate at all; ``half_quantum_pairs`` gives the
    net weight at each of the two positions.
    """

    negativity: float
    negative_values: tuple[float, ...]
    half_quantum_weight: float
    half_quantum_pairs: tuple[tuple[float, float], tuple[float, float]]


def negativity_report(comb: DeltaComb, gap: float) -> NegativityReport:
    """Negativity and half-quantum content of a comb.

    ``gap`` is the relevant level spacing; the half-quantum positions
    are at plus and minus half of it.
    """
    if gap <= 0:
        raise WrongDimensionError(f"gap must be positive, got {gap}")
    neg_mask = comb.weights < 0.0
    negativity = float(-comb.weights[neg_mask].sum()) + 0.0
    negative_values = tuple(float(v) for v in comb.values[neg_mask])
    half = 0.5 * gap
    w_minus = comb.weight_at(-half)
    w_plus = comb.weight_at(half)
    return NegativityReport(
        negativity=negativity,
        negative_values=negative_values,
        half_quantum_weight=abs(w_minus) + abs(w_plus),
        half_quantum_pairs=((-half, w_minus), (half, w_plus)),
    )


def _total_unitary(sched: HamiltonianSchedule) -> np.ndarray:
    u = np.eye(sched.dim, dtype=np.complex128)
    for s in range(sched.steps + 1):
        u = phase_conjugate(sched.eig(s), sched.dt) @ u
    return u


def tmp_distribution(state: SystemState, sched: HamiltonianSchedule) -> DeltaComb:
    """Two-projective-measurement work distribution of the closed drive.

    Projectively measure the energy at the start (collapsing initial
    coherences), evolve with the drive alone, measure again; the work
    histogram is the classical reference the quasi-probability comb
    must reduce to whenever the dynamics is closed and the initial
    state carries no coherence between distinct energy levels.
    """
    eig0 = sched.eig(0)
    eign = sched.eig(sched.steps)
    u = _total_unitary(sched)
    pops = np.real(np.diag(eig0.vectors.conj().T @ state.rho @ eig0.vectors))
    amp = eign.vectors.conj().T @ u @ eig0.vectors
    probs = np.abs(amp) ** 2
    values = []
    weights = []
    for e in range(eign.dim):
        for a in range(eig0.dim):
            values.append(eign.values[e] - eig0.values[a])
            weights.append(probs[e, a] * pops[a])
    scale = max(1.0, float(np.max(np.abs(values))))
    return DeltaComb.from_complex(values, weights,
                                  merge_tol=POSITION_TOL * scale)


def oracle_average_work(state: SystemState, sched: HamiltonianSchedule) -> float:
    """Average work on the closed system, straight from the dynamics.

    Final energy expectation under the full drive unitary minus the
    initial energy expectation.  Independent of every counting
    construction, so it anchors the sign and scale of the work
    distributions.
    """
    u = _total_unitary(sched)
    rho_final = u @ state.rho @ u.conj().T
    e_final = float(np.trace(sched.hams[sched.steps] @ rho_final).real)
    e_initial = float(np.trace(sched.hams[0] @ state.rho).real)
    return e_final - e_initial
