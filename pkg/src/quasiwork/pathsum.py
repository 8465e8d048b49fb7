"""Path-pair decomposition of the generating function.

Expanding every evolution operator in the instantaneous eigenbases of
the drive turns the final detector coherence into a finite sum over
pairs of trajectories, one on the bra side and one on the ket side of
the density matrix.  A trajectory through step s occupies an eigenstate
``i_s`` after the basis switch, then takes a Kraus jump to ``n_s``; the
two sides share the Kraus operator index at every step, and the closing
trace forces the final indices of the two sides to coincide.

Each pair carries a complex weight (the product of overlap, phase, and
Kraus matrix elements together with the initial density matrix element)
and real labels built from eigenvalues along the way:

* internal energy change: end-point energy minus start-point energy;
* dissipated heat: the energy released in each Kraus jump, summed;
* work: heat plus the internal energy change, per side.

The quasi-probability distribution of a quantity is the delta comb
collecting pair weights at the pair label ``(lam/2)(x_bra + x_ket)``.
Two implementations exist: an explicit enumeration (exponential in the
step count, exact bookkeeping per pair) and a bucketed propagation that
carries value/weight tables through the steps (polynomial, used when
enumeration would blow past its budget).  Both must produce the same
comb.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import BACKEND, njit_or_python
from .errors import (
    EnumerationCapExceededError,
    NonRealWeightError,
    NormalizationError,
)
from .model import HamiltonianSchedule, KrausChannel, SystemState, require_valid_channel
from .protocol import ProtocolKind, _check_compatible

#: Matrix elements at or below this magnitude are treated as exact
#: zeros when branching; eigenvector gauge noise sits two orders below.
ZERO_TOL = 1e-14

#: Relative tolerance for merging nearby comb values in final output.
POSITION_TOL = 1e-9

#: Tighter merge used inside the step-by-step propagation.
_INTERNAL_TOL = 1e-12

#: Above this estimated pair count, automatic method selection switches
#: from enumeration to propagation.
AUTO_ENUM_BUDGET = 200_000

#: Hard default cap on enumerated pairs.
DEFAULT_ENUM_CAP = 10_000_000

_KIND_CODE = {
    ProtocolKind.INTERNAL_ENERGY: 0,
    ProtocolKind.HEAT: 1,
    ProtocolKind.WORK: 2,
}


# ---------------------------------------------------------------------------
# Delta combs


@dataclass(frozen=True)
class DeltaComb:
    """Weighted sum of delta peaks: ``sum_c weights[c] delta(F - values[c])``.

    ``values`` ascending, ``weights`` real (possibly negative; these
    are quasi-probabilities).  Construction normally goes through
    :meth:`from_complex`, which merges nearby values, validates that
    merged weights are real and sum to one, and prunes numerical dust.
    """

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if v.shape != w.shape or v.ndim != 1:
            raise ValueError("values and weights must be matching 1-D arrays")
        v.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.values.shape[0]

    def total(self) -> float:
        return float(self.weights.sum())

    def position_tol(self) -> float:
        """Default matching tolerance for this comb's value scale."""
        scale = max(1.0, float(np.max(np.abs(self.values))) if len(self) else 1.0)
        return POSITION_TOL * scale

    def weight_at(self, value: float, tol: float | None = None) -> float:
        """Summed weight of peaks within ``tol`` of ``value`` (0.0 if none)."""
        if tol is None:
            tol = self.position_tol()
        mask = np.abs(self.values - value) <= tol
        return float(self.weights[mask].sum())

    def as_pairs(self) -> list[tuple[float, float]]:
        return [(float(v), float(w)) for v, w in zip(self.values, self.weights)]

    @classmethod
    def from_complex(cls, values, weights, merge_tol: float | None = None,
                     imag_tol: float = 1e-10, prune_tol: float = 1e-13,
                     total_tol: float | None = 1e-10) -> "DeltaComb":
        """Build a comb from raw (possibly repeated) complex-weighted peaks.

        Values within ``merge_tol`` of each other collapse to their
        mean with summed weight.  Merged weights must be real within
        ``imag_tol`` and sum to 1 within ``total_tol`` (None skips the
        sum check); dust below ``prune_tol`` is dropped after those
        checks so pruning cannot mask a normalization failure.
        """
        v = np.asarray(values, dtype=np.float64).ravel()
        w = np.asarray(weights, dtype=np.complex128).ravel()
        if v.shape != w.shape:
            raise ValueError("values and weights must have matching length")
        if v.size == 0:
            raise ValueError("a comb needs at least one peak")
        if merge_tol is None:
            merge_tol = POSITION_TOL * max(1.0, float(np.max(np.abs(v))))
        mv, mw = _merge_sorted(v, w, merge_tol)
        worst_imag = float(np.max(np.abs(mw.imag)))
        if worst_imag > imag_tol:
            raise NonRealWeightError(
                f"merged comb weight keeps imaginary part {worst_imag:.3e}"
                f" (tolerance {imag_tol:.1e})"
            )
        real = mw.real.copy()
        if total_tol is not None:
            total = float(real.sum())
            if abs(total - 1.0) > total_tol:
                raise NormalizationError(
                    f"comb weights sum to 1{total - 1.0:+.3e},"
                    f" outside tolerance {total_tol:.1e}"
                )
        keep = np.abs(real) >= prune_tol
        if not np.any(keep):
            keep = np.ones_like(keep)
        return cls(values=mv[keep], weights=real[keep])


def _merge_sorted(values: np.ndarray, weights: np.ndarray, tol: float):
    """Sort peaks by value and coalesce groups closer than ``tol``."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    w = weights[order]
    boundaries = np.flatnonzero(np.diff(v) > tol)
    starts = np.concatenate(([0], boundaries + 1))
    stops = np.concatenate((boundaries + 1, [v.size]))
    mv = np.empty(starts.size)
    mw = np.empty(starts.size, dtype=np.complex128)
    for g in range(starts.size):
        a, b = starts[g], stops[g]
        mv[g] = v[a:b].mean()
        mw[g] = w[a:b].sum()
    return mv, mw


# ---------------------------------------------------------------------------
# Path pairs, explicit enumeration


@dataclass(frozen=True)
class PathPair:
    """One bra/ket trajectory pair with its weight and label tallies.

    ``bra_indices[s]`` is the eigenstate occupied during drive block s
    (after the basis switch), ``bra_jumps[s]`` the eigenstate right
    after the step-s Kraus event; same for the ket side.  ``kraus[s]``
    is the Kraus operator index, shared by both sides.  The tallies are
    per-side sums: heat collects jump energy releases, the internal
    energy change is final minus initial energy, and work is their sum,
    so the three labels satisfy work = heat + energy change by
    construction on every single pair.
    """

    bra_indices: tuple[int, ...]
    bra_jumps: tuple[int, ...]
    ket_indices: tuple[int, ...]
    ket_jumps: tuple[int, ...]
    kraus: tuple[int, ...]
    weight: complex
    heat_bra: float
    heat_ket: float
    du_bra: float
    du_ket: float

    @property
    def work_bra(self) -> float:
        return self.heat_bra + self.du_bra

    @property
    def work_ket(self) -> float:
        return self.heat_ket + self.du_ket

    def label(self, kind: ProtocolKind, lam: float = 1.0) -> float:
        """The comb position this pair contributes to."""
        if kind == ProtocolKind.INTERNAL_ENERGY:
            x1, x2 = self.du_bra, self.du_ket
        elif kind == ProtocolKind.HEAT:
            x1, x2 = self.heat_bra, self.heat_ket
        else:
            x1, x2 = self.work_bra, self.work_ket
        return 0.5 * lam * (x1 + x2)


def _eigenframe_data(state: SystemState, sched: HamiltonianSchedule,
                     ch: KrausChannel):
    """Everything the path walks need, rotated into step eigenbases."""
    n = sched.steps
    d = sched.dim
    kmax = max(len(f) for f in ch.ops)
    energies = np.zeros((n + 1, d))
    phases = np.zeros((n + 1, d), dtype=np.complex128)
    overlaps = np.zeros((n + 1, d, d), dtype=np.complex128)
    kraus = np.zeros((n + 1, kmax, d, d), dtype=np.complex128)
    counts = np.zeros(n + 1, dtype=np.int64)
    dt = sched.dt
    for s in range(n + 1):
        eig = sched.eig(s)
        energies[s] = eig.values
        phases[s] = np.exp(-1j * dt * eig.values)
        if s > 0:
            overlaps[s] = eig.vectors.conj().T @ sched.eig(s - 1).vectors
        counts[s] = len(ch.ops[s])
        for k, m in enumerate(ch.ops[s]):
            kraus[s, k] = eig.vectors.conj().T @ m @ eig.vectors
    v0 = sched.eig(0).vectors
    rho0 = v0.conj().T @ state.rho @ v0
    return rho0, energies, phases, overlaps, kraus, counts


def pair_count_estimate(sched: HamiltonianSchedule, ch: KrausChannel,
                        zero_tol: float = ZERO_TOL) -> int:
    """Upper bound on the surviving path-pair count.

    Per step, the two sides independently choose a (target, source)
    entry of some shared Kraus operator, so the branching factor is
    ``sum_k nnz(K_k)^2`` with operators expressed in the step
    eigenbasis.  Basis-switch overlaps can only prune further, so the
    product over steps bounds the enumeration size from above.
    """
    total = 1
    for s in range(sched.steps + 1):
        eig = sched.eig(s)
        branch = 0
        for m in ch.ops[s]:
            k_eig = eig.vectors.conj().T @ m @ eig.vectors
            nnz = int(np.count_nonzero(np.abs(k_eig) > zero_tol))
            branch += nnz * nnz
        total *= max(branch, 1)
        if total > 10**18:
            return total
    return total


def enumerate_path_pairs(state: SystemState, sched: HamiltonianSchedule,
                         ch: KrausChannel, cap: int = DEFAULT_ENUM_CAP,
                         zero_tol: float = ZERO_TOL):
    """Yield every path pair whose factors all clear the pruning threshold.

    Individual factors (initial density matrix element, basis-switch
    overlaps, Kraus elements) with magnitude at or below ``zero_tol``
    terminate a branch; products are never re-tested, so the pruning
    decisions match the accelerated accumulator exactly.  Raises
    :class:`EnumerationCapExceededError` before starting when the
    branching estimate exceeds ``cap``, and again defensively should
    the actual yield count pass it.
    """
    _check_compatible(state, ch, sched)
    require_valid_channel(ch)
    estimate = pair_count_estimate(sched, ch, zero_tol)
    if estimate > cap:
        raise EnumerationCapExceededError(
            f"estimated {estimate} path pairs exceeds cap {cap}"
        )
    rho0, energies, phases, overlaps, kraus, counts = _eigenframe_data(
        state, sched, ch
    )
    n = sched.steps
    d = sched.dim
    yielded = 0

    def walk(s, a, b, amp, heat_b, heat_k, trails):
        nonlocal yielded
        i_tr, n_tr, j_tr, m_tr, k_tr = trails
        for i in range(d):
            for j in range(d):
                if s == 0:
                    base = rho0[i, j]
                    if abs(base) <= zero_tol:
                        continue
                else:
                    oa = overlaps[s, i, a]
                    ob = overlaps[s, j, b]
                    if abs(oa) <= zero_tol or abs(ob) <= zero_tol:
                        continue
                    base = oa * ob.conjugate()
                amp1 = amp * base * phases[s, i] * phases[s, j].conjugate()
                for k in range(counts[s]):
                    for nn in range(d):
                        if abs(kraus[s, k, nn, i]) <= zero_tol:
                            continue
                        mm_iter = (nn,) if s == n else range(d)
                        for mm in mm_iter:
                            if abs(kraus[s, k, mm, j]) <= zero_tol:
                                continue
                            amp2 = (amp1 * kraus[s, k, nn, i]
                                    * kraus[s, k, mm, j].conjugate())
                            hb = heat_b + energies[s, i] - energies[s, nn]
                            hk = heat_k + energies[s, j] - energies[s, mm]
                            new_trails = (i_tr + (i,), n_tr + (nn,),
                                          j_tr + (j,), m_tr + (mm,),
                                          k_tr + (k,))
                            if s == n:
                                yielded += 1
                                if yielded > cap:
                                    raise EnumerationCapExceededError(
                                        f"enumeration passed cap {cap}"
                                    )
                                i0 = new_trails[0][0]
                                j0 = new_trails[2][0]
                                yield PathPair(
                                    bra_indices=new_trails[0],
                                    bra_jumps=new_trails[1],
                                    ket_indices=new_trails[2],
                                    ket_jumps=new_trails[3],
                                    kraus=new_trails[4],
                                    weight=complex(amp2),
                                    heat_bra=float(hb),
                                    heat_ket=float(hk),
                                    du_bra=float(energies[n, nn]
                                                 - energies[0, i0]),
                                    du_ket=float(energies[n, mm]
                                                 - energies[0, j0]),
                                )
                            else:
                                yield from walk(s + 1, nn, mm, amp2, hb, hk,
                                                new_trails)

    yield from walk(0, -1, -1, 1.0 + 0.0j, 0.0, 0.0, ((), (), (), (), ()))


# ---------------------------------------------------------------------------
# Enumeration-based comb accumulation (accelerated, both backend lanes)


def _enum_accumulate_impl(rho0, energies, phases, overlaps, kraus, counts,
                          kind_code, lam, zero_tol, cap,
                          out_labels, out_weights):
    """Iterative DFS over path pairs, emitting labels and weights.

    Mirrors :func:`enumerate_path_pairs` without building objects.  The
    flat per-depth choice index decodes to (i, j, k, n, m).  Returns
    the number of emitted pairs, or -1 if the output buffers would
    overflow (the caller sizes them from the branching estimate, so a
    -1 indicates a bookkeeping bug rather than a user error).
    """
    n = energies.shape[0] - 1
    d = energies.shape[1]
    st_choice = np.zeros(n + 1, dtype=np.int64)
    st_a = np.zeros(n + 2, dtype=np.int64)
    st_b = np.zeros(n + 2, dtype=np.int64)
    st_i0 = np.zeros(n + 2, dtype=np.int64)
    st_j0 = np.zeros(n + 2, dtype=np.int64)
    st_amp = np.zeros(n + 2, dtype=np.complex128)
    st_hb = np.zeros(n + 2, dtype=np.float64)
    st_hk = np.zeros(n + 2, dtype=np.float64)
    st_amp[0] = 1.0 + 0.0j
    count = 0
    s = 0
    st_choice[0] = 0
    while s >= 0:
        cnt = counts[s]
        limit = d * d * cnt * d * d
        c = st_choice[s]
        advanced = False
        while c < limit:
            rem = c
            mm = rem % d
            rem //= d
            nn = rem % d
            rem //= d
            k = rem % cnt
            rem //= cnt
            j = rem % d
            i = rem // d
            c += 1
            if s == n and mm != nn:
                continue
            if s == 0:
                base = rho0[i, j]
                if abs(base) <= zero_tol:
                    continue
            else:
                oa = overlaps[s, i, st_a[s]]
                ob = overlaps[s, j, st_b[s]]
                if abs(oa) <= zero_tol or abs(ob) <= zero_tol:
                    continue
                base = oa * ob.conjugate()
            kb = kraus[s, k, nn, i]
            kk = kraus[s, k, mm, j]
            if abs(kb) <= zero_tol or abs(kk) <= zero_tol:
                continue
            amp = (st_amp[s] * base * phases[s, i] * phases[s, j].conjugate()
                   * kb * kk.conjugate())
            hb = st_hb[s] + energies[s, i] - energies[s, nn]
            hk = st_hk[s] + energies[s, j] - energies[s, mm]
            if s == 0:
                i0 = i
                j0 = j
            else:
                i0 = st_i0[s]
                j0 = st_j0[s]
            if s == n:
                if count >= cap:
                    return -1
                du_b = energies[n, nn] - energies[0, i0]
                du_k = energies[n, mm] - energies[0, j0]
                if kind_code == 0:
                    label = 0.5 * lam * (du_b + du_k)
                elif kind_code == 1:
                    label = 0.5 * lam * (hb + hk)
                else:
                    label = 0.5 * lam * (hb + hk + du_b + du_k)
                out_labels[count] = label
                out_weights[count] = amp
                count += 1
                continue
            st_choice[s] = c
            s += 1
            st_choice[s] = 0
            st_a[s] = nn
            st_b[s] = mm
            st_i0[s] = i0
            st_j0[s] = j0
            st_amp[s] = amp
            st_hb[s] = hb
            st_hk[s] = hk
            advanced = True
            break
        if not advanced:
            s -= 1
    return count


_enum_accumulate_jit = njit_or_python(cache=True)(_enum_accumulate_impl)


def _accumulate_enumerated(state, sched, ch, kind, lam, cap, zero_tol):
    estimate = pair_count_estimate(sched, ch, zero_tol)
    if estimate > cap:
        raise EnumerationCapExceededError(
            f"estimated {estimate} path pairs exceeds cap {cap}"
        )
    rho0, energies, phases, overlaps, kraus, counts = _eigenframe_data(
        state, sched, ch
    )
    out_labels = np.empty(estimate, dtype=np.float64)
    out_weights = np.empty(estimate, dtype=np.complex128)
    fn = _enum_accumulate_jit if BACKEND == "numba" else _enum_accumulate_impl
    count = fn(rho0, energies, phases, overlaps, kraus, counts,
               _KIND_CODE[kind], float(lam), float(zero_tol), estimate,
               out_labels, out_weights)
    if count < 0:
        raise EnumerationCapExceededError(
            f"enumeration passed its preallocated bound {estimate}"
        )
    return out_labels[:count], out_weights[:count]


# ---------------------------------------------------------------------------
# Bucketed propagation (polynomial alternative to enumeration)


def _merge_bucket(values: np.ndarray, weights: np.ndarray, tol: float):
    mv, mw = _merge_sorted(values, weights, tol)
    keep = np.abs(mw) > 1e-18
    if not np.any(keep):
        keep = np.ones_like(keep)
    return mv[keep], mw[keep]


def propagate_comb(state: SystemState, sched: HamiltonianSchedule,
                   ch: KrausChannel, lam: float, kind: ProtocolKind) -> DeltaComb:
    """Comb of ``kind`` by propagating value/weight tables step by step.

    The table for an index pair ``(bra, ket)`` holds every partial
    label reachable so far with its accumulated complex weight; each
    step applies the basis switch and the Kraus branching to whole
    tables instead of to individual paths, merging equal labels as it
    goes.  Matches enumeration up to the shared merge tolerance, at
    polynomial cost in the step count.
    """
    _check_compatible(state, ch, sched)
    require_valid_channel(ch)
    rho0, energies, phases, overlaps, kraus, counts = _eigenframe_data(
        state, sched, ch
    )
    n = sched.steps
    d = sched.dim
    lam = float(lam)
    scale = max(1.0, abs(lam) * 2.0 * float(np.max(np.abs(energies))) * (n + 2))
    tol_int = _INTERNAL_TOL * scale
    with_endpoints = kind in (ProtocolKind.INTERNAL_ENERGY, ProtocolKind.WORK)
    with_heat = kind in (ProtocolKind.HEAT, ProtocolKind.WORK)

    tables: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
    for i in range(d):
        for j in range(d):
            wij = rho0[i, j]
            if abs(wij) <= ZERO_TOL:
                continue
            start = (-0.5 * lam * (energies[0, i] + energies[0, j])
                     if with_endpoints else 0.0)
            tables[(i, j)] = (np.array([start]),
                              np.array([wij], dtype=np.complex128))

    for s in range(n + 1):
        if s > 0:
            switched: dict[tuple[int, int], list] = {}
            for (a, b), (vals, wts) in tables.items():
                for i in range(d):
                    oa = overlaps[s, i, a]
                    if abs(oa) <= ZERO_TOL:
                        continue
                    for j in range(d):
                        ob = overlaps[s, j, b]
                        if abs(ob) <= ZERO_TOL:
                            continue
                        f = oa * ob.conjugate()
                        switched.setdefault((i, j), []).append((vals, wts * f))
            tables = {
                key: _merge_bucket(np.concatenate([v for v, _ in chunks]),
                                   np.concatenate([w for _, w in chunks]),
                                   tol_int)
                for key, chunks in switched.items()
            }
        tables = {
            (i, j): (vals, wts * (phases[s, i] * phases[s, j].conjugate()))
            for (i, j), (vals, wts) in tables.items()
        }

        jumped: dict[tuple[int, int], list] = {}
        final_step = s == n
        for (i, j), (vals, wts) in tables.items():
            for k in range(counts[s]):
                for nn in range(d):
                    kb = kraus[s, k, nn, i]
                    if abs(kb) <= ZERO_TOL:
                        continue
                    mm_iter = (nn,) if final_step else range(d)
                    for mm in mm_iter:
                        kk = kraus[s, k, mm, j]
                        if abs(kk) <= ZERO_TOL:
                            continue
                        f = kb * kk.conjugate()
                        if with_heat:
                            inc = 0.5 * lam * (energies[s, i] - energies[s, nn]
                                               + energies[s, j] - energies[s, mm])
                            shifted = vals + inc
                        else:
                            shifted = vals
                        jumped.setdefault((nn, mm), []).append((shifted, wts * f))
        tables = {
            key: _merge_bucket(np.concatenate([v for v, _ in chunks]),
                               np.concatenate([w for _, w in chunks]), tol_int)
            for key, chunks in jumped.items()
        }

    all_vals = []
    all_wts = []
    for (i, j), (vals, wts) in tables.items():
        if i != j:
            continue
        if with_endpoints:
            vals = vals + lam * energies[n, i]
        all_vals.append(vals)
        all_wts.append(wts)
    values = np.concatenate(all_vals)
    weights = np.concatenate(all_wts)
    merge_tol = POSITION_TOL * max(1.0, float(np.max(np.abs(values))))
    return DeltaComb.from_complex(values, weights, merge_tol=merge_tol)


# ---------------------------------------------------------------------------
# Public distribution entry points


def _qpdf(state, sched, ch, lam, kind, method, cap, zero_tol) -> DeltaComb:
    if method not in ("auto", "enumerate", "propagate"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        estimate = pair_count_estimate(sched, ch, zero_tol)
        method = ("enumerate" if estimate <= min(cap, AUTO_ENUM_BUDGET)
                  else "propagate")
    if method == "propagate":
        return propagate_comb(state, sched, ch, lam, kind)
    labels, weights = _accumulate_enumerated(state, sched, ch, kind, lam, cap,
                                             zero_tol)
    merge_tol = POSITION_TOL * max(1.0, float(np.max(np.abs(labels))))
    return DeltaComb.from_complex(labels, weights, merge_tol=merge_tol)


def qpdf_internal_energy(state: SystemState, sched: HamiltonianSchedule,
                         ch: KrausChannel, lam: float = 1.0,
                         method: str = "auto", cap: int = DEFAULT_ENUM_CAP,
                         zero_tol: float = ZERO_TOL) -> DeltaComb:
    """Quasi-probability comb of the internal energy change."""
    return _qpdf(state, sched, ch, lam, ProtocolKind.INTERNAL_ENERGY, method,
                 cap, zero_tol)


def qpdf_heat(state: SystemState, sched: HamiltonianSchedule, ch: KrausChannel,
              lam: float = 1.0, method: str = "auto",
              cap: int = DEFAULT_ENUM_CAP,
              zero_tol: float = ZERO_TOL) -> DeltaComb:
    """Quasi-probability comb of the dissipated heat."""
    return _qpdf(state, sched, ch, lam, ProtocolKind.HEAT, method, cap, zero_tol)


def qpdf_work(state: SystemState, sched: HamiltonianSchedule, ch: KrausChannel,
              lam: float = 1.0, method: str = "auto",
              cap: int = DEFAULT_ENUM_CAP,
              zero_tol: float = ZERO_TOL) -> DeltaComb:
    """Quasi-probability comb of the work."""
    return _qpdf(state, sched, ch, lam, ProtocolKind.WORK, method, cap, zero_tol)


def comb_model_qcgf(comb: DeltaComb, chis) -> np.ndarray:
    """Generating function implied by a comb: ``sum_c w_c e^{+i chi f_c}``.

    The pointwise bridge between the path-sum and coherence routes.
    """
    chis = np.asarray(chis, dtype=np.float64)
    return np.exp(1j * np.outer(chis, comb.values)) @ comb.weights.astype(
        np.complex128
    )
