"""Scenario execution: one place that runs every route and cross-check.

The command line is a thin wrapper around :func:`run_scenario` and
:func:`run_sweep`; keeping the orchestration here makes the same code
path testable without argument parsing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import BACKEND
from .analysis import (
    EnergyAccount,
    NegativityReport,
    comb_average,
    energy_account,
    negativity_report,
    oracle_average_work,
    quasi_moment,
    recover_comb,
    stencil_chi_grid,
    tmp_distribution,
)
from .config import RunInputs, ScenarioConfig, build_inputs
from .errors import (
    GridTooCoarseError,
    IllConditionedError,
    InvariantViolationError,
    QuasiworkError,
)
from .pathsum import (
    DEFAULT_ENUM_CAP,
    DeltaComb,
    comb_model_qcgf,
    pair_count_estimate,
    qpdf_heat,
    qpdf_internal_energy,
    qpdf_work,
)
from .protocol import ProtocolKind, QcgfSamples, default_chi_grid, qcgf

#: Tolerance on the average-energy balance before a run is declared
#: inconsistent.
CONSERVATION_TOL = 1e-10

#: Tolerance on the pointwise agreement between the engine G and the
#: comb-model G.
MODEL_AGREEMENT_TOL = 1e-10

#: Tolerance on tilted-vs-joint route agreement.
ROUTE_AGREEMENT_TOL = 1e-12

_QPDF = {
    ProtocolKind.INTERNAL_ENERGY: qpdf_internal_energy,
    ProtocolKind.HEAT: qpdf_heat,
    ProtocolKind.WORK: qpdf_work,
}


@dataclass
class ProtocolResult:
    """Everything computed for one protocol kind."""

    kind: ProtocolKind
    comb: DeltaComb
    comb_method: str
    samples: QcgfSamples | None
    mean: float
    moment1: float | None
    moment2: float | None
    model_residual: float | None
    joint_residual: float | None
    recover_status: str
    recover_error: float | None


@dataclass
class ScenarioRun:
    """Full result bundle for one scenario."""

    name: str
    backend: str
    route: str
    results: dict[ProtocolKind, ProtocolResult]
    account: EnergyAccount
    negativity: NegativityReport
    oracle_work: float | None
    tmp: DeltaComb | None
    closed: bool
    warnings: list[str] = field(default_factory=list)


def _comb_for(kind: ProtocolKind, inputs: RunInputs, method: str,
              enum_cap: int) -> tuple[DeltaComb, str]:
    fn = _QPDF[kind]
    comb = fn(inputs.state, inputs.sched, inputs.channel, lam=inputs.lam,
              method=method, cap=enum_cap)
    if method == "auto":
        estimate = pair_count_estimate(inputs.sched, inputs.channel)
        from .pathsum import AUTO_ENUM_BUDGET

        used = ("enumerate" if estimate <= min(enum_cap, AUTO_ENUM_BUDGET)
                else "propagate")
    else:
        used = method
    return comb, used


def _recover_against(comb: DeltaComb, samples: QcgfSamples):
    """Try to re-derive the comb weights from the G samples.

    Candidates are the comb's own positions plus a few structural
    decoys beyond the support; weights must come out matching.  Returns
    (status, worst weight error or None).
    """
    if len(comb) == 0:
        return "skipped: empty comb", None
    spread = float(comb.values.max() - comb.values.min())
    pad = max(spread * 0.25, 0.5)
    decoys = np.array([comb.values.min() - pad, comb.values.max() + pad])
    candidates = np.concatenate([comb.values, decoys])
    try:
        recovered = recover_comb(samples, candidates)
    except (IllConditionedError, GridTooCoarseError) as exc:
        return f"skipped: {exc.__class__.__name__}", None
    tol = comb.position_tol()
    worst = 0.0
    for value, weight in comb.as_pairs():
        worst = max(worst, abs(recovered.weight_at(value, tol) - weight))
    for value, weight in recovered.as_pairs():
        worst = max(worst, abs(comb.weight_at(value, tol) - weight))
    return "ok", worst


def run_scenario(cfg: ScenarioConfig, route: str = "all",
                 method: str = "auto", enum_cap: int = DEFAULT_ENUM_CAP,
                 inject: str | None = None,
                 check_invariants: bool = True) -> ScenarioRun:
    """Compute combs, generating functions, and cross-checks.

    ``route`` picks what gets computed: ``"all"`` (combs, tilted G,
    joint G cross-check), ``"tilted"`` (combs plus tilted G),
    ``"joint"`` (combs plus joint-route G), or ``"paths"`` (combs
    only).  ``method`` and ``enum_cap`` steer the comb computation;
    ``inject`` passes a deliberate defect into the schedule builder so
    self-tests can confirm the checks catch it.

    With ``check_invariants`` on, an average-energy balance residual
    beyond 1e-10 or a comb-vs-G mismatch beyond 1e-10 raises
    :class:`InvariantViolationError`.
    """
    if route not in ("all", "tilted", "joint", "paths"):
        raise ValueError(f"unknown route {route!r}")
    inputs = build_inputs(cfg)
    grid = default_chi_grid(inputs.sched, inputs.chi_points)
    warnings: list[str] = []
    results: dict[ProtocolKind, ProtocolResult] = {}
    for kind in ProtocolKind:
        comb, used_method = _comb_for(kind, inputs, method, enum_cap)
        samples = None
        model_residual = None
        joint_residual = None
        moment1 = None
        moment2 = None
        recover_status = "skipped: no samples"
        recover_error = None
        if route != "paths":
            g_route = "joint" if route == "joint" else "tilted"
            samples = qcgf(inputs.state, inputs.detector, kind,
                           inputs.channel, inputs.sched, grid, route=g_route,
                           inject=inject)
            model_residual = float(np.max(np.abs(
                samples.values - comb_model_qcgf(comb, grid)
            )))
            if route == "all":
                sub = grid[::8]
                g_joint = qcgf(inputs.state, inputs.detector, kind,
                               inputs.channel, inputs.sched, sub,
                               route="joint", inject=inject)
                g_tilted_sub = samples.values[::8]
                joint_residual = float(np.max(np.abs(
                    g_joint.values - g_tilted_sub
                )))
            stencil = qcgf(inputs.state, inputs.detector, kind,
                           inputs.channel, inputs.sched,
                           stencil_chi_grid(inputs.sched, inputs.lam),
                           route=g_route, inject=inject)
            moment1 = quasi_moment(stencil, 1)
            moment2 = quasi_moment(stencil, 2)
            recover_status, recover_error = _recover_against(comb, samples)
        results[kind] = ProtocolResult(
            kind=kind, comb=comb, comb_method=used_method, samples=samples,
            mean=comb_average(comb), moment1=moment1, moment2=moment2,
            model_residual=model_residual, joint_residual=joint_residual,
            recover_status=recover_status, recover_error=recover_error,
        )

    account = energy_account(
        results[ProtocolKind.INTERNAL_ENERGY].comb,
        results[ProtocolKind.HEAT].comb,
        results[ProtocolKind.WORK].comb,
    )
    e0 = inputs.sched.eig(0).values
    gaps = np.diff(e0)
    gap = float(gaps[gaps > 1e-12].min()) if np.any(gaps > 1e-12) else 1.0
    negativity = negativity_report(results[ProtocolKind.WORK].comb, gap)
    oracle = oracle_average_work(inputs.state, inputs.sched) if inputs.closed else None
    tmp = tmp_distribution(inputs.state, inputs.sched) if inputs.closed else None

    run = ScenarioRun(
        name=cfg.name, backend=BACKEND, route=route, results=results,
        account=account, negativity=negativity, oracle_work=oracle,
        tmp=tmp, closed=inputs.closed, warnings=warnings,
    )
    if check_invariants:
        if abs(account.residual) > CONSERVATION_TOL:
            raise InvariantViolationError(
                f"average energies do not balance: work - heat - internal ="
                f" {account.residual:+.3e} (tolerance {CONSERVATION_TOL:.1e})"
            )
        for kind, res in results.items():
            if res.model_residual is not None and \
                    res.model_residual > MODEL_AGREEMENT_TOL:
                raise InvariantViolationError(
                    f"{kind.value}: comb-model G deviates from the engine by"
                    f" {res.model_residual:.3e}"
                )
            if res.joint_residual is not None and \
                    res.joint_residual > ROUTE_AGREEMENT_TOL:
                raise InvariantViolationError(
                    f"{kind.value}: tilted and joint routes disagree by"
                    f" {res.joint_residual:.3e}"
                )
    return run


@dataclass
class SweepPoint:
    """One row of a parameter sweep."""

    parameter: str
    value: float
    account: EnergyAccount
    negativity: float
    half_quantum: float
    moment1_work: float | None
    conservation_residual: float


def run_sweep(cfg: ScenarioConfig, parameter: str, values,
              route: str = "tilted", enum_cap: int = DEFAULT_ENUM_CAP) -> list[SweepPoint]:
    """Re-run a scenario while varying one knob.

    ``parameter`` is ``"p"`` (decay probability, applied to all steps)
    or ``"chi-points"`` (grid refinement; values must be odd integers).
    """
    if parameter not in ("p", "chi-points"):
        raise ValueError(f"unknown sweep parameter {parameter!r}")
    points = []
    for value in values:
        if parameter == "p":
            mod = ScenarioConfig(
                name=cfg.name, total_time=cfg.total_time, steps=cfg.steps,
                drive_samples=cfg.drive_samples,
                decay=(float(value),) * (cfg.steps + 1),
                initial_state=cfg.initial_state,
                detector_eigenvalue=cfg.detector_eigenvalue,
                chi_points=cfg.chi_points,
            )
        else:
            mod = ScenarioConfig(
                name=cfg.name, total_time=cfg.total_time, steps=cfg.steps,
                drive_samples=cfg.drive_samples, decay=cfg.decay,
                initial_state=cfg.initial_state,
                detector_eigenvalue=cfg.detector_eigenvalue,
                chi_points=int(value),
            )
        run = run_scenario(mod, route=route, enum_cap=enum_cap)
        work = run.results[ProtocolKind.WORK]
        points.append(SweepPoint(
            parameter=parameter, value=float(value), account=run.account,
            negativity=run.negativity.negativity,
            half_quantum=run.negativity.half_quantum_weight,
            moment1_work=work.moment1,
            conservation_residual=run.account.residual,
        ))
    return points
