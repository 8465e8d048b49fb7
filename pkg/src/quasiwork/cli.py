"""Command line interface.

Three subcommands:

``quasiwork simulate CONFIG``
    run one scenario, print a summary, optionally write combs and G
    samples as CSV plus a machine-readable summary.json.
``quasiwork sweep CONFIG --parameter p --values 0,0.5,1``
    re-run a scenario across a parameter range, print and optionally
    write a table.
``quasiwork verify``
    run the built-in self checks, including one with a deliberately
    injected defect that the invariant checks must catch.

Exit codes: 0 success, 1 failed verification, 2 configuration problems,
3 numerical failures (broken invariants, enumeration overflow).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from ._backend import BACKEND
from .config import ScenarioConfig, bundled_scenarios, load_bundled
from .driver import run_scenario, run_sweep
from .errors import ConfigError, QuasiworkError
from .pathsum import DEFAULT_ENUM_CAP, DeltaComb
from .protocol import ProtocolKind

_FLOAT_FMT = "%.17g"


def _fmt(x: float) -> str:
    return _FLOAT_FMT % x


def _load_config(ref: str) -> ScenarioConfig:
    """Resolve a config reference: a file path or a bundled name."""
    if ref.endswith(".json") or "/" in ref or Path(ref).exists():
        return ScenarioConfig.from_json_file(ref)
    if ref in bundled_scenarios():
        return load_bundled(ref)
    raise ConfigError(
        f"{ref!r} is neither a readable config file nor a bundled scenario"
        f" (bundled: {', '.join(bundled_scenarios())})"
    )


def _write_comb_csv(path: Path, comb: DeltaComb) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "weight"])
        for value, weight in comb.as_pairs():
            writer.writerow([_fmt(value), _fmt(weight)])


def _write_qcgf_csv(path: Path, samples) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chi", "re", "im"])
        for chi, value in zip(samples.chis, samples.values):
            writer.writerow([_fmt(chi), _fmt(value.real), _fmt(value.imag)])


def _summary_dict(run) -> dict:
    out: dict = {
        "name": run.name,
        "backend": run.backend,
        "route": run.route,
        "closed": run.closed,
        "account": {
            "internal_energy": run.account.internal_energy,
            "heat": run.account.heat,
            "work": run.account.work,
            "residual": run.account.residual,
        },
        "negativity": {
            "total": run.negativity.negativity,
            "negative_values": list(run.negativity.negative_values),
            "half_quantum_weight": run.negativity.half_quantum_weight,
            "half_quantum_pairs": [
                list(pair) for pair in run.negativity.half_quantum_pairs
            ],
        },
        "protocols": {},
    }
    if run.oracle_work is not None:
        out["oracle_average_work"] = run.oracle_work
    if run.tmp is not None:
        out["tmp_distribution"] = run.tmp.as_pairs()
    for kind, res in run.results.items():
        entry = {
            "comb": res.comb.as_pairs(),
            "comb_method": res.comb_method,
            "mean": res.mean,
            "recover_status": res.recover_status,
        }
        for key in ("moment1", "moment2", "model_residual", "joint_residual",
                    "recover_error"):
            value = getattr(res, key)
            if value is not None:
                entry[key] = value
        out["protocols"][kind.value] = entry
    return out


def _print_run(run) -> None:
    print(f"scenario {run.name} (backend {run.backend}, route {run.route})")
    for kind, res in run.results.items():
        print(f"  {kind.value}: {len(res.comb)} peaks, mean {res.mean:+.9g},"
              f" method {res.comb_method}")
        if res.model_residual is not None:
            print(f"    comb-model vs engine G: {res.model_residual:.3e}")
        if res.joint_residual is not None:
            print(f"    tilted vs joint route: {res.joint_residual:.3e}")
        if res.recover_error is not None:
            print(f"    recovery from G samples: {res.recover_status},"
                  f" worst weight error {res.recover_error:.3e}")
        else:
            print(f"    recovery from G samples: {res.recover_status}")
    print(f"  balance: work - heat - internal = {run.account.residual:+.3e}")
    print(f"  work negativity {run.negativity.negativity:.9g}, half-quantum"
          f" weight {run.negativity.half_quantum_weight:.9g}")
    if run.oracle_work is not None:
        work_mean = run.results[ProtocolKind.WORK].mean
        print(f"  closed-drive oracle work {run.oracle_work:+.9g}"
              f" (comb mean {work_mean:+.9g})")


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    run = run_scenario(cfg, route=args.route, method=args.method,
                       enum_cap=args.enum_cap, inject=args.inject)
    _print_run(run)
    if args.out_dir is not None:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for kind, res in run.results.items():
            _write_comb_csv(out / f"comb_{kind.value}.csv", res.comb)
            if res.samples is not None:
                _write_qcgf_csv(out / f"qcgf_{kind.value}.csv", res.samples)
        (out / "summary.json").write_text(
            json.dumps(_summary_dict(run), indent=2, sort_keys=True) + "\n"
        )
        print(f"  wrote {args.out_dir}/summary.json and CSVs")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    values = [float(v) for v in args.values.split(",") if v != ""]
    if not values:
        raise ConfigError("sweep needs at least one value")
    points = run_sweep(cfg, args.parameter, values, route=args.route,
                       enum_cap=args.enum_cap)
    header = [args.parameter, "internal_energy", "heat", "work", "negativity",
              "half_quantum_weight", "conservation_residual"]
    print("  ".join(header))
    rows = []
    for pt in points:
        row = [pt.value, pt.account.internal_energy, pt.account.heat,
               pt.account.work, pt.negativity, pt.half_quantum,
               pt.conservation_residual]
        rows.append(row)
        print("  ".join(f"{x:+.6g}" for x in row))
    if args.out_dir is not None:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "sweep.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(x) for x in row])
        print(f"wrote {path}")
    return 0


def _verify_checks(quick: bool):
    """Yield (check name, callable) pairs for the verify subcommand."""

    def hadamard_comb():
        run = run_scenario(load_bundled("hadamard-closed"), route="all")
        comb = run.results[ProtocolKind.WORK].comb
        expected = [(-1.0, 0.25), (-0.5, 0.5), (0.0, 0.5), (0.5, -0.5),
                    (1.0, 0.25)]
        worst = max(abs(comb.weight_at(v) - w) for v, w in expected)
        assert worst < 1e-10, f"work comb off by {worst:.3e}"
        assert len(comb) == 5, f"expected 5 peaks, got {len(comb)}"
        assert abs(run.negativity.negativity - 0.5) < 1e-10
        assert run.oracle_work is not None
        assert abs(run.results[ProtocolKind.WORK].mean
                   - run.oracle_work) < 1e-9

    def strong_damping_comb():
        run = run_scenario(load_bundled("strong-damping"), route="all")
        du = run.results[ProtocolKind.INTERNAL_ENERGY].comb
        q = run.results[ProtocolKind.HEAT].comb
        w = run.results[ProtocolKind.WORK].comb
        assert abs(du.weight_at(0.0) - 0.3) < 1e-12
        assert abs(du.weight_at(-1.0) - 0.7) < 1e-12
        assert abs(q.weight_at(1.0) - 0.7) < 1e-12
        assert abs(w.weight_at(0.0) - 1.0) < 1e-12
        assert run.negativity.negativity == 0.0

    def injected_defect_is_caught():
        try:
            run_scenario(load_bundled("strong-damping"), route="tilted",
                         inject="heat-sign-flip")
        except QuasiworkError:
            return
        raise AssertionError(
            "deliberately broken heat coupling slipped past the checks"
        )

    def sweep_endpoints():
        points = run_sweep(load_bundled("hadamard-closed"), "p",
                           [0.0, 0.5, 1.0])
        assert points[0].negativity > 0.0, "closed drive must show negativity"
        assert points[-1].negativity == 0.0, "full damping must be classical"

    yield "hadamard work comb and oracle", hadamard_comb
    yield "strong damping classical limit", strong_damping_comb
    yield "injected defect is caught", injected_defect_is_caught
    if not quick:
        yield "sweep endpoints", sweep_endpoints


def cmd_verify(args) -> int:
    failures = 0
    for name, check in _verify_checks(args.quick):
        try:
            check()
        except Exception as exc:
            failures += 1
            print(f"FAIL {name}: {exc}")
        else:
            print(f"ok   {name}")
    if failures:
        print(f"{failures} verification check(s) failed")
        return 1
    print(f"all verification checks passed (backend {BACKEND})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quasiwork",
        description="Quasi-probability distributions of work and heat for"
                    " driven open qubits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario")
    sim.add_argument("config", help="config file path or bundled scenario name")
    sim.add_argument("--route", default="all",
                     choices=["all", "tilted", "joint", "paths"],
                     help="which computation routes to run")
    sim.add_argument("--method", default="auto",
                     choices=["auto", "enumerate", "propagate"],
                     help="comb computation method")
    sim.add_argument("--enum-cap", type=int, default=DEFAULT_ENUM_CAP,
                     help="max path pairs the enumeration may visit")
    sim.add_argument("--out-dir", default=None,
                     help="write combs, G samples, and summary.json here")
    sim.add_argument("--inject", default=None,
                     choices=["heat-sign-flip"],
                     help="plant a known defect (self-test hook)")
    sim.set_defaults(fn=cmd_simulate)

    swp = sub.add_parser("sweep", help="vary one parameter across runs")
    swp.add_argument("config", help="config file path or bundled scenario name")
    swp.add_argument("--parameter", required=True, choices=["p", "chi-points"])
    swp.add_argument("--values", required=True,
                     help="comma-separated parameter values")
    swp.add_argument("--route", default="tilted",
                     choices=["all", "tilted", "joint", "paths"])
    swp.add_argument("--enum-cap", type=int, default=DEFAULT_ENUM_CAP)
    swp.add_argument("--out-dir", default=None,
                     help="write sweep.csv here")
    swp.set_defaults(fn=cmd_sweep)

    ver = sub.add_parser("verify", help="run built-in self checks")
    ver.add_argument("--quick", action="store_true",
                     help="skip the slower checks")
    ver.set_defaults(fn=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except QuasiworkError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
