"""Compare the numba and numpy lanes of the three hot kernels.

Each lane runs in its own subprocess with ``QUASIWORK_BACKEND`` set, so
the kernels are measured exactly as the package binds them at import
time.  The parent prints a timing table plus the absolute difference of
per-kernel checksums, which must vanish since the lanes are
interchangeable.

Usage::

    python3 benchmarks/bench_backends.py [--quick]
"""

import argparse
import json
import math
import os
import subprocess
import sys
import time


def _workloads(quick: bool):
    import numpy as np

    from quasiwork import (
        PAULI_X,
        PAULI_Z,
        DetectorSpec,
        HamiltonianSchedule,
        ProtocolKind,
        SystemState,
        amplitude_damping_channel,
        build_schedule,
        default_chi_grid,
        hermitian_eig,
        qpdf_work,
    )
    from quasiwork.protocol import tilted_qcgf_values

    rng = np.random.default_rng(0)

    count, dim = (50, 8) if quick else (200, 8)
    mats = []
    for _ in range(count):
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        mats.append(0.5 * (a + a.conj().T))

    def run_eig():
        acc = 0.0
        for m in mats:
            acc += float(np.sum(hermitian_eig(m).values))
        return acc

    steps = 6
    hams = tuple(-0.5 * PAULI_Z + 0.3 * (s / steps) * PAULI_X
                 for s in range(steps + 1))
    sched = HamiltonianSchedule(total_time=3.0, hams=hams)
    ch = amplitude_damping_channel(sched, 0.3)
    state = SystemState.plus_x(sched)
    det = DetectorSpec.standard()
    ps = build_schedule(ProtocolKind.WORK, sched)
    grid = default_chi_grid(sched, 1025 if quick else 4097)

    def run_sweep():
        values = tilted_qcgf_values(state, det, ps, ch, sched, grid)
        return float(np.sum(values.real) + np.sum(values.imag))

    enum_steps = 4 if quick else 6
    ehams = tuple(-0.5 * PAULI_Z + 0.3 * (s / enum_steps) * PAULI_X
                  for s in range(enum_steps + 1))
    esched = HamiltonianSchedule(total_time=3.0, hams=ehams)
    ech = amplitude_damping_channel(esched, 0.3)
    estate = SystemState.plus_x(esched)

    def run_enum():
        comb = qpdf_work(estate, esched, ech, method="enumerate", cap=10**6)
        return float(np.dot(comb.values, comb.weights))

    return {"eigensolver": run_eig, "chi sweep": run_sweep,
            "enumeration": run_enum}


def _best_time(fn, repeats: int):
    checksum = fn()
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best, checksum


def run_lane(quick: bool) -> None:
    from quasiwork import BACKEND

    repeats = 2 if quick else 5
    report = {"backend": BACKEND, "timings": {}, "checksums": {}}
    for name, fn in _workloads(quick).items():
        seconds, checksum = _best_time(fn, repeats)
        report["timings"][name] = seconds
        report["checksums"][name] = checksum
    json.dump(report, sys.stdout)


def run_comparison(quick: bool) -> int:
    reports = {}
    for lane in ("numba", "numpy"):
        env = dict(os.environ, QUASIWORK_BACKEND=lane)
        cmd = [sys.executable, os.path.abspath(__file__), "--lane"]
        if quick:
            cmd.append("--quick")
        proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            print(f"{lane} lane unavailable:\n{proc.stderr.strip()}")
            continue
        reports[lane] = json.loads(proc.stdout)
    if not reports:
        return 1

    names = list(next(iter(reports.values()))["timings"])
    print(f"{'kernel':<14}" + "".join(f"{lane:>12}" for lane in reports)
          + ("     speedup" if len(reports) == 2 else ""))
    for name in names:
        row = f"{name:<14}"
        for lane in reports:
            row += f"{reports[lane]['timings'][name] * 1e3:>10.2f} ms"
        if len(reports) == 2:
            ratio = (reports["numpy"]["timings"][name]
                     / reports["numba"]["timings"][name])
            row += f"{ratio:>11.1f}x"
        print(row)
    if len(reports) == 2:
        drift = {
            name: abs(reports["numba"]["checksums"][name]
                      - reports["numpy"]["checksums"][name])
            for name in names
        }
        print("lane agreement (checksum drift): "
              + ", ".join(f"{k} {v:.1e}" for k, v in drift.items()))
        if max(drift.values()) > 1e-9:
            print("WARNING: lanes disagree beyond 1e-9")
            return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--quick", action="store_true",
                        help="smaller workloads, fewer repeats")
    parser.add_argument("--lane", action="store_true",
                        help=argparse.SUPPRESS)
    args = parser.parse_args(argv)
    if args.lane:
        run_lane(args.quick)
        return 0
    return run_comparison(args.quick)


if __name__ == "__main__":
    raise SystemExit(main())
