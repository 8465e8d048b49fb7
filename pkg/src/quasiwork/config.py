"""Scenario configuration: JSON schema, validation, and model building.

A scenario file describes one protocol run end to end: the drive, the
environment coupling strength, the initial system state, the detector
eigenvalue, and the sampling grid.  Two example scenarios ship with the
package (see :func:`bundled_scenarios`): the Hadamard closed-drive
benchmark with its known five-peak work comb, and the strong-damping
classical limit.

Schema (all energies and times in the same arbitrary units):

.. code-block:: json

    {
        "name": "my-scenario",
        "total_time": 12.57,
        "steps": 2,
        "drive": {"type": "tabulated", "samples": [{"z": -0.5}, ...]},
        "decay": 0.0,
        "initial_state": "plus-x",
        "detector_eigenvalue": 1.0,
        "chi_points": 257
    }

``drive.type`` is ``"tabulated"`` (explicit list of ``steps + 1``
Hamiltonian samples) or ``"linear-ramp"`` (``start`` and ``stop``
interpolated).  A Hamiltonian sample is either a Pauli-coefficient
object (keys ``x``, ``y``, ``z``, two-level only) or
``{"matrix": [[[re, im], ...], ...]}``.  ``decay`` is a single
probability or a list of ``steps + 1``.  ``initial_state`` is one of
``"ground"``, ``"excited"``, ``"plus-x"``, ``{"thermal": beta}``, or
``{"matrix": ...}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError
from .model import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DetectorSpec,
    HamiltonianSchedule,
    KrausChannel,
    SystemState,
    amplitude_damping_channel,
)

_TOP_LEVEL_KEYS = {
    "name", "total_time", "steps", "drive", "decay", "initial_state",
    "detector_eigenvalue", "chi_points",
}

_STATE_NAMES = ("ground", "excited", "plus-x")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _number(raw: Any, field: str) -> float:
    _require(isinstance(raw, (int, float)) and not isinstance(raw, bool),
             f"{field}: expected a number, got {raw!r}")
    return float(raw)


def _parse_matrix(raw: Any, field: str) -> np.ndarray:
    _require(isinstance(raw, list) and len(raw) >= 1,
             f"{field}: expected a nested list")
    d = len(raw)
    out = np.zeros((d, d), dtype=np.complex128)
    for r, row in enumerate(raw):
        _require(isinstance(row, list) and len(row) == d,
                 f"{field}[{r}]: expected a row of length {d}")
        for c, cell in enumerate(row):
            _require(
                isinstance(cell, list) and len(cell) == 2
                and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                        for x in cell),
                f"{field}[{r}][{c}]: expected [re, im]",
            )
            out[r, c] = complex(cell[0], cell[1])
    return out


def _parse_hamiltonian(raw: Any, field: str) -> np.ndarray:
    if isinstance(raw, dict) and "matrix" in raw:
        _require(set(raw) == {"matrix"},
                 f"{field}: a matrix sample takes no other keys")
        return _parse_matrix(raw["matrix"], f"{field}.matrix")
    _require(isinstance(raw, dict),
             f"{field}: expected a Pauli-coefficient object or a matrix")
    unknown = set(raw) - {"x", "y", "z"}
    _require(not unknown, f"{field}: unknown Pauli keys {sorted(unknown)}")
    h = np.zeros((2, 2), dtype=np.complex128)
    for key, op in (("x", PAULI_X), ("y", PAULI_Y), ("z", PAULI_Z)):
        if key in raw:
            h = h + _number(raw[key], f"{field}.{key}") * op
    return h


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario description, pre model building."""

    name: str
    total_time: float
    steps: int
    drive_samples: tuple[np.ndarray, ...]
    decay: tuple[float, ...]
    initial_state: Any
    detector_eigenvalue: float
    chi_points: int

    @classmethod
    def from_dict(cls, raw: dict, source: str = "<config>") -> "ScenarioConfig":
        _require(isinstance(raw, dict), f"{source}: top level must be an object")
        unknown = set(raw) - _TOP_LEVEL_KEYS
        _require(not unknown, f"{source}: unknown keys {sorted(unknown)}")
        for req in ("total_time", "steps", "drive"):
            _require(req in raw, f"{source}: missing required key {req!r}")

        name = raw.get("name", "scenario")
        _require(isinstance(name, str) and name != "",
                 f"{source}: name must be a nonempty string")

        total_time = _number(raw["total_time"], f"{source}: total_time")
        _require(total_time > 0, f"{source}: total_time must be positive")

        steps = raw["steps"]
        _require(isinstance(steps, int) and not isinstance(steps, bool)
                 and steps >= 0, f"{source}: steps must be an integer >= 0")

        drive = raw["drive"]
        _require(isinstance(drive, dict) and "type" in drive,
                 f"{source}: drive must be an object with a type")
        dtype = drive["type"]
        if dtype == "tabulated":
            _require(set(drive) == {"type", "samples"},
                     f"{source}: tabulated drive takes exactly type and samples")
            samples_raw = drive["samples"]
            _require(isinstance(samples_raw, list)
                     and len(samples_raw) == steps + 1,
                     f"{source}: drive.samples must list steps + 1 = {steps + 1}"
                     " Hamiltonians")
            samples = tuple(
                _parse_hamiltonian(s, f"{source}: drive.samples[{i}]")
                for i, s in enumerate(samples_raw)
            )
        elif dtype == "linear-ramp":
            _require(set(drive) == {"type", "start", "stop"},
                     f"{source}: linear-ramp drive takes exactly type, start,"
                     " stop")
            h0 = _parse_hamiltonian(drive["start"], f"{source}: drive.start")
            h1 = _parse_hamiltonian(drive["stop"], f"{source}: drive.stop")
            _require(h0.shape == h1.shape,
                     f"{source}: drive start/stop dimensions differ")
            denom = max(steps, 1)
            samples = tuple(
                h0 + (s / denom) * (h1 - h0) for s in range(steps + 1)
            )
        else:
            raise ConfigError(
                f"{source}: drive.type must be 'tabulated' or 'linear-ramp',"
                f" got {dtype!r}"
            )

        decay_raw = raw.get("decay", 0.0)
        if isinstance(decay_raw, list):
            _require(len(decay_raw) == steps + 1,
                     f"{source}: decay list must have steps + 1 = {steps + 1}"
                     " entries")
            decay = tuple(_number(x, f"{source}: decay[{i}]")
                          for i, x in enumerate(decay_raw))
        else:
            decay = (_number(decay_raw, f"{source}: decay"),) * (steps + 1)
        for i, p in enumerate(decay):
            _require(0.0 <= p <= 1.0,
                     f"{source}: decay[{i}] = {p} outside [0, 1]")

        state_raw = raw.get("initial_state", "ground")
        if isinstance(state_raw, str):
            _require(state_raw in _STATE_NAMES,
                     f"{source}: initial_state must be one of {_STATE_NAMES}"
                     " or an object")
            initial_state: Any = state_raw
        elif isinstance(state_raw, dict) and set(state_raw) == {"thermal"}:
            initial_state = ("thermal",
                             _number(state_raw["thermal"],
                                     f"{source}: initial_state.thermal"))
        elif isinstance(state_raw, dict) and set(state_raw) == {"matrix"}:
            initial_state = _parse_matrix(state_raw["matrix"],
                                          f"{source}: initial_state.matrix")
        else:
            raise ConfigError(
                f"{source}: initial_state must be a known name,"
                " {'thermal': beta}, or {'matrix': ...}"
            )

        lam = _number(raw.get("detector_eigenvalue", 1.0),
                      f"{source}: detector_eigenvalue")
        _require(lam != 0.0, f"{source}: detector_eigenvalue must be nonzero")

        chi_points = raw.get("chi_points", 257)
        _require(isinstance(chi_points, int) and not isinstance(chi_points, bool)
                 and chi_points >= 5 and chi_points % 2 == 1,
                 f"{source}: chi_points must be an odd integer >= 5")

        return cls(
            name=name, total_time=total_time, steps=steps,
            drive_samples=samples, decay=decay, initial_state=initial_state,
            detector_eigenvalue=lam, chi_points=chi_points,
        )

    @classmethod
    def from_json_file(cls, path) -> "ScenarioConfig":
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"{p}: cannot read config: {exc}") from exc
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{p}: invalid JSON at line {exc.lineno} column {exc.colno}:"
                f" {exc.msg}"
            ) from exc
        return cls.from_dict(raw, source=str(p))


@dataclass(frozen=True)
class RunInputs:
    """Model objects built from a scenario config."""

    sched: HamiltonianSchedule
    channel: KrausChannel
    state: SystemState
    detector: DetectorSpec
    lam: float
    chi_points: int
    closed: bool


def build_inputs(cfg: ScenarioConfig) -> RunInputs:
    """Instantiate the validated model objects for a scenario.

    Model-level validation failures (non-Hermitian samples, bad density
    matrices) surface as their own error types; the command line treats
    every failure in this phase as a configuration problem.
    """
    sched = HamiltonianSchedule(total_time=cfg.total_time,
                                hams=cfg.drive_samples)
    channel = amplitude_damping_channel(sched, cfg.decay)
    spec = cfg.initial_state
    if isinstance(spec, str):
        maker = {"ground": SystemState.ground, "excited": SystemState.excited,
                 "plus-x": SystemState.plus_x}[spec]
        state = maker(sched)
    elif isinstance(spec, tuple):
        state = SystemState.thermal(sched, spec[1])
    else:
        state = SystemState.from_matrix(spec)
    lam = cfg.detector_eigenvalue
    plus = np.full((2, 2), 0.5, dtype=np.complex128)
    detector = DetectorSpec(hamiltonian=lam * PAULI_Z, lam=lam,
                            lam_prime=-lam, rho=plus)
    closed = all(p == 0.0 for p in cfg.decay)
    return RunInputs(sched=sched, channel=channel, state=state,
                     detector=detector, lam=lam, chi_points=cfg.chi_points,
                     closed=closed)


def bundled_scenarios() -> tuple[str, ...]:
    """Names of the scenario files shipped with the package."""
    root = resources.files("quasiwork") / "scenarios"
    return tuple(sorted(
        p.name.removesuffix(".json")
        for p in root.iterdir() if p.name.endswith(".json")
    ))


def load_bundled(name: str) -> ScenarioConfig:
    """Load a shipped scenario by name (see :func:`bundled_scenarios`)."""
    root = resources.files("quasiwork") / "scenarios"
    target = root / f"{name}.json"
    try:
        text = target.read_text()
    except (FileNotFoundError, OSError) as exc:
        raise ConfigError(
            f"no bundled scenario named {name!r};"
            f" available: {', '.join(bundled_scenarios())}"
        ) from exc
    return ScenarioConfig.from_dict(json.loads(text),
                                    source=f"bundled:{name}")
