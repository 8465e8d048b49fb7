"""Scenario parsing and command line behavior."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from quasiwork.cli import main
from quasiwork.config import (
    ScenarioConfig,
    build_inputs,
    bundled_scenarios,
    load_bundled,
)
from quasiwork.errors import ConfigError


def base_raw(**overrides):
    raw = {
        "name": "unit",
        "total_time": 1.5,
        "steps": 2,
        "drive": {"type": "linear-ramp", "start": {"z": -0.5},
                  "stop": {"z": -0.5}},
        "decay": 0.3,
        "initial_state": "plus-x",
    }
    raw.update(overrides)
    return raw


class TestParsing:
    def test_flat_ramp_defaults(self):
        cfg = ScenarioConfig.from_dict(base_raw())
        assert cfg.steps == 2
        assert len(cfg.drive_samples) == 3
        assert np.array_equal(cfg.drive_samples[0], cfg.drive_samples[2])
        assert cfg.decay == (0.3, 0.3, 0.3)
        assert cfg.chi_points == 257
        assert cfg.detector_eigenvalue == 1.0
        with pytest.raises(ConfigError, match="drive.type"):
            ScenarioConfig.from_dict(
                base_raw(drive={"type": "constant", "sample": {"z": 1.0}})
            )

    def test_tabulated_drive_needs_matching_length(self):
        raw = base_raw(drive={"type": "tabulated",
                              "samples": [{"z": -0.5}, {"x": 0.2}]})
        with pytest.raises(ConfigError, match="3"):
            ScenarioConfig.from_dict(raw)

    def test_linear_ramp_interpolates(self):
        raw = base_raw(drive={"type": "linear-ramp", "start": {"z": -1.0},
                              "stop": {"z": 1.0}})
        cfg = ScenarioConfig.from_dict(raw)
        mid = cfg.drive_samples[1]
        assert np.allclose(mid, np.zeros((2, 2)))

    def test_matrix_samples_and_state(self):
        raw = base_raw(
            steps=0,
            drive={"type": "tabulated",
                   "samples": [{"matrix": [[[0.5, 0.0], [0.0, 0.0]],
                                           [[0.0, 0.0], [-0.5, 0.0]]]}]},
            decay=[1.0],
            initial_state={"matrix": [[[0.3, 0.0], [0.0, 0.0]],
                                      [[0.0, 0.0], [0.7, 0.0]]]},
        )
        cfg = ScenarioConfig.from_dict(raw)
        inputs = build_inputs(cfg)
        assert not inputs.closed
        assert inputs.state.rho[1, 1] == pytest.approx(0.7)

    def test_thermal_state(self):
        cfg = ScenarioConfig.from_dict(
            base_raw(initial_state={"thermal": 2.0})
        )
        inputs = build_inputs(cfg)
        assert inputs.state.rho[0, 1] == 0.0

    def test_rejects_unknown_keys(self):
        with pytest.raises(ConfigError, match="unknown"):
            ScenarioConfig.from_dict(base_raw(typo=1))

    def test_rejects_missing_required(self):
        raw = base_raw()
        del raw["total_time"]
        with pytest.raises(ConfigError, match="total_time"):
            ScenarioConfig.from_dict(raw)

    def test_rejects_bad_decay(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(base_raw(decay=1.2))
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(base_raw(decay=[0.1, 0.2]))

    def test_rejects_bad_chi_points(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(base_raw(chi_points=128))
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(base_raw(chi_points=3))

    def test_rejects_zero_detector_eigenvalue(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(base_raw(detector_eigenvalue=0.0))

    def test_json_errors_carry_position(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"name": "x",\n  "oops\n}')
        with pytest.raises(ConfigError, match="line"):
            ScenarioConfig.from_json_file(bad)
        with pytest.raises(ConfigError):
            ScenarioConfig.from_json_file(tmp_path / "absent.json")


class TestBundled:
    def test_listing(self):
        names = bundled_scenarios()
        assert "hadamard-closed" in names
        assert "strong-damping" in names

    def test_load_and_build(self):
        for name in bundled_scenarios():
            inputs = build_inputs(load_bundled(name))
            assert inputs.sched.steps == 2
        with pytest.raises(ConfigError):
            load_bundled("no-such-scenario")


class TestCli:
    def test_simulate_writes_outputs(self, tmp_path, capsys):
        code = main(["simulate", "strong-damping", "--out-dir",
                     str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "strong-damping" in out
        for kind in ("internal-energy", "heat", "work"):
            with open(tmp_path / f"comb_{kind}.csv", newline="") as fh:
                rows = list(csv.reader(fh))
            assert rows[0] == ["value", "weight"]
            assert len(rows) > 1
            with open(tmp_path / f"qcgf_{kind}.csv", newline="") as fh:
                header = next(csv.reader(fh))
            assert header == ["chi", "re", "im"]
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["name"] == "strong-damping"
        assert summary["account"]["residual"] == pytest.approx(0.0, abs=1e-10)
        assert set(summary["protocols"]) == {"internal-energy", "heat", "work"}

    def test_simulate_from_config_file(self, tmp_path):
        cfg_path = tmp_path / "scenario.json"
        cfg_path.write_text(json.dumps(base_raw()))
        assert main(["simulate", str(cfg_path)]) == 0

    def test_simulate_rejects_bad_reference(self, capsys):
        assert main(["simulate", "definitely-not-here"]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_simulate_rejects_broken_config(self, tmp_path, capsys):
        cfg_path = tmp_path / "broken.json"
        cfg_path.write_text(json.dumps(base_raw(decay=7.0)))
        assert main(["simulate", str(cfg_path)]) == 2

    def test_injected_defect_fails_loudly(self, capsys):
        code = main(["simulate", "strong-damping", "--inject",
                     "heat-sign-flip"])
        assert code == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_enumeration_cap_failure(self, capsys):
        code = main(["simulate", "hadamard-closed", "--method", "enumerate",
                     "--enum-cap", "3"])
        assert code == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_sweep_writes_csv(self, tmp_path, capsys):
        code = main(["sweep", "strong-damping", "--parameter", "p",
                     "--values", "0,1", "--out-dir", str(tmp_path)])
        assert code == 0
        with open(tmp_path / "sweep.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "p"
        assert len(rows) == 3
        assert float(rows[1][0]) == 0.0
        assert float(rows[2][0]) == 1.0

    def test_sweep_chi_points(self):
        assert main(["sweep", "strong-damping", "--parameter", "chi-points",
                     "--values", "129,257"]) == 0

    def test_verify_quick(self, capsys):
        assert main(["verify", "--quick"]) == 0
        out = capsys.readouterr().out
        assert "ok   injected defect is caught" in out
