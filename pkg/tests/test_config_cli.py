# Copyright (c) 2026, moving_frame developers
# All rights reserved.
#
# Redistribution and use in source and binary forms, with or without
# modification, are permitted provided that the following conditions are met:
#
# * Redistributions of source code must retain the above copyright notice, this
#   list of conditions and the following disclaimer.
#
# * Redistributions in binary form must reproduce the above copyright notice,
#   this list of conditions and the following disclaimer in the documentation
#   and/or other materials provided with the distribution.
#
# * Neither the name of the copyright holder nor the names of its
#   contributors may be used to endorse or promote products derived from
#   this software without specific prior written permission.
#
# THIS SOFTWARE IS PROVIDED BY THE COPYRIGHT HOLDERS AND CONTRIBUTORS "AS IS"
# AND ANY EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT LIMITED TO, THE
# IMPLIED WARRANTIES OF MERCHANTABILITY AND FITNESS FOR A PARTICULAR PURPOSE ARE
# DISCLAIMED. IN NO EVENT SHALL THE COPYRIGHT HOLDER OR CONTRIBUTORS BE LIABLE
# FOR ANY DIRECT, INDIRECT, INCIDENTAL, SPECIAL, EXEMPLARY, OR CONSEQUENTIAL
# DAMAGES (INCLUDING, BUT NOT LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR
# SERVICES; LOSS OF USE, DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER
# CAUSED AND ON ANY THEORY OF LIABILITY, WHETHER IN CONTRACT, STRICT LIABILITY,
# OR TORT (INCLUDING NEGLIGENCE OR OTHERWISE) ARISING IN ANY WAY OUT OF THE USE
# OF THIS SOFTWARE, EVEN IF ADVISED OF THE POSSIBILITY OF SUCH DAMAGE.


import json
import os
import pytest

import numpy as np

from moving_frame import cli, driver
from moving_frame.config import apply_overrides, load_config, load_raw, parse_config
from moving_frame.core.hilbert import ShiftSemigroup
from moving_frame.errors import ConfigValidationError
from moving_frame.util.basic import sha256_of_file, sha256_of_json
from moving_frame.util.data_packing import read_json


def shift_raw(padding=8, dt=0.125, projection_scale=1.0):
    return {
        "schema_version": 1,
        "name": "small-shift",
        "problem": {
            "space": {"dim": 8},
            "semigroup": {"kind": "shift-halfline", "dim": 8, "dx": 0.125},
            "dilation": {"padding": padding, "projection_scale": projection_scale},
            "coefficients": {"family": "zero"},
            "y0": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        },
        "noise": {"q_eigenvalues": [1.0], "horizon": 1.0, "dt": dt},
        "run": {"seed_count": 1, "regime": "mild-frame", "dt_ladder": [0.125, 0.5, 0.25]},
    }


def write_config(tmp_path, raw, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


def fields(excinfo):
    return {field for field, _ in excinfo.value.errors}


def test_default_config():
    cfg = load_config()
    assert cfg.name == "geometric-jump-diffusion"
    assert cfg.family == "geometric"
    assert cfg.semigroup is None
    assert not cfg.is_mild
    assert cfg.seeds == list(range(20))
    assert cfg.steps == 64
    assert cfg.dt_ladder == sorted(cfg.dt_ladder, reverse=True)
    assert cfg.config_hash == sha256_of_json(load_raw())
    assert cfg.solver_opts().regime is None
    assert cfg.solver_opts().dt == cfg.dt
    assert cfg.coefficients().name == "geometric"


def test_apply_overrides_copies():
    raw = load_raw()
    raw["run"]["seeds"] = [7, 9]
    out = apply_overrides(raw, seed_count=3, out="elsewhere", dt=0.125)
    assert "seeds" not in out["run"] and out["run"]["seed_count"] == 3
    assert out["output"]["directory"] == "elsewhere"
    assert out["noise"]["dt"] == 0.125
    assert raw["run"]["seeds"] == [7, 9]
    assert apply_overrides(raw) == raw


def test_overrides_through_load_config(tmp_path):
    cfg = load_config(seed_count=2, out=str(tmp_path), dt=0.25)
    assert cfg.seeds == [0, 1]
    assert cfg.out_dir == str(tmp_path)
    assert cfg.steps == 4


def test_shift_config():
    cfg = parse_config(shift_raw())
    assert isinstance(cfg.semigroup, ShiftSemigroup)
    assert cfg.is_mild
    assert cfg.dt_ladder == [0.5, 0.25, 0.125]
    assert cfg.grid(0.25).tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert cfg.solver_opts().regime is None
    np.testing.assert_array_equal(cfg.y0, np.arange(1.0, 9.0))
    assert cfg.dilation().padding == 8


def test_every_problem_is_reported():
    raw = load_raw()
    raw["extra"] = 1
    raw["schema_version"] = 2
    raw["problem"]["space"]["colour"] = "red"
    raw["problem"]["coefficients"]["params"]["kappa"] = 1.0
    raw["problem"]["y0"] = [1.0, 2.0]
    raw["noise"]["dt"] = 0.3
    raw["run"]["regime"] = "sideways"
    raw["run"]["opts"] = {"tolerance": 1e-3}
    raw["output"]["formats"] = ["csv", "pdf"]
    with pytest.raises(ConfigValidationError) as excinfo:
        parse_config(raw)
    assert fields(excinfo) == {
        "extra",
        "schema_version",
        "problem.space.colour",
        "problem.coefficients",
        "problem.y0",
        "noise.dt",
        "run.regime",
        "run.opts",
        "output.formats",
    }
    assert "noise.dt: dt=0.3 does not divide the horizon 1" in str(excinfo.value)


def test_missing_sections():
    with pytest.raises(ConfigValidationError) as excinfo:
        parse_config({"schema_version": 1})
    assert {"problem", "noise"} <= fields(excinfo)


def test_mild_regime_needs_semigroup():
    raw = load_raw()
    raw["run"]["regime"] = "mild-expeuler"
    with pytest.raises(ConfigValidationError) as excinfo:
        parse_config(raw)
    assert fields(excinfo) == {"run.regime"}


def test_shift_padding_and_lattice():
    with pytest.raises(ConfigValidationError) as excinfo:
        parse_config(shift_raw(padding=2))
    assert fields(excinfo) == {"problem.dilation.padding"}
    assert "need at least 8" in str(excinfo.value)
    with pytest.raises(ConfigValidationError) as excinfo:
        parse_config(shift_raw(dt=0.0625))
    assert "noise.dt" in fields(excinfo)
    raw = shift_raw()
    raw["run"]["dt_ladder"] = [0.5, 0.1]
    with pytest.raises(ConfigValidationError) as excinfo:
        parse_config(raw)
    assert fields(excinfo) == {"run.dt_ladder"}


def test_seed_list_validation():
    raw = load_raw()
    raw["run"]["seeds"] = [1, -2]
    with pytest.raises(ConfigValidationError) as excinfo:
        parse_config(raw)
    assert fields(excinfo) == {"run.seeds"}
    raw["run"]["seeds"] = [3, 5]
    assert parse_config(raw).seeds == [3, 5]


def test_cli_rejects_invalid_config(tmp_path, capsys):
    raw = load_raw()
    raw["run"]["regime"] = "sideways"
    assert cli.main(["simulate", "--config", write_config(tmp_path, raw)]) == cli.EXIT_VALIDATION
    assert "run.regime" in capsys.readouterr().err
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.json")]) == cli.EXIT_VALIDATION


def test_cli_simulate(tmp_path):
    out = str(tmp_path / "sim")
    assert cli.main(["simulate", "--seed-count", "2", "--out", out]) == cli.EXIT_OK
    manifest = read_json(os.path.join(out, "manifest.json"))
    assert manifest["command"] == "simulate"
    assert manifest["seeds"] == [0, 1]
    assert manifest["config_hash"] == sha256_of_json(apply_overrides(load_raw(), seed_count=2, out=out))
    assert sorted(manifest["files"]) == ["trajectory_seed0000.csv", "trajectory_seed0001.csv"]
    for name, digest in manifest["files"].items():
        assert sha256_of_file(os.path.join(out, name)) == digest
    with open(os.path.join(out, "trajectory_seed0000.csv")) as f:
        lines = f.read().splitlines()
    assert lines[0] == "time,y0,is_jump_node,left_y0"
    assert lines[1].startswith("0,1,")
    assert len(lines) == 1 + 65 + manifest["runs"][0]["jumps"]


def test_cli_simulate_is_reproducible(tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    cli.main(["simulate", "--seed-count", "1", "--out", a])
    cli.main(["simulate", "--seed-count", "1", "--out", b])
    assert read_json(os.path.join(a, "manifest.json"))["files"] == read_json(os.path.join(b, "manifest.json"))["files"]


def test_cli_converge(tmp_path):
    out = str(tmp_path / "conv")
    assert cli.main(["converge", "--seed-count", "2", "--out", out]) == cli.EXIT_OK
    result = read_json(os.path.join(out, "convergence.json"))
    assert result["oracle"] == "closed-form"
    assert [r["dt"] for r in result["rows"]] == sorted(load_config().dt_ladder, reverse=True)
    assert all(r["paths"] == 2 for r in result["rows"])
    with open(os.path.join(out, "convergence.csv")) as f:
        assert f.readline().strip() == "dt,error,paths"


@pytest.mark.parametrize("scale, code", [(1.0, cli.EXIT_OK), (2.0, cli.EXIT_VERIFICATION)])
def test_cli_dilation_check(tmp_path, scale, code):
    raw = shift_raw(projection_scale=scale)
    out = str(tmp_path / "dil")
    path = write_config(tmp_path, raw)
    assert cli.main(["dilation-check", "--config", path, "--out", out]) == code
    report = read_json(os.path.join(out, "verify.json"))
    checks = {c["name"]: c for c in report["suites"]["dilation"]["checks"]}
    assert checks["configured dilation diagram"]["passed"] is (scale == 1.0)
    assert checks["shift dilation exact (M=64, dx=2^-6)"]["passed"]


def test_cli_converge_plot(tmp_path):
    pytest.importorskip("matplotlib")
    out = str(tmp_path / "plot")
    assert cli.main(["converge", "--seed-count", "1", "--plot", "--out", out]) == cli.EXIT_OK
    assert os.path.getsize(os.path.join(out, "convergence.png")) > 0


def linear_ode_raw(dt_ladder):
    return {
        "schema_version": 1,
        "name": "linear-ode",
        "problem": {
            "space": {"dim": 1},
            "coefficients": {"family": "linear", "params": {"mu": 1.0, "sigma": 0.0, "jump": 0.0}},
            "y0": [1.0],
        },
        "noise": {"q_eigenvalues": [1.0], "horizon": 1.0, "dt": 0.0625},
        "run": {"seed_count": 1, "dt_ladder": dt_ladder},
    }


def test_cli_verify_all_on_default_config(tmp_path, capsys):
    out = str(tmp_path / "verify")
    assert cli.main(["verify", "--suite", "all", "--seed-count", "2", "--out", out]) == cli.EXIT_OK
    report = read_json(os.path.join(out, "verify.json"))
    assert report["passed"] is True
    assert sorted(report["suites"]) == sorted(driver.SUITES)
    assert "FAIL" not in capsys.readouterr().out


def test_cli_converge_linear_ode_has_order_one(tmp_path, capsys):
    # y' = y: Euler's error at T = 1 is e dt / 2 + O(dt^2)
    path = write_config(tmp_path, linear_ode_raw([2.0**-k for k in range(3, 9)]))
    out = str(tmp_path / "conv")
    assert cli.main(["converge", "--config", path, "--out", out]) == cli.EXIT_OK
    result = read_json(os.path.join(out, "convergence.json"))
    assert result["oracle"] == "closed-form"
    assert result["slope"] == pytest.approx(1.0, abs=0.05)
    assert "slope: %.4f" % result["slope"] in capsys.readouterr().out


def test_cli_converge_single_step_has_no_slope(tmp_path, capsys):
    path = write_config(tmp_path, linear_ode_raw([0.25]))
    out = str(tmp_path / "conv")
    assert cli.main(["converge", "--config", path, "--out", out]) == cli.EXIT_OK
    assert "slope: n/a" in capsys.readouterr().out
    result = read_json(os.path.join(out, "convergence.json"))
    assert result["slope"] is None
    assert len(result["rows"]) == 1


def test_conditions_check_on_default_config(tmp_path):
    report = driver.run_conditions_check(load_config(out=str(tmp_path)))
    assert report["passed"]
    checks = {c["name"]: c for c in report["suites"]["conditions"]["checks"]}
    staircase = checks["staircase Lipschitz constant n+1 on [n, n+1], n <= 50 (rel. rounding)"]
    assert staircase["passed"]
    assert staircase["value"] <= driver.STAIRCASE_RTOL
