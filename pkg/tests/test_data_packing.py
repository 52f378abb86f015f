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


import math
import numpy as np

from moving_frame.core.noise import MarkMeasureSpec, NoisePath, QWienerSpec, UniformBoxSampler, sample_noise, shift_noise
from moving_frame.core.sde import Trajectory
from moving_frame.util.basic import time_grid
from moving_frame.util.data_packing import (
    format_float,
    load_noise_npz,
    noise_to_rows,
    read_json,
    save_noise_npz,
    trajectory_header,
    trajectory_to_rows,
    write_json,
)


def test_format_float_round_trips():
    assert format_float(2.0) == "2"
    assert format_float(0.1) == "0.10000000000000001"
    for x in (1.0 / 3.0, math.pi * 1e-300, -2.5e17):
        assert float(format_float(x)) == x


def test_trajectory_rows():
    traj = Trajectory(
        times=np.array([0.0, 0.5, 1.0]),
        values=np.array([[1.0, 2.0], [1.5, 2.5], [3.0, 4.0]]),
        jump_nodes=np.array([1, 1]),
        left_limits=np.array([[1.25, 2.25], [1.4, 2.4]]),
        jump_increments=np.array([[0.15, 0.15], [0.1, 0.1]]),
        jump_is_large=np.array([False, True]),
        lifetime=1.0,
        time_offset=2.0,
    )
    assert trajectory_header(2) == ["time", "y0", "y1", "is_jump_node", "left_y0", "left_y1"]
    rows = trajectory_to_rows(traj)
    assert rows[0] == ["2", "1", "2", "0", "", ""]
    # the left limit before the first jump at the node
    assert rows[1] == ["2.5", "1.5", "2.5", "1", "1.25", "2.25"]
    assert rows[2][3] == "0"


def test_noise_rows():
    grid = np.array([0.0, 0.25, 1.0])
    p = NoisePath(grid, [[0.5], [-0.25]], [0.25], [[0.75]], [True], time_offset=1.0)
    assert noise_to_rows(p) == [
        ["wiener", "1", "0", "0.5"],
        ["wiener", "1.25", "0", "-0.25"],
        ["large-jump", "1.25", "0", "0.75"],
    ]


def test_noise_npz(tmp_path):
    marks = MarkMeasureSpec(
        2,
        intensity_small=4.0,
        intensity_large=2.0,
        sampler_small=UniformBoxSampler([-0.1, -0.1], [0.1, 0.1]),
        sampler_large=UniformBoxSampler([0.5, 0.5], [1.0, 1.0]),
    )
    p = sample_noise(QWienerSpec([1.0, 0.25]), marks, time_grid(1.0, 16), seed=3, path_index=2)
    p = shift_noise(p, 0.25)
    path = str(tmp_path / "noise.npz")
    save_noise_npz(p, path)
    back = load_noise_npz(path, marks)
    for name in ("grid", "wiener_increments", "jump_times", "jump_marks", "jump_is_large", "absolute_grid"):
        np.testing.assert_array_equal(getattr(back, name), getattr(p, name))
    assert (back.seed, back.path_index, back.time_offset) == (3, 2, 0.25)
    assert back.marks is marks


def test_write_json_converts_numpy(tmp_path):
    path = str(tmp_path / "sub" / "out.json")
    write_json({"a": np.arange(3), "b": np.float64(0.5), "c": float("inf"), 1: (np.int64(2),)}, path)
    assert read_json(path) == {"a": [0, 1, 2], "b": 0.5, "c": "inf", "1": [2]}
