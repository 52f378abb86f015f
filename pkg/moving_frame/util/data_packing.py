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
import numpy as np
import os

from moving_frame.core.noise import NoisePath

FLOAT_FORMAT = "%.17g"


def format_float(x):
    """
    Format a float so that parsing it back gives the same double.

    Examples:

    format_float(0.1) = "0.10000000000000001"

    format_float(2.0) = "2"
    """
    return FLOAT_FORMAT % x


def trajectory_header(dim):
    "Column names of trajectory_to_csv for a state of dimension dim."
    cols = ["time"] + ["y%d" % k for k in range(dim)] + ["is_jump_node"]
    return cols + ["left_y%d" % k for k in range(dim)]


def trajectory_to_rows(traj):
    """
    One row per node: absolute time, state coordinates, is_jump_node (0/1) and
    the left limit at jump nodes (empty cells elsewhere). With several jumps at
    one node the left limit before the first of them is written.
    """
    dim = traj.dim
    lefts = {}
    for node, left in zip(traj.jump_nodes, traj.left_limits):
        lefts.setdefault(int(node), left)
    rows = []
    for i, (t, y) in enumerate(zip(traj.times, traj.values)):
        row = [format_float(traj.time_offset + t)] + [format_float(v) for v in y]
        if i in lefts:
            row += ["1"] + [format_float(v) for v in lefts[i]]
        else:
            row += ["0"] + [""] * dim
        rows.append(row)
    return rows


def _write_rows(path, header, rows):
    with open(path, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(row) + "\n")


def trajectory_to_csv(traj, path):
    "Write a Trajectory as CSV, see trajectory_to_rows for the columns."
    _write_rows(path, trajectory_header(traj.dim), trajectory_to_rows(traj))


def noise_to_rows(p):
    """
    Audit dump of a NoisePath: rows (kind, time, coord, value). Wiener rows give
    the increment of coordinate coord over the cell starting at time; jump rows
    give coordinate coord of the mark, kind small-jump or large-jump.
    """
    rows = []
    for i, t in enumerate(p.grid[:-1]):
        for j, v in enumerate(p.wiener_increments[i]):
            rows.append(["wiener", format_float(p.time_offset + t), str(j), format_float(v)])
    for t, x, large in zip(p.jump_times, p.jump_marks, p.jump_is_large):
        kind = "large-jump" if large else "small-jump"
        for j, v in enumerate(x):
            rows.append([kind, format_float(p.time_offset + t), str(j), format_float(v)])
    return rows


def noise_to_csv(p, path):
    _write_rows(path, ["kind", "time", "coord", "value"], noise_to_rows(p))


def save_noise_npz(p, path):
    "Binary dump of a NoisePath (without its mark measure)."
    np.savez(
        path,
        grid=p.grid,
        wiener_increments=p.wiener_increments,
        jump_times=p.jump_times,
        jump_marks=p.jump_marks,
        jump_is_large=p.jump_is_large,
        absolute_grid=p.absolute_grid,
        meta=np.array([p.seed, p.path_index], dtype=np.int64),
        time_offset=np.array(p.time_offset),
    )


def load_noise_npz(path, marks=None):
    "Inverse of save_noise_npz; the mark measure has to be supplied again."
    with np.load(path) as d:
        seed, index = (int(v) for v in d["meta"])
        return NoisePath(
            d["grid"],
            d["wiener_increments"],
            d["jump_times"],
            d["jump_marks"],
            d["jump_is_large"],
            seed=seed,
            path_index=index,
            time_offset=float(d["time_offset"]),
            marks=marks,
            absolute_grid=d["absolute_grid"],
        )


def convergence_to_csv(rows, path):
    "rows are dicts with keys dt, error, paths."
    _write_rows(
        path,
        ["dt", "error", "paths"],
        [[format_float(r["dt"]), format_float(r["error"]), str(r["paths"])] for r in rows],
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def write_json(obj, path):
    "Write obj as indented, key-sorted JSON; numpy values and non-finite floats are converted."
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        json.dump(_jsonable(obj), f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path):
    with open(path) as f:
        return json.load(f)
