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

import hashlib
import json
import numpy as np
import os
from concurrent.futures import ThreadPoolExecutor

from moving_frame.errors import ShapeError


def get_num_default_workers():
    """Return the number of workers for parallel Monte Carlo batches. Controllable
    via the MF_THREADS environment variable. If the env.var. is
    undefined, the default value of 1 is returned.
    """

    try:
        return max(1, int(os.environ["MF_THREADS"]))
    except KeyError:
        return 1


def get_max_quadrature_nodes():
    "Return the largest product quadrature (nodes over all mark dimensions) allowed."
    try:
        return int(os.environ["MF_MAX_QUAD_NODES"])
    except KeyError:
        return 2**20


def get_dilation_tol():
    "Return the default tolerance for the dilation diagram check."
    try:
        return float(os.environ["MF_DILATION_TOL"])
    except KeyError:
        return 1e-8


def as_state(h, dim=None, name="state"):
    """Return h as a one-dimensional float64 array, checking its length against
    dim if given."""
    arr = np.asarray(h, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ShapeError("%s must be one-dimensional, got shape %s" % (name, arr.shape))
    if dim is not None and arr.shape[0] != dim:
        raise ShapeError("%s has dimension %d, expected %d" % (name, arr.shape[0], dim))
    return arr


def integer_ratio(x, unit, rtol=1e-9):
    """Return x / unit as an int if it is an integer up to rtol, else None.

    Examples:

    integer_ratio(1.0, 0.25) = 4

    integer_ratio(1.0, 0.3) = None
    """
    q = x / unit
    n = int(np.rint(q))
    if abs(q - n) <= rtol * max(1.0, abs(q)):
        return n
    return None


def canonical_json(obj):
    "Serialize obj to a canonical (sorted, compact) JSON string."
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_of_json(obj):
    "Content hash of the canonical JSON form of obj."
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def sha256_of_file(path):
    "Content hash of a file, read in 1 MiB chunks."
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fit_loglog_slope(xs, ys):
    """Least-squares slope of log(ys) against log(xs). Returns None when fewer
    than two usable points exist (non-positive values are dropped)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    keep = (xs > 0) & (ys > 0) & np.isfinite(ys)
    if keep.sum() < 2:
        return None
    slope, _ = np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)
    return float(slope)


def parallel_map(fn, items, workers=None):
    """Apply fn to every item on a thread pool of ``workers`` threads (default
    get_num_default_workers()). Results come back in input order."""
    items = list(items)
    if workers is None:
        workers = get_num_default_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def time_grid(horizon, steps):
    """Uniform grid of steps cells on [0, horizon]. Nodes are (k / steps) * horizon,
    so the nodes of a grid with steps / r cells are bitwise nodes of this one."""
    if steps < 1:
        raise ValueError("need at least one step")
    return (np.arange(steps + 1) / steps) * horizon
