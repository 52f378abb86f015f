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

"""Strong solvers for jump SDEs in a (truncated) Hilbert space.

All solvers are explicit Euler-Maruyama sweeps over the nodes of a NoisePath
with left-point coefficient evaluation. Small jumps are compensated, large
jumps are applied to the left limit at their node (interlacing)."""

import logging
import math
import numpy as np
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, fields

from moving_frame.core.noise import compensator_integral, large_jump_clock, shift_noise, truncate_noise
from moving_frame.errors import (
    DomainError,
    NonExplosionViolatedError,
    NumericalBlowupError,
    RegularityError,
    ShapeError,
)
from moving_frame.util.basic import as_state, parallel_map

log = logging.getLogger(__name__)

REGULARITY_FLAGS = ("globally_lipschitz", "locally_lipschitz", "linear_growth", "locally_bounded")

REASON_HORIZON = "horizon"
REASON_TRUNCATION = "truncation-level-k"
REASON_USER_STOP = "user-stop"


def implied_flags(flags):
    """Close a set of declared regularity flags under the obvious implications
    (global Lipschitz gives local Lipschitz and linear growth, linear growth
    gives local boundedness)."""
    f = set(flags)
    unknown = f - set(REGULARITY_FLAGS)
    if unknown:
        raise DomainError("unknown regularity flag(s): %s" % ", ".join(sorted(unknown)))
    if "globally_lipschitz" in f:
        f |= {"locally_lipschitz", "linear_growth"}
    if "linear_growth" in f:
        f.add("locally_bounded")
    return frozenset(f)


class BaseCoefficients(ABC):
    """Drift a(t, y), diffusion b(t, y) (a dim x noise_dim matrix acting on the
    Wiener increments) and jump coefficient c(t, y, x)."""

    def __init__(self, dim, noise_dim, regularity=()):
        self.dim = int(dim)
        self.noise_dim = int(noise_dim)
        self.regularity = implied_flags(regularity)

    @abstractmethod
    def drift(self, t, y):
        pass

    @abstractmethod
    def diffusion(self, t, y):
        pass

    @abstractmethod
    def jump(self, t, y, x):
        pass

    def has(self, *flags):
        return all(f in self.regularity for f in flags)


class CoefficientSet(BaseCoefficients):
    """Coefficients given by plain callables. Missing callables are zero.

    Parameters
    ----------
    dim: int
        State dimension M.
    noise_dim: int
        Number of Wiener coordinates M_W.
    drift, diffusion, jump: callables or None
        a(t, y) -> (dim,), b(t, y) -> (dim, noise_dim), c(t, y, x) -> (dim,).
    regularity: iterable of str
        Declared flags out of REGULARITY_FLAGS.
    name: str
        Label used in logs and manifests.
    """

    def __init__(self, dim, noise_dim=1, drift=None, diffusion=None, jump=None, regularity=(), name="custom"):
        super().__init__(dim, noise_dim, regularity)
        self._drift = drift
        self._diffusion = diffusion
        self._jump = jump
        self.name = name

    def drift(self, t, y):
        if self._drift is None:
            return np.zeros(self.dim)
        return np.asarray(self._drift(t, y), dtype=np.float64)

    def diffusion(self, t, y):
        if self._diffusion is None:
            return np.zeros((self.dim, self.noise_dim))
        return np.asarray(self._diffusion(t, y), dtype=np.float64).reshape(self.dim, self.noise_dim)

    def jump(self, t, y, x):
        if self._jump is None:
            return np.zeros(self.dim)
        return np.asarray(self._jump(t, y, x), dtype=np.float64)

    def __repr__(self):
        return "CoefficientSet(%s, dim=%d, noise_dim=%d)" % (self.name, self.dim, self.noise_dim)


class ShiftedCoefficients(BaseCoefficients):
    "base(offset + t, y) on paths in the event Gamma (gate=True), zero otherwise."

    def __init__(self, base, offset, gate=True):
        super().__init__(base.dim, base.noise_dim, base.regularity)
        self.base = base
        self.offset = float(offset)
        self.gate = bool(gate)

    def drift(self, t, y):
        if not self.gate:
            return np.zeros(self.dim)
        return self.base.drift(self.offset + t, y)

    def diffusion(self, t, y):
        if not self.gate:
            return np.zeros((self.dim, self.noise_dim))
        return self.base.diffusion(self.offset + t, y)

    def jump(self, t, y, x):
        if not self.gate:
            return np.zeros(self.dim)
        return self.base.jump(self.offset + t, y, x)


def retract(y, k):
    "R_k(y): y itself inside the closed ball of radius k, k y / ||y|| outside."
    r = np.linalg.norm(y)
    if r <= k:
        return y
    return (k / r) * y


class RetractedCoefficients(BaseCoefficients):
    """Coefficients composed with R_k. Inside the ball they see the unmodified
    state object, so solves that never leave it are bitwise unaffected."""

    def __init__(self, base, k):
        super().__init__(base.dim, base.noise_dim, base.regularity)
        self.base = base
        self.k = float(k)

    def drift(self, t, y):
        return self.base.drift(t, retract(y, self.k))

    def diffusion(self, t, y):
        return self.base.diffusion(t, retract(y, self.k))

    def jump(self, t, y, x):
        return self.base.jump(t, retract(y, self.k), x)


@dataclass(frozen=True)
class SolverOpts:
    """Numerical options shared by all solvers.

    ``quad_n`` is the per-dimension node count of the compensator quadrature;
    ``stop_time`` ends the solve early with reason user-stop; ``regime``
    overrides the automatic choice in solve()."""

    dt: float = None
    horizon: float = None
    k_min: float = 1.0
    k_max: float = 2.0**16
    blowup_threshold: float = 1e12
    quad_n: int = 16
    ignore_large_jumps: bool = False
    regime: str = None
    stop_time: float = None

    def __post_init__(self):
        if not self.k_min > 0 or not self.k_max >= self.k_min:
            raise DomainError("need 0 < k_min <= k_max")
        if not self.blowup_threshold > 0:
            raise DomainError("blowup_threshold must be positive")
        if self.quad_n < 1:
            raise DomainError("quad_n must be positive")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise KeyError("unknown solver option(s): %s" % ", ".join(sorted(unknown)))
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def replace(self, **kw):
        d = self.to_dict()
        d.update(kw)
        return SolverOpts(**d)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A discretized cadlag path.

    ``values[i]`` is the state at ``times[i]`` (post-jump at jump nodes). For
    every jump node the left limit and the applied increment are stored, in
    time order, together with the is-large flag. ``times`` are relative to the
    noise path; ``time_offset`` is their absolute origin. The path is undefined
    after ``lifetime`` and the arrays end at the lifetime node."""

    times: np.ndarray
    values: np.ndarray
    jump_nodes: np.ndarray
    left_limits: np.ndarray
    jump_increments: np.ndarray
    jump_is_large: np.ndarray
    lifetime: float
    reason: str = REASON_HORIZON
    truncation_level: float = None
    escalations: int = 0
    time_offset: float = 0.0

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def final(self):
        return self.values[-1]

    def node_of(self, t):
        k = int(np.searchsorted(self.times, t))
        if k >= self.times.size or self.times[k] != t:
            raise DomainError("time %r is not a node of the trajectory" % (t,))
        return k

    def large_jumps(self):
        "Returns (nodes, left limits, increments) of the large jumps."
        sel = self.jump_is_large
        return self.jump_nodes[sel], self.left_limits[sel], self.jump_increments[sel]

    def left_limit_values(self):
        """Y_{t_i-} at every node: the previous value at continuous nodes and the
        stored left limit at jump nodes (first jump at the node)."""
        out = np.array(self.values, copy=True)
        out[1:] = self.values[:-1]
        seen = set()
        for node, left in zip(self.jump_nodes, self.left_limits):
            if node not in seen:
                out[node] = left
                seen.add(node)
        return out

    def with_meta(self, **kw):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        return Trajectory(**d)


def sup_distance(a, b):
    "Largest node-wise distance of two trajectories on their common node prefix."
    n = min(a.values.shape[0], b.values.shape[0])
    if n == 0:
        return 0.0
    return float(np.max(np.linalg.norm(a.values[:n] - b.values[:n], axis=1)))


def _sweep(coeff, y0, noise, opts, apply_large, level=None):
    """Euler sweep over all cells of the noise grid. With ``level`` set, the
    sweep stops at the first node where the state or a left limit has norm
    above level."""
    if coeff.noise_dim != noise.noise_dim:
        raise ShapeError(
            "coefficients expect %d Wiener coordinates, noise has %d" % (coeff.noise_dim, noise.noise_dim)
        )
    y = as_state(y0, coeff.dim, name="y0")
    grid = noise.grid
    dW = noise.wiener_increments
    n = noise.steps
    if opts.stop_time is not None:
        n = min(n, int(np.searchsorted(grid, opts.stop_time - noise.time_offset)))
    marks = noise.marks
    compensate = marks is not None and marks.intensity_small > 0
    by_node = noise.jumps_by_node()
    jtimes, jmarks, jlarge = noise.jump_times, noise.jump_marks, noise.jump_is_large

    values = np.empty((n + 1, coeff.dim))
    values[0] = y
    rec_nodes, rec_left, rec_inc, rec_large = [], [], [], []
    reason = REASON_HORIZON if n == noise.steps else REASON_USER_STOP
    last = n
    for i in range(n):
        t = grid[i]
        h = grid[i + 1] - t
        y = values[i]
        step = coeff.drift(t, y) * h + coeff.diffusion(t, y) @ dW[i]
        if compensate:
            step = step - compensator_integral(coeff.jump, t, y, marks, opts.quad_n) * h
        y_new = y + step
        exited = False
        for j in by_node.get(i + 1, ()):
            if jlarge[j]:
                if not apply_large:
                    continue
                inc = coeff.jump(jtimes[j], y_new, jmarks[j])
            else:
                # small jumps see the left-point state Y_i
                inc = coeff.jump(jtimes[j], y, jmarks[j])
            rec_nodes.append(i + 1)
            rec_left.append(y_new)
            rec_inc.append(inc)
            rec_large.append(bool(jlarge[j]))
            if level is not None and np.linalg.norm(y_new) > level:
                exited = True
            y_new = y_new + inc
        r = np.linalg.norm(y_new)
        if not np.isfinite(r):
            log.warning("path (seed %d) has a non-finite state at t=%g", noise.seed, noise.time_offset + grid[i + 1])
            raise NumericalBlowupError(
                "non-finite state at t=%g" % (noise.time_offset + grid[i + 1]),
                time=noise.time_offset + grid[i + 1],
                norm=float(r),
            )
        values[i + 1] = y_new
        if level is not None and (exited or r > level):
            reason = REASON_TRUNCATION
            last = i + 1
            break
        if r > opts.blowup_threshold:
            log.warning(
                "path (seed %d) state norm %g exceeds blowup threshold %g at t=%g",
                noise.seed,
                r,
                opts.blowup_threshold,
                noise.time_offset + grid[i + 1],
            )
            raise NumericalBlowupError(
                "state norm %g exceeds blowup threshold at t=%g" % (r, noise.time_offset + grid[i + 1]),
                time=noise.time_offset + grid[i + 1],
                norm=float(r),
            )

    dim = coeff.dim
    return Trajectory(
        times=np.array(grid[: last + 1]),
        values=values[: last + 1],
        jump_nodes=np.array(rec_nodes, dtype=np.int64),
        left_limits=np.array(rec_left).reshape(-1, dim),
        jump_increments=np.array(rec_inc).reshape(-1, dim),
        jump_is_large=np.array(rec_large, dtype=bool),
        lifetime=float(grid[last]),
        reason=reason,
        truncation_level=level,
        time_offset=noise.time_offset,
    )


def solve_no_large_jumps(coeff, y0, noise, opts):
    """Euler-Maruyama for the equation without large jumps:

    Y_{i+1} = Y_i + a(t_i, Y_i) dt + b(t_i, Y_i) dW_i - (int_B c(t_i, Y_i, x) F(dx)) dt
              + sum of c(kappa, Y_i, xi) over small jumps in (t_i, t_{i+1}].

    The noise must not carry large jumps unless opts.ignore_large_jumps is set."""
    if not opts.ignore_large_jumps and np.any(noise.jump_is_large):
        raise DomainError("noise path has large jumps; use interlace_solve or set ignore_large_jumps")
    return _sweep(coeff, y0, noise, opts, apply_large=False)


def interlace_solve(coeff, y0, noise, opts):
    """Solution with large jumps: the jump-free equation between consecutive
    large-jump times, and Y = Y_- + c(rho, Y_-, xi) at each of them."""
    # validates the clock (distinct, positive times)
    large_jump_clock(noise)
    return _sweep(coeff, y0, noise, opts, apply_large=not opts.ignore_large_jumps)


def _require(coeff, flags, what):
    missing = [f for f in flags if f not in coeff.regularity]
    if missing:
        raise RegularityError("%s needs declared flag(s): %s" % (what, ", ".join(missing)))


def globalize_solve(coeff, y0, noise, opts):
    """Global solution for locally Lipschitz coefficients of linear growth.

    Solves with R_k-retracted coefficients starting at k = max(k_min, 2 ceil(||y0||)).
    Whenever the path leaves the ball of radius k the whole solve is repeated with
    k doubled; the first solve that stays inside is returned."""
    _require(coeff, ("locally_lipschitz", "linear_growth"), "globalize_solve")
    y0 = as_state(y0, coeff.dim, name="y0")
    k = max(float(opts.k_min), 2.0 * math.ceil(np.linalg.norm(y0)))
    escalations = 0
    while True:
        if k > opts.k_max:
            raise NonExplosionViolatedError(
                "truncation level %g exceeds k_max=%g" % (k, opts.k_max), level=k
            )
        traj = _sweep(RetractedCoefficients(coeff, k), y0, noise, opts, apply_large=True, level=k)
        if traj.reason != REASON_TRUNCATION:
            if escalations:
                log.info("path (seed %d) settled at truncation level %g", noise.seed, k)
            return traj.with_meta(escalations=escalations)
        log.info(
            "path (seed %d) left radius %g at t=%g, escalating", noise.seed, k, traj.time_offset + traj.lifetime
        )
        k *= 2.0
        escalations += 1


def local_level(y0):
    "Truncation level k of the partition cell {||y0|| in [k-1, k)}."
    return float(math.floor(np.linalg.norm(y0)) + 1)


def local_solve(coeff, y0, noise, opts):
    """Local solution for locally Lipschitz, locally bounded coefficients: solve
    with R_k at the level of y0's partition cell; the lifetime is the first node
    outside the ball of radius k, or the horizon."""
    _require(coeff, ("locally_lipschitz", "locally_bounded"), "local_solve")
    y0 = as_state(y0, coeff.dim, name="y0")
    k = local_level(y0)
    traj = _sweep(RetractedCoefficients(coeff, k), y0, noise, opts, apply_large=True, level=k)
    if traj.reason == REASON_TRUNCATION:
        log.info("local solution (seed %d) exits radius %g at t=%g", noise.seed, k, traj.lifetime)
    return traj


def select_regime(regularity):
    "Map declared regularity flags to 'global' or 'local'."
    f = implied_flags(regularity)
    if "locally_lipschitz" in f and "linear_growth" in f:
        return "global"
    if "locally_lipschitz" in f and "locally_bounded" in f:
        return "local"
    raise RegularityError(
        "no existence regime for flags {%s}; need locally_lipschitz with linear_growth or locally_bounded"
        % ", ".join(sorted(f))
    )


SOLVERS = {
    "global": globalize_solve,
    "local": local_solve,
    "interlace": interlace_solve,
    "no-large-jumps": solve_no_large_jumps,
}


def solve(coeff, y0, noise, opts):
    "Dispatch to the solver of opts.regime, or of the regime the flags select."
    regime = opts.regime or select_regime(coeff.regularity)
    if regime not in SOLVERS:
        raise DomainError("unknown solver regime %r" % (regime,))
    return SOLVERS[regime](coeff, y0, noise, opts)


def concatenate_trajectories(first, second):
    """Paste a restarted trajectory (times relative to its restart point) onto
    the trajectory it was restarted from."""
    tau = first.times[-1]
    assert np.array_equal(first.values[-1], second.values[0]), "restart state must equal the pasting value"
    off = first.times.size - 1
    return Trajectory(
        times=np.concatenate([first.times, tau + second.times[1:]]),
        values=np.vstack([first.values, second.values[1:]]),
        jump_nodes=np.concatenate([first.jump_nodes, second.jump_nodes + off]),
        left_limits=np.vstack([first.left_limits, second.left_limits]),
        jump_increments=np.vstack([first.jump_increments, second.jump_increments]),
        jump_is_large=np.concatenate([first.jump_is_large, second.jump_is_large]),
        lifetime=tau + second.lifetime,
        reason=second.reason,
        truncation_level=second.truncation_level,
        escalations=first.escalations + second.escalations,
        time_offset=first.time_offset,
    )


def restart_solve(coeff, y0, noise, opts, tau, solver=interlace_solve):
    """Solve on [0, tau], then restart from Y_tau with the shifted noise and
    ShiftedCoefficients(coeff, tau), and paste the two parts."""
    first = solver(coeff, y0, truncate_noise(noise, tau), opts)
    if first.reason != REASON_HORIZON:
        return first
    second = solver(ShiftedCoefficients(coeff, tau), first.final, shift_noise(noise, tau), opts)
    return concatenate_trajectories(first, second)


@dataclass(frozen=True)
class UniquenessReport:
    sup_distance: float
    compared_until: float
    nodes: int
    initial_equal: bool
    bitwise_equal: bool

    def to_dict(self):
        return asdict(self)


def uniqueness_probe(coeff, y0, y0_other, noise, opts, solver=solve):
    """Run two solver instances on the same noise and compare them up to the
    smaller lifetime."""
    a = solver(coeff, np.array(y0, dtype=np.float64), noise, opts)
    b = solver(coeff, np.array(y0_other, dtype=np.float64), noise, opts)
    n = min(a.values.shape[0], b.values.shape[0])
    return UniquenessReport(
        sup_distance=sup_distance(a, b),
        compared_until=float(a.times[n - 1]),
        nodes=n,
        initial_equal=bool(np.array_equal(a.values[0], b.values[0])),
        bitwise_equal=bool(np.array_equal(a.values[:n], b.values[:n])),
    )


@dataclass(frozen=True)
class UniquenessBatch:
    reports: tuple
    equal_mask: np.ndarray
    distances: np.ndarray

    @property
    def max_distance(self):
        return float(self.distances.max()) if self.distances.size else 0.0

    @property
    def max_distance_on_equal(self):
        d = self.distances[self.equal_mask]
        return float(d.max()) if d.size else 0.0


def uniqueness_batch(coeff, initial_pairs, noises, opts, solver=solve, workers=None):
    """uniqueness_probe over paths: initial_pairs[i] = (y0, y0') is used with
    noises[i]. equal_mask marks the paths of the event {y0 = y0'}."""
    if len(initial_pairs) != len(noises):
        raise ShapeError("need one initial pair per noise path")
    reports = parallel_map(
        lambda item: uniqueness_probe(coeff, item[0][0], item[0][1], item[1], opts, solver=solver),
        list(zip(initial_pairs, noises)),
        workers,
    )
    return UniquenessBatch(
        reports=tuple(reports),
        equal_mask=np.array([r.initial_equal for r in reports], dtype=bool),
        distances=np.array([r.sup_distance for r in reports]),
    )
