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

"""Frozen realizations of the Q-Wiener process and of the Poisson random
measure, split into small (B) and large (B^c) jumps."""

import logging
import numpy as np
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

from moving_frame.errors import AlignmentError, DomainError, InvariantError, ResourceError, ShapeError
from moving_frame.util.basic import get_max_quadrature_nodes

log = logging.getLogger(__name__)

# stream ids keyed together with (seed, path index) into a Philox counter-based generator
STREAMS = {"wiener": 0, "jump-times": 1, "marks": 2, "bridge": 3}

# node lookup tolerance, relative to the horizon
NODE_RTOL = 1e-9


def stream_rng(seed, path_index, stream):
    """Return an independent numpy Generator for (seed, path_index, stream).
    Philox is counter based, so any path can be regenerated on its own."""
    if int(seed) != seed or seed < 0 or path_index < 0:
        raise DomainError("seed and path index must be nonnegative integers")
    ss = np.random.SeedSequence([int(seed), int(path_index), STREAMS[stream]])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class QWienerSpec:
    "Trace-class covariance Q = diag(lambda_1..lambda_M) in the eigenbasis."

    eigenvalues: tuple

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=np.float64).reshape(-1)
        if lam.size == 0 or np.any(~(lam > 0)) or not np.all(np.isfinite(lam)):
            raise DomainError("Q-Wiener eigenvalues must be positive and finite")
        object.__setattr__(self, "eigenvalues", tuple(float(v) for v in lam))

    @property
    def dim(self):
        return len(self.eigenvalues)

    @property
    def trace(self):
        return float(sum(self.eigenvalues))

    @property
    def sqrt_eigenvalues(self):
        return np.sqrt(np.asarray(self.eigenvalues))


class MarkSampler(ABC):
    "Base class for the parametric mark distributions on E = R^d."

    def __init__(self, mark_dim):
        self.mark_dim = int(mark_dim)

    @property
    @abstractmethod
    def family(self):
        pass

    @abstractmethod
    def sample(self, rng, n):
        "Returns an (n, mark_dim) array of marks."
        pass

    @abstractmethod
    def quadrature(self, quad_n):
        """Returns (nodes, weights) of a deterministic rule for expectations
        under this distribution; weights sum to one."""
        pass

    @abstractmethod
    def to_dict(self):
        pass

    def is_discrete(self):
        return False

    def _check_capacity(self, quad_n):
        if quad_n < 1:
            raise DomainError("quad_n must be positive")
        total = quad_n**self.mark_dim
        if total > get_max_quadrature_nodes():
            raise ResourceError(
                "product quadrature with %d^%d = %d nodes exceeds MF_MAX_QUAD_NODES=%d"
                % (quad_n, self.mark_dim, total, get_max_quadrature_nodes())
            )


def _product_rule(axes_nodes, axes_weights):
    grids = np.meshgrid(*axes_nodes, indexing="ij")
    nodes = np.stack([g.reshape(-1) for g in grids], axis=1)
    wgrids = np.meshgrid(*axes_weights, indexing="ij")
    weights = np.prod(np.stack([w.reshape(-1) for w in wgrids], axis=1), axis=1)
    return nodes, weights


class UniformBoxSampler(MarkSampler):
    "Uniform distribution on the box [low, high]."

    def __init__(self, low, high):
        self.low = np.asarray(low, dtype=np.float64).reshape(-1)
        self.high = np.asarray(high, dtype=np.float64).reshape(-1)
        if self.low.shape != self.high.shape or np.any(~(self.high > self.low)):
            raise DomainError("uniform-box needs low < high componentwise")
        super().__init__(self.low.size)

    @property
    def family(self):
        return "uniform-box"

    def sample(self, rng, n):
        return self.low + (self.high - self.low) * rng.random((n, self.mark_dim))

    def quadrature(self, quad_n):
        # midpoint rule per axis
        self._check_capacity(quad_n)
        frac = (np.arange(quad_n) + 0.5) / quad_n
        axes = [lo + (hi - lo) * frac for lo, hi in zip(self.low, self.high)]
        weights = [np.full(quad_n, 1.0 / quad_n)] * self.mark_dim
        return _product_rule(axes, weights)

    def to_dict(self):
        return {"family": self.family, "low": self.low.tolist(), "high": self.high.tolist()}


class GaussianSampler(MarkSampler):
    "Independent normal coordinates with given means and standard deviations."

    def __init__(self, mean, std):
        self.mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        self.std = np.asarray(std, dtype=np.float64).reshape(-1)
        if self.mean.shape != self.std.shape or np.any(~(self.std > 0)):
            raise DomainError("gaussian needs matching mean/std with std > 0")
        super().__init__(self.mean.size)

    @property
    def family(self):
        return "gaussian"

    def sample(self, rng, n):
        return self.mean + self.std * rng.standard_normal((n, self.mark_dim))

    def quadrature(self, quad_n):
        # Gauss-Hermite (probabilists') per axis
        self._check_capacity(quad_n)
        x, w = np.polynomial.hermite_e.hermegauss(quad_n)
        w = w / w.sum()
        axes = [m + s * x for m, s in zip(self.mean, self.std)]
        return _product_rule(axes, [w] * self.mark_dim)

    def to_dict(self):
        return {"family": self.family, "mean": self.mean.tolist(), "std": self.std.tolist()}


class DiscreteAtomsSampler(MarkSampler):
    "Finitely many atoms with positive weights (normalized to probabilities)."

    def __init__(self, atoms, weights=None):
        self.atoms = np.asarray(atoms, dtype=np.float64)
        if self.atoms.ndim == 1:
            self.atoms = self.atoms.reshape(-1, 1)
        if self.atoms.ndim != 2 or self.atoms.shape[0] == 0:
            raise ShapeError("discrete-atoms needs a nonempty (k, d) array of atoms")
        if weights is None:
            weights = np.ones(self.atoms.shape[0])
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != self.atoms.shape[0] or np.any(~(w > 0)):
            raise DomainError("discrete-atoms weights must be positive, one per atom")
        self.weights = w
        self.probs = w / w.sum()
        super().__init__(self.atoms.shape[1])

    @property
    def family(self):
        return "discrete-atoms"

    def is_discrete(self):
        return True

    def sample(self, rng, n):
        return self.atoms[rng.choice(self.atoms.shape[0], size=n, p=self.probs)]

    def quadrature(self, quad_n):
        # exact, quad_n is irrelevant
        return self.atoms.copy(), self.probs.copy()

    def to_dict(self):
        return {"family": self.family, "atoms": self.atoms.tolist(), "weights": self.weights.tolist()}


_sampler_families = {
    "uniform-box": (lambda d: UniformBoxSampler(d["low"], d["high"]), {"low", "high"}),
    "gaussian": (lambda d: GaussianSampler(d["mean"], d["std"]), {"mean", "std"}),
    "discrete-atoms": (lambda d: DiscreteAtomsSampler(d["atoms"], d.get("weights")), {"atoms", "weights"}),
}


def resolve_sampler(desc):
    "Build a MarkSampler from e.g. {\"family\": \"gaussian\", \"mean\": [0], \"std\": [1]}."
    fam = desc.get("family")
    if fam not in _sampler_families:
        raise KeyError("Could not resolve mark sampler family %r" % (fam,))
    ctor, fields = _sampler_families[fam]
    unknown = set(desc.keys()) - fields - {"family"}
    if unknown:
        raise KeyError("unknown field(s) for %s sampler: %s" % (fam, ", ".join(sorted(unknown))))
    return ctor(desc)


class MarkMeasureSpec:
    """Intensity measure F on E split by B: total masses F(B), F(B^c) and the
    normalized distributions on each part. Membership of a sampled mark is
    recorded by which sampler drew it, never by re-evaluating a predicate."""

    def __init__(
        self,
        mark_dim,
        intensity_small=0.0,
        intensity_large=0.0,
        sampler_small=None,
        sampler_large=None,
        small_set="B",
    ):
        self.mark_dim = int(mark_dim)
        self.intensity_small = float(intensity_small)
        self.intensity_large = float(intensity_large)
        self.sampler_small = sampler_small
        self.sampler_large = sampler_large
        self.small_set = small_set
        if self.mark_dim < 1:
            raise DomainError("mark_dim must be positive")
        for name, lam, smp in (
            ("small", self.intensity_small, sampler_small),
            ("large", self.intensity_large, sampler_large),
        ):
            if not (lam >= 0 and np.isfinite(lam)):
                raise DomainError("%s-jump intensity must be finite and nonnegative" % name)
            if lam > 0 and smp is None:
                raise DomainError("%s-jump intensity > 0 needs a sampler" % name)
            if smp is not None and smp.mark_dim != self.mark_dim:
                raise ShapeError("%s sampler has mark dimension %d, expected %d" % (name, smp.mark_dim, self.mark_dim))
        self._quad_cache = {}
        self._quad_lock = threading.Lock()

    @classmethod
    def none(cls, mark_dim=1):
        "A measure without any jump activity."
        return cls(mark_dim)

    def small_quadrature(self, quad_n):
        """Nodes and F-weights for integrals over B: sum_i w_i f(x_i) ~ int_B f dF.
        Returns empty arrays when F(B) = 0."""
        if self.intensity_small == 0 or self.sampler_small is None:
            return np.zeros((0, self.mark_dim)), np.zeros(0)
        # solvers call this from worker threads
        with self._quad_lock:
            res = self._quad_cache.get(quad_n)
            if res is None:
                nodes, w = self.sampler_small.quadrature(quad_n)
                res = (nodes, self.intensity_small * w)
                self._quad_cache[quad_n] = res
        return res

    def to_dict(self):
        return {
            "mark_dim": self.mark_dim,
            "intensity_small": self.intensity_small,
            "intensity_large": self.intensity_large,
            "sampler_small": None if self.sampler_small is None else self.sampler_small.to_dict(),
            "sampler_large": None if self.sampler_large is None else self.sampler_large.to_dict(),
            "small_set": self.small_set,
        }


_mark_fields = {"mark_dim", "intensity_small", "intensity_large", "sampler_small", "sampler_large", "small_set"}


def resolve_marks(desc):
    "Build a MarkMeasureSpec from its dictionary description."
    unknown = set(desc.keys()) - _mark_fields
    if unknown:
        raise KeyError("unknown field(s) for mark measure: %s" % ", ".join(sorted(unknown)))
    small = desc.get("sampler_small")
    large = desc.get("sampler_large")
    return MarkMeasureSpec(
        desc.get("mark_dim", 1),
        desc.get("intensity_small", 0.0),
        desc.get("intensity_large", 0.0),
        None if small is None else resolve_sampler(small),
        None if large is None else resolve_sampler(large),
        desc.get("small_set", "B"),
    )


def _readonly(a, dtype=np.float64):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NoisePath:
    """One frozen noise realization on [0, T].

    ``grid`` contains every jump time as a node. ``wiener_increments[i, j]`` is
    the increment of the j-th Q-Wiener coordinate over cell i (variance
    (t_{i+1} - t_i) * lambda_j). ``time_offset`` is the absolute time of the
    first node, nonzero for shifted paths. ``absolute_grid`` holds the absolute
    node times of the originally sampled path (``grid + time_offset`` when not
    given); shifts rebase from it, so ``grid == absolute_grid - absolute_grid[0]``
    on shifted paths. ``marks`` is the MarkMeasureSpec the path was drawn from;
    solvers compensate the small jumps with it."""

    grid: np.ndarray
    wiener_increments: np.ndarray
    jump_times: np.ndarray
    jump_marks: np.ndarray
    jump_is_large: np.ndarray
    seed: int = 0
    path_index: int = 0
    time_offset: float = 0.0
    marks: object = None
    absolute_grid: np.ndarray = field(default=None, repr=False)
    _node_index: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        grid = _readonly(self.grid)
        incs = _readonly(self.wiener_increments)
        times = _readonly(self.jump_times).reshape(-1)
        marks = _readonly(self.jump_marks)
        if marks.ndim == 1:
            marks = _readonly(marks.reshape(-1, 1) if times.size else marks.reshape(0, 1))
        large = _readonly(self.jump_is_large, dtype=bool).reshape(-1)
        if grid.ndim != 1 or grid.size == 0:
            raise DomainError("noise grid must be a nonempty one-dimensional array")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("noise grid must be strictly increasing")
        if incs.ndim != 2 or incs.shape[0] != grid.size - 1:
            raise ShapeError("wiener_increments must have shape (len(grid) - 1, M)")
        if not (times.size == marks.shape[0] == large.size):
            raise ShapeError("jump times, marks and flags must have equal length")
        if np.any(np.diff(times) < 0):
            raise InvariantError("jump times must be sorted")
        node_index = np.searchsorted(grid, times)
        if times.size and (np.any(node_index >= grid.size) or np.any(grid[np.minimum(node_index, grid.size - 1)] != times)):
            raise AlignmentError("every jump time must be a node of the grid")
        if self.absolute_grid is None:
            absolute = _readonly(grid + self.time_offset if self.time_offset else grid)
        else:
            absolute = _readonly(self.absolute_grid).reshape(-1)
            if absolute.shape != grid.shape:
                raise ShapeError("absolute_grid must have the shape of grid")
        for name, val in (
            ("grid", grid),
            ("wiener_increments", incs),
            ("jump_times", times),
            ("jump_marks", marks),
            ("jump_is_large", large),
            ("absolute_grid", absolute),
            ("_node_index", _readonly(node_index, dtype=np.int64)),
        ):
            object.__setattr__(self, name, val)

    @property
    def horizon(self):
        return float(self.grid[-1])

    @property
    def steps(self):
        return self.grid.size - 1

    @property
    def noise_dim(self):
        return self.wiener_increments.shape[1]

    @property
    def mark_dim(self):
        return self.jump_marks.shape[1]

    @property
    def jump_node_indices(self):
        "Grid index of every jump."
        return self._node_index

    def jumps_by_node(self, include_large=True):
        "Dict node index -> list of jump indices located at that node."
        out = {}
        for j, node in enumerate(self._node_index):
            if include_large or not self.jump_is_large[j]:
                out.setdefault(int(node), []).append(j)
        return out


@dataclass(frozen=True)
class LargeJumpClock:
    "rho_0 = 0 < rho_1 < ... : the times of the large jumps, prefixed by zero."

    times: np.ndarray

    @property
    def count(self):
        "Number of large jumps (excluding rho_0)."
        return len(self.times) - 1

    def __iter__(self):
        return iter(self.times)


def _bridge_increments(nodes, total, sqrt_lam, rng):
    """Split the increment ``total`` over [nodes[0], nodes[-1]] at the interior
    nodes by sequential Brownian-bridge sampling."""
    a, b = nodes[0], nodes[-1]
    w = np.zeros_like(total)
    s_prev = a
    values = []
    for s in nodes[1:-1]:
        mean = w + (s - s_prev) / (b - s_prev) * (total - w)
        var = (s - s_prev) * (b - s) / (b - s_prev)
        w = mean + np.sqrt(var) * sqrt_lam * rng.standard_normal(total.shape[0])
        values.append(w)
        s_prev = s
    path = np.vstack([np.zeros_like(total)] + values + [total])
    return np.diff(path, axis=0)


def sample_noise(q, m, grid, seed, path_index=0):
    """Draw one noise path on the given time grid.

    Parameters
    ----------
    q: QWienerSpec
        Covariance of the Wiener part.
    m: MarkMeasureSpec
        Jump intensity, split into B and B^c.
    grid: array of float
        Strictly increasing time points starting at 0. The returned path's
        grid is this grid refined by all jump times.
    seed: int
        Base seed; together with path_index it keys independent streams for
        the Wiener increments, jump times, marks and bridge refinement.
    """
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    if grid.size == 0:
        raise DomainError("cannot sample noise on an empty grid")
    if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must start at 0 and be strictly increasing")
    T = float(grid[-1])
    sqrt_lam = q.sqrt_eigenvalues

    rng_t = stream_rng(seed, path_index, "jump-times")
    n_small = int(rng_t.poisson(T * m.intensity_small))
    n_large = int(rng_t.poisson(T * m.intensity_large))
    # uniform on (0, T]; the count is Poisson so the times are the order statistics
    t_small = T * (1.0 - rng_t.random(n_small))
    t_large = T * (1.0 - rng_t.random(n_large))

    rng_m = stream_rng(seed, path_index, "marks")
    x_small = m.sampler_small.sample(rng_m, n_small) if n_small else np.zeros((0, m.mark_dim))
    x_large = m.sampler_large.sample(rng_m, n_large) if n_large else np.zeros((0, m.mark_dim))

    times = np.concatenate([t_small, t_large])
    marks = np.vstack([x_small, x_large])
    large = np.concatenate([np.zeros(n_small, dtype=bool), np.ones(n_large, dtype=bool)])
    order = np.argsort(times, kind="stable")
    times, marks, large = times[order], marks[order], large[order]
    if np.any(np.diff(times) == 0):
        raise InvariantError("coincident jump times drawn (probability zero event), seed %d" % seed)

    rng_w = stream_rng(seed, path_index, "wiener")
    dt = np.diff(grid)
    base = rng_w.standard_normal((dt.size, q.dim)) * np.sqrt(dt)[:, None] * sqrt_lam[None, :]

    cuts = times[~np.isin(times, grid)]
    if cuts.size == 0:
        refined, incs = grid, base
    else:
        refined = np.union1d(grid, cuts)
        incs = np.empty((refined.size - 1, q.dim))
        starts = np.searchsorted(refined, grid)
        widths = np.diff(starts)
        plain = widths == 1
        incs[starts[:-1][plain]] = base[plain]
        rng_b = stream_rng(seed, path_index, "bridge")
        for i in np.flatnonzero(~plain):
            a, b = starts[i], starts[i + 1]
            incs[a:b] = _bridge_increments(refined[a : b + 1], base[i], sqrt_lam, rng_b)
    log.debug("sampled noise seed=%d path=%d: %d small, %d large jumps", seed, path_index, n_small, n_large)
    return NoisePath(refined, incs, times, marks, large, seed=int(seed), path_index=int(path_index), marks=m)


def large_jump_clock(p):
    "Returns the clock rho_0 = 0 < rho_1 < ... of the large jumps of p."
    t = p.jump_times[p.jump_is_large]
    if np.any(np.diff(t) <= 0):
        raise InvariantError("large-jump times must be distinct")
    if t.size and t[0] <= 0:
        raise InvariantError("large-jump times must be positive")
    return LargeJumpClock(_readonly(np.concatenate([[0.0], t])))


def _node_of(p, tau):
    "Index of the node nearest to tau; tau must match it up to NODE_RTOL of the horizon."
    k = int(np.argmin(np.abs(p.grid - tau)))
    if abs(p.grid[k] - tau) > NODE_RTOL * max(1.0, abs(p.grid[-1])):
        raise AlignmentError("time %r is not a node of the noise grid" % (tau,))
    return k


def shift_noise(p, tau):
    """The noise restarted at grid time tau: increments re-indexed from tau,
    node and jump times rebased on the absolute time of the tau node. Jumps at
    exactly tau stay with the pre-tau part.

    The new grid is computed from the absolute node times, so
    shift_noise(shift_noise(p, s), t) and shift_noise(p, s + t) agree bitwise."""
    k = _node_of(p, tau)
    absolute = p.absolute_grid[k:]
    origin = absolute[0]
    grid = absolute - origin
    keep = p.jump_node_indices > k
    return NoisePath(
        grid,
        p.wiener_increments[k:],
        grid[p.jump_node_indices[keep] - k],
        p.jump_marks[keep],
        p.jump_is_large[keep],
        seed=p.seed,
        path_index=p.path_index,
        time_offset=float(origin),
        marks=p.marks,
        absolute_grid=absolute,
    )


def truncate_noise(p, tau):
    "Restriction of p to [0, tau]; a jump at exactly tau is kept."
    k = _node_of(p, tau)
    keep = p.jump_node_indices <= k
    return NoisePath(
        p.grid[: k + 1],
        p.wiener_increments[:k],
        p.jump_times[keep],
        p.jump_marks[keep],
        p.jump_is_large[keep],
        seed=p.seed,
        path_index=p.path_index,
        time_offset=p.time_offset,
        marks=p.marks,
        absolute_grid=p.absolute_grid[: k + 1],
    )


def coarsen_noise(p, grid):
    """Aggregate the increments of p onto a coarser grid. Every node of grid
    must be a node of p and the horizons must agree; all jump times are kept
    as nodes, so the result sees the same jumps."""
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    if grid[0] != 0.0 or grid[-1] != p.grid[-1]:
        raise AlignmentError("coarse grid must span the same horizon as the noise path")
    coarse = np.union1d(grid, p.jump_times)
    idx = np.searchsorted(p.grid, coarse)
    if np.any(idx >= p.grid.size) or np.any(p.grid[np.minimum(idx, p.grid.size - 1)] != coarse):
        raise AlignmentError("coarse grid nodes must be nodes of the fine noise grid")
    incs = np.add.reduceat(p.wiener_increments, idx[:-1], axis=0)
    return NoisePath(
        coarse,
        incs,
        p.jump_times,
        p.jump_marks,
        p.jump_is_large,
        seed=p.seed,
        path_index=p.path_index,
        time_offset=p.time_offset,
        marks=p.marks,
        absolute_grid=p.absolute_grid[idx],
    )


def compensator_integral(c, t, y, m, quad_n):
    """int_B c(t, y, x) F(dx): exact for discrete atoms, product quadrature with
    quad_n nodes per mark dimension otherwise. Zero when F(B) = 0."""
    nodes, weights = m.small_quadrature(quad_n)
    acc = np.zeros_like(np.asarray(y, dtype=np.float64))
    for x, w in zip(nodes, weights):
        acc = acc + w * c(t, y, x)
    return acc
