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

"""Truncated state spaces, semigroups S_t, groups U_t and dilation triples
(embed, group, project) with project . U_t . embed = S_t."""

import numpy as np
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from scipy.linalg import expm

from moving_frame.errors import CapacityError, DomainError, ShapeError
from moving_frame.util.basic import as_state


@dataclass(frozen=True)
class SpaceSpec:
    "A truncation H_M of a separable Hilbert space: coordinate dimension and label."

    dim: int
    label: str = "H"

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise DomainError("SpaceSpec.dim must be a positive integer, got %r" % (self.dim,))

    def check(self, h, name="state"):
        "Return h as a state vector of this space, raising ShapeError otherwise."
        return as_state(h, self.dim, name=name)

    def composable(self, other):
        return self.dim == other.dim


class SemigroupSpec(ABC):
    "Base class for the semigroups (S_t) acting on H_M."

    def __init__(self, dim, omega):
        if int(dim) != dim or dim < 1:
            raise DomainError("semigroup dimension must be a positive integer")
        self.dim = int(dim)
        self.omega = float(omega)

    @property
    def space(self):
        return SpaceSpec(self.dim, "H")

    @property
    @abstractmethod
    def kind(self):
        "Returns the kind name used in configuration files."
        pass

    @abstractmethod
    def transition(self, s, t, h):
        """Evolve h from absolute time s to absolute time t >= s. Callers validate
        the arguments; see semigroup_transition."""
        pass

    @abstractmethod
    def to_dict(self):
        "Return a JSON-serializable description accepted by resolve_semigroup."
        pass

    def apply(self, t, h):
        return self.transition(0.0, t, h)

    def growth_bound(self, t):
        "Returns e^{omega t}, the pseudo-contractivity bound on the operator norm."
        return float(np.exp(self.omega * t))

    def __repr__(self):
        return "%s(dim=%d)" % (type(self).__name__, self.dim)


class DiagonalSemigroup(SemigroupSpec):
    """S_t multiplies coordinate k by exp(mu_k t). The generator is bounded, so
    the same formula defines a group for negative t."""

    def __init__(self, eigenvalues, omega=None):
        mu = np.asarray(eigenvalues, dtype=np.float64).reshape(-1)
        if mu.size == 0:
            raise DomainError("diagonal semigroup needs at least one eigenvalue")
        if omega is None:
            omega = float(mu.max())
        super().__init__(mu.size, omega)
        if np.any(mu > self.omega):
            raise DomainError(
                "diagonal semigroup is not pseudo-contractive with omega=%g: max eigenvalue %g"
                % (self.omega, mu.max())
            )
        self.eigenvalues = mu
        self.eigenvalues.setflags(write=False)

    @property
    def kind(self):
        return "diagonal"

    def evolve(self, t, h):
        "Group action exp(tA) h for t of either sign."
        return np.exp(self.eigenvalues * t) * h

    def transition(self, s, t, h):
        return self.evolve(t - s, h)

    def to_dict(self):
        return {"kind": self.kind, "eigenvalues": self.eigenvalues.tolist(), "omega": self.omega}


class MatrixSemigroup(SemigroupSpec):
    """S_t = expm(tA) for a dense real generator A. omega defaults to the
    logarithmic norm of A (largest eigenvalue of its symmetric part), which
    bounds ||expm(tA)|| by e^{omega t}."""

    def __init__(self, generator, omega=None):
        A = np.array(generator, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ShapeError("matrix generator must be square, got shape %s" % (A.shape,))
        if omega is None:
            omega = float(np.linalg.eigvalsh(0.5 * (A + A.T)).max())
        super().__init__(A.shape[0], omega)
        self.generator = A
        self.generator.setflags(write=False)
        self._expm_cache = {}
        self._lock = threading.Lock()

    @property
    def kind(self):
        return "matrix"

    def propagator(self, t):
        "Returns expm(tA); memoized per t."
        key = float(t)
        with self._lock:
            P = self._expm_cache.get(key)
        if P is None:
            P = expm(key * self.generator)
            P.setflags(write=False)
            with self._lock:
                # bounded memo: solvers ask for O(grid) distinct steps
                if len(self._expm_cache) > 4096:
                    self._expm_cache.clear()
                self._expm_cache[key] = P
        return P

    def evolve(self, t, h):
        return self.propagator(t) @ h

    def transition(self, s, t, h):
        return self.evolve(t - s, h)

    def to_dict(self):
        return {"kind": self.kind, "generator": self.generator.tolist(), "omega": self.omega}


class ShiftSemigroup(SemigroupSpec):
    """Left translation on a half-line grid of ``dim`` nodes with spacing dx:
    (S_t h)(x) = h(x + t), zero beyond the last node.

    Times are aligned to the nearest lattice node, and transitions between
    absolute times s -> t move by cells(t) - cells(s), so that composing
    transitions over any time grid is exact."""

    def __init__(self, dim, dx, omega=0.0):
        super().__init__(dim, omega)
        if not dx > 0:
            raise DomainError("shift semigroup needs dx > 0, got %r" % (dx,))
        if self.omega < 0:
            raise DomainError("shift semigroup has norm 1 on nonzero profiles; omega must be >= 0")
        self.dx = float(dx)

    @property
    def kind(self):
        return "shift-halfline"

    def cells(self, t):
        "Number of lattice cells nearest to time t."
        return int(np.rint(t / self.dx))

    def transition(self, s, t, h):
        return translate(h, self.cells(t) - self.cells(s))

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "dx": self.dx, "omega": self.omega}


def translate(h, n):
    """Zero-filling translation of a grid function by n cells toward the
    origin (n >= 0) or away from it (n < 0)."""
    out = np.zeros_like(h)
    m = h.shape[0]
    if n >= 0:
        if n < m:
            out[: m - n] = h[n:]
    elif -n < m:
        out[-n:] = h[: m + n]
    return out


_semigroup_kinds = {
    "diagonal": lambda d: DiagonalSemigroup(d["eigenvalues"], d.get("omega")),
    "matrix": lambda d: MatrixSemigroup(d["generator"], d.get("omega")),
    "shift-halfline": lambda d: ShiftSemigroup(d["dim"], d["dx"], d.get("omega", 0.0)),
}

_semigroup_fields = {
    "diagonal": {"kind", "eigenvalues", "omega"},
    "matrix": {"kind", "generator", "omega"},
    "shift-halfline": {"kind", "dim", "dx", "omega"},
}


def resolve_semigroup(desc):
    """Build a SemigroupSpec from its dictionary description, e.g.
    {"kind": "diagonal", "eigenvalues": [-1, -2]}."""
    kind = desc.get("kind")
    if kind not in _semigroup_kinds:
        raise KeyError("Could not resolve semigroup kind %r" % (kind,))
    unknown = set(desc.keys()) - _semigroup_fields[kind]
    if unknown:
        raise KeyError("unknown field(s) for %s semigroup: %s" % (kind, ", ".join(sorted(unknown))))
    return _semigroup_kinds[kind](desc)


def semigroup_apply(spec, t, h):
    "Returns S_t h."
    if t < 0:
        raise DomainError("semigroup time must be nonnegative, got %r" % (t,))
    h = as_state(h, spec.dim, name="h")
    return spec.transition(0.0, t, h)


def semigroup_transition(spec, s, t, h):
    "Evolve h from absolute time s to absolute time t (S_{t-s} h up to lattice alignment)."
    if s < 0 or t < s:
        raise DomainError("need 0 <= s <= t, got s=%r t=%r" % (s, t))
    h = as_state(h, spec.dim, name="h")
    return spec.transition(s, t, h)


class DilationTriple(ABC):
    """Embedding ell: H_M -> HH_N, group U_t on HH_N and projection pi: HH_N -> H_M.

    ``capacity`` is the largest |t| for which U_t is supported. ``projection_scale``
    multiplies pi and exists to inject faults into the diagram check."""

    def __init__(self, semigroup, dim, capacity, projection_scale=1.0):
        self.semigroup = semigroup
        self.space_dim = semigroup.dim
        self.dim = int(dim)
        self.capacity = float(capacity)
        self.projection_scale = float(projection_scale)

    @abstractmethod
    def embed(self, h):
        pass

    @abstractmethod
    def _project(self, y):
        pass

    @abstractmethod
    def _group(self, t, y):
        pass

    def project(self, y):
        z = self._project(y)
        if self.projection_scale != 1.0:
            z = self.projection_scale * z
        return z

    def check_capacity(self, t):
        if abs(t) > self.capacity:
            raise CapacityError(
                "|t|=%g exceeds dilation capacity %g" % (abs(t), self.capacity),
            )

    def group(self, t, y):
        self.check_capacity(t)
        return self._group(t, y)

    def embed_matrix(self, m):
        "Apply ell to each column of a matrix H_M x k."
        return np.stack([self.embed(m[:, j]) for j in range(m.shape[1])], axis=1)

    def group_matrix(self, t, m):
        "Apply U_t to each column of a matrix HH_N x k."
        self.check_capacity(t)
        return np.stack([self._group(t, m[:, j]) for j in range(m.shape[1])], axis=1)


class TrivialDilation(DilationTriple):
    """ell = pi = identity and U_t = exp(tA), valid because the generator of a
    diagonal or matrix semigroup is bounded and extends to a group."""

    def __init__(self, semigroup, projection_scale=1.0):
        assert hasattr(semigroup, "evolve"), "trivial dilation needs a bounded generator"
        super().__init__(semigroup, semigroup.dim, np.inf, projection_scale)

    def embed(self, h):
        return np.array(h, dtype=np.float64)

    def _project(self, y):
        return np.array(y, dtype=np.float64)

    def _group(self, t, y):
        return self.semigroup.evolve(t, y)

    def embed_matrix(self, m):
        return np.array(m, dtype=np.float64)


class ShiftDilation(DilationTriple):
    """Two-sided shift on a symmetric grid of N = M + 2*padding nodes. ell places
    the half-line profile in the window [padding, padding + M), pi restricts to
    that window, U_t translates cyclically by cells(t) nodes (an exact group on
    the padded lattice). As long as |cells(t)| <= padding no mass that pi can
    see wraps around."""

    def __init__(self, semigroup, padding, projection_scale=1.0):
        assert isinstance(semigroup, ShiftSemigroup)
        self.padding = int(padding)
        if self.padding < 0:
            raise DomainError("padding must be nonnegative")
        dim = semigroup.dim + 2 * self.padding
        # half a cell of slack: nearest-node alignment rounds |t| to <= padding cells
        capacity = (self.padding + 0.5) * semigroup.dx
        super().__init__(semigroup, dim, capacity, projection_scale)

    def cells(self, t):
        return self.semigroup.cells(t)

    def check_capacity(self, t):
        if abs(self.cells(t)) > self.padding:
            raise CapacityError(
                "translation by %d cells exceeds padding %d" % (abs(self.cells(t)), self.padding),
                minimal_padding=abs(self.cells(t)),
            )

    def embed(self, h):
        y = np.zeros(self.dim, dtype=np.float64)
        y[self.padding : self.padding + self.space_dim] = h
        return y

    def _project(self, y):
        return np.array(y[self.padding : self.padding + self.space_dim], dtype=np.float64)

    def _group(self, t, y):
        return np.roll(y, -self.cells(t))


def minimal_padding(spec, horizon):
    "Smallest padding for which a dilation of spec supports times in [-horizon, horizon]."
    if isinstance(spec, ShiftSemigroup):
        return abs(spec.cells(horizon))
    return 0


def make_dilation(spec, padding, horizon=None, projection_scale=1.0):
    """Construct a dilation triple for spec.

    Parameters
    ----------
    spec: SemigroupSpec
        Semigroup to dilate.
    padding: int
        Extra lattice nodes on each side (shift kind only; ignored otherwise).
    horizon: float
        If given, the capacity is checked against it and a CapacityError
        naming the minimal sufficient padding is raised when too small.
    projection_scale: float
        Multiplies pi. Values other than 1 break the diagram on purpose.
    """
    if isinstance(spec, (DiagonalSemigroup, MatrixSemigroup)):
        return TrivialDilation(spec, projection_scale=projection_scale)
    if isinstance(spec, ShiftSemigroup):
        if horizon is not None:
            need = minimal_padding(spec, horizon)
            if need > padding:
                raise CapacityError(
                    "padding %d too small for horizon %g; need at least %d" % (padding, horizon, need),
                    minimal_padding=need,
                )
        return ShiftDilation(spec, padding, projection_scale=projection_scale)
    raise DomainError("no dilation available for semigroup kind %r" % (spec.kind,))


def group_apply(d, t, y):
    "Returns U_t y for t of either sign."
    y = as_state(y, d.dim, name="y")
    return d.group(t, y)


@dataclass(frozen=True)
class DiagramReport:
    "Outcome of check_dilation: worst ||pi U_t ell h - S_t h|| over times and probes."

    max_error: float
    tol: float
    passed: bool
    worst_time: float
    worst_probe: int
    checks: int

    def to_dict(self):
        return {
            "max_error": self.max_error,
            "tol": self.tol,
            "passed": self.passed,
            "worst_time": self.worst_time,
            "worst_probe": self.worst_probe,
            "checks": self.checks,
        }


def check_dilation(d, spec, times, probes, tol):
    """Evaluate both sides of the commuting diagram for every (t, h) pair and
    compare the largest discrepancy against tol."""
    worst, worst_t, worst_k, n = 0.0, 0.0, -1, 0
    probes = [as_state(h, spec.dim, name="probe") for h in probes]
    for t in times:
        if t < 0:
            raise DomainError("diagram times must be nonnegative, got %r" % (t,))
        for k, h in enumerate(probes):
            lhs = d.project(d.group(t, d.embed(h)))
            rhs = spec.transition(0.0, t, h)
            err = float(np.linalg.norm(lhs - rhs))
            n += 1
            if err > worst or worst_k < 0:
                worst, worst_t, worst_k = err, float(t), k
    return DiagramReport(worst, float(tol), bool(worst <= tol), worst_t, worst_k, n)
