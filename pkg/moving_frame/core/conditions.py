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

"""Sampled checks of the regularity hypotheses (local Lipschitz, linear
growth, local boundedness), the comparison condition
||f(y1) - f(y2)||^p <= kappa(||y1 - y2||^p), the divergence criterion
int_0^eps du / kappa(u) = inf, and the two worked counterexamples.

All constants here are sampled maxima, not certified bounds."""

import functools
import math
import numpy as np
from dataclasses import asdict, dataclass
from scipy.integrate import quad

from moving_frame.errors import DomainError
from moving_frame.util.basic import as_state

# relative slack for pass/fail comparisons against declared bounds
PASS_RTOL = 1e-12

# a separation estimate this much larger than the next coarser one flags
# a modulus that blows up at coincidence
NON_LIPSCHITZ_FACTOR = 1.5

_DIRECTIONS, _RADII, _OFFSETS = 0, 1, 2


def _rng(seed, scale_index, stream):
    ss = np.random.SeedSequence([int(seed), 7919, int(scale_index), stream])
    return np.random.Generator(np.random.Philox(ss))


def _unit_vectors(rng, count, dim):
    v = rng.standard_normal((count, dim))
    norms = np.linalg.norm(v, axis=1)
    norms[norms == 0] = 1.0
    return v / norms[:, None]


def _ball_points(seed, scale_index, count, dim, radius):
    """count points in the closed ball of the given radius. Directions and radii
    come from separate streams, so a smaller count yields a prefix."""
    d = _unit_vectors(_rng(seed, scale_index, _DIRECTIONS), count, dim)
    u = _rng(seed, scale_index, _RADII).random(count)
    return d * (radius * u ** (1.0 / dim))[:, None]


def _as_vec(v):
    return np.atleast_1d(np.asarray(v, dtype=np.float64))


def _bound_at(bound, n):
    if bound is None:
        return None
    return float(bound(n)) if callable(bound) else float(bound)


def _passes(estimate, bound):
    if bound is None:
        return None
    return bool(estimate <= bound + PASS_RTOL * max(1.0, abs(bound)))


@dataclass(frozen=True)
class RegularityReport:
    """Sampled constants per radius.

    ``estimates[k]`` is the sampled maximum over all sample sets of radii up to
    ``radii[k]``, so it is nondecreasing in the radius. ``witnesses[k]`` holds
    the point(s) attaining it. ``by_separation`` (Lipschitz only) maps each
    separation scale to its estimate at the largest radius."""

    kind: str
    radii: tuple
    estimates: tuple
    witnesses: tuple
    bounds: tuple
    passes: tuple
    samples: int
    by_separation: tuple = ()
    non_lipschitz: bool = False
    unbounded: bool = False

    @property
    def estimate(self):
        return self.estimates[-1]

    @property
    def passed(self):
        if any(p is None for p in self.passes):
            return None
        return all(self.passes)

    def to_dict(self):
        d = asdict(self)
        d["witnesses"] = [[np.asarray(w).tolist() for w in ws] for ws in self.witnesses]
        d["passed"] = self.passed
        return d


def _radii(n):
    radii = tuple(float(r) for r in np.atleast_1d(n))
    if any(r <= 0 for r in radii) or list(radii) != sorted(radii):
        raise DomainError("radii must be positive and increasing")
    return radii


def _times(t_samples):
    return (0.0,) if t_samples is None else tuple(float(t) for t in np.atleast_1d(t_samples))


def estimate_local_lipschitz(f, t_samples, n, pair_samples, seed=0, dim=1, separations=None, bound=None):
    """Sampled L_n: max of ||f(t, y1) - f(t, y2)|| / ||y1 - y2|| over pairs in the
    ball of radius n and over t in t_samples.

    Parameters
    ----------
    f: callable
        f(t, y) -> vector, y of length dim.
    n: float or increasing sequence of floats
        Radius (radii) of the balls; n >= 1 in the usual use.
    pair_samples: int
        Random pairs per radius and separation scale.
    separations: sequence of float
        Separation scales; defaults to (n, n/100, 1e-8). Every scale also gets
        a pair anchored at the origin.
    bound: float or callable(n)
        Declared constant to pass/fail against.
    """
    if pair_samples < 1:
        raise DomainError("pair_samples must be positive")
    radii = _radii(n)
    times = _times(t_samples)
    estimates, witnesses, bounds, passes = [], [], [], []
    best, best_w = 0.0, (np.zeros(dim), np.zeros(dim))
    sep_best = {}
    for r in radii:
        if r < 1:
            raise DomainError("radius n must be >= 1, got %g" % r)
        seps = (r, r / 100.0, 1e-8) if separations is None else tuple(float(s) for s in separations)
        for si, s in enumerate(seps):
            y1 = _ball_points(seed, si, pair_samples, dim, r)
            v = _unit_vectors(_rng(seed, si, _OFFSETS), pair_samples, dim)
            y2 = y1 + s * v
            over = np.linalg.norm(y2, axis=1) > r
            y2[over] *= (r / np.linalg.norm(y2[over], axis=1))[:, None]
            # anchor pairs at the origin
            y1 = np.vstack([np.zeros((1, dim)), y1])
            y2 = np.vstack([min(s, r) * v[:1], y2])
            sep_est = sep_best.get(s, 0.0)
            for t in times:
                for a, b in zip(y1, y2):
                    gap = np.linalg.norm(a - b)
                    if gap == 0:
                        continue
                    q = np.linalg.norm(_as_vec(f(t, a)) - _as_vec(f(t, b))) / gap
                    if q > sep_est:
                        sep_est = q
                    if q > best:
                        best, best_w = float(q), (a.copy(), b.copy())
            sep_best[s] = float(sep_est)
        estimates.append(best)
        witnesses.append(best_w)
        bounds.append(_bound_at(bound, r))
        passes.append(_passes(best, bounds[-1]))
    by_sep = tuple(sorted(sep_best.items(), key=lambda kv: -kv[0]))
    flag = False
    if len(by_sep) >= 2:
        coarse, fine = by_sep[-2][1], by_sep[-1][1]
        flag = bool(fine > NON_LIPSCHITZ_FACTOR * coarse)
    return RegularityReport(
        kind="local-lipschitz",
        radii=radii,
        estimates=tuple(estimates),
        witnesses=tuple(witnesses),
        bounds=tuple(bounds),
        passes=tuple(passes),
        samples=pair_samples,
        by_separation=by_sep,
        non_lipschitz=flag,
    )


def _point_sweep(kind, f, t_samples, radii, samples, seed, dim, ratio, bound, probe_origin=False):
    times = _times(t_samples)
    estimates, witnesses, bounds, passes = [], [], [], []
    best, best_w = 0.0, (np.zeros(dim),)
    unbounded = False
    for k, r in enumerate(radii):
        half = (samples + 1) // 2
        pts = _ball_points(seed, k, samples - half, dim, r)
        # the supremum of these ratios tends to sit on the sphere
        sphere = r * _unit_vectors(_rng(seed, k, _OFFSETS), half, dim)
        pts = np.vstack([pts, sphere])
        if probe_origin:
            direction = sphere[:1] / r
            scales = r * 10.0 ** -np.arange(0, 16)
            probes = direction * scales[:, None]
            tail = []
            for t in times:
                vals = [np.linalg.norm(_as_vec(f(t, y))) for y in probes]
                tail.append(vals)
            tail = np.max(np.array(tail), axis=0)
            if not np.all(np.isfinite(tail)) or (tail[-1] > 1e6 * max(tail[0], 1e-300) and np.all(np.diff(tail[-4:]) > 0)):
                unbounded = True
            pts = np.vstack([pts, probes])
        for t in times:
            for y in pts:
                q = ratio(np.linalg.norm(_as_vec(f(t, y))), np.linalg.norm(y))
                if not np.isfinite(q):
                    unbounded = True
                    q = np.inf
                if q > best:
                    best, best_w = float(q), (y.copy(),)
        estimates.append(best)
        witnesses.append(best_w)
        bounds.append(_bound_at(bound, r))
        passes.append(False if unbounded and bound is not None else _passes(best, bounds[-1]))
    return RegularityReport(
        kind=kind,
        radii=radii,
        estimates=tuple(estimates),
        witnesses=tuple(witnesses),
        bounds=tuple(bounds),
        passes=tuple(passes),
        samples=samples,
        unbounded=unbounded,
    )


def check_linear_growth(f, t_samples, radii, samples, K_declared=None, seed=0, dim=1):
    "Sampled K: max of ||f(t, y)|| / (1 + ||y||) over balls of the given radii."
    if samples < 1:
        raise DomainError("samples must be positive")
    return _point_sweep(
        "linear-growth", f, t_samples, _radii(radii), samples, seed, dim, lambda fy, ny: fy / (1.0 + ny), K_declared
    )


def check_locally_bounded(f, t_samples, n, samples, M_declared=None, seed=0, dim=1):
    """Sampled M_n: max of ||f(t, y)|| over the ball of radius n. Points approaching
    the origin are probed too; a blowup there is reported as unbounded."""
    if samples < 1:
        raise DomainError("samples must be positive")
    return _point_sweep(
        "locally-bounded", f, t_samples, _radii(n), samples, seed, dim, lambda fy, ny: fy, M_declared, probe_origin=True
    )


def _check_delta(delta):
    if not 0 < delta < math.exp(-1):
        raise DomainError("delta must lie in (0, 1/e), got %r" % (delta,))


def _nonneg(u):
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0) or np.any(np.isnan(u)):
        raise DomainError("argument must be nonnegative")
    return u


def _scalar_or_array(x, like):
    return float(x) if np.ndim(like) == 0 else x


def example_kappa(u, delta=0.3):
    """kappa(u) = 0 at 0, -u ln u on (0, delta), and the tangent continuation
    -delta ln delta - (1 + ln delta)(u - delta) from delta on."""
    _check_delta(delta)
    x = _nonneg(u)
    out = np.zeros(x.shape)
    low = (x > 0) & (x < delta)
    out[low] = -x[low] * np.log(x[low])
    high = x >= delta
    out[high] = -delta * math.log(delta) - (1.0 + math.log(delta)) * (x[high] - delta)
    return _scalar_or_array(out, u)


def example_rho(u, delta=0.3):
    """rho(u) = 0 at 0, u sqrt(-ln u^2) on (0, sqrt(delta)), and
    sqrt(-delta ln delta - (1 + ln delta)(u^2 - delta)) from sqrt(delta) on."""
    _check_delta(delta)
    x = _nonneg(u)
    out = np.zeros(x.shape)
    root = math.sqrt(delta)
    low = (x > 0) & (x < root)
    out[low] = x[low] * np.sqrt(-np.log(x[low] ** 2))
    high = x >= root
    out[high] = np.sqrt(-delta * math.log(delta) - (1.0 + math.log(delta)) * (x[high] ** 2 - delta))
    return _scalar_or_array(out, u)


def example_kappa_reciprocal_integral(eps, floor, delta=0.3):
    """int_floor^eps du / kappa(u) for the example kappa: -ln|ln u| on (0, delta)
    plus the logarithm of the affine part beyond delta."""
    _check_delta(delta)
    if not 0 < floor <= eps:
        raise DomainError("need 0 < floor <= eps")
    lo, hi = floor, min(eps, delta)
    total = 0.0
    if lo < hi:
        total += math.log(abs(math.log(lo))) - math.log(abs(math.log(hi)))
    if eps > delta:
        A = -delta * math.log(delta)
        B = -(1.0 + math.log(delta))
        start = max(floor, delta)
        total += (math.log(A + B * (eps - delta)) - math.log(A + B * (start - delta))) / B
    return total


def _example_reference(kappa):
    if kappa is example_kappa:
        return functools.partial(example_kappa_reciprocal_integral, delta=0.3)
    if isinstance(kappa, functools.partial) and kappa.func is example_kappa and not kappa.args:
        return functools.partial(example_kappa_reciprocal_integral, delta=kappa.keywords.get("delta", 0.3))
    return None


@dataclass(frozen=True)
class DivergenceReport:
    """Integrals int_{floor_m}^eps du / kappa(u) for decreasing floors.

    ``divergent`` compares the growth rate per unit of -ln(floor) over the last
    and the first floor interval (None with fewer than three floors);
    ``threshold_exceeded`` maps each threshold to whether the last integral
    exceeds it."""

    eps: float
    floors: tuple
    integrals: tuple
    reference: tuple
    max_reference_error: float
    threshold_exceeded: dict
    divergent: bool

    def to_dict(self):
        d = asdict(self)
        d["threshold_exceeded"] = {str(k): v for k, v in self.threshold_exceeded.items()}
        return d


# last-interval growth rate relative to the first one above which the sequence counts as divergent
DIVERGENCE_RATE_RATIO = 1e-2


def divergence_criterion(kappa, eps, floor_sequence, thresholds=(), reference=None):
    """Numerical evidence for int_0^eps du / kappa(u) = inf.

    Each integral is computed with adaptive quadrature in the variable s = ln u.
    When kappa is the example kappa (or reference is given) the closed-form
    values are reported next to the quadrature."""
    floors = tuple(float(f) for f in floor_sequence)
    if not floors or any(not 0 < f <= eps for f in floors) or any(b >= a for a, b in zip(floors, floors[1:])):
        raise DomainError("floors must be strictly decreasing in (0, eps]")

    def integrand(s):
        u = math.exp(s)
        k = float(kappa(u))
        if not k > 0:
            raise DomainError("kappa must be positive on (0, eps]; kappa(%g) = %r" % (u, k))
        return u / k

    for u in np.geomspace(floors[-1], eps, 17):
        integrand(math.log(u))

    integrals = []
    prev_floor, acc = eps, 0.0
    for f in floors:
        # piecewise so each piece gets its own adaptive budget
        val, _ = quad(integrand, math.log(f), math.log(prev_floor), epsabs=1e-13, epsrel=1e-12, limit=200)
        acc += val
        integrals.append(acc)
        prev_floor = f

    if reference is None:
        reference = _example_reference(kappa)
    ref = tuple(reference(eps, f) for f in floors) if reference is not None else ()
    err = max(abs(a - b) for a, b in zip(integrals, ref)) if ref else float("nan")

    divergent = None
    if len(floors) >= 3:
        widths = -np.diff(np.log(floors))
        rates = np.diff(integrals) / widths
        divergent = bool(rates[-1] >= DIVERGENCE_RATE_RATIO * rates[0])
    return DivergenceReport(
        eps=float(eps),
        floors=floors,
        integrals=tuple(float(v) for v in integrals),
        reference=tuple(float(v) for v in ref),
        max_reference_error=float(err),
        threshold_exceeded={float(t): bool(integrals[-1] > t) for t in thresholds},
        divergent=divergent,
    )


def example_staircase(y):
    """a(y) = n on [n, n+1 - 1/(n+1)], then the ramp n + (n+1)(y - (n+1 - 1/(n+1)))
    up to n+1; a(-y) = a(y)."""
    u = np.abs(np.asarray(y, dtype=np.float64))
    n = np.floor(u)
    knee = n + 1.0 - 1.0 / (n + 1.0)
    out = np.where(u <= knee, n, n + (n + 1.0) * (u - knee))
    return _scalar_or_array(out, y)


@dataclass(frozen=True)
class ViolationReport:
    """Witness pairs (n, y1, y2, separation, allowed separation (1/n)^(1/p), gap)
    for n = 1..n_max, and the lower bound they force on any modulus kappa."""

    p: float
    rows: tuple
    min_gap: float
    separations_within_bound: bool
    kappa_lower_bound: float
    smallest_u: float

    def to_dict(self):
        return asdict(self)


def staircase_modulus_violation(p, n_max):
    """On each interval [n, n+1] the ramp endpoints y1 = n+1 - 1/(n+1), y2 = n+1
    are 1/(n+1) apart and their staircase values differ by exactly 1, so any kappa
    with ||a(y1) - a(y2)||^p <= kappa(||y1 - y2||^p) satisfies kappa >= 1 at
    points arbitrarily close to 0."""
    if not p >= 2:
        raise DomainError("p must be >= 2, got %r" % (p,))
    if n_max < 1:
        raise DomainError("n_max must be positive")
    rows = []
    for n in range(1, int(n_max) + 1):
        y2 = float(n + 1)
        y1 = y2 - 1.0 / (n + 1)
        sep = y2 - y1
        allowed = (1.0 / n) ** (1.0 / p)
        gap = abs(example_staircase(y2) - example_staircase(y1))
        rows.append((n, y1, y2, sep, allowed, gap))
    gaps = [r[5] for r in rows]
    return ViolationReport(
        p=float(p),
        rows=tuple(rows),
        min_gap=float(min(gaps)),
        separations_within_bound=all(r[3] <= r[4] for r in rows),
        kappa_lower_bound=float(min(gaps) ** p),
        smallest_u=float(min(r[3] for r in rows) ** p),
    )


def brute_force_lipschitz(f, lo, hi, step):
    "max |f(x_{i+1}) - f(x_i)| / (x_{i+1} - x_i) over the grid lo, lo+step, ..., hi."
    if not hi > lo or not step > 0:
        raise DomainError("need lo < hi and step > 0")
    x = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    y = np.asarray(f(x), dtype=np.float64)
    return float(np.max(np.abs(np.diff(y)) / np.diff(x)))


def diffusion_component(b, q):
    """y -> vec(b(t, y) Q^{1/2}), whose Euclidean norm is the Hilbert-Schmidt
    norm of b(t, y) as an operator on the Cameron-Martin space."""
    sqrt_lam = q.sqrt_eigenvalues

    def component(t, y):
        return (np.asarray(b(t, y), dtype=np.float64) * sqrt_lam[None, :]).reshape(-1)

    return component


def jump_component(c, marks, quad_n=16):
    """y -> (sqrt(w_i) c(t, y, x_i))_i over the small-jump quadrature, whose
    Euclidean norm is the L^2(F|_B) norm of c(t, y, .)."""
    nodes, weights = marks.small_quadrature(quad_n)
    roots = np.sqrt(weights)

    def component(t, y):
        if nodes.shape[0] == 0:
            return np.zeros(1)
        return np.concatenate([w * _as_vec(c(t, y, x)) for x, w in zip(nodes, roots)])

    return component


@dataclass(frozen=True)
class ZhangReport:
    p: float
    checked: int
    violations: int
    worst_excess: float
    worst_pair: tuple

    @property
    def passed(self):
        return self.violations == 0

    def to_dict(self):
        d = asdict(self)
        d["worst_pair"] = [np.asarray(w).tolist() for w in self.worst_pair]
        d["passed"] = self.passed
        return d


def check_zhang_condition(f, kappa, p, radius=1.0, samples=1000, seed=0, dim=1, t=0.0, pairs=()):
    """Sampled check of ||f(t, y1) - f(t, y2)||^p <= kappa(||y1 - y2||^p) on random
    pairs in the ball of the given radius plus any explicit pairs."""
    if p < 1:
        raise DomainError("p must be >= 1")
    y1 = _ball_points(seed, 0, samples, dim, radius)
    y2 = _ball_points(seed, 1, samples, dim, radius)
    # near-coincident pairs
    y3 = y1 + 1e-4 * radius * _unit_vectors(_rng(seed, 0, _OFFSETS), samples, dim)
    all_pairs = list(zip(y1, y2)) + list(zip(y1, y3))
    all_pairs += [(as_state(a, dim), as_state(b, dim)) for a, b in pairs]
    violations, worst, worst_pair = 0, -np.inf, (np.zeros(dim), np.zeros(dim))
    for a, b in all_pairs:
        lhs = np.linalg.norm(_as_vec(f(t, a)) - _as_vec(f(t, b))) ** p
        rhs = float(kappa(np.linalg.norm(a - b) ** p))
        excess = lhs - rhs
        if excess > PASS_RTOL * max(1.0, abs(rhs)):
            violations += 1
        if excess > worst:
            worst, worst_pair = float(excess), (a, b)
    return ZhangReport(float(p), len(all_pairs), violations, float(worst), worst_pair)
