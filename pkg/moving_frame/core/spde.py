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

"""Mild solutions of dZ = (AZ + alpha) dt + sigma dW + gamma d(mu - F) through
the moving frame Z = pi U Y, and an independent exponential-Euler oracle."""

import logging
import numpy as np
from dataclasses import dataclass

from moving_frame.core.hilbert import check_dilation
from moving_frame.core.noise import compensator_integral
from moving_frame.core.sde import BaseCoefficients, ShiftedCoefficients, Trajectory, solve
from moving_frame.errors import DomainError, NumericalBlowupError, ShapeError, VerificationError
from moving_frame.util.basic import as_state, get_dilation_tol

log = logging.getLogger(__name__)


class SpdeProblem:
    """Semigroup, dilation, coefficients (alpha, sigma, gamma) on H_M and z0.

    Parameters
    ----------
    semigroup: SemigroupSpec
        The semigroup S_t generated by A.
    dilation: DilationTriple
        A dilation of semigroup; checked with check_dilation before solving.
    coefficients: BaseCoefficients
        alpha = drift, sigma = diffusion, gamma = jump, all acting on H_M.
    z0: array
        Initial state in H_M.
    dilation_tol: float
        Tolerance for the diagram check, MF_DILATION_TOL by default.
    """

    def __init__(self, semigroup, dilation, coefficients, z0, dilation_tol=None):
        if dilation.semigroup is not semigroup:
            raise DomainError("dilation was built for a different semigroup")
        if coefficients.dim != semigroup.dim:
            raise ShapeError(
                "coefficients act on dimension %d, semigroup on %d" % (coefficients.dim, semigroup.dim)
            )
        self.semigroup = semigroup
        self.dilation = dilation
        self.coefficients = coefficients
        self.z0 = as_state(z0, semigroup.dim, name="z0")
        self.dilation_tol = get_dilation_tol() if dilation_tol is None else float(dilation_tol)
        self._verified_horizon = None

    def verify_dilation(self, horizon, probes=3, samples=9):
        "Run the diagram check on [0, horizon]; raises VerificationError on failure."
        if self._verified_horizon is not None and horizon <= self._verified_horizon:
            return
        self.dilation.check_capacity(horizon)
        rng = np.random.default_rng(0)
        hs = [rng.standard_normal(self.semigroup.dim) for _ in range(probes)]
        report = check_dilation(self.dilation, self.semigroup, np.linspace(0.0, horizon, samples), hs, self.dilation_tol)
        if not report.passed:
            raise VerificationError(
                "dilation diagram error %g exceeds tolerance %g at t=%g" % (report.max_error, report.tol, report.worst_time)
            )
        self._verified_horizon = horizon


class TransformedCoefficients(BaseCoefficients):
    """a(t, y) = U_{-t} ell alpha(t, pi U_t y), and likewise for sigma (column
    by column) and gamma. Regularity flags carry over."""

    def __init__(self, problem):
        d = problem.dilation
        base = problem.coefficients
        super().__init__(d.dim, base.noise_dim, base.regularity)
        self.dilation = d
        self.base = base

    def frame(self, t, y):
        "pi U_t y"
        return self.dilation.project(self.dilation.group(t, y))

    def lift(self, t, h):
        "U_{-t} ell h"
        return self.dilation.group(-t, self.dilation.embed(h))

    def drift(self, t, y):
        return self.lift(t, self.base.drift(t, self.frame(t, y)))

    def diffusion(self, t, y):
        d = self.dilation
        return d.group_matrix(-t, d.embed_matrix(self.base.diffusion(t, self.frame(t, y))))

    def jump(self, t, y, x):
        return self.lift(t, self.base.jump(t, self.frame(t, y), x))


def transform_coefficients(p, horizon=None):
    "The SDE coefficients on the dilation space; capacity is checked against horizon."
    if horizon is not None:
        p.dilation.check_capacity(horizon)
    return TransformedCoefficients(p)


@dataclass(frozen=True, eq=False)
class MildSolution:
    Z: Trajectory
    Y: Trajectory
    residual_report: dict = None


def _frame_trajectory(p, Y):
    "Z_i = pi U_{t_i} Y_i at every node; left limits and increments likewise."
    d = p.dilation
    abs_t = Y.time_offset + Y.times
    Z = np.stack([d.project(d.group(t, y)) for t, y in zip(abs_t, Y.values)]).reshape(-1, p.semigroup.dim)
    lefts = [d.project(d.group(abs_t[n], y)) for n, y in zip(Y.jump_nodes, Y.left_limits)]
    incs = [d.project(d.group(abs_t[n], y)) for n, y in zip(Y.jump_nodes, Y.jump_increments)]
    dim = p.semigroup.dim
    return Trajectory(
        times=Y.times,
        values=Z,
        jump_nodes=Y.jump_nodes,
        left_limits=np.array(lefts).reshape(-1, dim),
        jump_increments=np.array(incs).reshape(-1, dim),
        jump_is_large=Y.jump_is_large,
        lifetime=Y.lifetime,
        reason=Y.reason,
        truncation_level=Y.truncation_level,
        escalations=Y.escalations,
        time_offset=Y.time_offset,
    )


def mild_solve_moving_frame(p, noise, opts):
    """Solve the SDE for Y = U_{-t} ell Z with Y_0 = ell z0 and read off
    Z = pi U Y. The regime (global, local, ...) follows opts.regime or the
    declared regularity flags."""
    horizon = noise.time_offset + noise.horizon
    p.verify_dilation(horizon)
    coeff = transform_coefficients(p, horizon)
    if noise.time_offset:
        # the sde solvers run on noise-relative time
        coeff = ShiftedCoefficients(coeff, noise.time_offset)
    y0 = p.dilation.group(-noise.time_offset, p.dilation.embed(p.z0))
    Y = solve(coeff, y0, noise, opts)
    return MildSolution(Z=_frame_trajectory(p, Y), Y=Y)


def mild_solve_exponential_euler(p, noise, opts):
    """Direct discretization of the variation-of-constants formula, no dilation:

    Z_i = S(0 -> t_i) z0 + V_i,
    V_{i+1} = S(t_i -> t_{i+1}) [V_i + alpha dt + sigma dW - (int_B gamma dF) dt]
              + sum of gamma(kappa, Z_*, xi) over jumps at t_{i+1}.

    Coefficients are evaluated at the left point Z_i. Jumps follow the SDE
    solvers: a small jump sees Z_* = Z_i, a large jump the left limit
    Z_* = Z_{kappa-}."""
    sg = p.semigroup
    coeff = p.coefficients
    if coeff.noise_dim != noise.noise_dim:
        raise ShapeError("coefficients expect %d Wiener coordinates, noise has %d" % (coeff.noise_dim, noise.noise_dim))
    off = noise.time_offset
    grid = noise.grid
    n = noise.steps
    if opts.stop_time is not None:
        n = min(n, int(np.searchsorted(grid, opts.stop_time - off)))
    marks = noise.marks
    compensate = marks is not None and marks.intensity_small > 0
    by_node = noise.jumps_by_node(include_large=not opts.ignore_large_jumps)
    dim = sg.dim

    free = np.stack([sg.transition(off, off + t, p.z0) for t in grid[: n + 1]]).reshape(-1, dim)
    values = np.empty((n + 1, dim))
    values[0] = free[0]
    v = np.zeros(dim)
    rec_nodes, rec_left, rec_inc, rec_large = [], [], [], []
    for i in range(n):
        t = grid[i]
        h = grid[i + 1] - t
        z = values[i]
        inc = coeff.drift(off + t, z) * h + coeff.diffusion(off + t, z) @ noise.wiener_increments[i]
        if compensate:
            inc = inc - compensator_integral(coeff.jump, off + t, z, marks, opts.quad_n) * h
        v = sg.transition(off + t, off + grid[i + 1], v + inc)
        for j in by_node.get(i + 1, ()):
            left = free[i + 1] + v
            at = left if noise.jump_is_large[j] else z
            g = coeff.jump(off + noise.jump_times[j], at, noise.jump_marks[j])
            rec_nodes.append(i + 1)
            rec_left.append(left)
            rec_inc.append(g)
            rec_large.append(bool(noise.jump_is_large[j]))
            v = v + g
        z_new = free[i + 1] + v
        r = np.linalg.norm(z_new)
        if not np.isfinite(r) or r > opts.blowup_threshold:
            log.warning("exponential Euler (seed %d) state norm %g at t=%g", noise.seed, r, off + grid[i + 1])
            raise NumericalBlowupError(
                "exponential Euler state norm %g at t=%g" % (r, off + grid[i + 1]), time=off + grid[i + 1], norm=float(r)
            )
        values[i + 1] = z_new
    return Trajectory(
        times=np.array(grid[: n + 1]),
        values=values,
        jump_nodes=np.array(rec_nodes, dtype=np.int64),
        left_limits=np.array(rec_left).reshape(-1, dim),
        jump_increments=np.array(rec_inc).reshape(-1, dim),
        jump_is_large=np.array(rec_large, dtype=bool),
        lifetime=float(grid[n]),
        reason="horizon" if n == noise.steps else "user-stop",
        time_offset=off,
    )


def _jump_state(Z, r):
    "State the r-th recorded jump of Z is evaluated at: Z_{kappa-} if large, the left node otherwise."
    if Z.jump_is_large[r]:
        return Z.left_limits[r]
    return Z.values[int(Z.jump_nodes[r]) - 1]


def _recorded_jumps(Z, noise):
    """Pairs (trajectory jump record, noise jump index) for the jumps Z applied."""
    by_node = noise.jumps_by_node()
    out = []
    for r, (node, large) in enumerate(zip(Z.jump_nodes, Z.jump_is_large)):
        cand = [j for j in by_node.get(int(node), ()) if bool(noise.jump_is_large[j]) == bool(large)]
        assert cand, "trajectory jump at node %d has no counterpart in the noise" % node
        out.append((r, cand[0]))
    return out


def reconstruct_frame_process(p, Z, noise, quad_n=16):
    """Y_t = ell z0 + sum_i U_{-t_i} ell (alpha dt + sigma dW - (int_B gamma dF) dt)
    + sum over jumps kappa <= t of U_{-kappa} ell gamma(kappa, Z_*, xi),
    with the coefficients evaluated on Z (Z_* as in mild_solve_exponential_euler)."""
    d = p.dilation
    coeff = p.coefficients
    off = noise.time_offset
    marks = noise.marks
    compensate = marks is not None and marks.intensity_small > 0
    jumps = {}
    for r, j in _recorded_jumps(Z, noise):
        jumps.setdefault(int(Z.jump_nodes[r]), []).append((r, j))
    n = Z.times.size - 1
    values = np.empty((n + 1, d.dim))
    values[0] = d.group(-off, d.embed(p.z0))
    rec_nodes, rec_left, rec_inc, rec_large = [], [], [], []
    for i in range(n):
        t = off + Z.times[i]
        h = Z.times[i + 1] - Z.times[i]
        z = Z.values[i]
        inc = coeff.drift(t, z) * h + coeff.diffusion(t, z) @ noise.wiener_increments[i]
        if compensate:
            inc = inc - compensator_integral(coeff.jump, t, z, marks, quad_n) * h
        y = values[i] + d.group(-t, d.embed(inc))
        for r, j in jumps.get(i + 1, ()):
            kappa = off + noise.jump_times[j]
            g = d.group(-kappa, d.embed(coeff.jump(kappa, _jump_state(Z, r), noise.jump_marks[j])))
            rec_nodes.append(i + 1)
            rec_left.append(y)
            rec_inc.append(g)
            rec_large.append(bool(noise.jump_is_large[j]))
            y = y + g
        values[i + 1] = y
    return Trajectory(
        times=Z.times,
        values=values,
        jump_nodes=np.array(rec_nodes, dtype=np.int64),
        left_limits=np.array(rec_left).reshape(-1, d.dim),
        jump_increments=np.array(rec_inc).reshape(-1, d.dim),
        jump_is_large=np.array(rec_large, dtype=bool),
        lifetime=Z.lifetime,
        reason=Z.reason,
        time_offset=off,
    )


def mild_residual(p, Z, noise, t, quad_n=16):
    """|| Z_t - [S_t z0 + sum_i S(t_i -> t)(alpha dt + sigma dW - (int_B gamma dF) dt)
    + sum_{kappa <= t} S(kappa -> t) gamma(kappa, Z_*, xi)] ||
    with left-point evaluation on Z. t must be a node not beyond the lifetime."""
    sg = p.semigroup
    coeff = p.coefficients
    off = noise.time_offset
    n = Z.node_of(t)
    marks = noise.marks
    compensate = marks is not None and marks.intensity_small > 0
    t_abs = off + Z.times[n]
    acc = sg.transition(off, t_abs, p.z0)
    for i in range(n):
        s = off + Z.times[i]
        h = Z.times[i + 1] - Z.times[i]
        z = Z.values[i]
        inc = coeff.drift(s, z) * h + coeff.diffusion(s, z) @ noise.wiener_increments[i]
        if compensate:
            inc = inc - compensator_integral(coeff.jump, s, z, marks, quad_n) * h
        acc = acc + sg.transition(off + Z.times[i + 1], t_abs, sg.transition(s, off + Z.times[i + 1], inc))
    for r, j in _recorded_jumps(Z, noise):
        if Z.jump_nodes[r] > n:
            continue
        kappa = off + noise.jump_times[j]
        g = coeff.jump(kappa, _jump_state(Z, r), noise.jump_marks[j])
        acc = acc + sg.transition(kappa, t_abs, g)
    return float(np.linalg.norm(Z.values[n] - acc))


def residual_profile(p, Z, noise, nodes=None, quad_n=16, max_points=33):
    """mild_residual at the given node indices (default: up to max_points evenly
    spread nodes including the last). Returns a list of {t, residual, dt} rows."""
    if nodes is None:
        nodes = np.unique(np.linspace(0, Z.times.size - 1, min(max_points, Z.times.size)).astype(int))
    dt = float(np.max(np.diff(Z.times))) if Z.times.size > 1 else 0.0
    rows = []
    for k in nodes:
        t = Z.times[int(k)]
        rows.append({"t": float(t), "residual": mild_residual(p, Z, noise, t, quad_n=quad_n), "dt": dt})
    return rows


def sup_node_distance(a, b):
    "max over common nodes of ||a_i - b_i|| for two trajectories on the same grid."
    n = min(a.values.shape[0], b.values.shape[0])
    assert np.array_equal(a.times[:n], b.times[:n]), "trajectories live on different grids"
    return float(np.max(np.linalg.norm(a.values[:n] - b.values[:n], axis=1)))
