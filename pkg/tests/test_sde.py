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


import logging
import pytest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from moving_frame import models
from moving_frame.core.noise import (
    DiscreteAtomsSampler,
    GaussianSampler,
    MarkMeasureSpec,
    QWienerSpec,
    UniformBoxSampler,
    sample_noise,
)
from moving_frame.core.sde import (
    REASON_HORIZON,
    REASON_TRUNCATION,
    REASON_USER_STOP,
    CoefficientSet,
    SolverOpts,
    globalize_solve,
    implied_flags,
    interlace_solve,
    local_level,
    local_solve,
    restart_solve,
    retract,
    select_regime,
    solve,
    solve_no_large_jumps,
    uniqueness_batch,
    uniqueness_probe,
)
from moving_frame.errors import (
    DomainError,
    NonExplosionViolatedError,
    NumericalBlowupError,
    RegularityError,
    ShapeError,
)
from moving_frame.util.basic import time_grid

Q1 = QWienerSpec([1.0])


@pytest.fixture
def marks():
    return MarkMeasureSpec(
        1,
        intensity_small=3.0,
        intensity_large=2.0,
        sampler_small=GaussianSampler([0.0], [0.05]),
        sampler_large=UniformBoxSampler([0.2], [0.5]),
    )


@pytest.fixture
def small_only():
    return MarkMeasureSpec(1, intensity_small=3.0, sampler_small=UniformBoxSampler([-0.1], [0.3]))


def geometric():
    return models.build_coefficients("geometric", {"mu": 0.05, "sigma": 0.3, "jump": 1.0})


def test_implied_flags():
    assert implied_flags(["globally_lipschitz"]) == {
        "globally_lipschitz",
        "locally_lipschitz",
        "linear_growth",
        "locally_bounded",
    }
    assert implied_flags(["linear_growth"]) == {"linear_growth", "locally_bounded"}
    with pytest.raises(DomainError):
        implied_flags(["smooth"])


def test_select_regime():
    assert select_regime(["globally_lipschitz"]) == "global"
    assert select_regime(["locally_lipschitz", "linear_growth"]) == "global"
    assert select_regime(["locally_lipschitz", "locally_bounded"]) == "local"
    with pytest.raises(RegularityError):
        select_regime(["locally_bounded"])


@settings(max_examples=50, deadline=None)
@given(y=arrays(np.float64, (3,), elements=st.floats(-1e6, 1e6)), k=st.floats(0.1, 100.0))
def test_retract_maps_into_ball(y, k):
    r = retract(y, k)
    assert np.linalg.norm(r) <= k * (1 + 1e-12)
    if np.linalg.norm(y) <= k:
        assert r is y


def test_solver_opts():
    opts = SolverOpts.from_dict({"quad_n": 8, "k_max": 64})
    assert opts.quad_n == 8 and opts.k_max == 64
    assert opts.replace(regime="local").regime == "local"
    assert SolverOpts.from_dict(opts.to_dict()) == opts
    with pytest.raises(KeyError):
        SolverOpts.from_dict({"steps": 3})
    with pytest.raises(DomainError):
        SolverOpts(k_min=4, k_max=2)


def test_deterministic_euler_recursion():
    coeff = models.build_coefficients("linear", {"mu": -1.0})
    noise = sample_noise(Q1, MarkMeasureSpec.none(), time_grid(1.0, 64), seed=0)
    traj = solve_no_large_jumps(coeff, [1.0], noise, SolverOpts())
    h = 1.0 / 64
    assert traj.reason == REASON_HORIZON
    assert traj.lifetime == 1.0
    assert np.allclose(traj.values[:, 0], (1.0 - h) ** np.arange(65), rtol=1e-13)


def test_noise_dimension_mismatch():
    coeff = models.build_coefficients("geometric", {}, dim=2, noise_dim=2)
    noise = sample_noise(Q1, MarkMeasureSpec.none(), time_grid(1.0, 8), seed=0)
    with pytest.raises(ShapeError):
        solve(coeff, [1.0, 1.0], noise, SolverOpts())


def test_no_large_jumps_rejects_large_jumps(marks):
    noise = next(
        p for p in (sample_noise(Q1, marks, time_grid(1.0, 16), s) for s in range(50)) if p.jump_is_large.any()
    )
    with pytest.raises(DomainError):
        solve_no_large_jumps(geometric(), [1.0], noise, SolverOpts())
    opts = SolverOpts(ignore_large_jumps=True)
    a = solve_no_large_jumps(geometric(), [1.0], noise, opts)
    b = interlace_solve(geometric(), [1.0], noise, opts)
    assert np.array_equal(a.values, b.values)
    assert not a.jump_is_large.any()


@pytest.mark.parametrize("seed", range(5))
def test_interlacing_degenerates_bitwise(small_only, seed):
    noise = sample_noise(Q1, small_only, time_grid(1.0, 32), seed)
    a = interlace_solve(geometric(), [1.0], noise, SolverOpts())
    b = solve_no_large_jumps(geometric(), [1.0], noise, SolverOpts())
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.times, b.times)


@pytest.mark.parametrize("seed", range(5))
def test_large_jump_identity(marks, seed):
    coeff = geometric()
    noise = sample_noise(Q1, marks, time_grid(1.0, 32), seed)
    traj = interlace_solve(coeff, [1.0], noise, SolverOpts())
    nodes, lefts, incs = traj.large_jumps()
    assert nodes.size == noise.jump_is_large.sum()
    times = noise.jump_times[noise.jump_is_large]
    xs = noise.jump_marks[noise.jump_is_large]
    for t, x, left, inc in zip(times, xs, lefts, incs):
        assert np.array_equal(coeff.jump(t, left, x), inc)
    for node, left, inc in zip(nodes, lefts, incs):
        if np.sum(traj.jump_nodes == node) == 1:
            assert np.array_equal(traj.values[node], left + inc)
    lefts_all = traj.left_limit_values()
    assert np.array_equal(lefts_all[nodes], lefts)


@pytest.mark.parametrize("seed", range(4))
def test_restart_at_large_jump(marks, seed):
    coeff = geometric()
    noise = next(
        p
        for p in (sample_noise(Q1, marks, time_grid(1.0, 32), seed, path_index=i) for i in range(50))
        if p.jump_is_large.any()
    )
    tau = noise.jump_times[noise.jump_is_large][0]
    full = interlace_solve(coeff, [1.0], noise, SolverOpts())
    pasted = restart_solve(coeff, [1.0], noise, SolverOpts(), tau)
    assert np.allclose(pasted.times, full.times, rtol=0, atol=1e-15)
    assert np.max(np.abs(pasted.values - full.values)) <= 1e-12
    k = full.node_of(tau)
    assert np.array_equal(pasted.values[: k + 1], full.values[: k + 1])


def test_stop_time_ends_early():
    coeff = models.build_coefficients("linear", {"mu": -1.0})
    noise = sample_noise(Q1, MarkMeasureSpec.none(), time_grid(1.0, 16), seed=0)
    traj = solve(coeff, [1.0], noise, SolverOpts(stop_time=0.5))
    assert traj.reason == REASON_USER_STOP
    assert traj.lifetime == 0.5
    assert traj.times[-1] == 0.5


def test_blowup_is_reported(caplog):
    coeff = models.build_coefficients("linear", {"mu": 5.0})
    noise = sample_noise(Q1, MarkMeasureSpec.none(), time_grid(1.0, 64), seed=0)
    with caplog.at_level(logging.WARNING, logger="moving_frame.core.sde"):
        with pytest.raises(NumericalBlowupError) as e:
            solve(coeff, [1.0], noise, SolverOpts(blowup_threshold=10.0, regime="no-large-jumps"))
    assert e.value.norm > 10.0
    assert 0 < e.value.time <= 1.0
    assert any("exceeds blowup threshold" in r.getMessage() for r in caplog.records)


def test_globalize_escalates_and_settles():
    coeff = models.build_coefficients("sin-drift", {"scale": 4.0, "sigma": 0.0})
    noise = sample_noise(Q1, MarkMeasureSpec.none(), time_grid(1.0, 256), seed=0)
    # y' = 4 y sin(y) from y0 = 1.5 climbs towards pi and never leaves the first level k = 4
    traj = globalize_solve(coeff, [1.5], noise, SolverOpts())
    assert traj.reason == REASON_HORIZON
    assert traj.truncation_level == 4.0
    assert traj.escalations == 0
    # jumps of +3 push the path out of the balls of radius 2 and 4
    big = models.build_coefficients("sin-drift", {"scale": 4.0, "sigma": 0.0, "jump": 3.0})
    m = MarkMeasureSpec(1, intensity_large=3.0, sampler_large=DiscreteAtomsSampler([[1.0]]))
    noise = next(
        p for p in (sample_noise(Q1, m, time_grid(1.0, 256), s) for s in range(50)) if p.jump_is_large.sum() >= 2
    )
    traj = globalize_solve(big, [1.0], noise, SolverOpts())
    assert traj.reason == REASON_HORIZON
    assert traj.escalations >= 1
    assert traj.truncation_level == 2.0 * 2**traj.escalations
    assert np.all(np.linalg.norm(traj.values, axis=1) <= traj.truncation_level)

def test_globalize_sin_drift_does_not_explode():
    coeff = models.build_coefficients("sin-drift", {"scale": 1.0, "sigma": 0.5, "jump": 0.5})
    m = MarkMeasureSpec(1, 2.0, 2.0, GaussianSampler([0.0], [0.1]), GaussianSampler([0.0], [1.0]))
    levels = []
    for seed in range(50):
        noise = sample_noise(Q1, m, time_grid(1.0, 2**9), seed)
        traj = globalize_solve(coeff, [1.0], noise, SolverOpts())
        assert traj.reason == REASON_HORIZON
        levels.append(traj.truncation_level)
    assert max(levels) <= 64.0



def test_globalize_reports_violated_non_explosion():
    # declares linear growth but grows cubically
    liar = CoefficientSet(1, drift=lambda t, y: y**3, regularity=("locally_lipschitz", "linear_growth"))
    noise = sample_noise(Q1, MarkMeasureSpec.none(), time_grid(1.0, 1024), seed=0)
    with pytest.raises(NonExplosionViolatedError) as e:
        globalize_solve(liar, [1.0], noise, SolverOpts(k_max=4.0))
    assert e.value.level == 8.0


def test_globalize_requires_flags():
    cubic = models.build_coefficients("cubic", {})
    noise = sample_noise(Q1, MarkMeasureSpec.none(), time_grid(1.0, 8), seed=0)
    with pytest.raises(RegularityError):
        globalize_solve(cubic, [1.0], noise, SolverOpts())


def test_local_solution_lifetime():
    cubic = models.build_coefficients("cubic", {"coef": 1.0})
    assert local_level([1.0]) == 2.0
    assert local_level([0.5]) == 1.0
    noise = sample_noise(Q1, MarkMeasureSpec.none(), time_grid(1.0, 2**13), seed=0)
    traj = solve(cubic, [1.0], noise, SolverOpts())
    assert traj.reason == REASON_TRUNCATION
    # y' = y^3 from 1 leaves the ball of radius 2 at t = 3/8
    assert traj.lifetime == pytest.approx(0.375, rel=0.05)
    assert traj.times[-1] == traj.lifetime
    assert np.linalg.norm(traj.final) > 2.0
    assert np.all(np.abs(traj.values[:-1, 0]) <= 2.0)


def test_local_solve_reaches_horizon_when_small():
    cubic = models.build_coefficients("cubic", {"coef": -1.0})
    noise = sample_noise(Q1, MarkMeasureSpec.none(), time_grid(1.0, 64), seed=0)
    traj = local_solve(cubic, [0.5], noise, SolverOpts())
    assert traj.reason == REASON_HORIZON
    assert traj.truncation_level == 1.0


def test_uniqueness_probe(marks):
    noise = sample_noise(Q1, marks, time_grid(1.0, 32), seed=9)
    same = uniqueness_probe(geometric(), [1.0], [1.0], noise, SolverOpts())
    assert same.bitwise_equal and same.initial_equal
    assert same.sup_distance == 0.0
    other = uniqueness_probe(geometric(), [1.0], [1.01], noise, SolverOpts())
    assert not other.initial_equal
    assert other.sup_distance > 0.0

def test_uniqueness_distance_contracts(marks):
    # additive noise cancels in the difference, which decays like (1 - dt)^i
    coeff = models.build_coefficients("linear", {"mu": -1.0, "sigma": 0.3, "jump": 0.5})
    noise = sample_noise(Q1, marks, time_grid(1.0, 64), seed=4)
    report = uniqueness_probe(coeff, [1.0], [1.5], noise, SolverOpts())
    assert report.nodes == noise.steps + 1
    assert report.sup_distance <= 0.5
    a = solve(coeff, [1.0], noise, SolverOpts())
    b = solve(coeff, [1.5], noise, SolverOpts())
    assert abs(b.final[0] - a.final[0]) == pytest.approx(0.5 * np.prod(1.0 - np.diff(noise.grid)), rel=1e-9)



def test_uniqueness_batch_masks_equal_starts(marks):
    noises = [sample_noise(Q1, marks, time_grid(1.0, 16), 0, path_index=i) for i in range(6)]
    pairs = [([1.0], [1.0]) if i % 2 == 0 else ([1.0], [1.5]) for i in range(6)]
    batch = uniqueness_batch(geometric(), pairs, noises, SolverOpts(), workers=2)
    assert batch.equal_mask.tolist() == [True, False] * 3
    assert batch.max_distance_on_equal == 0.0
    assert batch.max_distance > 0.0
    with pytest.raises(ShapeError):
        uniqueness_batch(geometric(), pairs[:2], noises, SolverOpts())


@pytest.mark.slow
def test_compensated_mean(small_only):
    # E[Y_T] = y0 e^{mu T} once the small jumps are compensated
    coeff = models.build_coefficients("geometric", {"mu": 0.05, "sigma": 0.2, "jump": 1.0})
    finals = [
        solve(coeff, [1.0], sample_noise(Q1, small_only, time_grid(1.0, 64), 100, path_index=i), SolverOpts()).final[0]
        for i in range(2000)
    ]
    assert np.mean(finals) == pytest.approx(np.exp(0.05), abs=0.05)
