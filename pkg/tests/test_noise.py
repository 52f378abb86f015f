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


import pytest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from moving_frame.core.noise import (
    DiscreteAtomsSampler,
    GaussianSampler,
    MarkMeasureSpec,
    NoisePath,
    QWienerSpec,
    UniformBoxSampler,
    coarsen_noise,
    compensator_integral,
    large_jump_clock,
    resolve_marks,
    sample_noise,
    shift_noise,
    stream_rng,
    truncate_noise,
)
from moving_frame.errors import AlignmentError, DomainError, InvariantError, ResourceError, ShapeError
from moving_frame.util.basic import parallel_map, time_grid


@pytest.fixture
def marks():
    # disjoint supports: small marks in [-0.1, 0.1], large marks in [0.5, 1]
    return MarkMeasureSpec(
        1,
        intensity_small=4.0,
        intensity_large=2.0,
        sampler_small=UniformBoxSampler([-0.1], [0.1]),
        sampler_large=UniformBoxSampler([0.5], [1.0]),
    )


@pytest.fixture
def q():
    return QWienerSpec([1.0, 0.25])


def test_qwiener_spec_validation():
    assert QWienerSpec([1.0, 0.5]).trace == pytest.approx(1.5)
    with pytest.raises(DomainError):
        QWienerSpec([1.0, 0.0])
    with pytest.raises(DomainError):
        QWienerSpec([])


def test_mark_measure_validation():
    with pytest.raises(DomainError):
        MarkMeasureSpec(1, intensity_small=1.0)
    with pytest.raises(DomainError):
        MarkMeasureSpec(1, intensity_large=-1.0, sampler_large=UniformBoxSampler([0], [1]))
    with pytest.raises(ShapeError):
        MarkMeasureSpec(2, intensity_large=1.0, sampler_large=UniformBoxSampler([0], [1]))


def test_resolve_marks_rejects_unknown_fields():
    with pytest.raises(KeyError):
        resolve_marks({"mark_dim": 1, "rate": 2.0})
    with pytest.raises(KeyError):
        resolve_marks({"intensity_large": 1.0, "sampler_large": {"family": "cauchy"}})
    m = resolve_marks({"intensity_large": 1.0, "sampler_large": {"family": "discrete-atoms", "atoms": [1.0, -1.0]}})
    assert m.sampler_large.is_discrete()


def test_stream_rng_keys():
    a = stream_rng(1, 0, "wiener").random(4)
    assert np.array_equal(a, stream_rng(1, 0, "wiener").random(4))
    assert not np.array_equal(a, stream_rng(1, 1, "wiener").random(4))
    assert not np.array_equal(a, stream_rng(1, 0, "marks").random(4))
    with pytest.raises(DomainError):
        stream_rng(-1, 0, "wiener")


def test_sample_noise_is_reproducible(q, marks):
    grid = time_grid(1.0, 32)
    a = sample_noise(q, marks, grid, seed=5, path_index=2)
    b = sample_noise(q, marks, grid, seed=5, path_index=2)
    assert np.array_equal(a.grid, b.grid)
    assert np.array_equal(a.wiener_increments, b.wiener_increments)
    assert np.array_equal(a.jump_times, b.jump_times)
    assert np.array_equal(a.jump_marks, b.jump_marks)
    c = sample_noise(q, marks, grid, seed=5, path_index=3)
    assert not np.array_equal(a.wiener_increments[:4], c.wiener_increments[:4])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), steps=st.integers(1, 64))
def test_noise_path_structure(seed, steps):
    m = MarkMeasureSpec(
        1, 5.0, 3.0, GaussianSampler([0.0], [0.1]), DiscreteAtomsSampler([[1.0], [2.0]])
    )
    grid = time_grid(2.0, steps)
    p = sample_noise(QWienerSpec([1.0]), m, grid, seed)
    assert np.all(np.diff(p.grid) > 0)
    assert np.all(np.isin(grid, p.grid))
    assert np.all(np.isin(p.jump_times, p.grid))
    np.testing.assert_array_equal(p.grid[p.jump_node_indices], p.jump_times)
    assert np.all((p.jump_times > 0) & (p.jump_times <= 2.0))
    assert p.wiener_increments.shape == (p.steps, 1)
    # every large mark comes from the large sampler
    assert np.all(np.isin(p.jump_marks[p.jump_is_large, 0], [1.0, 2.0]))
    assert p.marks is m


def test_refinement_keeps_wiener_totals(q, marks):
    grid = time_grid(1.0, 16)
    seed = next(s for s in range(100) if sample_noise(q, marks, grid, seed=s).jump_times.size > 1)
    plain = sample_noise(q, MarkMeasureSpec.none(), grid, seed=seed)
    jumpy = sample_noise(q, marks, grid, seed=seed)
    assert np.allclose(jumpy.wiener_increments.sum(axis=0), plain.wiener_increments.sum(axis=0), atol=1e-12)
    back = coarsen_noise(jumpy, grid)
    keep = ~np.isin(back.grid[:-1], jumpy.jump_times) & ~np.isin(back.grid[1:], jumpy.jump_times)
    cell = np.searchsorted(grid, back.grid[:-1][keep])
    assert np.array_equal(back.wiener_increments[keep], plain.wiener_increments[cell])


def test_noise_path_is_frozen(q, marks):
    p = sample_noise(q, marks, time_grid(1.0, 8), seed=0)
    with pytest.raises(ValueError):
        p.wiener_increments[0, 0] = 1.0
    with pytest.raises(AttributeError):
        p.seed = 3


@pytest.mark.slow
def test_noise_statistics(q, marks):
    # single-interval grid: the summed increment has variance lambda_j
    grid = time_grid(1.0, 1)
    n = 100_000
    counts_small = np.empty(n)
    counts_large = np.empty(n)
    totals = np.empty((n, 2))
    for i in range(n):
        p = sample_noise(q, marks, grid, seed=2024, path_index=i)
        counts_large[i] = p.jump_is_large.sum()
        counts_small[i] = p.jump_times.size - counts_large[i]
        totals[i] = p.wiener_increments.sum(axis=0)
    assert counts_small.mean() == pytest.approx(4.0, rel=0.02)
    assert counts_large.mean() == pytest.approx(2.0, rel=0.02)
    assert totals.var(axis=0) == pytest.approx([1.0, 0.25], rel=0.02)


def test_large_jump_clock(q, marks):
    p = sample_noise(q, marks, time_grid(1.0, 8), seed=3)
    clock = large_jump_clock(p)
    assert clock.times[0] == 0.0
    assert clock.count == int(p.jump_is_large.sum())
    assert np.all(np.diff(clock.times) > 0)


def test_shift_and_truncate(q, marks):
    p = sample_noise(q, marks, time_grid(1.0, 16), seed=7)
    tau = 0.5
    head = truncate_noise(p, tau)
    tail = shift_noise(p, tau)
    assert head.horizon == tau
    assert tail.grid[0] == 0.0 and tail.time_offset == tau
    assert head.steps + tail.steps == p.steps
    assert head.jump_times.size + tail.jump_times.size == p.jump_times.size
    assert np.array_equal(np.vstack([head.wiener_increments, tail.wiener_increments]), p.wiener_increments)
    with pytest.raises(AlignmentError):
        shift_noise(p, 0.51234)


def test_large_jump_clock_rejects_coincident_times():
    grid = time_grid(1.0, 4)
    p = NoisePath(grid, np.zeros((4, 1)), [0.5, 0.5], [[1.0], [2.0]], [True, True])
    with pytest.raises(InvariantError):
        large_jump_clock(p)


def test_shift_composes_exactly(q, marks):
    p = sample_noise(q, marks, time_grid(1.0, 10), seed=11)
    once = shift_noise(p, p.grid[3])
    twice = shift_noise(once, once.grid[4])
    direct = shift_noise(p, p.grid[7])
    for name in ("grid", "absolute_grid", "wiener_increments", "jump_times", "jump_marks", "jump_is_large"):
        np.testing.assert_array_equal(getattr(twice, name), getattr(direct, name))
    assert twice.time_offset == direct.time_offset


def test_shift_accepts_rounded_node_times(q):
    p = sample_noise(q, MarkMeasureSpec.none(), time_grid(1.0, 10), seed=4)
    once = shift_noise(p, 0.3)
    # once.grid[4] is 0.7 - 0.3, which is not the float 0.4
    twice = shift_noise(once, 0.4)
    direct = shift_noise(p, 0.7)
    np.testing.assert_array_equal(twice.grid, direct.grid)
    np.testing.assert_array_equal(twice.wiener_increments, direct.wiener_increments)
    assert twice.time_offset == direct.time_offset == pytest.approx(0.7)
    assert twice.steps == 3


def test_coarsen_rejects_foreign_nodes(q, marks):
    p = sample_noise(q, marks, time_grid(1.0, 16), seed=1)
    with pytest.raises(AlignmentError):
        coarsen_noise(p, time_grid(1.0, 3))
    with pytest.raises(AlignmentError):
        coarsen_noise(p, time_grid(0.5, 4))


def test_quadrature_rules():
    nodes, w = GaussianSampler([1.0], [2.0]).quadrature(8)
    assert w.sum() == pytest.approx(1.0)
    assert np.dot(w, nodes[:, 0]) == pytest.approx(1.0)
    assert np.dot(w, nodes[:, 0] ** 2) == pytest.approx(5.0)
    nodes, w = UniformBoxSampler([0.0, 0.0], [1.0, 2.0]).quadrature(4)
    assert nodes.shape == (16, 2)
    assert np.dot(w, nodes[:, 1]) == pytest.approx(1.0)


def test_quadrature_budget(monkeypatch):
    monkeypatch.setenv("MF_MAX_QUAD_NODES", "100")
    with pytest.raises(ResourceError):
        UniformBoxSampler([0, 0, 0], [1, 1, 1]).quadrature(8)


def test_compensator_integral_exact_for_atoms():
    m = MarkMeasureSpec(1, 3.0, 0.0, DiscreteAtomsSampler([[0.1], [0.3]], [1.0, 3.0]))
    y = np.array([2.0])
    got = compensator_integral(lambda t, y, x: y * x[0], 0.0, y, m, 16)
    assert got == pytest.approx(3.0 * 2.0 * (0.25 * 0.1 + 0.75 * 0.3))
    assert np.array_equal(compensator_integral(lambda t, y, x: y, 0.0, y, MarkMeasureSpec.none(), 16), [0.0])


def test_small_quadrature_shared_across_threads():
    calls = []

    class CountingSampler(UniformBoxSampler):
        def quadrature(self, quad_n):
            calls.append(quad_n)
            return super().quadrature(quad_n)

    m = MarkMeasureSpec(1, 2.0, 0.0, CountingSampler([-0.1], [0.1]))
    out = parallel_map(lambda _: m.small_quadrature(8), range(64), workers=8)
    assert calls == [8]
    assert all(r is out[0] for r in out)
    assert out[0][1].sum() == pytest.approx(2.0)
