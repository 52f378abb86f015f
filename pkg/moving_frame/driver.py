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
import numpy as np
import os
import platform
import scipy
import time

from moving_frame import models
from moving_frame.core import conditions as cond
from moving_frame.core.hilbert import DiagonalSemigroup, MatrixSemigroup, ShiftSemigroup, check_dilation, make_dilation
from moving_frame.core.noise import (
    GaussianSampler,
    MarkMeasureSpec,
    QWienerSpec,
    UniformBoxSampler,
    coarsen_noise,
    sample_noise,
)
from moving_frame.core.sde import (
    REASON_HORIZON,
    interlace_solve,
    restart_solve,
    solve,
    solve_no_large_jumps,
    uniqueness_batch,
)
from moving_frame.core.spde import (
    SpdeProblem,
    mild_solve_exponential_euler,
    mild_solve_moving_frame,
    residual_profile,
    sup_node_distance,
)
from moving_frame.errors import DomainError, NumericalBlowupError
from moving_frame.util.basic import fit_loglog_slope, get_dilation_tol, parallel_map, sha256_of_file, time_grid
from moving_frame.util.data_packing import (
    convergence_to_csv,
    noise_to_csv,
    save_noise_npz,
    trajectory_to_csv,
    write_json,
)

log = logging.getLogger(__name__)

SUITES = ("dilation", "uniqueness", "interlace", "residual", "conditions")

# int_{1e-8}^{0.1} du / (-u ln u) = ln|ln 1e-8| - ln|ln 0.1| = ln 8
KAPPA_DIVERGENCE_VALUE = float(np.log(8.0))

# difference quotients on a 1e-4 grid near y = 50 carry rounding of order eps * 50 / 1e-4 ~ 1e-10,
# so the brute-force maximum equals n + 1 only up to this relative tolerance
STAIRCASE_RTOL = 1e-9


def versions():
    try:
        from moving_frame import __version__
    except ImportError:
        __version__ = "unknown"
    return {
        "moving_frame": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _check(name, passed, value, threshold):
    return {"name": name, "passed": bool(passed), "value": value, "threshold": threshold}


class ExperimentRunner:
    def __init__(self, cfg, workers=None):
        """Run the experiments of a validated configuration.

        Parameters
        ----------
        cfg: ExperimentConfig
            Parsed and validated configuration.
        workers: int
            Thread count for the per-seed work, MF_THREADS by default.
        """
        self.cfg = cfg
        self.workers = workers
        self.coefficients = cfg.coefficients()
        self.problem = None
        if cfg.semigroup is not None:
            self.problem = SpdeProblem(cfg.semigroup, cfg.dilation(), self.coefficients, cfg.y0)

    @property
    def out_dir(self):
        return self.cfg.out_dir

    def sample(self, seed, dt=None, marks=None):
        cfg = self.cfg
        return sample_noise(cfg.q, cfg.marks if marks is None else marks, cfg.grid(dt), seed)

    def solve_path(self, noise, opts=None):
        "Trajectory of the configured regime on one noise path (Z for mild regimes)."
        cfg = self.cfg
        opts = cfg.solver_opts() if opts is None else opts
        if cfg.regime == "mild-frame":
            return mild_solve_moving_frame(self.problem, noise, opts).Z
        if cfg.regime == "mild-expeuler":
            return mild_solve_exponential_euler(self.problem, noise, opts)
        return solve(self.coefficients, self.cfg.y0, noise, opts)

    def _write(self, files, name, writer, obj):
        path = os.path.join(self.out_dir, name)
        writer(obj, path)
        files[name] = path

    def simulate(self):
        """One trajectory CSV per seed plus manifest.json. Returns the manifest."""
        cfg = self.cfg
        os.makedirs(self.out_dir, exist_ok=True)
        t0 = time.time()

        def one(seed):
            noise = self.sample(seed)
            return seed, noise, self.solve_path(noise)

        results = parallel_map(one, cfg.seeds, self.workers)
        wall = time.time() - t0
        files = {}
        runs = []
        for seed, noise, traj in results:
            if "csv" in cfg.formats:
                self._write(files, "trajectory_seed%04d.csv" % seed, trajectory_to_csv, traj)
            if "noise-csv" in cfg.formats:
                self._write(files, "noise_seed%04d.csv" % seed, noise_to_csv, noise)
            if "npz" in cfg.formats:
                self._write(files, "noise_seed%04d.npz" % seed, save_noise_npz, noise)
            runs.append(
                {
                    "seed": seed,
                    "lifetime": traj.lifetime,
                    "reason": traj.reason,
                    "truncation_level": traj.truncation_level,
                    "escalations": traj.escalations,
                    "jumps": int(traj.jump_nodes.size),
                }
            )
        manifest = {
            "name": cfg.name,
            "command": "simulate",
            "config_hash": cfg.config_hash,
            "versions": versions(),
            "regime": cfg.regime,
            "seeds": list(cfg.seeds),
            "runs": runs,
            "wall_time": wall,
            "files": {name: sha256_of_file(path) for name, path in sorted(files.items())},
        }
        write_json(manifest, os.path.join(self.out_dir, "manifest.json"))
        log.info("simulated %d seed(s) in %.3f s", len(cfg.seeds), wall)
        return manifest

    def _oracle(self):
        cfg = self.cfg
        closed = None
        if cfg.semigroup is None:
            closed = models.oracle_for(cfg.family, cfg.params)
        if cfg.oracle == "closed-form" and closed is None:
            raise DomainError("no closed-form oracle for family %r in this setup" % cfg.family)
        if cfg.oracle == "self-reference":
            closed = None
        return closed

    def _reference_dt(self, finest):
        "Step of the self-reference solve: a quarter of the finest ladder step, dx for the shift lattice."
        sg = self.cfg.semigroup
        if not isinstance(sg, ShiftSemigroup):
            return finest / 4.0
        if sg.dx >= finest:
            raise DomainError("self-reference needs dx=%g below the finest ladder step %g" % (sg.dx, finest))
        return sg.dx

    def converge(self, dt_ladder=None, plot=False):
        """Mean strong error at the horizon for each step of the ladder.

        All levels share one noise path per seed (sampled on the finest grid and
        aggregated onto the coarser ones). The reference is the closed form when
        the family has one, otherwise the solve at a finer step (see _reference_dt)."""
        cfg = self.cfg
        ladder = sorted(dt_ladder or cfg.dt_ladder, reverse=True)
        if not ladder:
            raise DomainError("converge needs a dt ladder (run.dt_ladder)")
        closed = self._oracle()
        finest = min(ladder) if closed is not None else self._reference_dt(min(ladder))

        def one(seed):
            noise = self.sample(seed, dt=finest)
            if closed is not None:
                ref = closed(cfg.y0, noise, cfg.q)
            else:
                fine = self.solve_path(noise)
                ref = fine.final if fine.reason == REASON_HORIZON else None
            errs = []
            for dt in ladder:
                traj = self.solve_path(coarsen_noise(noise, cfg.grid(dt)))
                if ref is None or traj.reason != REASON_HORIZON:
                    errs.append(np.nan)
                else:
                    errs.append(float(np.linalg.norm(traj.final - ref)))
            return errs

        t0 = time.time()
        table = np.array(parallel_map(one, cfg.seeds, self.workers)).reshape(len(cfg.seeds), len(ladder))
        rows = []
        for k, dt in enumerate(ladder):
            col = table[:, k]
            ok = np.isfinite(col)
            rows.append({"dt": dt, "error": float(col[ok].mean()) if ok.any() else float("nan"), "paths": int(ok.sum())})
        slope = fit_loglog_slope([r["dt"] for r in rows], [r["error"] for r in rows])
        result = {
            "name": cfg.name,
            "command": "converge",
            "config_hash": cfg.config_hash,
            "oracle": "closed-form" if closed is not None else "self-reference",
            "reference_dt": finest,
            "rows": rows,
            "slope": slope,
            "wall_time": time.time() - t0,
            "versions": versions(),
        }
        os.makedirs(self.out_dir, exist_ok=True)
        convergence_to_csv(rows, os.path.join(self.out_dir, "convergence.csv"))
        write_json(result, os.path.join(self.out_dir, "convergence.json"))
        if plot or "png" in cfg.formats:
            plot_convergence(rows, slope, os.path.join(self.out_dir, "convergence.png"))
        return result

    # verification suites

    def _noises(self, count=None, marks=None, dt=None):
        seeds = list(range(self.cfg.seeds[0], self.cfg.seeds[0] + (count or self.cfg.verify_paths)))
        return parallel_map(lambda s: self.sample(s, dt=dt, marks=marks), seeds, self.workers)

    def verify_dilation(self):
        checks = []
        cfg = self.cfg
        rng = np.random.default_rng(0)
        if cfg.semigroup is not None:
            d = make_dilation(cfg.semigroup, cfg.padding, None, cfg.projection_scale)
            probes = [rng.standard_normal(cfg.semigroup.dim) for _ in range(4)]
            rep = check_dilation(d, cfg.semigroup, cfg.grid(), probes, get_dilation_tol())
            checks.append(_check("configured dilation diagram", rep.passed, rep.max_error, rep.tol))
        shift = ShiftSemigroup(64, 2.0**-6)
        d = make_dilation(shift, 64, 1.0)
        probes = [rng.standard_normal(64) for _ in range(4)]
        rep = check_dilation(d, shift, np.arange(65) * 2.0**-6, probes, 0.0)
        checks.append(_check("shift dilation exact (M=64, dx=2^-6)", rep.max_error == 0.0, rep.max_error, 0.0))
        A = rng.standard_normal((8, 8)) / np.sqrt(8.0)
        mat = MatrixSemigroup(A)
        d = make_dilation(mat, 0)
        probes = [rng.standard_normal(8) for _ in range(4)]
        rep = check_dilation(d, mat, np.linspace(0.0, 1.0, 11), probes, 1e-8)
        checks.append(_check("trivial dilation of random 8x8 generator", rep.passed, rep.max_error, 1e-8))
        return checks

    def verify_uniqueness(self):
        cfg = self.cfg
        opts = cfg.solver_opts()
        noises = self._noises()
        y0 = cfg.y0
        pairs = [(y0, y0) if i % 2 == 0 else (y0, y0 + 0.01) for i in range(len(noises))]
        batch = uniqueness_batch(self.coefficients, pairs, noises, opts, workers=self.workers)
        exact = all(r.bitwise_equal for r, eq in zip(batch.reports, batch.equal_mask) if eq)
        return [
            _check("sup distance with y0 = y0'", batch.max_distance_on_equal <= 1e-12, batch.max_distance_on_equal, 1e-12),
            _check("distance exactly zero on the event y0 = y0'", exact, batch.max_distance_on_equal, 0.0),
        ]

    def verify_interlace(self):
        cfg = self.cfg
        coeff = self.coefficients
        opts = cfg.solver_opts().replace(regime=None)
        m = cfg.marks
        small_only = MarkMeasureSpec(m.mark_dim, m.intensity_small, 0.0, m.sampler_small, None)
        worst_degenerate, skipped = 0.0, 0
        for noise in self._noises(marks=small_only):
            try:
                a = interlace_solve(coeff, cfg.y0, noise, opts)
                b = solve_no_large_jumps(coeff, cfg.y0, noise, opts)
            except NumericalBlowupError:
                skipped += 1
                continue
            if not np.array_equal(a.values, b.values):
                worst_degenerate = max(worst_degenerate, float(np.max(np.abs(a.values - b.values))))
        worst_jump, worst_restart, restarts = 0.0, 0.0, 0
        for noise in self._noises():
            try:
                traj = interlace_solve(coeff, cfg.y0, noise, opts)
            except NumericalBlowupError:
                skipped += 1
                continue
            nodes, lefts, incs = traj.large_jumps()
            by_node = noise.jumps_by_node()
            for node, left, inc in zip(nodes, lefts, incs):
                j = [k for k in by_node[int(node)] if noise.jump_is_large[k]][0]
                again = coeff.jump(noise.jump_times[j], left, noise.jump_marks[j])
                worst_jump = max(worst_jump, float(np.max(np.abs(again - inc))))
            if nodes.size:
                tau = noise.jump_times[noise.jump_is_large][0]
                rs = restart_solve(coeff, cfg.y0, noise, opts, tau)
                k = traj.node_of(tau)
                worst_restart = max(worst_restart, float(np.max(np.abs(rs.values[k:] - traj.values[k:]))))
                restarts += 1
        return [
            _check("interlacing degenerates without large jumps (bitwise)", worst_degenerate == 0.0, worst_degenerate, 0.0),
            _check("jump identity at large-jump nodes", worst_jump == 0.0, worst_jump, 0.0),
            _check("restart at first large jump (%d paths)" % restarts, worst_restart <= 1e-12, worst_restart, 1e-12),
            _check("paths skipped after blowup", skipped == 0, skipped, 0),
        ]

    def _residual_problem(self):
        if self.problem is not None:
            return self.problem, self.cfg.q, self.cfg.marks, self.cfg.horizon, self.cfg.dt
        sg = DiagonalSemigroup([-1.0, -2.0, -4.0])
        coeff = models.build_coefficients("geometric", {"mu": 0.5, "sigma": 0.3, "jump": 0.2}, 3, 3)
        prob = SpdeProblem(sg, make_dilation(sg, 0), coeff, [1.0, 0.5, -0.25])
        q = QWienerSpec([1.0, 0.5, 0.25])
        marks = MarkMeasureSpec(1, 2.0, 1.0, GaussianSampler([0.0], [0.2]), UniformBoxSampler([0.5], [1.0]))
        return prob, q, marks, 1.0, 2.0**-5

    def verify_residual(self):
        prob, q, marks, T, dt = self._residual_problem()
        opts = self.cfg.solver_opts().replace(regime=None)
        steps = int(round(T / dt))
        worst_ee = 0.0
        frame_res = {"coarse": [], "fine": []}
        dist = {"coarse": [], "fine": []}
        count = min(self.cfg.verify_paths, 5)
        for seed in range(self.cfg.seeds[0], self.cfg.seeds[0] + count):
            fine = sample_noise(q, marks, time_grid(T, 4 * steps), seed)
            for level, noise in (("fine", fine), ("coarse", coarsen_noise(fine, time_grid(T, steps)))):
                ee = mild_solve_exponential_euler(prob, noise, opts)
                mf = mild_solve_moving_frame(prob, noise, opts).Z
                if level == "coarse":
                    worst_ee = max(worst_ee, max(r["residual"] for r in residual_profile(prob, ee, noise, quad_n=opts.quad_n)))
                n = min(ee.times.size, mf.times.size)
                frame_res[level].append(max(r["residual"] for r in residual_profile(prob, mf, noise, quad_n=opts.quad_n, max_points=9)))
                dist[level].append(float(np.max(np.linalg.norm(ee.values[:n] - mf.values[:n], axis=1))))
        fr = {k: float(np.mean(v)) for k, v in frame_res.items()}
        dd = {k: float(np.mean(v)) for k, v in dist.items()}
        return [
            _check("exponential-Euler residual", worst_ee <= 1e-10, worst_ee, 1e-10),
            _check("moving-frame residual decreases with dt", fr["fine"] < fr["coarse"] or fr["coarse"] == 0.0, fr, None),
            _check("moving frame vs exponential Euler decreases with dt", dd["fine"] < dd["coarse"] or dd["coarse"] == 0.0, dd, None),
        ]

    def verify_conditions(self):
        checks = []
        rep = cond.divergence_criterion(cond.example_kappa, 0.1, [1e-2, 1e-4, 1e-6, 1e-8])
        err = abs(rep.integrals[-1] - KAPPA_DIVERGENCE_VALUE)
        checks.append(_check("kappa divergence integral at floor 1e-8", err <= 1e-6, rep.integrals[-1], KAPPA_DIVERGENCE_VALUE))
        checks.append(_check("kappa integrals diverge", rep.divergent, rep.integrals, None))
        lip = cond.estimate_local_lipschitz(
            lambda t, y: cond.example_rho(np.abs(y)), None, 1.0, 64, separations=(1e-2, 1e-4, 1e-8)
        )
        est = [e for _, e in lip.by_separation]
        increasing = all(b > a for a, b in zip(est, est[1:]))
        checks.append(_check("rho estimates increase as separations shrink", increasing and est[-1] > 5, est, 5.0))
        worst = 0.0
        for n in range(1, 51):
            L = cond.brute_force_lipschitz(cond.example_staircase, n, n + 1, 1e-4)
            worst = max(worst, abs(L - (n + 1)) / (n + 1))
        checks.append(
            _check(
                "staircase Lipschitz constant n+1 on [n, n+1], n <= 50 (rel. rounding)",
                worst <= STAIRCASE_RTOL,
                worst,
                STAIRCASE_RTOL,
            )
        )
        vio = cond.staircase_modulus_violation(2.0, 50)
        checks.append(_check("staircase witness gaps are exactly 1", vio.min_gap == 1.0 and vio.separations_within_bound, vio.min_gap, 1.0))
        u = np.linspace(0.0, 2.0, 2001)
        k = cond.example_kappa(u)
        mids = cond.example_kappa(0.5 * (u[:-2] + u[2:]))
        concave = bool(np.all(mids >= 0.5 * (k[:-2] + k[2:]) - 1e-15))
        checks.append(_check("example kappa nondecreasing and midpoint concave", bool(np.all(np.diff(k) >= 0)) and concave, None, None))
        return checks

    def verify(self, suite="all"):
        "Run one verification suite or all of them; returns the JSON verdict."
        names = SUITES if suite == "all" else (suite,)
        report = {"name": self.cfg.name, "config_hash": self.cfg.config_hash, "suites": {}}
        for name in names:
            if name not in SUITES:
                raise DomainError("unknown suite %r" % (name,))
            t0 = time.time()
            checks = getattr(self, "verify_" + name)()
            report["suites"][name] = {
                "passed": all(c["passed"] for c in checks),
                "checks": checks,
                "wall_time": time.time() - t0,
            }
            log.info("suite %s: %s", name, "pass" if report["suites"][name]["passed"] else "FAIL")
        report["passed"] = all(s["passed"] for s in report["suites"].values())
        os.makedirs(self.out_dir, exist_ok=True)
        write_json(report, os.path.join(self.out_dir, "verify.json"))
        return report


def plot_convergence(rows, slope, path):
    "Log-log plot of the convergence table; needs the plot extra (matplotlib)."
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    dts = [r["dt"] for r in rows]
    errs = [r["error"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(dts, errs, "o-", label="mean strong error")
    if slope is not None:
        ax.set_title("fitted slope %.3f" % slope)
    ax.set_xlabel("dt")
    ax.set_ylabel("error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def run_simulate(config, workers=None):
    return ExperimentRunner(config, workers).simulate()


def run_converge(config, dt_ladder=None, plot=False, workers=None):
    return ExperimentRunner(config, workers).converge(dt_ladder, plot=plot)


def run_verify(suite, config, workers=None):
    return ExperimentRunner(config, workers).verify(suite)


def run_dilation_check(config):
    return ExperimentRunner(config).verify("dilation")


def run_conditions_check(config):
    return ExperimentRunner(config).verify("conditions")
