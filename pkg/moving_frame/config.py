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

"""ExperimentConfig: the JSON experiment description and its validation.

Every problem found is collected with its dotted field path and reported at
once through ConfigValidationError."""

import copy
import json
import numpy as np
import pkg_resources as pk

from moving_frame import models
from moving_frame.core.hilbert import SpaceSpec, ShiftSemigroup, make_dilation, minimal_padding, resolve_semigroup
from moving_frame.core.noise import QWienerSpec, resolve_marks
from moving_frame.core.sde import SolverOpts
from moving_frame.errors import CapacityError, ConfigValidationError, MovingFrameError
from moving_frame.util.basic import integer_ratio, sha256_of_json, time_grid

SCHEMA_VERSION = 1

REGIMES = ("auto", "global", "local", "interlace", "no-large-jumps", "mild-frame", "mild-expeuler")
MILD_REGIMES = ("mild-frame", "mild-expeuler")
ORACLES = ("auto", "closed-form", "self-reference")
FORMATS = ("csv", "json", "npz", "noise-csv", "png")

_top_fields = {"schema_version", "name", "problem", "noise", "run", "output"}
_problem_fields = {"space", "semigroup", "dilation", "coefficients", "y0"}
_space_fields = {"dim", "label"}
_dilation_fields = {"padding", "projection_scale"}
_coeff_fields = {"family", "params"}
_noise_fields = {"q_eigenvalues", "marks", "horizon", "dt"}
_run_fields = {"seeds", "seed_count", "first_seed", "regime", "opts", "dt_ladder", "oracle", "verify_paths"}
_output_fields = {"directory", "formats"}


def default_config_path():
    return pk.resource_filename("moving_frame.data", "default_config.json")


def load_raw(path=None):
    "Read a config file (the shipped default when path is None)."
    with open(path or default_config_path()) as f:
        return json.load(f)


def apply_overrides(raw, seed_count=None, out=None, dt=None):
    "Copy of raw with command-line overrides applied."
    raw = copy.deepcopy(raw)
    if seed_count is not None:
        run = raw.setdefault("run", {})
        run.pop("seeds", None)
        run["seed_count"] = seed_count
    if out is not None:
        raw.setdefault("output", {})["directory"] = out
    if dt is not None:
        raw.setdefault("noise", {})["dt"] = dt
    return raw


class ExperimentConfig:
    """Validated experiment description.

    Attributes mirror the JSON sections: ``space``, ``semigroup`` (None for a
    plain SDE), ``padding``, ``projection_scale``, ``family``, ``params``,
    ``y0``, ``q``, ``marks``, ``horizon``, ``dt``, ``seeds``, ``regime``,
    ``opts``, ``dt_ladder``, ``oracle``, ``verify_paths``, ``out_dir`` and
    ``formats``. ``raw`` keeps the source dictionary for the manifest hash."""

    def __init__(self, raw, **kw):
        self.raw = raw
        for k, v in kw.items():
            setattr(self, k, v)

    @property
    def config_hash(self):
        return sha256_of_json(self.raw)

    @property
    def steps(self):
        return integer_ratio(self.horizon, self.dt)

    def grid(self, dt=None):
        dt = self.dt if dt is None else dt
        return time_grid(self.horizon, integer_ratio(self.horizon, dt))

    @property
    def is_mild(self):
        return self.regime in MILD_REGIMES

    def coefficients(self):
        return models.build_coefficients(self.family, self.params, self.space.dim, self.q.dim)

    def dilation(self):
        return make_dilation(self.semigroup, self.padding, self.horizon, self.projection_scale)

    def solver_opts(self, **kw):
        opts = self.opts
        if self.regime in ("global", "local", "interlace", "no-large-jumps"):
            opts = opts.replace(regime=self.regime)
        return opts.replace(**kw) if kw else opts


class _Collector:
    def __init__(self):
        self.errors = []

    def add(self, field, msg):
        self.errors.append((field, msg))

    def section(self, d, path, allowed, required=()):
        if not isinstance(d, dict):
            self.add(path, "must be an object")
            return {}
        for k in sorted(set(d) - allowed):
            self.add("%s.%s" % (path, k) if path else k, "unknown field")
        for k in required:
            if k not in d:
                self.add("%s.%s" % (path, k) if path else k, "missing required field")
        return d

    def guard(self, field, fn, *args):
        "Run a constructor, recording its failure under field."
        try:
            return fn(*args)
        except (MovingFrameError, KeyError, TypeError, ValueError) as e:
            self.add(field, str(e).strip("'\""))
            return None


def _positive(c, field, v):
    if v is None:
        return None
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0 or not np.isfinite(v):
        c.add(field, "must be a positive number")
        return None
    return float(v)


def parse_config(raw):
    """Validate a raw config dictionary and build an ExperimentConfig.

    Parameters
    ----------
    raw: dict
        Parsed JSON. Sections problem, noise, run and output; unknown keys are
        rejected everywhere.
    """
    c = _Collector()
    raw = c.section(raw, "", _top_fields, ("schema_version", "problem", "noise"))
    if "schema_version" in raw and raw["schema_version"] != SCHEMA_VERSION:
        c.add("schema_version", "unsupported version %r, expected %d" % (raw["schema_version"], SCHEMA_VERSION))

    # problem
    prob = c.section(raw.get("problem", {}), "problem", _problem_fields, ("space", "coefficients", "y0"))
    sp = c.section(prob.get("space", {}), "problem.space", _space_fields, ("dim",))
    space = c.guard("problem.space.dim", lambda: SpaceSpec(sp["dim"], sp.get("label", "H"))) if "dim" in sp else None
    semigroup = None
    if prob.get("semigroup") is not None:
        semigroup = c.guard("problem.semigroup", resolve_semigroup, prob["semigroup"])
        if semigroup is not None and space is not None and semigroup.dim != space.dim:
            c.add("problem.semigroup", "acts on dimension %d, space has %d" % (semigroup.dim, space.dim))
    dil = c.section(prob.get("dilation", {}), "problem.dilation", _dilation_fields)
    padding = dil.get("padding", 0)
    if not isinstance(padding, int) or isinstance(padding, bool) or padding < 0:
        c.add("problem.dilation.padding", "must be a nonnegative integer")
        padding = 0
    projection_scale = dil.get("projection_scale", 1.0)
    if not isinstance(projection_scale, (int, float)) or not np.isfinite(projection_scale):
        c.add("problem.dilation.projection_scale", "must be a finite number")
        projection_scale = 1.0
    co = c.section(prob.get("coefficients", {}), "problem.coefficients", _coeff_fields, ("family",))
    family = co.get("family")
    params = co.get("params", {})
    if family is not None:
        merged = c.guard("problem.coefficients", models.family_params, family, params)
        if merged is None:
            family = None
    y0 = None
    if "y0" in prob:
        y0 = np.asarray(prob["y0"], dtype=np.float64).reshape(-1)
        if space is not None and y0.size != space.dim:
            c.add("problem.y0", "has %d entries, space dimension is %d" % (y0.size, space.dim))
        if not np.all(np.isfinite(y0)):
            c.add("problem.y0", "must be finite")

    # noise
    nz = c.section(raw.get("noise", {}), "noise", _noise_fields, ("q_eigenvalues", "horizon", "dt"))
    q = c.guard("noise.q_eigenvalues", QWienerSpec, nz["q_eigenvalues"]) if "q_eigenvalues" in nz else None
    marks = c.guard("noise.marks", resolve_marks, nz.get("marks", {}))
    horizon = _positive(c, "noise.horizon", nz.get("horizon"))
    dt = _positive(c, "noise.dt", nz.get("dt"))
    if horizon is not None and dt is not None:
        if dt > horizon or integer_ratio(horizon, dt) is None:
            c.add("noise.dt", "dt=%g does not divide the horizon %g" % (dt, horizon))
        if isinstance(semigroup, ShiftSemigroup) and integer_ratio(dt, semigroup.dx) is None:
            c.add("noise.dt", "dt=%g is not a multiple of the shift lattice spacing dx=%g" % (dt, semigroup.dx))
    if isinstance(semigroup, ShiftSemigroup) and horizon is not None:
        need = minimal_padding(semigroup, horizon)
        if need > padding:
            c.add("problem.dilation.padding", "padding %d too small for horizon %g; need at least %d" % (padding, horizon, need))

    # run
    run = c.section(raw.get("run", {}), "run", _run_fields)
    seeds = run.get("seeds")
    if seeds is None:
        count = run.get("seed_count", 1)
        first = run.get("first_seed", 0)
        if not isinstance(count, int) or count < 1:
            c.add("run.seed_count", "must be a positive integer")
            count = 0
        seeds = list(range(first, first + max(count, 0)))
    if not isinstance(seeds, list) or not seeds:
        c.add("run.seeds", "must be a nonempty list")
        seeds = []
    elif any(not isinstance(s, int) or isinstance(s, bool) or s < 0 for s in seeds):
        c.add("run.seeds", "must be nonnegative integers")
    regime = run.get("regime", "auto")
    if regime not in REGIMES:
        c.add("run.regime", "unknown regime %r; choose from %s" % (regime, ", ".join(REGIMES)))
    elif regime in MILD_REGIMES and semigroup is None:
        c.add("run.regime", "%s needs problem.semigroup" % regime)
    opts = c.guard("run.opts", SolverOpts.from_dict, run.get("opts", {}))
    if opts is not None and horizon is not None:
        opts = opts.replace(horizon=horizon, dt=dt)
    ladder = run.get("dt_ladder", [])
    if not isinstance(ladder, list) or any(_positive(c, "run.dt_ladder", v) is None for v in ladder):
        ladder = []
    if ladder and horizon is not None:
        finest = min(ladder)
        for v in ladder:
            if integer_ratio(horizon, v) is None:
                c.add("run.dt_ladder", "entry %g does not divide the horizon" % v)
            elif integer_ratio(v, finest) is None:
                c.add("run.dt_ladder", "entry %g is not a multiple of the finest step %g" % (v, finest))
            if isinstance(semigroup, ShiftSemigroup) and integer_ratio(v, semigroup.dx) is None:
                c.add("run.dt_ladder", "entry %g is not a multiple of dx=%g" % (v, semigroup.dx))
    oracle = run.get("oracle", "auto")
    if oracle not in ORACLES:
        c.add("run.oracle", "unknown oracle %r" % (oracle,))
    verify_paths = run.get("verify_paths", 20)
    if not isinstance(verify_paths, int) or verify_paths < 1:
        c.add("run.verify_paths", "must be a positive integer")

    # output
    out = c.section(raw.get("output", {}), "output", _output_fields)
    formats = out.get("formats", ["csv", "json"])
    bad = [f for f in formats if f not in FORMATS] if isinstance(formats, list) else [formats]
    if bad:
        c.add("output.formats", "unknown format(s) %s" % ", ".join(map(str, bad)))

    if c.errors:
        raise ConfigValidationError(c.errors)

    cfg = ExperimentConfig(
        raw,
        name=raw.get("name", "experiment"),
        space=space,
        semigroup=semigroup,
        padding=padding,
        projection_scale=float(projection_scale),
        family=family,
        params=params,
        y0=y0,
        q=q,
        marks=marks,
        horizon=horizon,
        dt=dt,
        seeds=seeds,
        regime=regime,
        opts=opts,
        dt_ladder=sorted(ladder, reverse=True),
        oracle=oracle,
        verify_paths=verify_paths,
        out_dir=out.get("directory", "out"),
        formats=list(formats),
    )
    # constructor-level checks that need the whole config
    try:
        cfg.coefficients()
        if semigroup is not None:
            cfg.dilation()
    except CapacityError as e:
        raise ConfigValidationError([("problem.dilation.padding", str(e))])
    except (MovingFrameError, ValueError) as e:
        raise ConfigValidationError([("problem.coefficients", str(e))])
    return cfg


def load_config(path=None, **overrides):
    "Read, override and validate a config file."
    return parse_config(apply_overrides(load_raw(path), **overrides))
