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

"""Command-line front end: moving-frame {simulate,converge,verify,dilation-check,conditions-check}."""

import argparse
import json
import logging
import sys

from moving_frame import driver
from moving_frame.config import load_config
from moving_frame.errors import ConfigValidationError, MovingFrameError, NumericalBlowupError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_VERIFICATION = 3


def parse_args(argv=None):
    parser = argparse.ArgumentParser(prog="moving-frame", description="Moving-frame jump SDE/SPDE experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="experiment config JSON (default: shipped config)")
        p.add_argument("--seed-count", type=int, default=None, help="use seeds 0..N-1 (from run.first_seed)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--dt", type=float, default=None, help="override noise.dt")
        return p

    common(sub.add_parser("simulate", help="one trajectory CSV per seed plus manifest"))
    conv = common(sub.add_parser("converge", help="strong error over run.dt_ladder"))
    conv.add_argument("--plot", action="store_true", help="write convergence.png (needs matplotlib)")
    ver = common(sub.add_parser("verify", help="run verification suites"))
    ver.add_argument("--suite", default="all", choices=driver.SUITES + ("all",))
    common(sub.add_parser("dilation-check", help="commuting-diagram check of the dilation"))
    common(sub.add_parser("conditions-check", help="regularity checks and worked examples"))
    return parser.parse_args(argv)


def _print_checks(report):
    for name, suite in report["suites"].items():
        print("[%s] %s" % ("PASS" if suite["passed"] else "FAIL", name))
        for c in suite["checks"]:
            print("    %-4s %-58s value=%s" % ("ok" if c["passed"] else "FAIL", c["name"], json.dumps(c["value"], default=str)))


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, seed_count=args.seed_count, out=args.out, dt=args.dt)
    except ConfigValidationError as e:
        print(str(e), file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, ValueError) as e:
        print("could not read config: %s" % e, file=sys.stderr)
        return EXIT_VALIDATION

    try:
        if args.command == "simulate":
            manifest = driver.run_simulate(cfg)
            for run in manifest["runs"]:
                print("seed %d: lifetime %g (%s)" % (run["seed"], run["lifetime"], run["reason"]))
            print("wrote %d file(s) to %s" % (len(manifest["files"]) + 1, cfg.out_dir))
            return EXIT_OK
        if args.command == "converge":
            result = driver.run_converge(cfg, plot=args.plot)
            print("%-12s %-24s %s" % ("dt", "error", "paths"))
            for row in result["rows"]:
                print("%-12g %-24.17g %d" % (row["dt"], row["error"], row["paths"]))
            print("slope: %s" % ("n/a" if result["slope"] is None else "%.4f" % result["slope"]))
            return EXIT_OK
        if args.command == "verify":
            report = driver.run_verify(args.suite, cfg)
        elif args.command == "dilation-check":
            report = driver.run_dilation_check(cfg)
        else:
            report = driver.run_conditions_check(cfg)
    except NumericalBlowupError as e:
        print("numerical failure: %s" % e, file=sys.stderr)
        return EXIT_NUMERICAL
    except MovingFrameError as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_NUMERICAL
    _print_checks(report)
    return EXIT_OK if report["passed"] else EXIT_VERIFICATION


if __name__ == "__main__":
    sys.exit(main())
