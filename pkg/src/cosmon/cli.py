"""Command line front end.

Usage::

    cosmon <experiment> --config <path> [--out DIR] [--threads N] [--seed S]

Exit status: 0 when every check passes, 1 when an invariant check fails,
2 for a missing or invalid configuration, 3 for a numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import experiments as ex
from .modes import SingularityGuardError
from .modes import StepFailureError as ModeStepFailure
from .rays import HorizonExceededError
from .rays import StepFailureError as RayStepFailure
from .solver import IdentityViolation, SolveFailureError
from .specfun import BesselDomainError, GammaPoleError

log = logging.getLogger("cosmon")

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
ORDER = ("trace", "escape", "mode", "counterexample", "coercivity", "solve", "wavefront")

DEFAULTS = {
    "seed": 1234567,
    "background": {"a_rot": 1.0},
    "mode": {"k": 0, "m": 0.0},
    "grid": {"t_period": 12.8, "n_t": 512, "r_max": 8.0, "n_r": 512},
    "absorber": {"R": 4.0, "R0": 3.0},
    "tolerances": dict(ex.DEFAULT_TOLERANCES),
    "trace": {"n_rays": 50, "s_max": 10.0},
    "escape": {"K": [-1.0, 1.0, 0.5, 3.0], "R": 4.0},
    "mode_checks": {"n_draws": 50, "specfun_samples": 4000, "uc_lambda": 1.3,
                    "uc_interval": [0.2, 2.0], "uc_trials": 100},
    "counterexample": {"k_values": [0, 1], "levels": 3},
    "coercivity": {"k_values": [0, 1, 3], "trials": 100},
    "solve": {"source": {"t0": 6.4, "r0": 2.0, "width_t": 0.04, "width_r": 0.04},
              "damping_lambdas": [40.0, 50.0, 60.0, 70.0], "absorber_samples": 1000000},
    "wavefront": {"window": 0.2, "bins": [2, 2], "energy_rel": 1e-3, "tube_sigmas": 3.0,
                  "angle_deg": 15.0, "min_frequency": 30.0, "horizon_fraction": 0.5},
}

NUMERICAL_ERRORS = (RayStepFailure, ModeStepFailure, HorizonExceededError, SolveFailureError,
                    IdentityViolation, BesselDomainError, GammaPoleError, SingularityGuardError,
                    FloatingPointError, np.linalg.LinAlgError)


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    """The published schema, from the source tree or the installed package data."""
    here = Path(__file__).resolve()
    for cand in (here.parents[2] / "docs" / "config.schema.json",):
        if cand.is_file():
            return json.loads(cand.read_text())
    return json.loads(resources.files("cosmon").joinpath("config.schema.json").read_text())


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def validate_cross_fields(cfg: dict) -> None:
    a = cfg["background"]["a_rot"]
    R, R0 = cfg["absorber"]["R"], cfg["absorber"]["R0"]
    g = cfg["grid"]
    if not R > max(a, R0):
        raise ConfigError(f"need R > max(a_rot, R0), got R={R}, R0={R0}, a_rot={a}")
    if not 1.0 - a * a / (R * R) > 0.9:
        raise ConfigError("need 1 - a_rot^2/R^2 > 9/10")
    if not g["r_max"] > R + 2.0:
        raise ConfigError(f"need r_max > R + 2, got r_max={g['r_max']}, R={R}")
    n = g["n_t"]
    if n & (n - 1):
        raise ConfigError(f"n_t must be a power of two, got {n}")
    src = cfg["solve"]["source"]
    if not 0 < src["r0"] < R0:
        raise ConfigError("source centre must lie in (0, R0)")
    K = cfg["escape"]["K"]
    if not (K[0] <= K[1] and 0 < K[2] <= K[3]):
        raise ConfigError("escape K must be [t_lo, t_hi, r_lo, r_hi] with 0 < r_lo <= r_hi")
    if not cfg["escape"]["R"] > a:
        raise ConfigError("escape R must exceed a_rot")
    lo, hi = cfg["mode_checks"]["uc_interval"]
    if not 0 < lo < a < hi:
        raise ConfigError("uc_interval must contain a_rot")
    bins = cfg["wavefront"]["bins"]
    if any(b < 1 for b in bins):
        raise ConfigError("wavefront bins must be positive")


def load_config(path, seed=None) -> dict:
    """Read, validate and complete a run configuration."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {err.message}") from err
    cfg = _merge(DEFAULTS, raw)
    if seed is not None:
        cfg["seed"] = int(seed)
    validate_cross_fields(cfg)
    return cfg


def resolve_threads(arg) -> int:
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get("COSMON_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer COSMON_THREADS=%r", env)
    return 1


def run(experiment: str, config_path, out=None, threads=None, seed=None) -> int:
    """Run one experiment (or all) and write ``report.json``; returns the exit status."""
    try:
        cfg = load_config(config_path, seed)
    except ConfigError as err:
        log.error("%s", err)
        return EXIT_CONFIG
    if experiment not in ORDER and experiment != "all":
        log.error("unknown experiment %r", experiment)
        return EXIT_CONFIG
    out = Path(out if out is not None else cfg.get("output", "cosmon-out"))
    out.mkdir(parents=True, exist_ok=True)
    threads = resolve_threads(threads)
    names = ORDER if experiment == "all" else (experiment,)
    cache: dict = {}
    results, status = [], EXIT_OK
    for name in names:
        fn = ex.EXPERIMENTS[name]
        kwargs = {"cache": cache} if name in ("solve", "wavefront") else {}
        t0 = time.perf_counter()
        try:
            with np.errstate(over="raise", invalid="ignore", divide="ignore"):
                checks = fn(cfg, out, cfg["seed"], threads, **kwargs)
        except NUMERICAL_ERRORS as err:
            log.error("%s: numerical failure: %s", name, err)
            checks = [ex.check(f"{name}_numerical", False, f"{type(err).__name__}: {err}")]
            status = EXIT_NUMERICAL
        for c in checks:
            c["experiment"] = name
            log.info("%-16s %-36s %s  value=%s", name, c["name"],
                     "PASS" if c["passed"] else "FAIL", c["value"])
        log.info("%s finished in %.1f s", name, time.perf_counter() - t0)
        results.extend(checks)
    passed = all(c["passed"] for c in results)
    if status == EXIT_OK and not passed:
        status = EXIT_INVARIANT
    ex.write_json(out / "report.json", {
        "experiment": experiment,
        "seed": cfg["seed"],
        "config": cfg,
        "checks": results,
        "n_checks": len(results),
        "n_failed": sum(not c["passed"] for c in results),
        "passed": passed and status == EXIT_OK,
        "exit_status": status,
    })
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cosmon", description="Mode-solution experiments on the rotating string background.")
    p.add_argument("experiment", choices=ORDER + ("all",))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=None, help="output directory (default: config 'output' or ./cosmon-out)")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: $COSMON_THREADS or 1)")
    p.add_argument("--seed", type=int, default=None, help="override the configured seed")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    return run(args.experiment, args.config, args.out, args.threads, args.seed)


if __name__ == "__main__":
    sys.exit(main())
