"""Command-line front end: config in, verdicts and bit-exact artifacts out.

Exit codes: 0 when every check passes, 2 when the verdict is inconclusive
(e.g. a scaling fit below the r^2 bar), 1 on configuration errors, usage
errors, or failed checks.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .config import (KINDS, ConfigError, ExperimentSpec, apply_overrides,
                     emit_config, parse_config)
from .evolution import BlowUpError
from .experiments import ExperimentResult, run_experiment
from .records import RunManifest, write_fit_file, write_manifest, write_record_csv

__all__ = ["main", "build_parser"]

_EXIT = {"pass": 0, "fail": 1, "inconclusive": 2}

_HELP = {
    "simulate": "evolve preset data and record invariants and norms",
    "conserve": "audit Q1-Q4 drift (mass to round-off, energy to o(dt^2))",
    "inflate": "frequency-sweep norm inflation of the transport field",
    "c2probe": "bilinear-kernel growth probe (smoothness failure), quadrature only",
    "decohere": "small-dispersion pair drifting O(1) apart from identical data",
    "growth": "long-horizon Sobolev growth against a priori envelopes",
}


class _Parser(argparse.ArgumentParser):
    """argparse, but every usage problem exits 1 (not 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zrlab",
                     description="spectral laboratory for a coupled "
                                 "Schrodinger-transport system")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="increase log verbosity (-v info, -vv debug)")
    sub = parser.add_subparsers(dest="kind", metavar="command", parser_class=_Parser)
    sub.required = True
    for kind in KINDS:
        p = sub.add_parser(kind, help=_HELP[kind])
        p.add_argument("--config", type=Path, default=None,
                       help="sectioned key=value config file (defaults used if omitted)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="section.key=value", help="override a config entry")
    return parser


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _spec_resolved(spec: ExperimentSpec) -> dict:
    return _jsonable({
        "kind": spec.kind, "grid_n": spec.grid_n, "grid_length": spec.grid_length,
        "preset": spec.preset, "theta": spec.theta, "gamma": spec.gamma,
        "omega": spec.omega, "beta": spec.beta, "nu": spec.nu,
        "dt": spec.dt, "t_end": spec.t_end, "record_every": spec.record_every,
        "dealias": spec.dealias, "out_dir": spec.out_dir, "prefix": spec.prefix,
        "experiment": spec.table,
    })


def _emit(spec: ExperimentSpec, result: ExperimentResult, wall: float) -> list[str]:
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, dict] = {}
    written: list[str] = []

    for name in sorted(result.records):
        path = out_dir / f"{spec.prefix}_{name}.csv"
        digest = write_record_csv(result.records[name], path)
        artifacts[name] = {"path": str(path), "sha256": digest, "format": "csv"}
        written.append(str(path))

    for name in sorted(result.fits):
        fit = result.fits[name]
        path = out_dir / f"{spec.prefix}_{name}.fit"
        write_fit_file(path, list(fit.log_x), list(fit.log_y),
                       fit.slope, fit.intercept, fit.r_squared)
        artifacts[name] = {"path": str(path), "format": "fit"}
        written.append(str(path))

    from . import __version__
    manifest = RunManifest(
        kind=spec.kind,
        config_echo=emit_config(spec),
        resolved=_spec_resolved(spec),
        verdict=_jsonable({
            "status": result.status,
            "checks": [{"name": c.name, "status": c.status,
                        "observed": c.observed, "expected": c.expected}
                       for c in result.checks],
            "info": result.info,
        }),
        wall_time_s=wall,
        artifacts=artifacts,
        version=__version__,
    )
    manifest_path = out_dir / f"{spec.prefix}_manifest.json"
    write_manifest(manifest, manifest_path)
    written.append(str(manifest_path))
    return written


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        if args.config is not None:
            spec = parse_config(args.config.read_text(encoding="utf-8"), args.kind)
        else:
            spec = parse_config("", args.kind)
        if args.overrides:
            spec = apply_overrides(spec, args.overrides)
    except OSError as exc:
        print(f"zrlab: error: cannot read config: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"zrlab: config error: {exc}", file=sys.stderr)
        return 1

    start = time.perf_counter()
    try:
        result = run_experiment(spec)
    except ConfigError as exc:
        print(f"zrlab: config error: {exc}", file=sys.stderr)
        return 1
    except BlowUpError as exc:
        print(f"zrlab: run failed: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as exc:
        print(f"zrlab: run failed: {exc}", file=sys.stderr)
        return 1
    wall = time.perf_counter() - start

    written = _emit(spec, result, wall)
    for check in result.checks:
        print(check.line())
    for path in written:
        print(f"wrote {path}")
    print(f"verdict: {result.status} ({wall:.2f} s)")
    return _EXIT[result.status]


if __name__ == "__main__":
    raise SystemExit(main())
