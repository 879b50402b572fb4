"""Command-line front end.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
4 closed-form mismatch under ``--strict``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import analysis, bounds
from .errors import ConfigError, HcrbError, IllConditioned, NonMonotoneDetected
from .scenario import load_scenario_file

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISMATCH = 0, 2, 3, 4


class GridError(ConfigError):
    kind = "GridError"


def parse_snr_grid(text: str) -> list:
    """``lo:hi:step`` in dB, inclusive of ``hi`` when it lands on the grid."""
    try:
        lo, hi, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise GridError(f"--snr-db must be lo:hi:step, got {text!r}") from None
    if not all(math.isfinite(v) for v in (lo, hi, step)) or hi < lo:
        raise GridError(f"--snr-db needs finite lo <= hi, got {text!r}")
    if hi == lo:
        return [lo]
    if step <= 0:
        raise GridError("--snr-db step must be > 0")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def parse_sigma_list(text: str) -> list:
    try:
        vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise GridError(f"--sigma must be a comma-separated list, got {text!r}") from None
    if not vals:
        raise GridError("--sigma is empty")
    return vals


def _matrix(m):
    return None if m is None else [[float(v) for v in row] for row in np.asarray(m)]


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(analysis.SWEEP_COLUMNS)
    for r in rows:
        w.writerow(r.as_csv_fields())
    return buf.getvalue()


def write_output(text: str, path: str) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load(path):
    try:
        return load_scenario_file(path)
    except OSError as e:
        raise ConfigError(f"cannot read scenario file: {e}") from None


def cmd_compute(args) -> int:
    s = _load(args.scenario)
    crb0 = bounds.crb_no_mismatch(s)
    hcrb = bounds.hcrb_oracle(s)
    out = {
        "crb0": _matrix(crb0),
        "hcrb": _matrix(hcrb),
        "delta_crb": _matrix(hcrb - crb0),
        "deviation": None,
        "closed_form": None,
        "scenario": s.to_dict(),
    }
    mismatch = False
    if s.sigma_delta_sq > 0:
        res = bounds.compare_paths(s, selected=args.variant)
        out["deviation"] = res.deviation
        out["closed_form"] = {
            "variant": res.selected_variant,
            "hcrb": _matrix(res.hcrb_closed),
            "delta_crb": _matrix(res.delta_crb_closed),
            "variants": {
                v.tag: {"deviation": v.deviation, "status": v.status, "error": v.error}
                for v in res.variants
            },
        }
        mismatch = res.deviation is None or res.deviation > bounds.DEVIATION_THRESHOLD
    if args.format == "csv":
        row = analysis.evaluate_point(s, args.variant)
        text = _csv_text([row])
    else:
        text = _dumps(out)
    write_output(text, args.output)
    if args.strict and mismatch:
        _error({"error": "ClosedFormMismatch", "message":
                f"closed form {args.variant} deviates from oracle by {out['deviation']}"})
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_sweep(args) -> int:
    s = _load(args.scenario)
    spec = analysis.SweepSpec(
        s, parse_snr_grid(args.snr_db), parse_sigma_list(args.sigma),
        paths=("oracle", args.variant),
    )
    rows = analysis.run_sweep(spec, workers=args.workers)
    write_output(_csv_text(rows), args.output)
    return EXIT_OK


def cmd_tolerance(args) -> int:
    s = _load(args.scenario)
    res = analysis.solve_sigma_max(s, args.criterion, lo=args.lo, hi=args.hi)
    out = res.to_dict()
    out["snr"] = s.signal.snr
    write_output(_dumps(out), args.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    scenarios = analysis.random_battery(args.seed, args.count)
    report = analysis.build_validation_report(scenarios, seed=args.seed)
    write_output(_dumps(report.to_dict()), args.output)
    return EXIT_NUMERIC if report.oracle_failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mimo-hcrb",
        description="Hybrid CRB for coherent MIMO radar localization with phase errors.",
    )
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, fmt=False):
        sp.add_argument("-o", "--output", default="-", help="output path, '-' for stdout")
        if fmt:
            sp.add_argument("--format", choices=("json", "csv"), default="json")

    variant_help = "closed-form variant tag kind/r_delta/algebra"
    c = sub.add_parser("compute", help="bounds for one scenario")
    c.add_argument("scenario")
    common(c, fmt=True)
    c.add_argument("--variant", default=bounds.DEFAULT_VARIANT.tag, help=variant_help)
    c.add_argument("--strict", action="store_true",
                   help="exit 4 when the closed form deviates from the oracle")
    c.set_defaults(func=cmd_compute)

    s = sub.add_parser("sweep", help="CSV table over SNR and sigma^2 grids")
    s.add_argument("scenario")
    common(s)
    s.add_argument("--snr-db", default="-10:30:1", help="lo:hi:step in dB")
    s.add_argument("--sigma", default=",".join(repr(v) for v in analysis.DEFAULT_SIGMA_GRID),
                   help="comma-separated sigma^2 values (rad^2)")
    s.add_argument("--variant", default=bounds.DEFAULT_VARIANT.tag, help=variant_help)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("tolerance", help="largest tolerable sigma^2")
    t.add_argument("scenario")
    common(t)
    t.add_argument("--criterion", choices=analysis.CRITERIA, default="psd")
    t.add_argument("--lo", type=float, default=1e-8)
    t.add_argument("--hi", type=float, default=1e1)
    t.set_defaults(func=cmd_tolerance)

    v = sub.add_parser("validate", help="closed form vs oracle on seeded random scenarios")
    common(v)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--count", type=int, default=50)
    v.set_defaults(func=cmd_validate)
    return p


def _error(obj):
    sys.stderr.write(json.dumps(obj) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "variant", None) is not None:
        try:
            bounds.ClosedFormVariant.from_tag(args.variant)
        except ValueError as e:
            _error({"error": "ConfigError", "message": str(e)})
            return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as e:
        _error(e.to_dict())
        return EXIT_CONFIG
    except (IllConditioned, NonMonotoneDetected, HcrbError) as e:
        _error(e.to_dict())
        return EXIT_NUMERIC
    except ValueError as e:
        _error({"error": "ConfigError", "message": str(e)})
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
