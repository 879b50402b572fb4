"""Sweeps over SNR and phase-error variance, the tolerable-variance solver,
and closed-form validation reports."""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .bounds import (
    ALL_VARIANTS,
    DEFAULT_VARIANT,
    DEVIATION_THRESHOLD,
    ClosedFormVariant,
    compare_paths,
    crb_no_mismatch,
    hcrb_closed_form,
    hcrb_oracle,
)
from .errors import DegenerateSigma, HcrbError, NonMonotoneDetected, ValidationError
from .numerics import DEFAULT_POLICY, TolerancePolicy
from .scenario import Scenario, random_scenario

SWEEP_COLUMNS = (
    "snr_db", "sigma_delta_sq",
    "crb0_xx", "crb0_xy", "crb0_yy",
    "hcrb_xx", "hcrb_xy", "hcrb_yy",
    "trace_crb0", "trace_hcrb", "deviation", "status",
)

DEFAULT_SIGMA_GRID = (0.0, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2)


def _normalize_grid(values, name, nonneg=False):
    g = sorted(float(v) for v in values)
    if not g:
        raise ValidationError(f"{name}: grid is empty", name)
    if any(not math.isfinite(v) for v in g):
        raise ValidationError(f"{name}: grid values must be finite", name)
    if any(b <= a for a, b in zip(g, g[1:])):
        raise ValidationError(f"{name}: grid has duplicate values", name)
    if nonneg and g[0] < 0:
        raise ValidationError(f"{name}: values must be >= 0", name)
    return tuple(g)


@dataclass(frozen=True)
class SweepSpec:
    """Grid over SNR (dB) and phase-error variance. Grids are stored sorted."""

    scenario: Scenario
    snr_db_grid: tuple
    sigma_grid: tuple
    paths: tuple = ("oracle", DEFAULT_VARIANT.tag)

    def __post_init__(self):
        object.__setattr__(self, "snr_db_grid", _normalize_grid(self.snr_db_grid, "snr_db"))
        object.__setattr__(self, "sigma_grid", _normalize_grid(self.sigma_grid, "sigma", True))
        paths = tuple(self.paths)
        for p in paths:
            if p != "oracle":
                ClosedFormVariant.from_tag(p)
        object.__setattr__(self, "paths", paths)


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    sigma_delta_sq: float
    crb0_xx: float | None = None
    crb0_yy: float | None = None
    crb0_xy: float | None = None
    hcrb_xx: float | None = None
    hcrb_yy: float | None = None
    hcrb_xy: float | None = None
    trace_crb0: float | None = None
    trace_hcrb: float | None = None
    deviation_closed_vs_oracle: float | None = None
    status: str = "ok"

    def as_csv_fields(self) -> list:
        vals = {
            "snr_db": self.snr_db, "sigma_delta_sq": self.sigma_delta_sq,
            "crb0_xx": self.crb0_xx, "crb0_xy": self.crb0_xy, "crb0_yy": self.crb0_yy,
            "hcrb_xx": self.hcrb_xx, "hcrb_xy": self.hcrb_xy, "hcrb_yy": self.hcrb_yy,
            "trace_crb0": self.trace_crb0, "trace_hcrb": self.trace_hcrb,
            "deviation": self.deviation_closed_vs_oracle, "status": self.status,
        }
        return ["" if vals[c] is None else (repr(vals[c]) if isinstance(vals[c], float)
                                            else str(vals[c])) for c in SWEEP_COLUMNS]


def evaluate_point(s: Scenario, closed_variant=None, pol=DEFAULT_POLICY) -> SweepRow:
    """One grid point. Numerical failures land in ``status``."""
    snr_db = s.signal.snr_db
    try:
        crb0 = crb_no_mismatch(s, pol)
        hcrb = hcrb_oracle(s, pol)
        dev = None
        if closed_variant is not None:
            if s.sigma_delta_sq > 0:
                closed = hcrb_closed_form(s, closed_variant, pol).hcrb
            else:
                closed = crb0
            dev = numerics.rel_frobenius(closed, hcrb)
    except HcrbError as e:
        return SweepRow(snr_db, s.sigma_delta_sq, status=e.kind)
    return SweepRow(
        snr_db, s.sigma_delta_sq,
        crb0_xx=float(crb0[0, 0]), crb0_yy=float(crb0[1, 1]), crb0_xy=float(crb0[0, 1]),
        hcrb_xx=float(hcrb[0, 0]), hcrb_yy=float(hcrb[1, 1]), hcrb_xy=float(hcrb[0, 1]),
        trace_crb0=float(np.trace(crb0)), trace_hcrb=float(np.trace(hcrb)),
        deviation_closed_vs_oracle=dev,
    )


def run_sweep(spec: SweepSpec, workers: int | None = None,
              pol: TolerancePolicy = DEFAULT_POLICY) -> list:
    """Rows in SNR-major order regardless of evaluation order."""
    variant = next((p for p in spec.paths if p != "oracle"), None)
    labels, points = [], []
    for snr_db in spec.snr_db_grid:
        base = spec.scenario.with_snr(10.0 ** (snr_db / 10.0))
        for sig in spec.sigma_grid:
            labels.append(snr_db)
            points.append(base.with_sigma(sig))

    def run(p):
        return evaluate_point(p, variant, pol)

    if workers and workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(run, points))
    else:
        rows = [run(p) for p in points]
    # report the requested dB label, not one recomputed from the linear snr
    return [dataclasses.replace(r, snr_db=lab) for r, lab in zip(rows, labels)]


@dataclass(frozen=True)
class ToleranceResult:
    sigma_max: float
    criterion: str
    iterations: int
    bracket: tuple
    status: str  # "bracketed", "unsaturated" or "lower_endpoint"

    def to_dict(self) -> dict:
        return {
            "sigma_max": self.sigma_max,
            "criterion": self.criterion,
            "bracket": list(self.bracket),
            "iterations": self.iterations,
            "status": self.status,
            "unsaturated": self.status == "unsaturated",
        }


CRITERIA = ("psd", "trace")


def penalty_within(s: Scenario, sigma: float, criterion: str = "psd", crb0=None,
                   pol: TolerancePolicy = DEFAULT_POLICY) -> bool:
    """Whether the mismatch penalty at ``sigma`` stays below the no-mismatch CRB."""
    crb0 = crb_no_mismatch(s, pol) if crb0 is None else crb0
    delta = hcrb_oracle(s.with_sigma(sigma), pol) - crb0
    if criterion == "psd":
        return numerics.psd_order_leq(delta, crb0, pol)
    if criterion == "trace":
        return bool(np.trace(delta) <= np.trace(crb0))
    raise ValueError(f"unknown criterion {criterion!r}")


def solve_sigma_max(s: Scenario, criterion: str = "psd", lo: float = 1e-8, hi: float = 1e1,
                    tol_decades: float = 1e-3, scan_per_decade: int = 2,
                    pol: TolerancePolicy = DEFAULT_POLICY) -> ToleranceResult:
    """Largest phase-error variance whose penalty is still ordered below CRB0.

    Log-space bisection. A coarse scan first checks that the criterion flips
    at most once over ``[lo, hi]``; otherwise ``NonMonotoneDetected``.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    crb0 = crb_no_mismatch(s, pol)

    def ok(x):
        return penalty_within(s, x, criterion, crb0, pol)

    a, b = math.log10(lo), math.log10(hi)
    n_scan = max(2, int(math.ceil((b - a) * scan_per_decade)) + 1)
    grid = np.linspace(a, b, n_scan)
    flags = [ok(10.0 ** g) for g in grid]
    flips = sum(1 for u, v in zip(flags, flags[1:]) if u != v)
    if flips > 1 or (flips == 1 and not flags[0]):
        raise NonMonotoneDetected(
            f"{criterion} criterion changes {flips} times over [{lo:g}, {hi:g}]"
        )
    if not flags[0]:
        return ToleranceResult(lo, criterion, 0, (lo, lo), "lower_endpoint")
    if flags[-1]:
        return ToleranceResult(hi, criterion, 0, (hi, hi), "unsaturated")
    k = flags.index(False)
    a, b = grid[k - 1], grid[k]
    iterations = 0
    while b - a > tol_decades:
        mid = 0.5 * (a + b)
        if ok(10.0 ** mid):
            a = mid
        else:
            b = mid
        iterations += 1
    lo_v, hi_v = float(10.0 ** a), float(10.0 ** b)
    return ToleranceResult(lo_v, criterion, iterations, (lo_v, hi_v), "bracketed")


# --- validation reports ---------------------------------------------------

INCONSISTENT_VERDICT = (
    "closed-form algebra inconsistent with oracle under all documented interpretations"
)


@dataclass
class ValidationReport:
    seed: int | None
    threshold: float
    entries: list = field(default_factory=list)
    variants: tuple = ()

    @property
    def oracle_failures(self) -> int:
        return sum(1 for e in self.entries if e["status"] != "ok")

    def max_deviation(self, tag: str) -> float | None:
        devs = []
        for e in self.entries:
            if e["status"] != "ok":
                continue
            v = e["variants"][tag]
            if v["deviation"] is None:
                return math.inf
            devs.append(v["deviation"])
        return max(devs) if devs else None

    def passing_variants(self) -> list:
        out = []
        for tag in self.variants:
            m = self.max_deviation(tag)
            if m is not None and m <= self.threshold:
                out.append(tag)
        return out

    def to_dict(self) -> dict:
        agg = {}
        for tag in self.variants:
            m = self.max_deviation(tag)
            agg[tag] = {
                "max_deviation": None if m is None or math.isinf(m) else m,
                "all_within_threshold": m is not None and m <= self.threshold,
            }
        passing = self.passing_variants()
        return {
            "seed": self.seed,
            "threshold": self.threshold,
            "count": len(self.entries),
            "oracle_failures": self.oracle_failures,
            "entries": self.entries,
            "aggregate": {
                "per_variant": agg,
                "passing_variants": passing,
                "verdict": "consistent" if passing else INCONSISTENT_VERDICT,
            },
        }


def build_validation_report(scenarios, variants=ALL_VARIANTS, seed=None,
                            threshold: float = DEVIATION_THRESHOLD,
                            pol: TolerancePolicy = DEFAULT_POLICY) -> ValidationReport:
    scenarios = list(scenarios)
    for i, s in enumerate(scenarios):
        if s.sigma_delta_sq <= 0:
            raise DegenerateSigma(f"scenario {i}: sigma_delta_sq must be > 0")
    variants = tuple(ClosedFormVariant.from_tag(v) if isinstance(v, str) else v for v in variants)
    report = ValidationReport(seed, threshold, [], tuple(v.tag for v in variants))
    for i, s in enumerate(scenarios):
        entry = {
            "index": i,
            "n_tx": s.n_tx,
            "n_rx": s.n_rx,
            "snr": s.signal.snr,
            "sigma_delta_sq": s.sigma_delta_sq,
        }
        try:
            res = compare_paths(s, variants, variants[0], pol, threshold)
        except HcrbError as e:
            entry.update(status="error", error=f"{e.kind}: {e}", variants={})
            report.entries.append(entry)
            continue
        entry["status"] = "ok"
        entry["trace_crb0"] = float(np.trace(res.crb0))
        entry["trace_hcrb"] = float(np.trace(res.hcrb_oracle))
        entry["variants"] = {
            o.tag: {
                "deviation": o.deviation,
                "pass": o.status == "ok",
                "status": o.status,
                "r_delta_interpretation": o.tag.split("/")[1],
                "algebra": o.tag.split("/")[2],
                "error": o.error,
            }
            for o in res.variants
        }
        report.entries.append(entry)
    return report


def random_battery(seed: int, count: int, **kw) -> list:
    """Seeded random scenarios with sigma^2 log-uniform on [1e-5, 1e-1]."""
    rng = np.random.default_rng(seed)
    kw.setdefault("sigma_delta_sq", (1e-5, 1e-1))
    return [random_scenario(rng, **kw) for _ in range(count)]
