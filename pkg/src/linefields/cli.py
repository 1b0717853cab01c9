"""Command-line entry point: ``linefields <command> --config scenario.json``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure (the failing
check is named on stderr), 4 only degenerate singularities were found.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .blowup import (
    BlowupError, blowup_zeros, classify_coordinate_rays, jump_check, lift_phi, limit_residuals, linearize,
)
from .expr import EvaluationDomainError, ExprError
from .fields import FieldError, MetricError, Torus
from .index import IndexToolError, check_index_identity, poincare_hopf_torus, winding_index_lf
from .linear import LinearizationError, NonGenericLinearization, classify
from .metric import build_metric, span_check
from .plotting import singularity_rows, streamlines_csv, table_csv, portrait_svg, SINGULARITY_COLUMNS
from .portrait import make_portrait
from .scenario import Scenario, ScenarioError, _box, load_scenario
from .singularities import analyze_singularities

__all__ = ["main", "Report", "NumericalFailure", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERICAL", "EXIT_DEGENERATE"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_DEGENERATE = 0, 2, 3, 4


class NumericalFailure(RuntimeError):
    def __init__(self, check, message):
        self.check = check
        super().__init__(f"{check}: {message}")


@contextmanager
def _check(name):
    """Turn numerical errors raised inside the block into a named failure."""
    try:
        yield
    except ScenarioError:
        raise
    except EvaluationDomainError as e:
        raise NumericalFailure(name, str(e)) from e
    except ExprError:
        raise
    except (IndexToolError, LinearizationError, BlowupError, MetricError, FieldError, ArithmeticError) as e:
        raise NumericalFailure(name, str(e)) from e


@dataclass
class Report:
    """Result of one command: per-item records and global summary."""

    command: str
    scenario: str
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def _clean(v):
    """JSON-friendly copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, Fraction):
        return str(v)
    return v


def _degenerate_exit(reports):
    return EXIT_DEGENERATE if reports and all(r.degenerate for r in reports) else EXIT_OK


# ---------------------------------------------------------------------------
# commands


def cmd_classify(sc: Scenario, args):
    L = sc.build()
    with _check("singularity search"):
        reports = analyze_singularities(L, n=args.grid or 64, samples=sc.index.get("samples", 256))
    records = singularity_rows(reports)
    identity = []
    with _check("index identity"):
        for r in reports:
            if r.field == "XY" or r.twice_index is None:
                continue
            ident = check_index_identity(L, r.point, r.radius, sc.index.get("samples", 256))
            identity.append(ident.ok)
            if not ident.ok:
                raise NumericalFailure("index identity", f"twice-index {ident.twice_index_line} != "
                                                         f"{ident.index_x} + {ident.index_y} at {r.point}")
    classes = {}
    for r in reports:
        classes[r.cls] = classes.get(r.cls, 0) + 1
    twice = [r.twice_index for r in reports if r.twice_index is not None]
    summary = {
        "singularities": len(reports),
        "classes": classes,
        "index_sum": str(Fraction(sum(twice), 2)),
        "index_identity_ok": all(identity),
        "degenerate": sum(r.degenerate for r in reports),
    }
    return Report("classify", sc.name, _clean(records), _clean(summary), _degenerate_exit(reports)), None


def cmd_portrait(sc: Scenario, args):
    L = sc.build()
    opts = sc.portrait
    seeds = args.grid or opts.get("seeds", 20)
    with _check("portrait"):
        P = make_portrait(L, box=opts.get("box"), seeds=seeds, step=opts.get("step"),
                          max_len=opts.get("max_len"), r0=opts.get("r0", 1e-3))
    records = singularity_rows(P.singularities)
    summary = {
        "singularities": len(P.singularities),
        "streamlines": len(P.streamlines),
        "skeleton": len(P.skeleton),
        "skeleton_directions": [c.tag["theta"] for c in P.skeleton],
        "step": P.step,
    }
    files = {
        "svg": portrait_svg(P, title=sc.name),
        "streamlines.csv": streamlines_csv(P),
        "singularities.csv": table_csv(SINGULARITY_COLUMNS, records),
    }
    return Report("portrait", sc.name, _clean(records), _clean(summary), _degenerate_exit(P.singularities)), files


def _scan_row(sc, param, value):
    L = sc.build({param: value})
    p = sc.point
    row = {"param": param, "value": value, "x": p[0], "y": p[1]}
    with _check("linearization"):
        lin = linearize(L, p)
    try:
        c = classify(lin.plf)
        row.update(case=c.case, **{"class": c.darboux if c.case != "Degenerate" else "Degenerate"},
                   fixed_points=len(c.fixed_points), thetas=[f.theta for f in c.fixed_points],
                   slopes=[f.slope for f in c.fixed_points], kappa=c.kappa)
    except NonGenericLinearization:
        row.update(case="Degenerate", **{"class": "Degenerate"}, fixed_points=0, thetas=[], slopes=[], kappa=None)
    with _check("coordinate rays"):
        rcase, rlabel, rfps = classify_coordinate_rays(L, p)
    near0 = min(rfps, key=lambda f: abs(f.theta), default=None)
    row.update(
        ray_case=rcase, ray_class=rlabel if rcase != "Degenerate" else "Degenerate",
        ray_fixed_points=len(rfps), ray_slopes=[f.slope for f in rfps],
        ray_slope0=near0.slope if near0 is not None and abs(near0.theta) < 1e-6 else None,
    )
    row["marginal"] = row["case"] == "Degenerate" or rcase == "Degenerate"
    return row


SCAN_COLUMNS = [
    "param", "value", "case", "class", "fixed_points", "slopes", "kappa",
    "ray_case", "ray_class", "ray_fixed_points", "ray_slopes", "ray_slope0", "marginal", "transition",
]


def cmd_scan(sc: Scenario, args):
    param, values = sc.sweep_values()
    rows = []
    for v in values:
        row = _scan_row(sc, param, v)
        prev = rows[-1] if rows else None
        row["transition"] = prev is not None and (prev["class"] != row["class"] or prev["ray_class"] != row["ray_class"])
        rows.append(row)
    rows = _clean(rows)
    summary = {
        "rows": len(rows),
        "marginal_values": [r["value"] for r in rows if r["marginal"]],
        "transitions": [r["value"] for r in rows if r["transition"]],
    }
    return Report("scan", sc.name, rows, summary, EXIT_OK), {"csv": table_csv(SCAN_COLUMNS, rows)}


def cmd_index(sc: Scenario, args):
    L = sc.build()
    samples = int(sc.index.get("samples", 256))
    records = []
    if "radius" in sc.index:
        center = tuple(map(float, sc.index.get("center", sc.point)))
        with _check("winding"):
            r = winding_index_lf(L, center, float(sc.index["radius"]), samples)
        records.append({"x": center[0], "y": center[1], "radius": r.radius,
                        "twice_index": r.twice_index, "index": str(r.index), "samples": r.samples})
        return Report("index", sc.name, _clean(records), _clean({"index_sum": str(r.index)})), None
    with _check("singularity search"):
        reports = analyze_singularities(L, n=args.grid or 64, samples=samples)
    with _check("index identity"):
        for rep in reports:
            rec = {"x": rep.point[0], "y": rep.point[1], "field": rep.field, "radius": rep.radius,
                   "twice_index": rep.twice_index, "index": None if rep.index is None else str(rep.index),
                   "field_index": rep.field_index}
            if rep.field != "XY":
                ident = check_index_identity(L, rep.point, rep.radius, samples)
                rec.update(index_x=ident.index_x, index_y=ident.index_y, identity_ok=ident.ok)
                if not ident.ok:
                    raise NumericalFailure("index identity", f"failed at {rep.point}")
            records.append(rec)
    twice = sum(r.twice_index for r in reports if r.twice_index is not None)
    summary = {"singularities": len(reports), "index_sum": str(Fraction(twice, 2))}
    return Report("index", sc.name, _clean(records), _clean(summary), _degenerate_exit(reports)), None


def cmd_blowup(sc: Scenario, args):
    L = sc.build()
    rng = np.random.default_rng(args.seed if args.seed is not None else sc.seed)
    ndir = int(sc.blowup.get("directions", 8))
    delta = sc.blowup.get("delta")
    with _check("singularity search"):
        reports = analyze_singularities(L, n=args.grid or 64)
    records = []
    failed = []
    for rep in reports:
        rec = {"x": rep.point[0], "y": rep.point[1], "class": rep.cls}
        if rep.degenerate or rep.linearization is None:
            rec["skipped"] = "degenerate"
            records.append(rec)
            continue
        d = float(delta) if delta is not None else min(0.5, 0.9 * rep.radius)
        with _check("blow-up lift"):
            B = lift_phi(L, rep.point, delta=d)
        with _check("blow-up zeros"):
            zs = blowup_zeros(B, rep.classification)
        rec["zeros"] = [
            {"theta": z.theta, "kind": z.kind, "stability": z.stability, "rel_error": z.rel_error,
             "consistent": z.consistent}
            for z in zs
        ]
        rec["dictionary_ok"] = all(z.consistent and (z.kind == "saddle") == (z.stability == "repulsive") for z in zs)
        with _check("limit residuals"):
            res = limit_residuals(L, rep.point)
        slopes = res.slopes()
        rec["limit_slopes"] = {"value": slopes[0], "d_theta": slopes[1], "d_r": slopes[2]}
        rec["limits_ok"] = min(slopes) >= 0.9
        jumps = []
        with _check("angle jump"):
            for v in rng.normal(size=(ndir, 2)):
                j = jump_check(L, rep.point, v)
                jumps.append(j.jump)
                rec.setdefault("jumps_ok", True)
                rec["jumps_ok"] = rec["jumps_ok"] and j.ok
        rec["jumps"] = jumps
        for k in ("dictionary_ok", "limits_ok", "jumps_ok"):
            if not rec.get(k, True):
                failed.append(f"{k[:-3]} at ({rep.point[0]:.6g}, {rep.point[1]:.6g})")
        records.append(rec)
    summary = {"singularities": len(reports), "failed_checks": failed}
    code = _degenerate_exit(reports)
    if failed:
        code = EXIT_NUMERICAL
    return Report("blowup", sc.name, _clean(records), _clean(summary), code), None


def cmd_metric(sc: Scenario, args):
    L = sc.build()
    B = build_metric(L.X, L.Y)
    box = sc.metric_grid.get("box")
    b = _box(box) if box is not None else L.box
    n = args.grid or 21
    xs, ys = np.meshgrid(np.linspace(b.xmin, b.xmax, n), np.linspace(b.ymin, b.ymax, n))
    g11, g12, g22 = B.G_vectorized(xs.ravel(), ys.ravel())
    deg = np.isnan(g11)
    rows = []
    for x, y, a, c, e, dd in zip(xs.ravel(), ys.ravel(), g11, g12, g22, deg):
        rows.append({"x": float(x), "y": float(y), "g11": None if dd else float(a),
                     "g12": None if dd else float(c), "g22": None if dd else float(e), "degenerate": bool(dd)})
    rng = np.random.default_rng(args.seed if args.seed is not None else sc.seed)
    spd = bool(np.all((g11[~deg] > 0) & (g11[~deg] * g22[~deg] - g12[~deg] ** 2 > 0)))
    worst = 0.0
    good = np.flatnonzero(~deg)
    for k in rng.choice(good, size=min(100, good.size), replace=False) if good.size else []:
        p = (float(xs.ravel()[k]), float(ys.ravel()[k]))
        if not span_check(B.frame, p)[0]:
            continue
        V, W = rng.normal(size=2), rng.normal(size=2)
        lhs = B.norm(p, V + W) ** 2 + B.norm(p, V - W) ** 2
        rhs = 2 * B.norm(p, V) ** 2 + 2 * B.norm(p, W) ** 2
        worst = max(worst, abs(lhs - rhs) / (1 + abs(lhs)))
    summary = {
        "grid": n, "points": int(deg.size), "degenerate_points": int(deg.sum()),
        "spd_fraction": float(1 - deg.mean()), "spd_ok": spd, "parallelogram_residual": worst,
        "degenerate_locations": [[r["x"], r["y"]] for r in rows if r["degenerate"]][:50],
        "failed_checks": ["bracket span: degenerate at every grid point"] if deg.all() else [],
    }
    code = EXIT_NUMERICAL if deg.all() else EXIT_OK
    cols = ["x", "y", "g11", "g12", "g22", "degenerate"]
    return Report("metric", sc.name, [], _clean(summary), code), {"csv": table_csv(cols, rows)}


def cmd_torus_check(sc: Scenario, args):
    L = sc.build()
    if not isinstance(L.domain, Torus):
        raise ScenarioError("torus-check needs a 'torus' domain")
    with _check("torus singularities"):
        rep = poincare_hopf_torus(L, n=args.grid or 64, samples=int(sc.index.get("samples", 256)))
    records = [{"x": s.point[0], "y": s.point[1], "field": s.field, "twice_index": s.twice_index,
                "index": str(s.index)} for s in rep.singularities]
    summary = {"singularities": len(records), "index_sum": str(rep.total), "euler_characteristic": 0, "ok": rep.ok}
    code = EXIT_OK if rep.ok else EXIT_NUMERICAL
    return Report("torus-check", sc.name, _clean(records), _clean(summary), code), None


COMMANDS = {
    "classify": cmd_classify,
    "portrait": cmd_portrait,
    "scan": cmd_scan,
    "index": cmd_index,
    "blowup": cmd_blowup,
    "metric": cmd_metric,
    "torus-check": cmd_torus_check,
}


# ---------------------------------------------------------------------------
# emission


def _emit(report: Report, files, args, out):
    fmt = args.format
    base = report.scenario
    stem = f"{base}_{report.command}"
    outputs = {}
    if report.command == "portrait":
        if fmt in (None, "svg"):
            outputs[f"{base}.svg"] = files["svg"]
        if fmt != "json":
            outputs[f"{base}_streamlines.csv"] = files["streamlines.csv"]
            outputs[f"{base}_singularities.csv"] = files["singularities.csv"]
        outputs[f"{stem}.json"] = report.to_json()
    elif fmt == "csv":
        if files and "csv" in files:
            outputs[f"{stem}.csv"] = files["csv"]
        else:
            keys = {k for r in report.records for k in r}
            cols = SINGULARITY_COLUMNS if keys <= set(SINGULARITY_COLUMNS) else sorted(keys)
            outputs[f"{stem}.csv"] = table_csv(cols, report.records)
    else:
        outputs[f"{stem}.json"] = report.to_json()
        if files and "csv" in files:
            outputs[f"{stem}.csv"] = files["csv"]
    if out is None:
        key = next((k for k in outputs if k.endswith(".json")), next(iter(outputs)))
        sys.stdout.write(outputs[key])
        return []
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in outputs.items():
        path = out / name
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        written.append(path)
    return written


def build_parser():
    ap = argparse.ArgumentParser(prog="linefields", description="Line fields from pairs of vector fields.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="scenario JSON file")
    ap.add_argument("--out", help="output directory (default: report on stdout; portrait writes to .)")
    ap.add_argument("--grid", type=int, help="grid size: zero search, portrait seeds or metric samples")
    ap.add_argument("--seed", type=int, help="random seed (overrides the scenario)")
    ap.add_argument("--format", choices=["svg", "csv", "json"], help="output format")
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.grid is not None and args.grid < 2:
            raise ScenarioError("--grid must be at least 2")
        if args.format == "svg" and args.command != "portrait":
            raise ScenarioError("--format svg is only available for portrait")
        sc = load_scenario(args.config)
        report, files = COMMANDS[args.command](sc, args)
        out = Path(args.out) if args.out else (Path(".") if args.command == "portrait" else None)
        for path in _emit(report, files, args, out):
            print(f"wrote {path}", file=sys.stderr)
    except (ScenarioError, ExprError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as e:
        print(f"numerical failure in check '{e.check}': {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    if report.exit_code == EXIT_DEGENERATE:
        print("only degenerate singularities found", file=sys.stderr)
    elif report.exit_code == EXIT_NUMERICAL:
        print(f"numerical failure in check(s): {report.summary.get('failed_checks') or report.command}",
              file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
