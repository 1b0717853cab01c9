"""SVG and CSV emission for portraits and tables.

Figures are drawn with the Agg backend and saved as SVG with fixed metadata
and hash salt, so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .portrait import Portrait  # noqa: E402

__all__ = [
    "portrait_svg", "write_portrait_svg", "streamlines_csv", "singularities_csv", "singularity_rows",
    "table_csv", "CLASS_COLORS", "SINGULARITY_COLUMNS",
]

CLASS_COLORS = {"Lemon": "#d4a017", "Monstar": "#2e8b57", "Star": "#b22222", "Degenerate": "#555555"}

SINGULARITY_COLUMNS = [
    "id", "x", "y", "field", "zero_type", "hyperbolic", "field_index", "index", "case", "class",
    "kappa", "Phi", "fixed_points", "slopes", "stabilities", "flags",
]


def portrait_svg(P: Portrait, title=None) -> str:
    """Render a portrait to an SVG string.

    Each curve is its own ``<g>`` element with id ``curve-<k>`` or
    ``skeleton-<k>``; singularities are ``singularity-<k>`` markers with a
    text label holding the class name.
    """
    with plt.rc_context({"svg.hashsalt": "linefields", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 6))
        for k, c in enumerate(P.streamlines):
            (line,) = ax.plot(c.points[:, 0], c.points[:, 1], color="#4a6fa5", lw=0.6)
            line.set_gid(f"curve-{k}")
        for k, c in enumerate(P.skeleton):
            color = "#c0392b" if c.tag.get("stability") == "repulsive" else "#1e8449"
            (line,) = ax.plot(c.points[:, 0], c.points[:, 1], color=color, lw=1.8)
            line.set_gid(f"skeleton-{k}")
        for k, r in enumerate(P.singularities):
            (m,) = ax.plot([r.point[0]], [r.point[1]], "o", ms=7, color=CLASS_COLORS[r.cls],
                           markeredgecolor="black")
            m.set_gid(f"singularity-{k}")
            label = r.cls if r.index is None else f"{r.cls} ({r.index})"
            t = ax.annotate(label, r.point, xytext=(6, 6), textcoords="offset points", fontsize=9)
            t.set_gid(f"singularity-label-{k}")
        b = P.box
        ax.set_xlim(b.xmin, b.xmax)
        ax.set_ylim(b.ymin, b.ymax)
        ax.set_aspect("equal")
        if title:
            ax.set_title(title)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def write_portrait_svg(P: Portrait, path, title=None):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(portrait_svg(P, title))


def table_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def streamlines_csv(P: Portrait) -> str:
    """Columns ``curve_id, point_index, x, y``; skeleton curves come first."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["curve_id", "point_index", "x", "y"])
    for cid, c in enumerate(P.skeleton + P.streamlines):
        for i, (x, y) in enumerate(c.points):
            w.writerow([cid, i, repr(float(x)), repr(float(y))])
    return buf.getvalue()


def singularity_rows(reports):
    rows = []
    for k, r in enumerate(reports):
        d = r.to_dict()
        rows.append({
            "id": k, "x": d["x"], "y": d["y"], "field": d["field"], "zero_type": d["zero_type"],
            "hyperbolic": d["hyperbolic"], "field_index": d["field_index"], "index": d["index"],
            "case": d["case"], "class": d["class"], "kappa": d["kappa"], "Phi": d["Phi"],
            "fixed_points": [f["theta"] for f in d["fixed_points"]],
            "slopes": [f["slope"] for f in d["fixed_points"]],
            "stabilities": [f["stability"] for f in d["fixed_points"]],
            "flags": d["flags"],
        })
    return rows


def singularities_csv(reports) -> str:
    return table_csv(SINGULARITY_COLUMNS, singularity_rows(reports))
