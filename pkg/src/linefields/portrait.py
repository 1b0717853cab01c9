"""Integral curves of the bisector line field and phase portraits built from them.

Curves are integrated with fixed-step RK4 on the Euclidean unit vector along
the line field.  A line has no preferred orientation, so every evaluation
picks the sign closest to the previous step direction.  Many curves are
integrated at once as numpy arrays; accepting or skipping a seed happens
afterwards in seed order, which gives the same result as a sequential sweep
because curves do not depend on each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import Box, FieldError, ProtoLineField, Torus, bisector_angles
from .singularities import SingularityReport, analyze_singularities

__all__ = [
    "Streamline", "Portrait", "line_directions", "integrate_many", "integrate_streamline",
    "integral_curve", "skeleton", "make_portrait", "SINGULAR_TOL", "TURN_LIMIT",
]

SINGULAR_TOL = 1e-6
# a step that turns by more than this has jumped over a singular point
TURN_LIMIT = math.pi / 4


@dataclass
class Streamline:
    """Polyline along an integral curve.

    ``termination`` describes the far end (``boundary``, ``singularity`` or
    ``step_limit``); for two-sided curves ``start_termination`` describes
    the first point.  ``tag`` carries skeleton metadata.
    """

    points: np.ndarray
    termination: str
    length: float
    start_termination: str | None = None
    tag: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)


@dataclass
class Portrait:
    streamlines: list
    skeleton: list
    singularities: list
    box: Box
    step: float

    @property
    def curves(self):
        return self.skeleton + self.streamlines


def _g_norms(gv, u, v):
    a, b, c = gv
    return np.sqrt(np.maximum(a * u * u + 2 * b * u * v + c * v * v, 0.0))


def line_directions(L: ProtoLineField, xs, ys):
    """Euclidean unit vectors along the line field; ``nan`` where undefined.

    The representative is the one with frame angle in ``[0, pi)``.
    """
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    with np.errstate(all="ignore"):
        try:
            ang = bisector_angles(L, xs, ys)
            a, b, c = L.g.vectorized(xs, ys)
        except FieldError:
            return np.full(xs.shape, np.nan), np.full(xs.shape, np.nan)
        det = a * c - b * b
        ca, sa = np.cos(ang), np.sin(ang)
        # cos * e1 + sin * e2 with e1 = (1/sqrt a, 0), e2 = (-b/a, 1)/sqrt(det/a)
        k = np.sqrt(a / det)
        u = ca / np.sqrt(a) - sa * k * b / a
        v = sa * k
        n = np.hypot(u, v)
        return u / n, v / n


def _min_field_norm(L, xs, ys):
    with np.errstate(all="ignore"):
        gv = L.g.vectorized(xs, ys)
        return np.minimum(_g_norms(gv, *L.X.vectorized(xs, ys)), _g_norms(gv, *L.Y.vectorized(xs, ys)))


def _oriented(L, P, D):
    u, v = line_directions(L, P[:, 0], P[:, 1])
    s = np.where(u * D[:, 0] + v * D[:, 1] < 0, -1.0, 1.0)
    return np.column_stack([s * u, s * v])


def _exit_point(p, q, box):
    """Point where the segment ``p -> q`` leaves ``box``."""
    t = 1.0
    for k, lo, hi in ((0, box.xmin, box.xmax), (1, box.ymin, box.ymax)):
        d = q[k] - p[k]
        if d > 0 and q[k] > hi:
            t = min(t, (hi - p[k]) / d)
        elif d < 0 and q[k] < lo:
            t = min(t, (lo - p[k]) / d)
    return p + max(t, 0.0) * (q - p)


def integrate_many(L: ProtoLineField, starts, directions, step, max_len, box: Box | None = None,
                   singular_points=()):
    """Integrate one curve per row of ``starts`` with initial orientation ``directions``.

    Returns a list of :class:`Streamline`.  A curve stops when it leaves
    ``box`` (the exit point is appended), when a field becomes smaller than
    ``SINGULAR_TOL`` times the field scale, when it comes within one step of
    a point in ``singular_points`` (that point is appended), when a step
    turns by more than ``TURN_LIMIT``, or after ``max_len`` of arc length.
    """
    if step <= 0 or max_len <= 0:
        raise ValueError("step and max_len must be positive")
    box = box if box is not None else L.box
    P = np.array(starts, dtype=float).reshape(-1, 2)
    D = np.array(directions, dtype=float).reshape(-1, 2)
    D = D / np.linalg.norm(D, axis=1, keepdims=True)
    m = len(P)
    nmax = int(math.ceil(max_len / step)) + 1
    tracks = np.full((nmax + 2, m, 2), np.nan)
    tracks[0] = P
    count = np.ones(m, dtype=int)
    term = np.array(["step_limit"] * m, dtype=object)
    active = np.ones(m, dtype=bool)
    sing = np.array(singular_points, dtype=float).reshape(-1, 2)
    tol = SINGULAR_TOL * L.scale
    cos_turn = math.cos(TURN_LIMIT)
    for _ in range(nmax - 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        p, d = P[idx], D[idx]
        k1 = _oriented(L, p, d)
        k2 = _oriented(L, p + 0.5 * step * k1, d)
        k3 = _oriented(L, p + 0.5 * step * k2, d)
        k4 = _oriented(L, p + step * k3, d)
        q = p + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        bad = ~np.all(np.isfinite(np.column_stack([k1, k2, k3, k4, q])), axis=1)
        turn = np.einsum("ij,ij->i", np.nan_to_num(k1), d)
        bad |= turn < cos_turn
        qn = np.where(bad[:, None], p, q)
        bad |= ~(_min_field_norm(L, qn[:, 0], qn[:, 1]) >= tol)
        n = count[idx]
        # singular points within one step
        hit = np.zeros(idx.size, dtype=bool)
        target = np.zeros_like(q)
        if sing.size:
            dist = np.hypot(sing[None, :, 0] - q[:, None, 0], sing[None, :, 1] - q[:, None, 1])
            k = np.argmin(dist, axis=1)
            hit = ~bad & (dist[np.arange(idx.size), k] < step)
            target = sing[k]
        inside = (q[:, 0] >= box.xmin) & (q[:, 0] <= box.xmax) & (q[:, 1] >= box.ymin) & (q[:, 1] <= box.ymax)
        leave = ~bad & ~hit & ~inside
        go = ~bad & ~hit & inside
        term[idx[bad | hit]] = "singularity"
        term[idx[leave]] = "boundary"
        for j in np.flatnonzero(leave):
            tracks[n[j], idx[j]] = _exit_point(p[j], q[j], box)
        tracks[n[hit], idx[hit]] = target[hit]
        tracks[n[go], idx[go]] = q[go]
        count[idx[~bad]] += 1
        active[idx[~go]] = False
        dq = q[go] - p[go]
        D[idx[go]] = dq / np.linalg.norm(dq, axis=1, keepdims=True)
        P[idx[go]] = q[go]
    out = []
    for i in range(m):
        pts = tracks[:count[i], i].copy()
        length = float(np.sum(np.hypot(*np.diff(pts, axis=0).T))) if len(pts) > 1 else 0.0
        out.append(Streamline(pts, str(term[i]), length))
    return out


def _initial_direction(L, p0):
    u, v = line_directions(L, [p0[0]], [p0[1]])
    if not (np.isfinite(u[0]) and np.isfinite(v[0])):
        raise FieldError(f"line field undefined at {tuple(p0)}")
    return np.array([u[0], v[0]])


def integrate_streamline(L: ProtoLineField, p0, step, max_len, orientation=1, box=None, singular_points=()):
    """One-sided integral curve from ``p0``.

    ``orientation=1`` starts along the representative with frame angle in
    ``[0, pi)``, ``-1`` along the opposite vector.
    """
    d = orientation * _initial_direction(L, p0)
    return integrate_many(L, [p0], [d], step, max_len, box, singular_points)[0]


def _join(back, fwd):
    pts = np.vstack([back.points[::-1], fwd.points[1:]])
    return Streamline(pts, fwd.termination, back.length + fwd.length, start_termination=back.termination)


def integral_curve(L: ProtoLineField, p0, step, max_len, box=None, singular_points=()):
    """Two-sided integral curve through ``p0``, each half at most ``max_len`` long."""
    d = _initial_direction(L, p0)
    fwd, back = integrate_many(L, [p0, p0], [d, -d], step, max_len, box, singular_points)
    return _join(back, fwd)


def skeleton(L: ProtoLineField, report: SingularityReport, r0=1e-3, step=1e-3, max_len=4.0, box=None,
             singular_points=None):
    """Separatrices leaving ``report.point`` along its fixed directions.

    One curve per fixed direction, seeded at distance ``r0`` and integrated
    outward.  Tagged with the direction angle (original coordinates) and
    its stability.
    """
    if report.degenerate or report.linearization is None:
        raise FieldError(f"no skeleton for a {report.cls} singularity at {report.point}")
    p = np.asarray(report.point, float)
    dirs = report.directions()
    starts = [p + r0 * d for d in dirs]
    others = [q for q in (singular_points or ()) if math.dist(q, p) > 2 * r0]
    curves = integrate_many(L, starts, dirs, step, max_len, box, others)
    for c, d, f in zip(curves, dirs, report.fixed_points):
        c.tag = {
            "kind": "skeleton",
            "singularity": tuple(float(t) for t in p),
            "theta": math.atan2(d[1], d[0]),
            "theta_normal": f.theta,
            "stability": f.stability,
        }
    return curves


class _Occupancy:
    """Segments of accepted curves, for distance queries from seeds."""

    def __init__(self):
        self.a = np.empty((0, 2))
        self.b = np.empty((0, 2))

    def add(self, curve):
        pts = curve.points
        if len(pts) == 1:
            pts = np.vstack([pts, pts])
        self.a = np.vstack([self.a, pts[:-1]])
        self.b = np.vstack([self.b, pts[1:]])

    def near(self, seed, radius):
        if not len(self.a):
            return False
        ab = self.b - self.a
        t = np.einsum("ij,ij->i", seed - self.a, ab) / np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
        proj = self.a + np.clip(t, 0.0, 1.0)[:, None] * ab
        return bool(np.min(np.hypot(*(proj - seed).T)) < radius)


def make_portrait(L: ProtoLineField, box: Box | None = None, seeds=20, step=None, max_len=None,
                  r0=1e-3, zero_grid=64):
    """Singularities, skeleton and filler streamlines on ``box``.

    ``seeds`` is either a grid size ``n`` (cell centres of an ``n x n``
    grid) or an explicit list of points.  A seed is skipped when an
    existing curve passes within ``step / 2``.
    """
    box = box if box is not None else L.box
    outer = L.box
    if not (outer.contains(box.xmin, box.ymin) and outer.contains(box.xmax, box.ymax)):
        raise FieldError(f"portrait box {box} is not inside the domain {outer}")
    step = step if step is not None else 2e-3 * box.diameter
    max_len = max_len if max_len is not None else 2.0 * (box.width + box.height)
    domain = L.domain if isinstance(L.domain, Torus) and box == outer else box
    reports = analyze_singularities(L, domain, n=zero_grid)
    sing_pts = [r.point for r in reports]
    skel = []
    for r in reports:
        if not r.degenerate and r.linearization is not None:
            skel.extend(skeleton(L, r, r0, step, max_len, box, sing_pts))
    if isinstance(seeds, (int, np.integer)):
        n = int(seeds)
        gx = box.xmin + box.width * (np.arange(n) + 0.5) / n
        gy = box.ymin + box.height * (np.arange(n) + 0.5) / n
        seed_pts = [(x, y) for y in gy for x in gx]
    else:
        seed_pts = [tuple(map(float, s)) for s in seeds]
    # drop seeds where the line field is undefined
    su, sv = line_directions(L, [s[0] for s in seed_pts], [s[1] for s in seed_pts])
    ok = np.isfinite(su) & np.isfinite(sv)
    seed_pts = [s for s, good in zip(seed_pts, ok) if good]
    dirs = [(u, v) for u, v, good in zip(su, sv, ok) if good]
    starts = seed_pts + seed_pts
    all_dirs = dirs + [(-u, -v) for u, v in dirs]
    halves = integrate_many(L, starts, all_dirs, step, max_len, box, sing_pts) if seed_pts else []
    m = len(seed_pts)
    accepted = []
    occ = _Occupancy()
    for c in skel:
        occ.add(c)
    for i, s in enumerate(seed_pts):
        if occ.near(np.asarray(s), step / 2):
            continue
        c = _join(halves[m + i], halves[i])
        if len(c.points) >= 2:
            accepted.append(c)
            occ.add(c)
    return Portrait(accepted, skel, reports, box, step)
