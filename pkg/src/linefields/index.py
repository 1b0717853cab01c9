"""Winding-number indices of vector fields and line fields around circles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .fields import (
    FieldError, ProtoLineField, Torus, bisector_angles, find_zeros,
)

__all__ = [
    "IndexToolError", "IndexComputationError", "PreconditionError",
    "IndexResult", "winding_index_vf", "winding_index_lf", "winding_index_section",
    "IndexIdentity", "check_index_identity", "zero_type_from_jacobian",
    "hyperbolic_zero_type", "TorusSingularity", "TorusReport", "poincare_hopf_torus",
]


class IndexToolError(FieldError):
    """Base class for index computation failures."""


class IndexComputationError(IndexToolError):
    pass


class PreconditionError(IndexToolError):
    pass


@dataclass(frozen=True)
class IndexResult:
    """Index around a circle, stored as twice the index."""

    twice_index: int
    center: tuple
    radius: float
    samples: int
    max_step: float

    @property
    def index(self):
        return Fraction(self.twice_index, 2)

    def __str__(self):
        return str(self.index)


def _circle(center, radius, n):
    t = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    return center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)


def _unwrap_total(angles, period):
    """Total signed variation of a closed sequence of angles defined mod ``period``.

    Each step is taken as the representative in ``[-period/2, period/2)``.
    """
    a = np.append(angles, angles[0])
    d = np.diff(a)
    d = (d + period / 2) % period - period / 2
    return float(d.sum()), float(np.abs(d).max())


def _wind(sample, center, radius, n, period, max_step, unit, residue=0.1):
    """Winding of sampled angles, as an integer multiple of ``unit`` radians.

    Rejects when a single step reaches ``max_step`` or the total is further
    than ``residue`` from a multiple of ``unit``; retries once with ``4 n``.
    """
    for m in (n, 4 * n):
        angles = sample(*_circle(center, radius, m))
        total, step = _unwrap_total(angles, period)
        turns = total / unit
        k = round(turns)
        if step < max_step and abs(turns - k) <= residue:
            return int(k), m, step
    raise IndexComputationError(
        f"angle unwrapping unsafe around {tuple(center)} r={radius:g}: "
        f"max step {step:.3g}, residue {abs(turns - k):.3g}"
    )


def _result(k, center, radius, m, step):
    return IndexResult(int(k), (float(center[0]), float(center[1])), float(radius), m, step)


def winding_index_vf(V, center, radius, n=256):
    """Index of a vector field around the counterclockwise circle."""
    if n < 64:
        raise ValueError("at least 64 samples are required")

    def sample(xs, ys):
        u, v = V.vectorized(xs, ys)
        mag = np.hypot(u, v)
        if not np.all(np.isfinite(mag)) or np.any(mag <= 1e-12 * max(mag.max(), 1e-300)) or mag.max() == 0:
            raise IndexComputationError(f"field vanishes or is undefined on the circle around {tuple(center)}")
        return np.arctan2(v, u)

    k, m, step = _wind(sample, center, radius, n, 2 * math.pi, math.pi / 2, 2 * math.pi)
    return _result(2 * k, center, radius, m, step)


def _line_sampler(L: ProtoLineField, frame):
    def sample(xs, ys):
        t = bisector_angles(L, xs, ys)
        if np.any(np.isnan(t)):
            raise IndexComputationError("bisector undefined on the circle")
        if frame == "euclidean":
            # frame angle -> coordinate direction -> Euclidean angle
            a, b, c = L.g.vectorized(xs, ys)
            ct, st = np.cos(t), np.sin(t)
            e2y = 1.0 / np.sqrt((a * c - b * b) / a)
            dx = ct / np.sqrt(a) - st * (b / a) * e2y
            dy = st * e2y
            t = np.arctan2(dy, dx)
        return t

    return sample


def winding_index_lf(L: ProtoLineField, center, radius, n=256, frame="euclidean"):
    """Index of the bisector line field around a circle (a half-integer).

    ``frame='euclidean'`` unwraps the coordinate angle of the line;
    ``frame='metric'`` unwraps the angle in the metric's orthonormal frame.
    Both give the same index.
    """
    if n < 64:
        raise ValueError("at least 64 samples are required")
    # wrapped line-angle steps never exceed pi/2, so the rejection threshold
    # must be tighter than for vector fields
    k, m, step = _wind(_line_sampler(L, frame), center, radius, n, math.pi, math.pi / 4, math.pi)
    return _result(k, center, radius, m, step)


def winding_index_section(section, center, radius, n=256):
    """Index of a line field given as a function returning line angles."""

    def sample(xs, ys):
        return np.array([section(x, y) for x, y in zip(xs, ys)], dtype=float)

    k, m, step = _wind(sample, center, radius, n, math.pi, math.pi / 4, math.pi)
    return _result(k, center, radius, m, step)


@dataclass(frozen=True)
class IndexIdentity:
    index_x: int
    index_y: int
    twice_index_line: int
    ok: bool


def _vanishes(F, p, scale):
    u, v = F(*p)
    return math.hypot(u, v) <= 1e-9 * scale


def check_index_identity(L: ProtoLineField, p, radius, n=256):
    """Compare twice the line-field index with ``ind X + ind Y`` around ``p``."""
    scale = L.scale
    if _vanishes(L.X, p, scale) and _vanishes(L.Y, p, scale):
        raise PreconditionError(f"both fields vanish at {tuple(p)}")
    ix = winding_index_vf(L.X, p, radius, n).twice_index // 2
    iy = winding_index_vf(L.Y, p, radius, n).twice_index // 2
    b = winding_index_lf(L, p, radius, n).twice_index
    return IndexIdentity(ix, iy, b, b == ix + iy)


def zero_type_from_jacobian(J):
    J = np.asarray(J, dtype=float)
    tol = 1e-9 * float(np.sum(J * J))
    det = float(np.linalg.det(J))
    disc = float(np.trace(J)) ** 2 - 4 * det
    if tol == 0:
        return "degenerate"
    if det < -tol:
        return "saddle"
    if det > tol and disc < -tol:
        return "focus"
    if det > tol and disc > tol:
        return "node"
    return "degenerate"


def hyperbolic_zero_type(V, p):
    """Classify a zero of ``V`` from its Jacobian: focus, node, saddle or degenerate."""
    J = V.jacobian(*p)
    u, v = V(*p)
    local = max(1.0, float(np.abs(J).max()))
    if math.hypot(u, v) >= 1e-9 * local:
        raise PreconditionError(f"field does not vanish at {tuple(p)} (|V| = {math.hypot(u, v):.3g})")
    return zero_type_from_jacobian(J)


@dataclass(frozen=True)
class TorusSingularity:
    point: tuple
    field: str
    twice_index: int

    @property
    def index(self):
        return Fraction(self.twice_index, 2)


@dataclass
class TorusReport:
    singularities: list = field(default_factory=list)
    euler_characteristic: int = 0

    @property
    def total(self):
        return Fraction(sum(s.twice_index for s in self.singularities), 2)

    @property
    def ok(self):
        return self.total == self.euler_characteristic


def poincare_hopf_torus(L: ProtoLineField, n=64, samples=256):
    """Sum the line-field indices of all singularities on a flat torus."""
    T = L.domain
    if not isinstance(T, Torus):
        raise PreconditionError("proto-line-field is not declared on a torus")
    scale = L.scale
    found = []
    for name, F, other in (("X", L.X, L.Y), ("Y", L.Y, L.X)):
        zs = find_zeros(F, T, n=n)
        for z in zs:
            if z.degenerate:
                raise PreconditionError(f"zero of {name} at {z.point} is not isolated or not hyperbolic")
            if _vanishes(other, z.point, scale):
                raise PreconditionError(f"X and Y vanish together at {z.point}")
            found.append((z.point, name))
    report = TorusReport()
    if not found:
        return report
    pts = [p for p, _ in found]
    gaps = [T.distance(p, q) for i, p in enumerate(pts) for q in pts[i + 1:]]
    radius = min([0.3 * g for g in gaps] + [0.25 * min(T.px, T.py)])
    for p, name in found:
        r = winding_index_lf(L, p, radius, samples)
        report.singularities.append(TorusSingularity(p, name, r.twice_index))
    return report
