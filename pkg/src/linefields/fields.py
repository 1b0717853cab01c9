"""Vector fields, metrics and the bisector line field of a pair of fields.

Angles measured with a metric ``g`` are computed in the oriented
``g``-orthonormal frame obtained by Gram-Schmidt from ``((1, 0), (0, 1))``:
a vector's frame coordinates are ``(g(e1, v), g(e2, v))`` and its angle is the
planar ``atan2`` of those.  Vector angles live in ``[0, 2*pi)``, line angles in
``[0, pi)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .expr import Expr, parse

__all__ = [
    "TWO_PI", "FieldError", "MetricError", "SingularPointError",
    "VectorField", "FunctionField", "Metric", "EUCLIDEAN",
    "Box", "Torus", "ProtoLineField",
    "wrap_vec", "wrap_line", "orthonormal_frame", "frame_coords", "frame_angle",
    "angle_between", "direction", "bisector", "bisector_angles",
    "realize_line_field", "Zero", "ZeroList", "find_zeros",
]

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class FieldError(ValueError):
    pass


class MetricError(FieldError):
    pass


class SingularPointError(FieldError):
    """The bisector is undefined because one of the fields vanishes."""


def _as_expr(e):
    if isinstance(e, Expr):
        return e
    if isinstance(e, (int, float)):
        return parse(repr(float(e)))
    return parse(e)


def wrap_vec(a):
    """Reduce an angle to ``[0, 2*pi)``."""
    r = math.fmod(a, TWO_PI)
    if r < 0:
        r += TWO_PI
    return 0.0 if r >= TWO_PI else r


def wrap_line(a):
    """Reduce an angle to ``[0, pi)``."""
    r = math.fmod(a, math.pi)
    if r < 0:
        r += math.pi
    return 0.0 if r >= math.pi else r


# ---------------------------------------------------------------------------
# vector fields


def _bcast(exprs, x, y):
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    return tuple(np.broadcast_to(e.vectorized(x, y), x.shape).astype(float) for e in exprs)


class VectorField:
    """A planar vector field given by two component expressions.

    The Jacobian is kept symbolically; at construction it is compared once
    with central finite differences at a few pseudo-random points.
    """

    def __init__(self, p, q, check=True):
        self.components = (_as_expr(p), _as_expr(q))
        P, Q = self.components
        self.jacobian_exprs = ((P.diff("x"), P.diff("y")), (Q.diff("x"), Q.diff("y")))
        if check:
            self._check_jacobian()

    @classmethod
    def constant(cls, u, v):
        return cls(repr(float(u)), repr(float(v)))

    @classmethod
    def linear(cls, A):
        """The field ``p -> A p`` for a 2x2 matrix ``A``."""
        (a, b), (c, d) = (tuple(map(float, row)) for row in A)
        return cls(f"{a!r}*x + {b!r}*y", f"{c!r}*x + {d!r}*y")

    def __repr__(self):
        return f"VectorField({str(self.components[0])!r}, {str(self.components[1])!r})"

    def __call__(self, x, y):
        P, Q = self.components
        return P(x, y), Q(x, y)

    def value(self, x, y):
        return np.array(self(x, y))

    def jacobian(self, x, y):
        (a, b), (c, d) = self.jacobian_exprs
        return np.array([[a(x, y), b(x, y)], [c(x, y), d(x, y)]])

    def vectorized(self, x, y):
        P, Q = self.components
        return _bcast((P, Q), x, y)

    def jacobian_vectorized(self, x, y):
        (a, b), (c, d) = self.jacobian_exprs
        return _bcast((a, b, c, d), x, y)

    def scaled(self, factor):
        factor = _as_expr(factor)
        from .expr import mul
        return VectorField(mul(factor, self.components[0]), mul(factor, self.components[1]))

    def _check_jacobian(self, n=10, h=1e-5):
        rng = np.random.default_rng(12345)
        for x, y in rng.uniform(-1.0, 1.0, size=(n, 2)):
            try:
                J = self.jacobian(x, y)
                fd = np.empty((2, 2))
                fd[:, 0] = (self.value(x + h, y) - self.value(x - h, y)) / (2 * h)
                fd[:, 1] = (self.value(x, y + h) - self.value(x, y - h)) / (2 * h)
            except ArithmeticError:
                continue  # outside the domain of definition; nothing to compare
            scale = 1.0 + np.abs(J).max()
            if not np.all(np.isfinite(J)) or np.abs(J - fd).max() > 1e-4 * scale:
                raise FieldError(f"symbolic Jacobian of {self!r} disagrees with finite differences")


class FunctionField:
    """A vector field backed by a Python callable; Jacobian by central differences."""

    def __init__(self, func: Callable[[float, float], Sequence[float]], h=1e-6):
        self.func = func
        self.h = h

    def __call__(self, x, y):
        u, v = self.func(x, y)
        return float(u), float(v)

    def value(self, x, y):
        return np.array(self(x, y))

    def jacobian(self, x, y):
        h = self.h
        J = np.empty((2, 2))
        J[:, 0] = (self.value(x + h, y) - self.value(x - h, y)) / (2 * h)
        J[:, 1] = (self.value(x, y + h) - self.value(x, y - h)) / (2 * h)
        return J

    def _safe(self, x, y):
        try:
            return self(x, y)
        except (ArithmeticError, ValueError):
            return math.nan, math.nan

    def vectorized(self, x, y):
        """Pointwise evaluation on arrays; undefined points give ``nan``."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        out = np.array([self._safe(a, b) for a, b in zip(x.ravel(), y.ravel())]).reshape(x.shape + (2,))
        return out[..., 0], out[..., 1]

    def jacobian_vectorized(self, x, y):
        h = self.h
        up, vp = self.vectorized(x + h, y)
        um, vm = self.vectorized(x - h, y)
        uq, vq = self.vectorized(x, y + h)
        un, vn = self.vectorized(x, y - h)
        return (up - um) / (2 * h), (uq - un) / (2 * h), (vp - vm) / (2 * h), (vq - vn) / (2 * h)


# ---------------------------------------------------------------------------
# metrics


class Metric:
    """Riemannian metric ``g11 dx^2 + 2 g12 dx dy + g22 dy^2``."""

    def __init__(self, g11="1", g12="0", g22="1"):
        self.coefficients = (_as_expr(g11), _as_expr(g12), _as_expr(g22))
        self.is_euclidean = all(
            c.is_constant and c(0.0, 0.0) == v for c, v in zip(self.coefficients, (1.0, 0.0, 1.0))
        )

    def __repr__(self):
        return "Metric({!r}, {!r}, {!r})".format(*(str(c) for c in self.coefficients))

    def at(self, x, y):
        """Coefficients ``(g11, g12, g22)`` at a point; raises if not SPD."""
        if self.is_euclidean:
            return 1.0, 0.0, 1.0
        a, b, c = (e(x, y) for e in self.coefficients)
        if not (a > 0 and a * c - b * b > 0):
            raise MetricError(f"metric not positive definite at ({x:g}, {y:g}): g11={a:g}, det={a * c - b * b:g}")
        return a, b, c

    def matrix(self, x, y):
        a, b, c = self.at(x, y)
        return np.array([[a, b], [b, c]])

    def vectorized(self, x, y):
        if self.is_euclidean:
            shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
            return np.ones(shape), np.zeros(shape), np.ones(shape)
        a, b, c = _bcast(self.coefficients, x, y)
        if not (np.all(a > 0) and np.all(a * c - b * b > 0)):
            raise MetricError("metric not positive definite on the sampled points")
        return a, b, c


EUCLIDEAN = Metric()


def orthonormal_frame(g: Metric, p):
    """Positively oriented ``g``-orthonormal frame with ``e1`` along ``(1, 0)``."""
    a, b, c = g.at(*p)
    det = a * c - b * b
    e1 = np.array([1.0 / math.sqrt(a), 0.0])
    e2 = np.array([-b / a, 1.0]) / math.sqrt(det / a)
    return e1, e2


def frame_coords(gv, v1, v2):
    """Components of ``(v1, v2)`` in the frame, given coefficients ``gv = (g11, g12, g22)``.

    Works elementwise on arrays.
    """
    a, b, c = gv
    sa = np.sqrt(a)
    return (a * v1 + b * v2) / sa, v2 * np.sqrt((a * c - b * b) / a)


def frame_angle(gv, v1, v2):
    p, q = frame_coords(gv, v1, v2)
    return np.arctan2(q, p)


def angle_between(g: Metric, p, v, w):
    """Oriented ``g``-angle from ``v`` to ``w`` in ``[0, 2*pi)``."""
    if (v[0] == 0 and v[1] == 0) or (w[0] == 0 and w[1] == 0):
        raise FieldError("angle with a zero vector is undefined")
    gv = g.at(*p)
    return wrap_vec(float(frame_angle(gv, w[0], w[1]) - frame_angle(gv, v[0], v[1])))


def direction(g: Metric, p, angle):
    """Coordinate vector of ``g``-length one making frame angle ``angle`` with ``(1, 0)``."""
    e1, e2 = orthonormal_frame(g, p)
    return math.cos(angle) * e1 + math.sin(angle) * e2


# ---------------------------------------------------------------------------
# domains and proto-line-fields


@dataclass(frozen=True)
class Box:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise FieldError(f"empty box {self}")

    @property
    def width(self):
        return self.xmax - self.xmin

    @property
    def height(self):
        return self.ymax - self.ymin

    @property
    def diameter(self):
        return math.hypot(self.width, self.height)

    def contains(self, x, y, tol=0.0):
        return (self.xmin - tol <= x <= self.xmax + tol) and (self.ymin - tol <= y <= self.ymax + tol)


@dataclass(frozen=True)
class Torus:
    """Flat torus ``R^2 / (px Z x py Z)`` with fundamental domain starting at ``origin``."""

    px: float
    py: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not (self.px > 0 and self.py > 0):
            raise FieldError("torus periods must be positive")

    @property
    def box(self):
        x0, y0 = self.origin
        return Box(x0, x0 + self.px, y0, y0 + self.py)

    def wrap(self, x, y):
        x0, y0 = self.origin
        u = x0 + (x - x0) % self.px
        v = y0 + (y - y0) % self.py
        # snap points that land a rounding error below the upper edge
        if x0 + self.px - u < 1e-9 * self.px:
            u = x0
        if y0 + self.py - v < 1e-9 * self.py:
            v = y0
        return u, v

    def delta(self, p, q):
        dx = (q[0] - p[0] + self.px / 2) % self.px - self.px / 2
        dy = (q[1] - p[1] + self.py / 2) % self.py - self.py / 2
        return dx, dy

    def distance(self, p, q):
        return math.hypot(*self.delta(p, q))


class ProtoLineField:
    """A pair of vector fields with a metric on a rectangle or a flat torus."""

    def __init__(self, X, Y, g: Metric | None = None, domain=None):
        self.X = X if not isinstance(X, (tuple, list)) else VectorField(*X)
        self.Y = Y if not isinstance(Y, (tuple, list)) else VectorField(*Y)
        self.g = g if g is not None else EUCLIDEAN
        self.domain = domain if domain is not None else Box(-1.0, 1.0, -1.0, 1.0)
        if isinstance(self.domain, Torus):
            self._check_periodic()
        self._scale = None

    def __repr__(self):
        return f"ProtoLineField({self.X!r}, {self.Y!r}, {self.g!r}, {self.domain!r})"

    @property
    def box(self):
        return self.domain.box if isinstance(self.domain, Torus) else self.domain

    @property
    def is_torus(self):
        return isinstance(self.domain, Torus)

    @property
    def scale(self):
        """Typical field magnitude over the domain, used for relative tolerances."""
        if self._scale is None:
            b = self.box
            xs, ys = np.meshgrid(np.linspace(b.xmin, b.xmax, 17), np.linspace(b.ymin, b.ymax, 17))
            mags = []
            for F in (self.X, self.Y):
                u, v = F.vectorized(xs, ys)
                m = np.hypot(u, v)
                m = m[np.isfinite(m)]
                mags.append(m.max() if m.size else 1.0)
            self._scale = max(min(mags), 1e-300)
        return self._scale

    def swapped(self):
        return ProtoLineField(self.Y, self.X, self.g, self.domain)

    def _check_periodic(self, n=16, tol=1e-9):
        T = self.domain
        x0, y0 = T.origin
        ts = np.linspace(0.0, 1.0, n)
        xs = x0 + ts * T.px
        ys = y0 + ts * T.py
        exprs = list(self.X.components) + list(self.Y.components) + list(self.g.coefficients) \
            if isinstance(self.X, VectorField) and isinstance(self.Y, VectorField) else []
        for e in exprs:
            a = e.vectorized(np.full(n, x0), ys)
            b = e.vectorized(np.full(n, x0 + T.px), ys)
            c = e.vectorized(xs, np.full(n, y0))
            d = e.vectorized(xs, np.full(n, y0 + T.py))
            if np.any(np.abs(a - b) > tol * (1 + np.abs(a))) or np.any(np.abs(c - d) > tol * (1 + np.abs(c))):
                raise FieldError(f"expression '{e}' is not periodic with the torus periods")


def _bisector_from_values(gv, xv, yv):
    ax = frame_angle(gv, xv[0], xv[1])
    ay = frame_angle(gv, yv[0], yv[1])
    half = np.mod(ay - ax, TWO_PI) / 2.0
    return np.mod(ax + half, math.pi)


def bisector(L: ProtoLineField, p):
    """Frame angle in ``[0, pi)`` of the line bisecting ``(X(p), Y(p))``.

    The line is the one reached from ``X(p)`` by half of the rotation in
    ``[0, 2*pi)`` that takes ``X(p)`` to ``Y(p)``.
    """
    x, y = p
    xv = L.X(x, y)
    yv = L.Y(x, y)
    gv = L.g.at(x, y)
    tol = 1e-12 * L.scale
    nx = math.sqrt(gv[0] * xv[0] ** 2 + 2 * gv[1] * xv[0] * xv[1] + gv[2] * xv[1] ** 2)
    ny = math.sqrt(gv[0] * yv[0] ** 2 + 2 * gv[1] * yv[0] * yv[1] + gv[2] * yv[1] ** 2)
    if nx <= tol or ny <= tol:
        which = "X" if nx <= tol else "Y"
        raise SingularPointError(f"{which} vanishes at ({x:g}, {y:g}); bisector undefined")
    return wrap_line(float(_bisector_from_values(gv, xv, yv)))


def bisector_angles(L: ProtoLineField, xs, ys):
    """Vectorized :func:`bisector`; entries where a field vanishes are ``nan``."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    xv = L.X.vectorized(xs, ys)
    yv = L.Y.vectorized(xs, ys)
    gv = L.g.vectorized(xs, ys)
    out = _bisector_from_values(gv, xv, yv)
    tol = 1e-12 * L.scale
    bad = (np.hypot(*xv) <= tol) | (np.hypot(*yv) <= tol)
    return np.where(bad, np.nan, out)


# ---------------------------------------------------------------------------
# realization of a line field as a bisector


def realize_line_field(section, X, damping="1", g: Metric | None = None):
    """Second field ``Y`` such that the bisector of ``(X, Y)`` is ``section``.

    ``Y(p) = |damping(p)| * R_{2a(p)} X(p)`` where ``a(p)`` is the angle from
    ``X(p)`` to the line ``section(p)`` and ``R`` is the ``g``-rotation.  The
    absolute value keeps the bisector on ``section`` rather than on its normal
    where ``damping`` is negative.
    """
    g = g if g is not None else EUCLIDEAN
    if isinstance(damping, (str, Expr, int, float)):
        damp_expr = _as_expr(damping)
        damp = damp_expr.__call__
    else:
        damp = damping

    def Y(x, y):
        xv = X(x, y)
        s = damp(x, y)
        if xv[0] == 0 and xv[1] == 0:
            raise SingularPointError(f"X vanishes at ({x:g}, {y:g}) inside the realization domain")
        if s == 0:
            raise SingularPointError(f"damping vanishes at ({x:g}, {y:g}) inside the realization domain")
        gv = g.at(x, y)
        p, q = frame_coords(gv, xv[0], xv[1])
        a = wrap_line(section(x, y) - math.atan2(q, p))
        c, sn = math.cos(2 * a), math.sin(2 * a)
        rp, rq = c * p - sn * q, sn * p + c * q
        e1, e2 = orthonormal_frame(g, (x, y))
        w = abs(s) * (rp * e1 + rq * e2)
        return float(w[0]), float(w[1])

    return FunctionField(Y)


# ---------------------------------------------------------------------------
# zeros


@dataclass(frozen=True)
class Zero:
    point: tuple
    det: float
    residual: float
    degenerate: bool


class ZeroList(list):
    """List of :class:`Zero` with the number of seeds that did not converge.

    Seeds that leave the search box are not counted as unconverged.
    """

    unconverged: int = 0


def _refine(V, p, iters=30):
    x, y = p
    for _ in range(iters):
        f = np.array(V(x, y))
        J = V.jacobian(x, y)
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            break
        x, y = x + step[0], y + step[1]
        if np.hypot(*step) < 1e-15 * (1 + abs(x) + abs(y)):
            break
    return x, y


def find_zeros(V, box: Box | Torus, n=64, dedup=1e-6, max_iter=80):
    """Zeros of ``V`` in ``box`` by damped Newton from an ``n x n`` grid of seeds.

    Steps are clipped to the size of a seed cell.  Converged roots closer
    than ``dedup`` are merged.  Roots with ``|det J| < 1e-8`` are flagged
    degenerate; seeds that fail to converge are counted, not raised.
    On a :class:`Torus` the search wraps and reports points in the
    fundamental domain.
    """
    torus = box if isinstance(box, Torus) else None
    b = torus.box if torus else box
    hx, hy = b.width / n, b.height / n
    gx = b.xmin + hx * (np.arange(n) + 0.5)
    gy = b.ymin + hy * (np.arange(n) + 0.5)
    PX, PY = (a.ravel() for a in np.meshgrid(gx, gy))

    def residual(px, py):
        u, v = V.vectorized(px, py)
        return np.hypot(u, v), u, v

    r, u, v = residual(PX, PY)
    finite = np.isfinite(r)
    scale = np.nanmax(r[finite]) if finite.any() else 1.0
    scale = scale if scale > 0 else 1.0
    ftol = 1e-11 * scale
    active = finite.copy()
    converged = np.zeros_like(active)
    escaped = np.zeros_like(active)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        a, bb, c, d = V.jacobian_vectorized(PX[idx], PY[idx])
        det = a * d - bb * c
        with np.errstate(all="ignore"):
            sx = -(d * u[idx] - bb * v[idx]) / det
            sy = -(-c * u[idx] + a * v[idx]) / det
        sing = ~np.isfinite(sx) | ~np.isfinite(sy)
        # singular Jacobian: fall back to a small gradient step on |V|^2
        gxs = a * u[idx] + c * v[idx]
        gys = bb * u[idx] + d * v[idx]
        gn = np.hypot(gxs, gys) + 1e-300
        sx = np.where(sing, -hx * gxs / gn, sx)
        sy = np.where(sing, -hy * gys / gn, sy)
        # clip to the seed cell
        f = np.minimum(1.0, np.minimum(hx / (np.abs(sx) + 1e-300), hy / (np.abs(sy) + 1e-300)))
        sx, sy = sx * f, sy * f
        lam = np.ones_like(sx)
        r0 = r[idx]
        best_r = np.full_like(r0, np.inf)
        best_x, best_y = PX[idx].copy(), PY[idx].copy()
        for _k in range(8):
            tx, ty = PX[idx] + lam * sx, PY[idx] + lam * sy
            tr, _, _ = residual(tx, ty)
            take = np.isfinite(tr) & np.isinf(best_r) & (tr < r0)
            best_r = np.where(take, tr, best_r)
            best_x = np.where(take, tx, best_x)
            best_y = np.where(take, ty, best_y)
            if not np.isinf(best_r).any():
                break
            lam = np.where(np.isinf(best_r), lam / 2, lam)
        moved = np.isfinite(best_r)
        stepn = np.hypot(best_x - PX[idx], best_y - PY[idx])
        PX[idx], PY[idx] = best_x, best_y
        r[idx], u[idx], v[idx] = residual(PX[idx], PY[idx])
        done = (r[idx] <= ftol) | (moved & (stepn <= 1e-14 * (1 + np.abs(PX[idx]) + np.abs(PY[idx]))) & (r[idx] <= 1e-6 * scale))
        stuck = ~moved & (r[idx] > ftol)
        # no further decrease possible but already at the rounding floor
        done |= stuck & (r[idx] <= 1e-9 * scale)
        converged[idx[done]] = True
        active[idx[done | stuck]] = False
        if torus is None:
            out = ~((PX[idx] >= b.xmin - hx) & (PX[idx] <= b.xmax + hx) & (PY[idx] >= b.ymin - hy) & (PY[idx] <= b.ymax + hy))
            active[idx[out]] = False
            escaped[idx[out]] = True
    conv = converged & (r <= 1e-6 * scale)
    unconverged = int(np.count_nonzero(finite & ~conv & ~escaped))
    torus_dist = (lambda p, q: torus.distance(p, q)) if torus else None

    def dist(p, q):
        return torus_dist(p, q) if torus else math.hypot(p[0] - q[0], p[1] - q[1])

    # cluster raw seeds first so only one representative per root is polished
    reps = []
    for x, y in zip(PX[conv], PY[conv]):
        if not any(dist((x, y), q) < max(dedup, 0.01 * min(hx, hy)) for q in reps):
            reps.append((x, y))
    result = ZeroList()
    result.unconverged = unconverged
    for q in reps:
        x, y = _refine(V, q)
        if torus is not None:
            x, y = torus.wrap(x, y)
        elif not b.contains(x, y, tol=1e-9 * b.diameter):
            continue
        p = (float(x), float(y))
        if any(dist(p, z.point) < dedup for z in result):
            continue
        det = float(np.linalg.det(V.jacobian(*p)))
        res = float(np.hypot(*V(*p)))
        result.append(Zero(p, det, res, abs(det) < 1e-8))
    result.sort(key=lambda z: (round(z.point[0], 9), round(z.point[1], 9)))
    if unconverged:
        log.info("find_zeros: %d of %d seeds did not converge", unconverged, n * n)
    return result
