"""Linearization at a singular point and the polar blow-up of the bisector line field.

In coordinates ``w`` with ``q = p + S w`` and ``S^T g(p) S = I`` the line field
is described by its angle ``phi(r, t)`` at the point ``w = r (cos t, sin t)``.
Lifted to a real function on ``(-delta, delta) x [0, 4 pi)``, it defines the
blow-up field ``P(r, t) = (r cos(phi - t), sin(phi - t))`` whose zeros on
``r = 0`` are the fixed directions of the linearized bisector map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import brentq

from .fields import (
    Box, FieldError, ProtoLineField, SingularPointError, bisector, bisector_angles,
    find_zeros, frame_angle, wrap_line,
)
from .index import PreconditionError
from .linear import (
    MARGINAL_TOL, Classification, FixedPoint, LinearPLF, classify, _half_plane_order,
    _in_open_half_plane, DARBOUX,
)

__all__ = [
    "BlowupError", "Linearization", "linearize", "BlowupField", "lift_phi",
    "BlowupZero", "blowup_zeros", "LimitResiduals", "limit_residuals", "loglog_slope",
    "JumpReport", "jump_check", "RayFixedPoint", "coordinate_ray_fixed_points",
    "classify_coordinate_rays",
]


class BlowupError(FieldError):
    pass


@dataclass(frozen=True)
class Linearization:
    """Linear model of a proto-line-field at a singular point in normalized coordinates.

    ``swapped`` is true when ``Y`` is the vanishing field; the roles of the
    two fields are then exchanged, which leaves the bisector unchanged.
    """

    p: tuple
    S: np.ndarray
    A_tilde: np.ndarray
    Y_tilde: np.ndarray
    swapped: bool = False

    @property
    def plf(self):
        return LinearPLF(self.A_tilde, self.Y_tilde)

    def to_point(self, r, t):
        """Original coordinates of the normalized polar point ``(r, t)``."""
        w = self.S @ np.array([r * math.cos(t), r * math.sin(t)])
        return self.p[0] + w[0], self.p[1] + w[1]


def _normalizer(g, p):
    G = g.matrix(*p)
    C = np.linalg.cholesky(G)
    # columns of C^{-T} are the orthonormal frame at p
    return np.linalg.inv(C).T


def linearize(L: ProtoLineField, p) -> Linearization:
    p = (float(p[0]), float(p[1]))
    S = _normalizer(L.g, p)
    tol = 1e-9 * L.scale
    xv, yv = L.X(*p), L.Y(*p)
    x0 = math.hypot(*xv) <= tol
    y0 = math.hypot(*yv) <= tol
    if x0 and y0:
        raise PreconditionError(f"both fields vanish at {p}")
    if not (x0 or y0):
        raise PreconditionError(f"neither field vanishes at {p}")
    Z, W = (L.X, L.Y) if x0 else (L.Y, L.X)
    Sinv = np.linalg.inv(S)
    A = Sinv @ Z.jacobian(*p) @ S
    Y = Sinv @ np.array(W(*p))
    return Linearization(p, S, A, Y, swapped=not x0)


class BlowupField:
    """Continuous lift of the line-field angle around a singular point.

    ``values[i, k]`` is the lift at radius ``r[i]`` and angle ``theta[k]``;
    row 0 (``r = 0``) comes from the linearization.  :meth:`phi_lift`
    evaluates the exact angle and picks the branch nearest the grid
    interpolant, so it is accurate to rounding, not to grid resolution.
    """

    def __init__(self, L, lin, delta, r, theta, values):
        self.L = L
        self.lin = lin
        self.delta = delta
        self.r = r
        self.theta = theta
        self.values = values
        self.turn = round((values[0, -1] - values[0, 0]) / (2 * math.pi)) * 2 * math.pi
        self._interp = RegularGridInterpolator((r, theta), values)
        self._plf = lin.plf

    def raw_phi(self, r, t):
        """Line angle in ``[0, pi)`` at normalized polar point ``(|r|, t)``."""
        r = abs(r)
        if r == 0:
            return self._plf.phi(t)
        return bisector(self.L, self.lin.to_point(r, t))

    def phi_lift(self, r, t):
        r = abs(r)
        if r > self.delta:
            raise BlowupError(f"radius {r:g} outside the blow-up disc of radius {self.delta:g}")
        m = math.floor(t / (4 * math.pi))
        tm = t - 4 * math.pi * m
        ref = float(self._interp((r, min(tm, self.theta[-1])))) + m * self.turn
        raw = self.raw_phi(r, t)
        return raw + math.pi * round((ref - raw) / math.pi)

    def P(self, r, t):
        a = self.phi_lift(r, t) - t
        return np.array([r * math.cos(a), math.sin(a)])


def _unwrap_grid(raw):
    """Lift ``raw`` (mod pi) along theta on row 0, then outward along r."""
    out = np.empty_like(raw)
    out[0] = np.unwrap(raw[0], period=math.pi)
    col = np.vstack([out[0], raw[1:]])
    out = np.unwrap(col, period=math.pi, axis=0)
    step_t = np.abs(np.diff(out, axis=1)).max()
    step_r = np.abs(np.diff(out, axis=0)).max() if len(out) > 1 else 0.0
    return out, max(step_t, step_r)


def _check_isolated(L, lin, delta):
    # box around the ellipse p + S * disc(delta)
    hx = delta * np.linalg.norm(lin.S[0])
    hy = delta * np.linalg.norm(lin.S[1])
    box = Box(lin.p[0] - hx, lin.p[0] + hx, lin.p[1] - hy, lin.p[1] + hy)
    Sinv = np.linalg.inv(lin.S)
    for F in (L.X, L.Y):
        for z in find_zeros(F, box, n=24):
            w = Sinv @ (np.array(z.point) - np.array(lin.p))
            if np.linalg.norm(w) < delta and np.linalg.norm(w) > 1e-9:
                raise BlowupError(f"another singular point at {z.point} lies within the blow-up radius")


def lift_phi(L: ProtoLineField, p, delta=0.5, grid=(64, 1024), check_isolated=True) -> BlowupField:
    lin = linearize(L, p)
    if check_isolated:
        _check_isolated(L, lin, delta)
    n_r, n_t = grid
    for attempt in range(2):
        r = np.linspace(0.0, delta, n_r + 1)
        t = np.linspace(0.0, 4 * math.pi, n_t + 1)
        R, T = np.meshgrid(r[1:], t, indexing="ij")
        W1, W2 = R * np.cos(T), R * np.sin(T)
        X = lin.p[0] + lin.S[0, 0] * W1 + lin.S[0, 1] * W2
        Y = lin.p[1] + lin.S[1, 0] * W1 + lin.S[1, 1] * W2
        body = bisector_angles(L, X, Y)
        if np.any(np.isnan(body)):
            raise BlowupError("bisector undefined inside the blow-up disc")
        row0 = np.array([lin.plf.phi(s) for s in t])
        raw = np.vstack([row0, body])
        values, step = _unwrap_grid(raw)
        if step < math.pi / 2:
            return BlowupField(L, lin, delta, r, t, values)
        n_r, n_t = 2 * n_r, 2 * n_t
    raise BlowupError(f"angle lift unsafe: largest step {step:.3g} between grid nodes")


# ---------------------------------------------------------------------------
# zeros of the blow-up field


@dataclass(frozen=True)
class BlowupZero:
    theta: float
    kind: str
    DP: np.ndarray = field(repr=False)
    expected: np.ndarray = field(repr=False)
    rel_error: float = 0.0
    stability: str = ""

    @property
    def consistent(self):
        return self.rel_error <= 1e-3


def blowup_zeros(B: BlowupField, classification: Classification | None = None, h=1e-5):
    """Zeros ``(0, t0)`` of ``P`` on the doubled circle with their differentials.

    Each fixed direction of the linearized map appears twice, at ``t0`` and
    ``t0 + 2 pi``.  ``kind`` is ``saddle`` or ``node`` from the sign of
    ``det DP``, or ``degenerate`` when that determinant is negligible.
    """
    c = classification if classification is not None else classify(B.lin.plf)
    if c.case == "Degenerate":
        raise PreconditionError("linearization is not hyper-hyperbolic")
    out = []
    for fp in c.fixed_points:
        for shift in (0.0, 2 * math.pi):
            t0 = fp.theta % (2 * math.pi) + shift
            DP = np.column_stack([
                (B.P(h, t0) - B.P(-h, t0)) / (2 * h),
                (B.P(0.0, t0 + h) - B.P(0.0, t0 - h)) / (2 * h),
            ])
            cs = math.cos(B.phi_lift(0.0, t0) - t0)
            expected = cs * np.diag([1.0, fp.slope - 1.0])
            err = float(np.linalg.norm(DP - expected) / np.linalg.norm(expected))
            det = float(np.linalg.det(DP))
            if abs(det) < 1e-6 * float(np.sum(DP * DP)):
                kind = "degenerate"
            else:
                kind = "saddle" if det < 0 else "node"
            out.append(BlowupZero(t0, kind, DP, expected, err, fp.stability))
    return sorted(out, key=lambda z: z.theta)


# ---------------------------------------------------------------------------
# convergence of the blow-up angle to its linearization


@dataclass
class LimitResiduals:
    radii: np.ndarray
    value: np.ndarray
    d_theta: np.ndarray
    d_r: np.ndarray

    # residuals below these are rounding or finite-difference noise
    floors = (1e-12, 1e-8, 1e-8)

    def slopes(self):
        series = (self.value, self.d_theta, self.d_r)
        return tuple(loglog_slope(self.radii, res, f) for res, f in zip(series, self.floors))


def loglog_slope(radii, residuals, exact=1e-12):
    """Least-squares slope of ``log residual`` against ``log r``.

    Residuals below ``exact`` at every radius (the linear case, where the
    differences vanish identically) return ``inf``.
    """
    residuals = np.asarray(residuals, dtype=float)
    if np.all(residuals < exact):
        return math.inf
    x = np.log(np.asarray(radii, dtype=float))
    y = np.log(np.maximum(residuals, 1e-300))
    return float(np.polyfit(x, y, 1)[0])


def _line_diff(a, b):
    return (a - b + math.pi / 2) % math.pi - math.pi / 2


def limit_residuals(L: ProtoLineField, p, radii=None, n_theta=256):
    """Sup over angles of the three differences between the blow-up angle and its linearization.

    For each radius: ``|phi(r, t) - phi_lin(t)|``, ``|d_t phi(r, t) - phi_lin'(t)|``
    and ``|d_r phi(r, t)|``, by central differences.
    """
    lin = linearize(L, p)
    plf = lin.plf
    radii = np.geomspace(1e-4, 1e-1, 13) if radii is None else np.asarray(radii, dtype=float)
    ts = np.linspace(0.0, 2 * math.pi, n_theta, endpoint=False)
    ht = 1e-6

    def phi(r, t):
        return bisector(L, lin.to_point(r, t))

    v0, v1, v2 = [], [], []
    for r in radii:
        hr = 1e-2 * r
        a = b = c = 0.0
        for t in ts:
            lin_val = plf.phi(t)
            lin_d = _line_diff(plf.phi(t + ht), plf.phi(t - ht)) / (2 * ht)
            a = max(a, abs(_line_diff(phi(r, t), lin_val)))
            b = max(b, abs(_line_diff(phi(r, t + ht), phi(r, t - ht)) / (2 * ht) - lin_d))
            c = max(c, abs(_line_diff(phi(r + hr, t), phi(r - hr, t)) / (2 * hr)))
        v0.append(a)
        v1.append(b)
        v2.append(c)
    return LimitResiduals(radii, np.array(v0), np.array(v1), np.array(v2))


# ---------------------------------------------------------------------------
# angle jump across a singular point


@dataclass(frozen=True)
class JumpReport:
    limit_minus: float
    limit_plus: float
    jump: float
    singular: bool

    @property
    def ok(self):
        """Jump of a quarter turn at a singular point, none elsewhere."""
        target = math.pi / 2 if self.singular else 0.0
        return abs(_line_diff(self.jump, target)) < 1e-3


def _one_sided_limit(ts, values):
    # values are line angles; unwrap, then extrapolate linearly to t = 0
    v = np.unwrap(values, period=math.pi)
    k = min(6, len(ts))
    coef = np.polyfit(ts[:k], v[:k], 1)
    return float(np.polyval(coef, 0.0))


def jump_check(L: ProtoLineField, p, direction, tmin=1e-6, tmax=1e-2, n=25):
    """One-sided limits of the angle from the curve ``p + t d`` to the line field.

    The angle is measured with the metric at each point of the curve.
    """
    d = np.asarray(direction, dtype=float)
    if not np.any(d):
        raise ValueError("direction must be nonzero")
    ts = np.geomspace(tmin, tmax, n)
    lims = []
    scale = L.scale
    for sgn in (-1.0, 1.0):
        vals = []
        for t in ts:
            q = (p[0] + sgn * t * d[0], p[1] + sgn * t * d[1])
            try:
                b = bisector(L, q)
            except SingularPointError as exc:
                raise BlowupError(f"curve meets another singular point near {q}") from exc
            gv = L.g.at(*q)
            # the tangent of t -> p + t d is d on both sides
            curve = float(frame_angle(gv, d[0], d[1]))
            vals.append(wrap_line(b - curve))
        lims.append(_one_sided_limit(ts, np.array(vals)))
    xv, yv = L.X(*p), L.Y(*p)
    singular = min(math.hypot(*xv), math.hypot(*yv)) <= 1e-9 * scale
    minus, plus = lims
    return JumpReport(wrap_line(minus), wrap_line(plus), wrap_line(plus - minus), singular)


# ---------------------------------------------------------------------------
# the coordinate-ray convention: compare the metric angle of the line with
# the coordinate angle of the ray, without normalizing the metric at p


@dataclass(frozen=True)
class RayFixedPoint:
    theta: float
    slope: float
    stability: str


def _ray_map(L, p, r):
    def phi(t):
        return bisector(L, (p[0] + r * math.cos(t), p[1] + r * math.sin(t)))
    return phi


def coordinate_ray_fixed_points(L: ProtoLineField, p, r=1e-3, n=4096, h=1e-5):
    """Fixed points of ``t -> angle_g((1, 0), B(p + r (cos t, sin t)))`` compared with ``t``.

    Slopes by central differences; for linear fields with constant ``Y`` and
    metric the map does not depend on ``r``.  Roots are found by sign changes,
    so a fixed point where the graph only touches the diagonal is missed.
    """
    phi = _ray_map(L, p, r)
    ts = np.linspace(-math.pi, math.pi, n + 1)
    d = np.array([_line_diff(phi(t), t) for t in ts])
    roots = []
    for i in range(n):
        a, b = d[i], d[i + 1]
        if abs(a) > 1 or abs(b) > 1:
            continue  # wrap of the difference, not a crossing
        if a == 0:
            roots.append(ts[i])
        elif a * b < 0:
            roots.append(brentq(lambda t: _line_diff(phi(t), t), ts[i], ts[i + 1], xtol=1e-13))
    out = []
    for t in roots:
        if any(abs(t - q.theta) < 1e-9 for q in out):
            continue
        slope = _line_diff(phi(t + h), phi(t - h)) / (2 * h)
        if slope > 1 + MARGINAL_TOL:
            st = "attractive"
        elif slope < 1 - MARGINAL_TOL:
            st = "repulsive"
        else:
            st = "marginal"
        out.append(RayFixedPoint(float(t), float(slope), st))
    return sorted(out, key=lambda f: f.theta)


def classify_coordinate_rays(L: ProtoLineField, p, r=1e-3):
    """Case label of the coordinate-ray map, using the same rules as the linear classifier."""
    fps = coordinate_ray_fixed_points(L, p, r)
    stab = [f.stability for f in fps]
    if "marginal" in stab:
        case = "Degenerate"
    elif len(fps) == 1 and stab == ["repulsive"]:
        case = "Case1"
    elif len(fps) == 3 and _in_open_half_plane([f.theta for f in fps]) and \
            [f.stability for f in _half_plane_order(fps)] == ["repulsive", "attractive", "repulsive"]:
        case = "Case2"
    elif len(fps) == 3 and stab == ["repulsive"] * 3:
        case = "Case3"
    else:
        case = "Degenerate"
    return case, DARBOUX[case], fps
