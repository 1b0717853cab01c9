"""Classification of linear proto-line-fields ``(A v, Y0)`` in the Euclidean plane.

The bisector map on directions, ``theta -> phi(theta)``, has either one
repulsive fixed point (Lemon), three fixed points in a half-plane with the
middle one attractive (Monstar), or three repulsive fixed points spread over
more than a half-plane (Star).  Fixed points are found from the scalar
equation ``2 F(t) - G(t) = alpha (mod 2 pi)`` in a normal basis where ``F``
is the angle distortion of ``diag(E, 1)`` and ``G`` the angle map of ``A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .fields import TWO_PI, wrap_line, wrap_vec

__all__ = [
    "LinearizationError", "DegenerateLinearization", "NonGenericLinearization",
    "ClassificationError", "NotApplicable",
    "LinearPLF", "NormalForm", "FixedPoint", "Classification", "KappaPhi",
    "rotation", "equalize_diagonal", "normal_form", "F_of", "F_prime", "G_of", "G_prime",
    "H_of", "H_prime", "kappa_phi", "fixed_points", "classify", "monstar_alpha_window",
    "DARBOUX", "MARGINAL_TOL",
]

MARGINAL_TOL = 1e-6

DARBOUX = {"Case1": "Lemon", "Case2": "Monstar", "Case3": "Star", "Degenerate": "none"}


class LinearizationError(ValueError):
    pass


class DegenerateLinearization(LinearizationError):
    """``det A = 0`` or ``Y0 = 0``."""


class NonGenericLinearization(LinearizationError):
    """Defective ``A`` with a repeated real eigenvalue that is not a multiple of the identity."""


class ClassificationError(LinearizationError):
    """The fixed-point structure contradicts every admissible case."""


class NotApplicable(LinearizationError):
    pass


def rotation(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]])


_SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class LinearPLF:
    """The pair ``(v -> A v, Y0)``."""

    A: np.ndarray
    Y0: np.ndarray

    def __init__(self, A, Y0):
        object.__setattr__(self, "A", np.array(A, dtype=float).reshape(2, 2))
        object.__setattr__(self, "Y0", np.array(Y0, dtype=float).reshape(2))

    def phi(self, theta):
        """Line angle in ``[0, pi)`` of the bisector of ``(A u(theta), Y0)``."""
        u = np.array([math.cos(theta), math.sin(theta)])
        w = self.A @ u
        ax = math.atan2(w[1], w[0])
        ay = math.atan2(self.Y0[1], self.Y0[0])
        return wrap_line(ax + wrap_vec(ay - ax) / 2)

    def check(self):
        scale = float(np.abs(self.A).max())
        if scale == 0 or abs(np.linalg.det(self.A)) <= 1e-12 * scale * scale:
            raise DegenerateLinearization("linear part is singular")
        if not np.any(self.Y0):
            raise DegenerateLinearization("constant field vanishes")


@dataclass(frozen=True)
class NormalForm:
    """Normal form of the linear part in an orthonormal basis.

    ``kind`` is one of ``C1_focus``, ``C2_node``, ``C3_saddle``,
    ``scaled_rotation``.  The basis is ``R(basis_rotation)``, followed by
    swapping the two axes when ``axis_swapped``.  ``alpha`` is the angle of
    ``Y0`` in that basis.
    """

    kind: str
    E: float
    C: float
    phi: float
    basis_rotation: float
    axis_swapped: bool
    alpha: float

    @property
    def basis(self):
        Q = rotation(self.basis_rotation)
        return Q @ _SWAP if self.axis_swapped else Q

    @property
    def matrix(self):
        """Linear part in the normal basis."""
        c, s, E, C = math.cos(self.phi), math.sin(self.phi), self.E, self.C
        if self.kind == "scaled_rotation":
            return C * rotation(self.phi)
        eps = -1.0 if self.kind == "C1_focus" else 1.0
        return C * np.array([[c, eps * E * s], [s / E, c]])

    def reconstruct(self):
        Q = self.basis
        return Q @ self.matrix @ Q.T

    def to_original_angle(self, t):
        """Angle in the original coordinates of the direction with angle ``t`` in the normal basis."""
        v = self.basis @ np.array([math.cos(t), math.sin(t)])
        return math.atan2(v[1], v[0])

    def alpha_to_original(self, a):
        return wrap_vec(self.to_original_angle(a))


def equalize_diagonal(A):
    """Rotation angle ``t`` in ``[0, pi/2)`` with ``R(t)^T A R(t)`` having equal diagonal entries."""
    A = np.asarray(A, dtype=float)
    p = A[0, 0] - A[1, 1]
    q = A[0, 1] + A[1, 0]
    if p == 0:
        t = 0.0
    else:
        t = (math.atan2(-p, q) % math.pi) / 2
        if t >= math.pi / 2:
            t = 0.0
    R = rotation(t)
    return t, R.T @ A @ R


def _scaled_rotation_part(A):
    c = (A[0, 0] + A[1, 1]) / 2
    s = (A[1, 0] - A[0, 1]) / 2
    return c, s


def normal_form(P: LinearPLF) -> NormalForm:
    P.check()
    A = P.A
    norm = float(np.linalg.norm(A))
    c0, s0 = _scaled_rotation_part(A)
    C0 = math.hypot(c0, s0)

    def finish(kind, E, C, phi, t, swapped):
        Q = rotation(t) @ _SWAP if swapped else rotation(t)
        y = Q.T @ P.Y0
        nf = NormalForm(kind, float(E), float(C), float(phi), float(t), swapped,
                        wrap_vec(math.atan2(y[1], y[0])))
        _validate(nf, A)
        return nf

    if np.linalg.norm(A - C0 * rotation(math.atan2(s0, c0))) < 1e-9 * norm:
        rho = math.atan2(s0, c0)
        if abs(s0) <= 1e-12 * C0:
            return finish("scaled_rotation", 1.0, C0, 0.0 if c0 > 0 else math.pi, 0.0, False)
        return finish("C1_focus", 1.0, C0, rho, 0.0, False)

    t, Ae = equalize_diagonal(A)
    a = (Ae[0, 0] + Ae[1, 1]) / 2
    b, c = Ae[0, 1], Ae[1, 0]
    if abs(b * c) <= 1e-18 * norm ** 2 or b == 0 or c == 0:
        raise NonGenericLinearization(
            "repeated eigenvalue with a nontrivial Jordan block; no hyperbolic normal form")
    swapped = False
    if b * c < 0 and abs(b) < abs(c):
        # focus with E < 1: swap the axes so that E >= 1
        swapped = True
        b, c = c, b
    E = math.sqrt(abs(b / c))
    d = math.sqrt(abs(b * c))
    C = math.hypot(a, d)
    phi = math.atan2(c * E, a)
    if b * c < 0:
        kind = "C1_focus"
    else:
        kind = "C2_node" if math.cos(2 * phi) > 0 else "C3_saddle"
    return finish(kind, E, C, phi, t, swapped)


def _validate(nf, A):
    ok = {
        "C1_focus": nf.E >= 1.0,
        "C2_node": math.cos(2 * nf.phi) > 0,
        "C3_saddle": math.cos(2 * nf.phi) < 0,
        "scaled_rotation": True,
    }[nf.kind]
    err = np.linalg.norm(nf.reconstruct() - A) / np.linalg.norm(A)
    if not ok or err > 1e-9:
        raise LinearizationError(f"normal form failed its own checks ({nf.kind}, reconstruction error {err:.2e})")


# ---------------------------------------------------------------------------
# angle maps


def F_of(theta, E):
    """Continuous angle of ``(E cos t, sin t)`` with ``F(0) = 0``."""
    s, c = np.sin(theta), np.cos(theta)
    return theta + np.arctan2((1 - E) * s * c, E * c * c + s * s)


def F_prime(theta, E):
    return E / (E * E * np.cos(theta) ** 2 + np.sin(theta) ** 2)


def _lift(N, theta):
    """Continuous angle of ``N u(theta)`` for an invertible 2x2 ``N``.

    Uses the polar decomposition ``N = R(beta) S``: the angle is
    ``beta + theta + angle(u, S u)`` and the last term stays in ``(-pi/2, pi/2)``.
    """
    theta = np.asarray(theta, dtype=float)
    sign = 1.0
    if np.linalg.det(N) < 0:
        N = N @ np.diag([1.0, -1.0])
        sign = -1.0
    th = sign * theta
    beta = math.atan2(N[1, 0] - N[0, 1], N[0, 0] + N[1, 1])
    S = rotation(-beta) @ N
    c, s = np.cos(th), np.sin(th)
    su = S[0, 0] * c + S[0, 1] * s
    sv = S[1, 0] * c + S[1, 1] * s
    return beta + th + np.arctan2(c * sv - s * su, c * su + s * sv)


def _node_matrix(nf):
    c, s, E = math.cos(nf.phi), math.sin(nf.phi), nf.E
    return np.array([[E * c, E * s], [s, c]])


def G_of(theta, nf: NormalForm):
    """Continuous angle of the image of the point ``(E cos t, sin t)`` under the normal matrix."""
    if nf.kind == "scaled_rotation":
        return np.asarray(theta, dtype=float) + nf.phi
    if nf.kind == "C1_focus":
        return F_of(np.asarray(theta, dtype=float) + nf.phi, nf.E)
    return _lift(_node_matrix(nf), theta)


def G_prime(theta, nf: NormalForm):
    theta = np.asarray(theta, dtype=float)
    if nf.kind == "scaled_rotation":
        return np.ones_like(theta)
    if nf.kind == "C1_focus":
        return F_prime(theta + nf.phi, nf.E)
    E, p = nf.E, nf.phi
    return E * math.cos(2 * p) / (E * E * np.cos(theta - p) ** 2 + np.sin(theta + p) ** 2)


def H_of(theta, nf):
    return 2 * F_of(theta, nf.E) - G_of(theta, nf)


def H_prime(theta, nf):
    return 2 * F_prime(theta, nf.E) - G_prime(theta, nf)


# ---------------------------------------------------------------------------
# sign law of H'


@dataclass(frozen=True)
class KappaPhi:
    kappa: float
    Phi: float
    A: float


def kappa_phi(nf: NormalForm) -> KappaPhi:
    """Constants with ``sign(H'(t)) = sign(cos(2 t + Phi) + kappa)``."""
    E, p = nf.E, nf.phi
    if nf.kind == "C1_focus":
        if abs(E - 1) < 1e-9:
            raise NotApplicable("focus with E = 1: H' is identically 1")
        c2, s2 = math.cos(2 * p), math.sin(2 * p)
        # amplitude of (2 cos2p - 1, 2 sin2p)
        A = math.sqrt(5 - 4 * c2)
        Phi = math.atan2(2 * s2, 2 * c2 - 1)
        return KappaPhi((E * E + 1) / (A * (E * E - 1)), Phi, A)
    if nf.kind == "C2_node":
        E2 = E * E
        A = math.sqrt(0.5 * (5 + 6 * E2 + 5 * E2 * E2 - (3 + 10 * E2 + 3 * E2 * E2) * math.cos(4 * p)))
        Phi = math.atan2(-2 * (E2 + 1) * math.sin(2 * p), (E2 - 1) * math.cos(2 * p))
        return KappaPhi((E2 + 1) * (2 - math.cos(2 * p)) / A, Phi, A)
    raise NotApplicable(f"no sign law for {nf.kind}: H is increasing")


# ---------------------------------------------------------------------------
# fixed points


@dataclass(frozen=True)
class FixedPoint:
    """Fixed direction of the bisector map, in original coordinates."""

    theta: float
    slope: float
    stability: str
    theta_normal: float = field(default=0.0, compare=False)


def _stability(slope):
    if slope > 1 + MARGINAL_TOL:
        return "attractive"
    if slope < 1 - MARGINAL_TOL:
        return "repulsive"
    return "marginal"


def _grid(nf):
    n = int(math.ceil(512 * max(nf.E, 1 / nf.E)))
    return np.linspace(-math.pi, math.pi, n + 1)


def _critical_points(nf, grid):
    hp = H_prime(grid, nf)
    out = []
    for i in np.flatnonzero(np.sign(hp[:-1]) * np.sign(hp[1:]) < 0):
        out.append(brentq(lambda t: float(H_prime(t, nf)), grid[i], grid[i + 1], xtol=1e-14))
    return out


def _wrap_theta(t):
    t = (t + math.pi) % TWO_PI - math.pi
    return -math.pi if t >= math.pi else t


def _fixed_points_normal(nf):
    """Roots ``t`` of ``H(t) = alpha (mod 2 pi)`` on ``[-pi, pi)`` with their slopes."""
    grid = _grid(nf)
    h = H_of(grid, nf)
    alpha = nf.alpha
    roots = []
    for i in range(len(grid) - 1):
        lo, hi = min(h[i], h[i + 1]), max(h[i], h[i + 1])
        for k in range(math.ceil((lo - alpha) / TWO_PI), math.floor((hi - alpha) / TWO_PI) + 1):
            target = alpha + k * TWO_PI
            f0, f1 = h[i] - target, h[i + 1] - target
            if f0 == 0:
                roots.append(grid[i])
            elif f0 * f1 < 0:
                roots.append(brentq(lambda t: float(H_of(t, nf)) - target, grid[i], grid[i + 1], xtol=1e-12))
    pts = []
    for t in roots:
        slope = float(1 - H_prime(t, nf) / (2 * F_prime(t, nf.E)))
        pts.append((_wrap_theta(t), slope))
    # touching roots: H has an extremum within rounding distance of alpha
    for tc in _critical_points(nf, grid):
        hc = float(H_of(tc, nf))
        gap = abs((hc - alpha + math.pi) % TWO_PI - math.pi)
        eps = 1e-6
        h2 = abs(float(H_prime(tc + eps, nf) - H_prime(tc - eps, nf)) / (2 * eps))
        fp = float(F_prime(tc, nf.E))
        tol = (2 * MARGINAL_TOL * fp) ** 2 / (2 * max(h2, 1e-300))
        if gap <= max(tol, 1e-12):
            width = math.sqrt(2 * max(gap, tol) / max(h2, 1e-300)) * 10 + 1e-9
            pts = [(t, s) for t, s in pts if abs(_wrap_theta(t - tc)) > width]
            pts.append((_wrap_theta(tc), 1.0))
    # a root exactly at the seam of [-pi, pi) may be found twice
    uniq = []
    for t, s in sorted(pts):
        if uniq and abs(_wrap_theta(t - uniq[-1][0])) < 1e-9:
            continue
        uniq.append((t, s))
    if len(uniq) > 1 and abs(_wrap_theta(uniq[-1][0] - uniq[0][0])) < 1e-9:
        uniq.pop()
    return uniq


def fixed_points(P: LinearPLF, nf: NormalForm | None = None):
    """Fixed directions of the bisector map with slopes and stability, sorted by angle."""
    nf = nf if nf is not None else normal_form(P)
    out = []
    for t1, slope in _fixed_points_normal(nf):
        t0 = float(F_of(t1, nf.E))
        theta = _wrap_theta(nf.to_original_angle(t0))
        out.append(FixedPoint(theta, slope, _stability(slope), _wrap_theta(t0)))
    return sorted(out, key=lambda f: f.theta)


def _in_open_half_plane(thetas):
    if len(thetas) < 2:
        return True
    s = sorted(t % TWO_PI for t in thetas)
    gaps = [b - a for a, b in zip(s, s[1:])] + [s[0] + TWO_PI - s[-1]]
    return max(gaps) > math.pi


def _half_plane_order(fps):
    """Fixed points listed counterclockwise starting after the largest gap."""
    s = sorted(fps, key=lambda f: f.theta % TWO_PI)
    th = [f.theta % TWO_PI for f in s]
    gaps = [th[(i + 1) % len(th)] - th[i] + (TWO_PI if i == len(th) - 1 else 0) for i in range(len(th))]
    j = int(np.argmax(gaps))
    return s[j + 1:] + s[:j + 1]


@dataclass(frozen=True)
class Classification:
    case: str
    darboux: str
    fixed_points: tuple
    kappa: float | None
    Phi: float | None
    hyper_hyperbolic: bool
    normal_form: NormalForm | None = None


def classify(P: LinearPLF, nf: NormalForm | None = None) -> Classification:
    nf = nf if nf is not None else normal_form(P)
    fps = fixed_points(P, nf)
    try:
        kp = kappa_phi(nf)
        kappa, Phi = kp.kappa, kp.Phi
    except NotApplicable:
        kappa = Phi = None
    stab = [f.stability for f in fps]
    if "marginal" in stab:
        return Classification("Degenerate", DARBOUX["Degenerate"], tuple(fps), kappa, Phi, False, nf)
    if len(fps) == 1 and stab == ["repulsive"]:
        case = "Case1"
    elif len(fps) == 3 and _in_open_half_plane([f.theta for f in fps]):
        order = [f.stability for f in _half_plane_order(fps)]
        if order != ["repulsive", "attractive", "repulsive"]:
            raise ClassificationError(f"three fixed points in a half-plane with stabilities {order}")
        case = "Case2"
    elif len(fps) == 3 and stab == ["repulsive"] * 3:
        case = "Case3"
    else:
        raise ClassificationError(f"{len(fps)} fixed points with stabilities {stab}")
    # cross-checks against the normal form
    if (nf.kind == "C3_saddle") != (case == "Case3"):
        raise ClassificationError(f"{nf.kind} classified as {case}")
    if kappa is not None and kappa >= 1 and case != "Case1":
        raise ClassificationError(f"kappa = {kappa:.6g} >= 1 but classified as {case}")
    return Classification(case, DARBOUX[case], tuple(fps), kappa, Phi, True, nf)


def monstar_alpha_window(nf: NormalForm):
    """Intervals of ``alpha`` (angle of ``Y0`` in original coordinates) giving three fixed points.

    Each interval is ``(start, end)`` with ``start`` in ``[0, 2 pi)`` and
    ``end > start``; the endpoints are the exceptional angles where a fixed
    point is marginal.
    """
    try:
        kp = kappa_phi(nf)
    except NotApplicable:
        return []
    if kp.kappa >= 1:
        return []
    grid = _grid(nf)
    crit = sorted(_critical_points(nf, grid))
    # a local max followed by a local min bounds a decreasing branch of H
    windows = []
    for tc in crit:
        if float(H_prime(tc - 1e-7, nf)) > 0 > float(H_prime(tc + 1e-7, nf)):
            hi = float(H_of(tc, nf))
            nxt = [t for t in crit if t > tc] or [t + TWO_PI for t in crit]
            lo = float(H_of(nxt[0], nf))
            windows.append((lo, hi))
    out = []
    for lo, hi in windows[:2]:
        width = hi - lo
        if nf.axis_swapped:
            # reflection reverses orientation of angles
            start = wrap_vec(math.pi / 2 + nf.basis_rotation - hi)
        else:
            start = wrap_vec(lo + nf.basis_rotation)
        out.append((start, start + width))
    return sorted(out)
