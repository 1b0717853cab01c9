"""Riemannian metric generated by a pair of vector fields and their brackets.

At each point the five vectors ``X, Y, Z = [X, Y], W1 = [X, Z], W2 = [Y, Z]``
are stacked as the columns of a 2x5 matrix with rows ``s1`` and ``s2``.  The
length of a tangent vector ``V`` is the smallest Euclidean norm of a
coefficient vector ``u`` with ``sum u_k F_k = V``, i.e. ``<u, s1> = V1`` and
``<u, s2> = V2``.  The resulting quadratic form is the inverse of the Gram
matrix of ``s1, s2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import add, div, mul, neg, sub
from .fields import FieldError, Metric, VectorField

__all__ = [
    "DegenerateFrameError", "lie_bracket", "BracketFrame", "bracket_frame", "span_check",
    "min_norm_coeffs", "BuiltMetric", "build_metric", "SPAN_TOL",
]

SPAN_TOL = 1e-12


class DegenerateFrameError(FieldError):
    """The five bracket vectors do not span the plane at the queried point."""


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """``[X, Y] = DY X - DX Y`` with exact symbolic derivatives."""
    out = []
    for i in range(2):
        dY = Y.jacobian_exprs[i]
        dX = X.jacobian_exprs[i]
        a = add(mul(dY[0], X.components[0]), mul(dY[1], X.components[1]))
        b = add(mul(dX[0], Y.components[0]), mul(dX[1], Y.components[1]))
        out.append(sub(a, b))
    return VectorField(*out, check=False)


@dataclass
class BracketFrame:
    X: VectorField
    Y: VectorField
    Z: VectorField
    W1: VectorField
    W2: VectorField

    @property
    def fields(self):
        return (self.X, self.Y, self.Z, self.W1, self.W2)

    def rows(self, x, y):
        """``(s1, s2)``: first and second components of the five vectors."""
        vals = np.array([F(x, y) for F in self.fields], dtype=float)
        return vals[:, 0], vals[:, 1]

    def rows_vectorized(self, x, y):
        vals = [F.vectorized(x, y) for F in self.fields]
        return np.stack([v[0] for v in vals], axis=-1), np.stack([v[1] for v in vals], axis=-1)

    def r4(self, x, y):
        s1, s2 = self.rows(x, y)
        return float(s1 @ s1 * (s2 @ s2) - (s1 @ s2) ** 2)


def bracket_frame(X: VectorField, Y: VectorField) -> BracketFrame:
    Z = lie_bracket(X, Y)
    return BracketFrame(X, Y, Z, lie_bracket(X, Z), lie_bracket(Y, Z))


def _gram(s1, s2):
    return float(s1 @ s1), float(s1 @ s2), float(s2 @ s2)


def span_check(F: BracketFrame, p):
    """``(spans, r4)``; spans iff ``r4 > SPAN_TOL * |s1|^2 |s2|^2``."""
    s1, s2 = F.rows(*p)
    a, b, c = _gram(s1, s2)
    r4 = a * c - b * b
    return bool(r4 > SPAN_TOL * a * c), r4


def min_norm_coeffs(F: BracketFrame, p, V):
    """Minimal-norm coefficients ``u_V`` and their Euclidean norm."""
    s1, s2 = F.rows(*p)
    a, b, c = _gram(s1, s2)
    r4 = a * c - b * b
    if not r4 > SPAN_TOL * a * c:
        raise DegenerateFrameError(f"bracket vectors do not span the plane at {tuple(p)} (r4 = {r4:.3g})")
    V1, V2 = float(V[0]), float(V[1])
    u = (V1 * c - V2 * b) / r4 * s1 + (V2 * a - V1 * b) / r4 * s2
    return u, float(np.linalg.norm(u))


class BuiltMetric:
    """Quadratic form ``G(p)`` obtained by polarization of ``V -> |u_V|``."""

    def __init__(self, frame: BracketFrame):
        self.frame = frame

    def norm(self, p, V):
        return min_norm_coeffs(self.frame, p, V)[1]

    def G(self, x, y):
        p = (x, y)
        n1 = self.norm(p, (1.0, 0.0)) ** 2
        n2 = self.norm(p, (0.0, 1.0)) ** 2
        n12 = self.norm(p, (1.0, 1.0)) ** 2
        cross = 0.5 * (n12 - n1 - n2)
        G = np.array([[n1, cross], [cross, n2]])
        if not (n1 > 0 and n1 * n2 - cross * cross > 0):
            raise DegenerateFrameError(f"built metric not positive definite at {p}")
        return G

    def inner(self, p, V, W):
        """Polarized inner product ``(|V+W|^2 - |V-W|^2) / 4``."""
        V, W = np.asarray(V, float), np.asarray(W, float)
        return 0.25 * (self.norm(p, V + W) ** 2 - self.norm(p, V - W) ** 2)

    def G_vectorized(self, x, y):
        """Closed-form ``Gram(s1, s2)^-1`` on arrays; ``nan`` where degenerate."""
        s1, s2 = self.frame.rows_vectorized(x, y)
        a = np.sum(s1 * s1, axis=-1)
        b = np.sum(s1 * s2, axis=-1)
        c = np.sum(s2 * s2, axis=-1)
        r4 = a * c - b * b
        with np.errstate(all="ignore"):
            ok = r4 > SPAN_TOL * a * c
            return (np.where(ok, c / r4, np.nan), np.where(ok, -b / r4, np.nan), np.where(ok, a / r4, np.nan))

    def degenerate_mask(self, x, y):
        return np.isnan(self.G_vectorized(x, y)[0])

    def as_metric(self) -> Metric:
        """The same metric as symbolic coefficients, for use with proto-line-fields."""
        fs = self.frame.fields
        s1 = [F.components[0] for F in fs]
        s2 = [F.components[1] for F in fs]

        def dot(u, v):
            acc = mul(u[0], v[0])
            for a, b in zip(u[1:], v[1:]):
                acc = add(acc, mul(a, b))
            return acc

        a, b, c = dot(s1, s1), dot(s1, s2), dot(s2, s2)
        r4 = sub(mul(a, c), mul(b, b))
        return Metric(div(c, r4), neg(div(b, r4)), div(a, r4))


def build_metric(X: VectorField, Y: VectorField) -> BuiltMetric:
    return BuiltMetric(bracket_frame(X, Y))
