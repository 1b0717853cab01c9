"""Locate and classify every singular point of a proto-line-field in its domain."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .blowup import Linearization, linearize
from .fields import Box, ProtoLineField, Torus, find_zeros
from .index import (
    IndexComputationError, _vanishes, winding_index_lf, winding_index_vf,
    zero_type_from_jacobian,
)
from .linear import Classification, NonGenericLinearization, classify

__all__ = ["SingularityReport", "analyze_singularities", "CLASS_NAMES"]

CLASS_NAMES = ("Lemon", "Monstar", "Star", "Degenerate")


@dataclass
class SingularityReport:
    """Everything computed about one singular point.

    ``field`` names the vanishing field (``X``, ``Y`` or ``XY`` when both
    vanish).  ``twice_index`` is ``None`` when the winding could not be
    computed.  ``cls`` is one of :data:`CLASS_NAMES`.
    """

    point: tuple
    field: str
    zero_type: str
    hyperbolic: bool
    field_index: int | None
    twice_index: int | None
    case: str
    cls: str
    kappa: float | None = None
    Phi: float | None = None
    fixed_points: tuple = ()
    flags: tuple = ()
    classification: Classification | None = None
    linearization: Linearization | None = None
    radius: float | None = None

    @property
    def index(self):
        return None if self.twice_index is None else Fraction(self.twice_index, 2)

    def directions(self):
        """Fixed directions as Euclidean unit vectors in original coordinates."""
        if self.linearization is None:
            return []
        S = self.linearization.S
        out = []
        for f in self.fixed_points:
            w = S @ (math.cos(f.theta), math.sin(f.theta))
            out.append(w / math.hypot(*w))
        return out

    @property
    def degenerate(self):
        return self.cls == "Degenerate"

    def to_dict(self):
        return {
            "x": float(self.point[0]),
            "y": float(self.point[1]),
            "field": self.field,
            "zero_type": self.zero_type,
            "hyperbolic": self.hyperbolic,
            "field_index": self.field_index,
            "twice_index": self.twice_index,
            "index": None if self.index is None else str(self.index),
            "case": self.case,
            "class": self.cls,
            "kappa": self.kappa,
            "Phi": self.Phi,
            "fixed_points": [
                {"theta": f.theta, "slope": f.slope, "stability": f.stability}
                for f in self.fixed_points
            ],
            "flags": list(self.flags),
        }


def _is_hyperbolic(J):
    """No eigenvalue of ``J`` on the imaginary axis (relative tolerance 1e-9)."""
    J = np.asarray(J, dtype=float)
    ev = np.linalg.eigvals(J)
    return bool(np.all(np.abs(ev.real) > 1e-9 * max(np.abs(J).max(), 1e-300)))


def _index_radius(points, i, domain):
    b = domain.box if isinstance(domain, Torus) else domain
    cap = 0.25 * min(b.width, b.height)
    p = points[i]
    dist = domain.distance if isinstance(domain, Torus) else (lambda a, c: math.hypot(a[0] - c[0], a[1] - c[1]))
    gaps = [dist(p, q) for j, q in enumerate(points) if j != i]
    return min([0.3 * g for g in gaps] + [cap])


def analyze_singularities(L: ProtoLineField, domain: Box | Torus | None = None, n=64, samples=256):
    """Reports for all zeros of ``X`` and ``Y`` in ``domain`` (default: the field's own).

    Numerical failures of the classifier propagate; structural degeneracies
    (non-hyperbolic zero, Jordan block, marginal fixed point, both fields
    vanishing) produce a ``Degenerate`` report with a flag naming the cause.
    """
    domain = domain if domain is not None else L.domain
    scale = L.scale
    found = []
    for name, F, other in (("X", L.X, L.Y), ("Y", L.Y, L.X)):
        for z in find_zeros(F, domain, n=n):
            if _vanishes(other, z.point, scale):
                if name == "Y":
                    continue  # already reported from X
                found.append((z.point, "XY", F))
            else:
                found.append((z.point, name, F))
    points = [p for p, _, _ in found]
    reports = []
    for i, (p, name, F) in enumerate(found):
        radius = _index_radius(points, i, domain)
        J = F.jacobian(*p)
        zt = zero_type_from_jacobian(J)
        hyp = _is_hyperbolic(J)
        if zt == "degenerate" and hyp:
            zt = "node"  # repeated real eigenvalue: star or improper node
        flags = []
        try:
            field_index = winding_index_vf(F, p, radius, samples).twice_index // 2
        except IndexComputationError:
            field_index = None
            flags.append("field_index_failed")
        if name == "XY":
            twice = None
            flags.append("both_vanish")
        else:
            try:
                twice = winding_index_lf(L, p, radius, samples).twice_index
            except IndexComputationError:
                twice = None
                flags.append("index_failed")
        rep = SingularityReport(p, name, zt, hyp and name != "XY", field_index, twice,
                                "Degenerate", "Degenerate", radius=radius)
        if name != "XY" and not hyp:
            flags.append("nonhyperbolic")
        elif name != "XY":
            try:
                lin = linearize(L, p)
                rep.linearization = lin
                c = classify(lin.plf)
            except NonGenericLinearization:
                flags.append("non_generic")
            else:
                rep.classification = c
                rep.case = c.case
                rep.kappa, rep.Phi = c.kappa, c.Phi
                rep.fixed_points = c.fixed_points
                if c.case == "Degenerate":
                    flags.append("marginal")
                else:
                    rep.cls = c.darboux
        rep.flags = tuple(flags)
        reports.append(rep)
    return sorted(reports, key=lambda r: (round(r.point[0], 9), round(r.point[1], 9)))
