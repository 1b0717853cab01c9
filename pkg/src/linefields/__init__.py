"""Line fields bisecting pairs of planar vector fields.

Submodules: ``expr`` (expression language), ``fields`` (vector fields,
metrics, bisector), ``index`` (winding indices), ``linear`` (classification
of linear models), ``blowup`` (polar blow-up), ``singularities``,
``portrait``, ``metric`` (bracket-generated metrics), ``scenario``,
``plotting`` and ``cli``.
"""

from .fields import Box, Metric, ProtoLineField, Torus, VectorField, bisector
from .linear import LinearPLF, classify
from .singularities import analyze_singularities

__all__ = [
    "Box", "Metric", "ProtoLineField", "Torus", "VectorField", "bisector", "LinearPLF", "classify",
    "analyze_singularities",
]
__version__ = "0.1.0"
