"""JSON scenario files describing a proto-line-field and command parameters.

Schema (keys not listed are rejected)::

    {
      "name": "lemon",
      "X": ["x + y", "y - x"],
      "Y": ["1", "1"],
      "metric": {"g11": "1", "g12": "0", "g22": "1"},      optional
      "domain": {"box": [-1, 1, -1, 1]}                     or
                {"torus": [6.283185307179586, 6.283185307179586], "origin": [0, 0]},
      "params": {"lam": 1.0},                               substituted for "{lam}"
      "sweep": {"param": "lam", "values": [0.5, 1.0]}       or "start", "stop", "num"
      "point": [0, 0],                                      singular point for scan
      "portrait": {"seeds": 20, "step": 0.005, "max_len": 8.0, "r0": 0.001},
      "index": {"samples": 256},
      "blowup": {"delta": 0.5, "directions": 8},
      "metric_grid": {"box": [-1, 1, -1, 1]},
      "seed": 0
    }

Expressions are strings in the expression grammar.  ``{name}`` placeholders
are replaced by ``repr`` of the parameter value before parsing.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .expr import ExprError
from .fields import Box, FieldError, Metric, ProtoLineField, Torus, VectorField

__all__ = ["ScenarioError", "Scenario", "load_scenario", "parse_scenario"]

_KEYS = {
    "name", "description", "X", "Y", "metric", "domain", "params", "sweep", "point", "portrait",
    "index", "blowup", "metric_grid", "seed",
}
_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


class ScenarioError(ValueError):
    """Invalid scenario file or parameters."""


def _substitute(text, params):
    def repl(m):
        key = m.group(1)
        if key not in params:
            raise ScenarioError(f"unbound parameter '{{{key}}}' in expression {text!r}")
        return f"({float(params[key])!r})"
    if not isinstance(text, str):
        raise ScenarioError(f"expression must be a string, got {text!r}")
    return _PLACEHOLDER.sub(repl, text)


def _pair(raw, what):
    if not (isinstance(raw, (list, tuple)) and len(raw) == 2):
        raise ScenarioError(f"{what} must be a list of two expressions")
    return tuple(raw)


def _positive(value, what):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"{what} must be a number, got {value!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise ScenarioError(f"{what} must be positive, got {value!r}")
    return v


def _box(raw, what="box"):
    if not (isinstance(raw, (list, tuple)) and len(raw) == 4):
        raise ScenarioError(f"{what} must be [xmin, xmax, ymin, ymax]")
    try:
        return Box(*map(float, raw))
    except (TypeError, ValueError, FieldError) as e:
        raise ScenarioError(f"invalid {what}: {e}") from None


@dataclass
class Scenario:
    name: str
    X: tuple
    Y: tuple
    metric: dict | None = None
    domain: Box | Torus = field(default_factory=lambda: Box(-1.0, 1.0, -1.0, 1.0))
    params: dict = field(default_factory=dict)
    sweep: dict | None = None
    point: tuple = (0.0, 0.0)
    portrait: dict = field(default_factory=dict)
    index: dict = field(default_factory=dict)
    blowup: dict = field(default_factory=dict)
    metric_grid: dict = field(default_factory=dict)
    seed: int = 0

    def expressions(self, params=None):
        """Component strings after parameter substitution."""
        p = dict(self.params)
        p.update(params or {})
        X = tuple(_substitute(e, p) for e in self.X)
        Y = tuple(_substitute(e, p) for e in self.Y)
        g = None
        if self.metric is not None:
            g = tuple(_substitute(self.metric.get(k, d), p) for k, d in (("g11", "1"), ("g12", "0"), ("g22", "1")))
        return X, Y, g

    def build(self, params=None) -> ProtoLineField:
        X, Y, g = self.expressions(params)
        try:
            metric = Metric(*g) if g is not None else None
            return ProtoLineField(VectorField(*X), VectorField(*Y), metric, self.domain)
        except ExprError as e:
            raise ScenarioError(f"bad expression: {e}") from e
        except FieldError as e:
            raise ScenarioError(str(e)) from e

    def sweep_values(self):
        if not self.sweep:
            raise ScenarioError("scenario has no 'sweep' section")
        s = self.sweep
        if "param" not in s:
            raise ScenarioError("sweep needs 'param'")
        if "values" in s:
            vals = [float(v) for v in s["values"]]
        elif {"start", "stop", "num"} <= set(s):
            n = int(s["num"])
            if n < 1:
                raise ScenarioError("sweep 'num' must be at least 1")
            vals = [float(v) for v in np.linspace(float(s["start"]), float(s["stop"]), n)]
        else:
            raise ScenarioError("sweep needs 'values' or 'start', 'stop', 'num'")
        return s["param"], vals


def parse_scenario(data: dict, name="scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = set(data) - _KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    for k in ("X", "Y"):
        if k not in data:
            raise ScenarioError(f"scenario is missing '{k}'")
    dom = data.get("domain", {"box": [-1, 1, -1, 1]})
    if "torus" in dom:
        per = dom["torus"]
        if not (isinstance(per, (list, tuple)) and len(per) == 2):
            raise ScenarioError("torus must be [px, py]")
        origin = tuple(map(float, dom.get("origin", (0.0, 0.0))))
        domain = Torus(_positive(per[0], "torus period"), _positive(per[1], "torus period"), origin)
    elif "box" in dom:
        domain = _box(dom["box"])
    else:
        raise ScenarioError("domain needs 'box' or 'torus'")
    metric = data.get("metric")
    if metric is not None:
        if not isinstance(metric, dict) or set(metric) - {"g11", "g12", "g22"}:
            raise ScenarioError("metric must be an object with keys g11, g12, g22")
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise ScenarioError("params must be an object")
    portrait = dict(data.get("portrait", {}))
    for k in ("step", "max_len", "r0"):
        if k in portrait:
            _positive(portrait[k], f"portrait.{k}")
    if "seeds" in portrait and not isinstance(portrait["seeds"], list):
        portrait["seeds"] = int(_positive(portrait["seeds"], "portrait.seeds"))
    if "box" in portrait:
        portrait["box"] = _box(portrait["box"], "portrait.box")
    blowup = dict(data.get("blowup", {}))
    if "delta" in blowup:
        _positive(blowup["delta"], "blowup.delta")
    sc = Scenario(
        name=str(data.get("name", name)),
        X=_pair(data["X"], "X"),
        Y=_pair(data["Y"], "Y"),
        metric=metric,
        domain=domain,
        params={k: float(v) for k, v in params.items()},
        sweep=data.get("sweep"),
        point=tuple(map(float, data.get("point", (0.0, 0.0)))),
        portrait=portrait,
        index=dict(data.get("index", {})),
        blowup=blowup,
        metric_grid=dict(data.get("metric_grid", {})),
        seed=int(data.get("seed", 0)),
    )
    # referenced expressions must parse with the default parameters
    if sc.sweep is not None:
        param, vals = sc.sweep_values()
        sc.build({param: vals[0]})
    else:
        sc.build()
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON: {e}") from e
    return parse_scenario(data, name=path.stem)
