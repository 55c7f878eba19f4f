"""JSON round-trip for problem instances.

Document keys: ``type`` (lp | qp | knapsack | grid) plus whichever of ``A``,
``b``, ``Q``, ``lambda``, ``weights``, ``capacity``, ``rows``, ``cols`` the
type needs. LPs may also carry ``nonneg``, ``A_eq`` and ``b_eq``; a QP with
constraints stores its polyhedron under the same LP keys.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import GridFlowInstance
from .knapsack import KnapsackInstance
from .lp import LPInstance
from .qp import QPInstance


def _lp_fields(lp: LPInstance) -> dict:
    doc = {"A": lp.A.tolist(), "b": lp.b.tolist(), "nonneg": lp.nonneg}
    if lp.A_eq is not None:
        doc["A_eq"] = lp.A_eq.tolist()
        doc["b_eq"] = lp.b_eq.tolist()
    return doc


def instance_to_dict(inst) -> dict:
    if isinstance(inst, GridFlowInstance):
        return {"type": "grid", "rows": inst.rows, "cols": inst.cols}
    if isinstance(inst, LPInstance):
        return {"type": "lp", **_lp_fields(inst)}
    if isinstance(inst, QPInstance):
        doc = {"type": "qp", "Q": inst.Q.tolist(), "lambda": inst.lam}
        if inst.constraints is not None:
            doc.update(_lp_fields(inst.constraints))
        return doc
    if isinstance(inst, KnapsackInstance):
        return {"type": "knapsack", "weights": inst.weights.tolist(), "capacity": inst.capacity}
    raise TypeError(f"cannot serialise {type(inst).__name__}")


def _lp_from(doc: dict) -> LPInstance:
    A = np.asarray(doc.get("A", []), dtype=float)
    if A.size == 0:
        n = len(doc["A_eq"][0])
        A = np.zeros((0, n))
    return LPInstance(
        A,
        np.asarray(doc.get("b", []), dtype=float),
        nonneg=bool(doc.get("nonneg", True)),
        A_eq=doc.get("A_eq"),
        b_eq=doc.get("b_eq"),
    )


def instance_from_dict(doc: dict):
    kind = doc.get("type")
    if kind == "lp":
        return _lp_from(doc)
    if kind == "qp":
        has_poly = "A" in doc or "A_eq" in doc
        return QPInstance(np.asarray(doc["Q"], dtype=float), float(doc.get("lambda", 1.0)),
                          _lp_from(doc) if has_poly else None)
    if kind == "knapsack":
        return KnapsackInstance(np.asarray(doc["weights"], dtype=float), float(doc["capacity"]))
    if kind == "grid":
        return GridFlowInstance(int(doc["rows"]), int(doc["cols"]))
    raise ValueError(f"unknown instance type {kind!r}")


def save_instance(inst, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=2))


def load_instance(path):
    return instance_from_dict(json.loads(Path(path).read_text()))
