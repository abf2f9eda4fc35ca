"""JSON serialization for market instances, prices, and solver output.

Two document schemas:

* ``pdm/1``: a public decision market (preferences, budgets, utilities).
* ``fisher/1``: a private-goods market; may carry the source PDM under
  ``provenance``, in which case loading re-runs the reduction so pairwise
  good identities and the cached record stay canonical.

Utility specs serialize as ``{"class": ..., "weights": [...]}`` plus
``rho`` for CES and ``outer``/``groups``/``num_goods`` for the nested
form.  All loaders raise ValueError on malformed documents.
"""

from __future__ import annotations

import json

import numpy as np

from .expansion import FisherInstance, Pairwise, Plain, reduce_instance
from .model import (
    CES,
    CobbDouglas,
    Leontief,
    Linear,
    Outcome,
    PdmInstance,
    PerGood,
    PerIssue,
    Personalized,
    UtilitySpec,
)

PDM_SCHEMA = "pdm/1"
FISHER_SCHEMA = "fisher/1"

_CLASS_NAMES = {
    Linear: "linear",
    Leontief: "leontief",
    CobbDouglas: "cobb_douglas",
    CES: "ces",
}


def _require(doc: dict, key: str, context: str):
    if key not in doc:
        raise ValueError(f"{context}: missing required key {key!r}")
    return doc[key]


def utility_to_dict(spec: UtilitySpec) -> dict:
    for cls, name in _CLASS_NAMES.items():
        if type(spec) is cls:
            out = {"class": name, "weights": np.asarray(spec.weights).tolist()}
            if name == "ces":
                out["rho"] = float(spec.rho)
            return out
    if type(spec).__name__ == "NestedLeontief":
        return {
            "class": "nested_leontief",
            "outer": utility_to_dict(spec.outer),
            "groups": [list(grp) for grp in spec.groups],
            "num_goods": int(spec.num_goods),
        }
    raise ValueError(f"cannot serialize utility class {type(spec).__name__}")


def utility_from_dict(doc: dict) -> UtilitySpec:
    if not isinstance(doc, dict):
        raise ValueError(f"utility: expected an object, got {type(doc).__name__}")
    kind = _require(doc, "class", "utility")
    if kind == "nested_leontief":
        from .model import NestedLeontief

        return NestedLeontief(
            outer=utility_from_dict(_require(doc, "outer", "nested_leontief")),
            groups=tuple(
                tuple(int(g) for g in grp)
                for grp in _require(doc, "groups", "nested_leontief")
            ),
            num_goods=int(_require(doc, "num_goods", "nested_leontief")),
        )
    weights = np.asarray(_require(doc, "weights", f"utility {kind!r}"), dtype=float)
    if kind == "linear":
        return Linear(weights)
    if kind == "leontief":
        return Leontief(weights)
    if kind == "cobb_douglas":
        return CobbDouglas(weights)
    if kind == "ces":
        return CES(weights, float(_require(doc, "rho", "ces utility")))
    raise ValueError(f"unknown utility class {kind!r}")


def pdm_to_dict(pdm: PdmInstance) -> dict:
    return {
        "schema": PDM_SCHEMA,
        "n": pdm.n,
        "m": pdm.m,
        "preferred": pdm.preferred.tolist(),
        "budgets": pdm.budgets.tolist(),
        "utilities": [utility_to_dict(u) for u in pdm.utilities],
    }


def pdm_from_dict(doc: dict) -> PdmInstance:
    if doc.get("schema", PDM_SCHEMA) != PDM_SCHEMA:
        raise ValueError(f"expected schema {PDM_SCHEMA!r}, got {doc.get('schema')!r}")
    preferred = np.asarray(_require(doc, "preferred", "pdm"), dtype=int)
    budgets = np.asarray(_require(doc, "budgets", "pdm"), dtype=float)
    utilities = tuple(
        utility_from_dict(u) for u in _require(doc, "utilities", "pdm")
    )
    pdm = PdmInstance(preferred, budgets, utilities)
    for key, got in (("n", pdm.n), ("m", pdm.m)):
        if key in doc and int(doc[key]) != got:
            raise ValueError(f"pdm: stated {key}={doc[key]} but data implies {got}")
    return pdm


def _good_to_dict(good) -> dict:
    if isinstance(good, Plain):
        return {"kind": "plain", "index": good.index}
    if isinstance(good, Pairwise):
        return {"kind": "pairwise", "i": good.i, "k": good.k, "j": good.j}
    raise ValueError(f"cannot serialize good {good!r}")


def _good_from_dict(doc: dict):
    kind = _require(doc, "kind", "good")
    if kind == "plain":
        return Plain(int(_require(doc, "index", "plain good")))
    if kind == "pairwise":
        return Pairwise(
            int(_require(doc, "i", "pairwise good")),
            int(_require(doc, "k", "pairwise good")),
            int(_require(doc, "j", "pairwise good")),
        )
    raise ValueError(f"unknown good kind {kind!r}")


def fisher_to_dict(fisher: FisherInstance) -> dict:
    out = {
        "schema": FISHER_SCHEMA,
        "goods": [_good_to_dict(g) for g in fisher.goods],
        "budgets": fisher.budgets.tolist(),
        "utilities": [utility_to_dict(u) for u in fisher.utilities],
    }
    if fisher.provenance is not None:
        out["provenance"] = pdm_to_dict(fisher.provenance.pdm)
    return out


def fisher_from_dict(doc: dict) -> FisherInstance:
    if doc.get("schema", FISHER_SCHEMA) != FISHER_SCHEMA:
        raise ValueError(
            f"expected schema {FISHER_SCHEMA!r}, got {doc.get('schema')!r}"
        )
    goods = tuple(_good_from_dict(g) for g in _require(doc, "goods", "fisher"))
    if doc.get("provenance") is not None:
        # Rebuild through the reduction so the provenance record (groups,
        # contested sets, restricted specs) is reconstructed, then confirm
        # the stored good list matches what the reduction produces.
        fisher = reduce_instance(pdm_from_dict(doc["provenance"]))
        if fisher.goods != goods:
            raise ValueError("fisher: stored goods disagree with provenance")
        return fisher
    budgets = np.asarray(_require(doc, "budgets", "fisher"), dtype=float)
    utilities = tuple(
        utility_from_dict(u) for u in _require(doc, "utilities", "fisher")
    )
    return FisherInstance(goods=goods, budgets=budgets, utilities=utilities)


def instance_from_dict(doc: dict):
    """Dispatch on the ``schema`` field; returns a PdmInstance or FisherInstance."""
    if not isinstance(doc, dict):
        raise ValueError("instance document must be a JSON object")
    schema = _require(doc, "schema", "instance")
    if schema == PDM_SCHEMA:
        return pdm_from_dict(doc)
    if schema == FISHER_SCHEMA:
        return fisher_from_dict(doc)
    raise ValueError(f"unknown schema {schema!r}")


def instance_to_dict(instance) -> dict:
    if isinstance(instance, PdmInstance):
        return pdm_to_dict(instance)
    if isinstance(instance, FisherInstance):
        return fisher_to_dict(instance)
    raise ValueError(f"cannot serialize {type(instance).__name__}")


_PRICE_KINDS = {"per_good": PerGood, "per_issue": PerIssue, "personalized": Personalized}


def prices_to_dict(prices) -> dict:
    for kind, cls in _PRICE_KINDS.items():
        if isinstance(prices, cls):
            return {"kind": kind, "values": np.asarray(prices.values).tolist()}
    arr = np.asarray(prices, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return {"kind": "per_side", "values": arr.tolist()}
    raise ValueError(f"cannot serialize prices of type {type(prices).__name__}")


def prices_from_dict(doc):
    """Accepts a tagged object or a bare array (dimension decides the kind)."""
    if isinstance(doc, dict):
        kind = _require(doc, "kind", "prices")
        values = np.asarray(_require(doc, "values", "prices"), dtype=float)
        if kind in _PRICE_KINDS:
            return _PRICE_KINDS[kind](values)
        if kind == "per_side":
            if values.ndim != 3 or values.shape[-1] != 2:
                raise ValueError("per_side prices must have shape (n, m, 2)")
            return values
        raise ValueError(f"unknown price kind {kind!r}")
    values = np.asarray(doc, dtype=float)
    if values.ndim == 1:
        return PerGood(values)
    if values.ndim == 2:
        return Personalized(values)
    if values.ndim == 3 and values.shape[-1] == 2:
        return values
    raise ValueError(f"cannot infer price kind from shape {values.shape}")


def outcome_to_dict(outcome: Outcome) -> dict:
    return {"z": outcome.z.tolist()}


def outcome_from_dict(doc) -> Outcome:
    if isinstance(doc, dict):
        doc = _require(doc, "z", "outcome")
    return Outcome(np.asarray(doc, dtype=float))


def solve_result_to_dict(result) -> dict:
    return {
        "outcome": None if result.outcome is None else result.outcome.z.tolist(),
        "allocation": (
            None if result.allocation is None else np.asarray(result.allocation).tolist()
        ),
        "prices": prices_to_dict(result.prices),
        "objective": float(result.objective),
        "iterations": int(result.iterations),
        "residual_feasibility": float(result.residual_feasibility),
        "residual_stationarity": float(result.residual_stationarity),
        "excluded_agents": list(result.excluded_agents),
    }


def to_jsonable(obj):
    """Recursively convert numpy containers and scalars for json.dump."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    # bool subclasses int, so test it first
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def dumps(doc: dict, indent: int | None = 2) -> str:
    return json.dumps(to_jsonable(doc), indent=indent)


def loads(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("top-level JSON value must be an object")
    return doc
