"""JSON round trips for instances, prices, outcomes, and solver output."""

import json

import numpy as np
import pytest

from pdmarket.expansion import FisherInstance, Pairwise, Plain, reduce_instance
from pdmarket.model import (
    CES,
    CobbDouglas,
    Leontief,
    Linear,
    NestedLeontief,
    Outcome,
    PdmInstance,
    PerGood,
    PerIssue,
    Personalized,
    build_phi,
)
from pdmarket.serialize import (
    FISHER_SCHEMA,
    PDM_SCHEMA,
    dumps,
    fisher_from_dict,
    fisher_to_dict,
    instance_from_dict,
    instance_to_dict,
    loads,
    outcome_from_dict,
    outcome_to_dict,
    pdm_from_dict,
    pdm_to_dict,
    prices_from_dict,
    prices_to_dict,
    solve_result_to_dict,
    to_jsonable,
    utility_from_dict,
    utility_to_dict,
)
from pdmarket.solver import solve_fisher_eg, solve_pdm_nash


def _same_spec(a, b):
    if type(a) is not type(b):
        return False
    if isinstance(a, NestedLeontief):
        return (
            _same_spec(a.outer, b.outer)
            and a.groups == b.groups
            and a.num_goods == b.num_goods
        )
    if not np.array_equal(a.weights, b.weights):
        return False
    if isinstance(a, CES):
        return a.rho == b.rho
    return True


def test_pdm_round_trip_every_family():
    pdm = PdmInstance(
        np.array([[0, 1], [1, 0], [0, 0], [1, 1]]),
        np.array([1.0, 2.0, 0.5, 1.5]),
        (
            Linear(np.array([1.0, 2.0])),
            Leontief(np.array([0.5, 1.0])),
            CobbDouglas(np.array([2.0, 3.0])),
            CES(np.array([1.0, 1.0]), -1.0),
        ),
    )
    doc = loads(dumps(pdm_to_dict(pdm)))
    assert doc["schema"] == PDM_SCHEMA
    assert doc["n"] == 4 and doc["m"] == 2
    back = pdm_from_dict(doc)
    assert np.array_equal(back.preferred, pdm.preferred)
    assert np.array_equal(back.budgets, pdm.budgets)
    assert all(_same_spec(a, b) for a, b in zip(back.utilities, pdm.utilities))


def test_pdm_document_validation():
    pdm = PdmInstance(
        np.array([[0], [1]]),
        np.ones(2),
        (Linear(np.array([1.0])), Linear(np.array([1.0]))),
    )
    doc = pdm_to_dict(pdm)
    doc["n"] = 5
    with pytest.raises(ValueError, match="stated n=5"):
        pdm_from_dict(doc)
    with pytest.raises(ValueError, match="missing required key"):
        pdm_from_dict({"schema": PDM_SCHEMA, "preferred": [[0], [1]]})
    with pytest.raises(ValueError, match="schema"):
        pdm_from_dict({"schema": "fisher/1"})


def test_fisher_round_trip_without_provenance():
    fisher = FisherInstance(
        (Plain(0), Plain(1), Plain(2)),
        np.array([1.0, 2.0]),
        (
            NestedLeontief(Linear(np.array([1.0, 1.0])), ((0, 1), (2,)), 3),
            Linear(np.array([0.5, 1.0, 2.0])),
        ),
    )
    back = instance_from_dict(loads(dumps(instance_to_dict(fisher))))
    assert isinstance(back, FisherInstance)
    assert back.goods == fisher.goods
    assert back.provenance is None
    assert np.array_equal(back.budgets, fisher.budgets)
    assert all(_same_spec(a, b) for a, b in zip(back.utilities, fisher.utilities))


def test_fisher_round_trip_rebuilds_provenance():
    fisher = reduce_instance(build_phi(3, 1.0, "cobb_douglas"))
    doc = loads(dumps(fisher_to_dict(fisher)))
    assert doc["schema"] == FISHER_SCHEMA
    assert doc["provenance"]["schema"] == PDM_SCHEMA
    back = fisher_from_dict(doc)
    assert back.goods == fisher.goods
    assert back.provenance is not None
    assert back.provenance.groups == fisher.provenance.groups
    assert back.provenance.contested == fisher.provenance.contested


def test_fisher_rejects_goods_that_contradict_provenance():
    doc = fisher_to_dict(reduce_instance(build_phi(3, 1.0, "linear")))
    doc["goods"][0], doc["goods"][1] = doc["goods"][1], doc["goods"][0]
    with pytest.raises(ValueError, match="disagree with provenance"):
        fisher_from_dict(doc)


def test_instance_dispatch_and_errors():
    pdm = build_phi(3, 1.0, "linear")
    assert isinstance(instance_from_dict(pdm_to_dict(pdm)), PdmInstance)
    with pytest.raises(ValueError, match="unknown schema"):
        instance_from_dict({"schema": "pdm/2"})
    with pytest.raises(ValueError):
        instance_from_dict([1, 2, 3])
    with pytest.raises(ValueError):
        instance_to_dict("not a market")
    with pytest.raises(ValueError, match="missing required key"):
        instance_from_dict({"preferred": [[0], [1]]})


def test_utility_document_errors():
    with pytest.raises(ValueError, match="unknown utility class"):
        utility_from_dict({"class": "quadratic", "weights": [1.0]})
    with pytest.raises(ValueError, match="missing required key"):
        utility_from_dict({"class": "ces", "weights": [1.0]})
    with pytest.raises(ValueError):
        utility_from_dict("linear")
    with pytest.raises(ValueError):
        utility_to_dict(object())


def test_nested_spec_standalone_round_trip():
    spec = NestedLeontief(CES(np.array([1.0, 2.0]), 0.5), ((0, 1), (2,)), 3)
    doc = utility_to_dict(spec)
    assert doc["class"] == "nested_leontief"
    assert doc["outer"] == {"class": "ces", "weights": [1.0, 2.0], "rho": 0.5}
    assert _same_spec(utility_from_dict(doc), spec)


def test_price_round_trips():
    for prices, kind in (
        (PerGood(np.array([1.0, 2.0])), "per_good"),
        (PerIssue(np.array([0.5])), "per_issue"),
        (Personalized(np.array([[1.0, 2.0], [3.0, 4.0]])), "personalized"),
    ):
        doc = prices_to_dict(prices)
        assert doc["kind"] == kind
        back = prices_from_dict(doc)
        assert type(back) is type(prices)
        assert np.array_equal(back.values, prices.values)

    cube = np.zeros((2, 1, 2))
    cube[0, 0, 0] = 1.0
    doc = prices_to_dict(cube)
    assert doc["kind"] == "per_side"
    back = prices_from_dict(doc)
    assert isinstance(back, np.ndarray)
    assert np.array_equal(back, cube)


def test_bare_price_arrays_infer_their_kind():
    assert isinstance(prices_from_dict([1.0, 2.0]), PerGood)
    assert isinstance(prices_from_dict([[1.0], [2.0]]), Personalized)
    cube = prices_from_dict([[[1.0, 0.0]], [[0.0, 1.0]]])
    assert isinstance(cube, np.ndarray) and cube.shape == (2, 1, 2)
    with pytest.raises(ValueError):
        prices_from_dict(np.zeros((2, 2, 3)))
    with pytest.raises(ValueError, match="unknown price kind"):
        prices_from_dict({"kind": "flat", "values": [1.0]})
    with pytest.raises(ValueError):
        prices_from_dict({"kind": "per_side", "values": [1.0]})
    with pytest.raises(ValueError):
        prices_to_dict(np.ones(3))


def test_outcome_round_trip():
    out = Outcome(np.array([[0.25, 0.75], [1.0, 0.0]]))
    doc = outcome_to_dict(out)
    assert doc == {"z": [[0.25, 0.75], [1.0, 0.0]]}
    assert np.array_equal(outcome_from_dict(doc).z, out.z)
    assert np.array_equal(outcome_from_dict([[0.25, 0.75]]).z, [[0.25, 0.75]])


def test_solve_results_serialize_for_both_forms():
    pdm = PdmInstance(
        np.array([[0], [1]]),
        np.ones(2),
        (Linear(np.array([1.0])), Linear(np.array([1.0]))),
    )
    doc = solve_result_to_dict(solve_pdm_nash(pdm))
    assert set(doc) == {
        "outcome",
        "allocation",
        "prices",
        "objective",
        "iterations",
        "residual_feasibility",
        "residual_stationarity",
        "excluded_agents",
    }
    assert doc["allocation"] is None
    assert doc["prices"]["kind"] == "per_issue"
    assert doc["excluded_agents"] == []
    json.loads(dumps(doc))

    reduced = solve_result_to_dict(solve_fisher_eg(reduce_instance(pdm)))
    assert reduced["outcome"] is None
    assert reduced["prices"]["kind"] == "per_good"
    assert np.asarray(reduced["allocation"]).shape == (2, 1)
    json.loads(dumps(reduced))


def test_jsonable_conversion_keeps_python_types():
    doc = to_jsonable(
        {
            "ok": np.bool_(True),
            "x": np.float64(1.5),
            "n": np.int64(3),
            "arr": np.arange(2),
            "nested": (np.float32(0.5), {"deep": np.bool_(False)}),
        }
    )
    assert doc["ok"] is True
    assert doc["x"] == 1.5 and isinstance(doc["x"], float)
    assert doc["n"] == 3 and isinstance(doc["n"], int)
    assert doc["arr"] == [0, 1]
    assert doc["nested"][1]["deep"] is False
    text = dumps({"passed": np.bool_(True)})
    assert '"passed": true' in text


def test_loads_rejects_malformed_documents():
    with pytest.raises(ValueError, match="invalid JSON"):
        loads("{not json")
    with pytest.raises(ValueError, match="must be an object"):
        loads("[1, 2]")
    assert loads('{"a": 1}') == {"a": 1}
