import numpy as np
import pytest

from pdmarket.demand import DemandRequest, UnboundedDemand, demand, demand_reduced
from pdmarket.expansion import FisherInstance, Pairwise, Plain, reduce_instance
from pdmarket.model import (
    CES,
    CobbDouglas,
    Leontief,
    Linear,
    PdmInstance,
    build_phi,
)


def _d(spec, budget, prices, ceiling=1.0):
    return demand(DemandRequest(spec, budget, np.asarray(prices, float), ceiling))


def test_linear_unique_winner():
    y = _d(Linear(np.array([2.0, 1.0])), 1.0, [1.0, 1.0])
    assert np.allclose(y, [1.0, 0.0])


def test_linear_tie_equal_split():
    y = _d(Linear(np.array([1.0, 1.0])), 1.0, [1.0, 1.0], ceiling=None)
    assert np.allclose(y, [0.5, 0.5])


def test_cobb_douglas_spending_shares():
    y = _d(CobbDouglas(np.array([1.0, 1.0])), 1.0, [1.0, 2.0], ceiling=None)
    assert np.allclose(y, [0.5, 0.25])


def test_leontief_profile():
    y = _d(Leontief(np.array([1.0, 2.0])), 3.0, [1.0, 1.0], ceiling=None)
    assert np.allclose(y, [1.0, 2.0])


def test_ces_closed_form_and_equalization():
    # w=(1,1), rho=1/2, p=(1,4), B=1: x_j = B p_j^{-s} / sum_l p_l^{1-s}, s=2
    spec = CES(np.array([1.0, 1.0]), 0.5)
    y = _d(spec, 1.0, [1.0, 4.0], ceiling=None)
    assert np.allclose(y, [0.8, 0.05])
    lhs = y[0] ** 0.5 * 1.0
    rhs = y[1] ** 0.5 * 4.0
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_budget_exhaustion_strictly_monotone():
    rng = np.random.default_rng(5)
    for _ in range(20):
        w = rng.uniform(0.1, 2.0, 3)
        p = rng.uniform(0.2, 2.0, 3)
        B = float(rng.uniform(0.5, 2.0))
        for spec in (Linear(w), Leontief(w), CobbDouglas(w), CES(w, -0.7), CES(w, 0.6)):
            y = demand(DemandRequest(spec, B, p, ceiling=None))
            assert y @ p == pytest.approx(B, abs=1e-9)


def test_demand_homogeneity():
    rng = np.random.default_rng(6)
    for _ in range(10):
        w = rng.uniform(0.1, 2.0, 3)
        p = rng.uniform(0.2, 2.0, 3)
        B, lam = float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.1, 5.0))
        for spec in (Linear(w), Leontief(w), CobbDouglas(w), CES(w, 0.4)):
            a = demand(DemandRequest(spec, B, p, ceiling=None))
            b = demand(DemandRequest(spec, lam * B, lam * p, ceiling=None))
            assert np.allclose(a, b, atol=1e-9)


def _grid_best(spec, budget, prices, G=200):
    best = -1.0
    fractions = np.arange(G + 1) / G
    for f1 in fractions:
        top = int(round((1 - f1) * G))
        for k in range(top + 1):
            f2 = k / G
            x = budget * np.array([f1, f2, 1.0 - f1 - f2]) / prices
            best = max(best, spec.value(x))
    return best


def test_oracle_beats_budget_grid():
    rng = np.random.default_rng(7)
    for _ in range(3):
        w = rng.uniform(0.1, 2.0, 3)
        p = rng.uniform(0.2, 2.0, 3)
        B = float(rng.uniform(0.5, 2.0))
        for spec in (Linear(w), Leontief(w), CobbDouglas(w), CES(w, -2.0), CES(w, 0.5)):
            y = demand(DemandRequest(spec, B, p, ceiling=None))
            assert spec.value(y) >= _grid_best(spec, B, p) - 1e-6


def test_zero_price_capped_at_ceiling():
    y = _d(Linear(np.array([1.0, 1.0])), 1.0, [0.0, 1.0], ceiling=1.0)
    assert y[0] == 1.0
    y2 = _d(CobbDouglas(np.array([1.0, 1.0])), 1.0, [0.0, 1.0], ceiling=1.0)
    assert y2[0] == 1.0


def test_unbounded_without_ceiling():
    with pytest.raises(UnboundedDemand):
        _d(Linear(np.array([1.0, 1.0])), 1.0, [0.0, 1.0], ceiling=None)


def test_leontief_free_goods():
    # positively priced goods set the scale; free goods come along at t*w
    y = _d(Leontief(np.array([1.0, 1.0])), 1.0, [1.0, 0.0], ceiling=None)
    assert np.allclose(y, [1.0, 1.0])
    # the ceiling can bind before the budget does
    y2 = _d(Leontief(np.array([1.0, 2.0])), 1.0, [1.0, 0.0], ceiling=1.0)
    assert np.allclose(y2, [0.5, 1.0])
    with pytest.raises(UnboundedDemand):
        _d(Leontief(np.array([1.0, 1.0])), 1.0, [0.0, 0.0], ceiling=None)


def test_zero_weight_good_ignored():
    y = _d(Linear(np.array([0.0, 1.0])), 1.0, [0.0, 1.0], ceiling=None)
    assert np.allclose(y, [0.0, 1.0])


def _two_agent_one_issue():
    return PdmInstance(
        np.array([[0], [1]]),
        np.ones(2),
        (Linear(np.array([1.0])), Linear(np.array([1.0]))),
    )


def test_demand_reduced_single_good():
    fisher = reduce_instance(_two_agent_one_issue())
    assert fisher.goods == (Pairwise(0, 1, 0),)
    y = demand_reduced(fisher, 0, np.array([2.0]))
    assert np.allclose(y, [0.5])


def test_demand_reduced_structure():
    # nonzero only on own goods, constant across each issue's group
    pdm = build_phi(3, 1.0, "cobb_douglas")
    fisher = reduce_instance(pdm)
    p = np.full(fisher.num_goods, 0.5)
    for i in range(3):
        y = demand_reduced(fisher, i, p)
        for g, good in enumerate(fisher.goods):
            if i not in (good.i, good.k):
                assert y[g] == 0.0
        for j in range(3):
            own = [
                y[g]
                for g, good in enumerate(fisher.goods)
                if good.j == j and i in (good.i, good.k)
            ]
            assert max(own) - min(own) <= 1e-12


def test_demand_reduced_matches_lifted_pdm_demand():
    from pdmarket.expansion import lift_bundle, project_prices

    pdm = build_phi(3, 1.0, "cobb_douglas")
    fisher = reduce_instance(pdm)
    rng = np.random.default_rng(8)
    p = rng.uniform(0.3, 1.5, fisher.num_goods)
    q = project_prices(pdm, p)
    for i in range(3):
        inner = demand(
            DemandRequest(pdm.utilities[i], float(pdm.budgets[i]), q.row(i), None)
        )
        assert np.allclose(
            demand_reduced(fisher, i, p, ceiling=None), lift_bundle(pdm, i, inner)
        )


def test_demand_reduced_zero_weight_issue():
    pdm = PdmInstance(
        np.array([[0, 0], [1, 1]]),
        np.ones(2),
        (Linear(np.array([1.0, 0.0])), Linear(np.array([1.0, 1.0]))),
    )
    fisher = reduce_instance(pdm)
    y = demand_reduced(fisher, 0, np.full(fisher.num_goods, 1.0))
    for g, good in enumerate(fisher.goods):
        if good.j == 1:
            assert y[g] == 0.0


def test_demand_reduced_needs_provenance():
    fisher = FisherInstance(
        goods=(Plain(0),),
        budgets=np.ones(1),
        utilities=(Linear(np.array([1.0])),),
    )
    with pytest.raises(ValueError):
        demand_reduced(fisher, 0, np.array([1.0]))


def test_request_validation():
    with pytest.raises(ValueError):
        demand(DemandRequest(Linear(np.ones(2)), 1.0, np.array([1.0, -0.5]), 1.0))
    with pytest.raises(ValueError):
        demand(DemandRequest(Linear(np.ones(2)), 1.0, np.array([1.0]), 1.0))
