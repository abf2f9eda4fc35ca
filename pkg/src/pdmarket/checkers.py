"""Equilibrium checkers: verdicts with per-condition residuals.

Every checker evaluates a fixed list of conditions, records an absolute
residual and a threshold for each, and reports the AND of the per-condition
passes. Demand-set membership is always certified by value, never identity:
the submitted bundle's utility must come within tol*(1 + |u*|) of the demand
oracle's optimum, since demand sets can be non-singleton. All other
thresholds are absolute.

The pairwise checkers construct their clearing witness explicitly, taking
z_j0 as the largest side-0 holding and z_j1 as the clamped complement;
whenever any witness works, this one does.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .demand import DemandRequest, demand
from .expansion import FisherInstance, Plain
from .model import (
    CES,
    CobbDouglas,
    Leontief,
    Linear,
    NestedLeontief,
    Outcome,
    PdmInstance,
    PerGood,
    Personalized,
    public_bundle,
)


class UnsupportedClass(TypeError):
    """The requested pricing notion has no test for this utility family."""


@dataclass(frozen=True)
class Condition:
    name: str
    residual: float
    threshold: float
    passed: bool


@dataclass(frozen=True)
class EquilibriumReport:
    verdict: bool
    conditions: tuple
    witness: Outcome | None = None

    def condition(self, name: str) -> Condition:
        for cond in self.conditions:
            if cond.name == name:
                return cond
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "verdict": bool(self.verdict),
            "conditions": [
                {
                    "name": c.name,
                    "residual": float(c.residual),
                    "threshold": float(c.threshold),
                    "passed": bool(c.passed),
                }
                for c in self.conditions
            ],
            "witness": None if self.witness is None else self.witness.z.tolist(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _cond(name: str, residual: float, threshold: float) -> Condition:
    residual = float(residual)
    return Condition(name, residual, float(threshold), residual <= threshold)


def _report(conditions, witness=None) -> EquilibriumReport:
    conditions = tuple(conditions)
    return EquilibriumReport(
        verdict=all(c.passed for c in conditions),
        conditions=conditions,
        witness=witness,
    )


def _price_values(prices) -> np.ndarray:
    return prices.values if hasattr(prices, "values") else np.asarray(prices, float)


def _demand_gap(spec, budget, prices, bundle):
    """(u(oracle) - u(bundle), |u(oracle)|) for the value-membership test."""
    d = demand(DemandRequest(spec, budget, prices, ceiling=1.0))
    du = spec.value(d)
    return du - spec.value(bundle), abs(du)


def check_me(fisher: FisherInstance, allocation, prices, tol: float = 1e-6):
    """Fisher market equilibrium: optimal demands plus market clearing."""
    alloc = np.asarray(allocation, dtype=float)
    p = _price_values(prices)
    n, num_goods = fisher.n, fisher.num_goods
    if alloc.shape != (n, num_goods):
        raise ValueError("allocation must be n x goods")

    afford = max(
        float(alloc[i] @ p - fisher.budgets[i]) for i in range(n)
    )
    gaps, scale = [], 0.0
    for i in range(n):
        gap, du = _demand_gap(fisher.utilities[i], fisher.budgets[i], p, alloc[i])
        gaps.append(gap)
        scale = max(scale, du)
    sold = alloc.sum(axis=0)
    oversell = float(np.max(sold - 1.0)) if num_goods else 0.0
    priced = p > tol
    undersell = float(np.max(1.0 - sold[priced])) if priced.any() else 0.0

    return _report(
        [
            _cond("affordable", afford, tol),
            _cond("demand_optimal", max(gaps), tol * (1.0 + scale)),
            _cond("supply_feasible", oversell, tol),
            _cond("priced_goods_sold_out", undersell, tol),
        ]
    )


def _issue_outcome_from_bundles(pdm: PdmInstance, bundles: np.ndarray) -> np.ndarray:
    """Issue-pricing outcome: purchases accumulate per side, z_ja = sum."""
    z = np.zeros((pdm.m, 2))
    for j in range(pdm.m):
        for a in (0, 1):
            z[j, a] = bundles[pdm.preferred[:, j] == a, j].sum()
    return z


def check_ime(pdm: PdmInstance, bundles, prices, tol: float = 1e-6):
    """Issue-pricing equilibrium: one common price per issue.

    Linear instances delegate to check_me on the Fisher market with the
    same weights, which defines issue pricing there. Cobb-Douglas and CES
    are certified by market clearing, budget exhaustion, and the
    equal-product first-order condition x_ij^c p_j = min_l x_il^c p_l over
    purchased issues (c = 1 for Cobb-Douglas, 1 - rho for CES). Other
    families raise UnsupportedClass.
    """
    y = np.asarray(bundles, dtype=float)
    p = _price_values(prices)
    if y.shape != (pdm.n, pdm.m):
        raise ValueError("bundles must be n x m")
    if p.shape != (pdm.m,):
        raise ValueError("one price per issue required")

    kinds = {type(spec) for spec in pdm.utilities}
    linearish = all(
        isinstance(s, Linear) or (isinstance(s, CES) and s.rho == 1.0)
        for s in pdm.utilities
    )
    if linearish:
        weights = tuple(Linear(s.weights) for s in pdm.utilities)
        twin = FisherInstance(
            tuple(Plain(j) for j in range(pdm.m)), pdm.budgets, weights
        )
        return check_me(twin, y, PerGood(p), tol)
    if not kinds <= {CobbDouglas, CES}:
        raise UnsupportedClass(
            "issue pricing is tested for linear, Cobb-Douglas, and CES only"
        )

    z = _issue_outcome_from_bundles(pdm, y)
    sums = z.sum(axis=1)
    oversell = float(np.max(sums - 1.0))
    priced = p > tol
    undersell = float(np.max(1.0 - sums[priced])) if priced.any() else 0.0
    budget_gap = float(np.max(np.abs(y @ p - pdm.budgets)))

    foc = 0.0
    for i in range(pdm.n):
        spec = pdm.utilities[i]
        c = 1.0 if isinstance(spec, CobbDouglas) else 1.0 - spec.rho
        x = z[np.arange(pdm.m), pdm.preferred[i]]
        products = x**c * p
        purchased = y[i] * p > tol
        if purchased.any():
            foc = max(foc, float(products[purchased].max() - products.min()))

    return _report(
        [
            _cond("supply_feasible", oversell, tol),
            _cond("priced_issues_sold_out", undersell, tol),
            _cond("budget_exhausted", budget_gap, tol),
            _cond("equal_product_optimality", foc, tol),
        ]
    )


def _pairwise_witness(pdm: PdmInstance, y: np.ndarray) -> np.ndarray:
    """z_j0 = max side-0 holding (0 when that side is empty), z_j1 clamped."""
    z = np.zeros((pdm.m, 2))
    for j in range(pdm.m):
        side0 = pdm.preferred[:, j] == 0
        z0 = float(y[side0, j].max()) if side0.any() else 0.0
        z[j] = (z0, max(1.0 - z0, 0.0))
    return z


def _witness_outcome(z: np.ndarray) -> Outcome:
    clipped = np.clip(z, 0.0, 1.0)
    over = clipped.sum(axis=1) > 1.0
    if over.any():
        clipped[over, 1] = 1.0 - clipped[over, 0]
    return Outcome(clipped)


def check_pme(pdm: PdmInstance, bundles, prices, tol: float = 1e-6):
    """Pairwise (personalized) pricing equilibrium.

    Conditions: per-agent affordability and demand optimality at her price
    row, then existence of the clearing witness; holdings may not exceed
    the witness, and must equal it on issues the agent actually pays for.
    """
    y = np.asarray(bundles, dtype=float)
    q = _price_values(prices)
    if y.shape != (pdm.n, pdm.m):
        raise ValueError("bundles must be n x m")
    if q.shape != (pdm.n, pdm.m):
        raise ValueError("personalized prices must be n x m")

    afford = max(float(y[i] @ q[i] - pdm.budgets[i]) for i in range(pdm.n))
    gaps, scale = [], 0.0
    for i in range(pdm.n):
        gap, du = _demand_gap(pdm.utilities[i], pdm.budgets[i], q[i], y[i])
        gaps.append(gap)
        scale = max(scale, du)

    z = _pairwise_witness(pdm, y)
    zx = z[np.arange(pdm.m), pdm.preferred]
    witness_sum = float(np.max(z.sum(axis=1) - 1.0))
    overhold = float(np.max(y - zx))
    paying = q > tol
    pinned = float(np.max((zx - y)[paying])) if paying.any() else 0.0

    return _report(
        [
            _cond("affordable", afford, tol),
            _cond("demand_optimal", max(gaps), tol * (1.0 + scale)),
            _cond("witness_sum", witness_sum, tol),
            _cond("consumption_bound", overhold, tol),
            _cond("priced_issues_pinned", pinned, tol),
        ],
        witness=_witness_outcome(z),
    )


def check_delta_eq(
    fisher: FisherInstance, allocation, prices, delta: float, tol: float = 1e-6
):
    """Approximate Fisher equilibrium: exact demands, delta-relaxed clearing.

    Demands stay tol-certified (the definition relaxes clearing only);
    goods priced above delta must sell to within delta, and no good may
    oversell by more than delta.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    alloc = np.asarray(allocation, dtype=float)
    p = _price_values(prices)
    n, num_goods = fisher.n, fisher.num_goods
    if alloc.shape != (n, num_goods):
        raise ValueError("allocation must be n x goods")

    afford = max(float(alloc[i] @ p - fisher.budgets[i]) for i in range(n))
    gaps, scale = [], 0.0
    for i in range(n):
        gap, du = _demand_gap(fisher.utilities[i], fisher.budgets[i], p, alloc[i])
        gaps.append(gap)
        scale = max(scale, du)
    sold = alloc.sum(axis=0)
    oversell = float(np.max(sold - 1.0)) if num_goods else 0.0
    priced = p > delta
    undersell = float(np.max(1.0 - sold[priced])) if priced.any() else 0.0

    return _report(
        [
            _cond("affordable", afford, tol),
            _cond("demand_optimal", max(gaps), tol * (1.0 + scale)),
            _cond("oversell_within_delta", oversell, delta),
            _cond("priced_goods_sell_within_delta", undersell, delta),
        ]
    )


def check_delta_pme(
    pdm: PdmInstance, bundles, prices, delta: float, tol: float = 1e-6
):
    """Approximate pairwise equilibrium, all clearing bounds relaxed by delta.

    The pinning condition only binds where an agent's personalized price
    exceeds n*delta.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    y = np.asarray(bundles, dtype=float)
    q = _price_values(prices)
    if y.shape != (pdm.n, pdm.m):
        raise ValueError("bundles must be n x m")
    if q.shape != (pdm.n, pdm.m):
        raise ValueError("personalized prices must be n x m")

    afford = max(float(y[i] @ q[i] - pdm.budgets[i]) for i in range(pdm.n))
    gaps, scale = [], 0.0
    for i in range(pdm.n):
        gap, du = _demand_gap(pdm.utilities[i], pdm.budgets[i], q[i], y[i])
        gaps.append(gap)
        scale = max(scale, du)

    z = _pairwise_witness(pdm, y)
    zx = z[np.arange(pdm.m), pdm.preferred]
    witness_sum = float(np.max(z.sum(axis=1) - 1.0))
    overhold = float(np.max(y - zx))
    paying = q > pdm.n * delta
    pinned = float(np.max((zx - y)[paying])) if paying.any() else 0.0

    return _report(
        [
            _cond("affordable", afford, tol),
            _cond("demand_optimal", max(gaps), tol * (1.0 + scale)),
            _cond("witness_sum_within_delta", witness_sum, delta),
            _cond("consumption_within_delta", overhold, delta),
            _cond("priced_issues_pinned_within_delta", pinned, delta),
        ],
        witness=_witness_outcome(z),
    )


def side_prices_from_pme(pdm: PdmInstance, prices) -> np.ndarray:
    """Per-side price cube (n, m, 2): each agent pays only on her side."""
    q = _price_values(prices)
    out = np.zeros((pdm.n, pdm.m, 2))
    rows = np.arange(pdm.m)
    for i in range(pdm.n):
        out[i, rows, pdm.preferred[i]] = q[i]
    return out


def check_lindahl(pdm: PdmInstance, outcome: Outcome, prices, tol: float = 1e-6):
    """Personalized per-side pricing of a shared outcome.

    ``prices`` is an (n, m, 2) cube: agent i pays prices[i, j, a] per unit
    of probability on alternative a of issue j. Agents must find the shared
    outcome affordable and unimprovable within budget; the producer side
    reduces to per-issue balance of the two aggregated side prices.
    """
    cube = np.asarray(prices, dtype=float)
    if cube.shape != (pdm.n, pdm.m, 2):
        raise ValueError("per-side prices must be n x m x 2")
    if np.any(cube < 0):
        raise ValueError("prices must be nonnegative")

    costs = np.tensordot(cube, outcome.z, axes=([1, 2], [0, 1]))
    afford = float(np.max(costs - pdm.budgets))

    gaps, scale = [], 0.0
    rows = np.arange(pdm.m)
    for i in range(pdm.n):
        own_side = cube[i, rows, pdm.preferred[i]]
        gap, du = _demand_gap(
            pdm.utilities[i],
            pdm.budgets[i],
            own_side,
            public_bundle(pdm, outcome, i),
        )
        gaps.append(gap)
        scale = max(scale, du)

    side_totals = cube.sum(axis=0)
    balance = float(np.max(np.abs(side_totals[:, 0] - side_totals[:, 1])))

    return _report(
        [
            _cond("affordable", afford, tol),
            _cond("demand_optimal", max(gaps), tol * (1.0 + scale)),
            _cond("side_price_balance", balance, tol),
        ],
        witness=outcome,
    )
