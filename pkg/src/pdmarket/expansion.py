"""Pairwise issue expansion: public decision markets as Fisher markets.

Each contested issue j (one with at least one agent on each side) becomes a
block of private goods, one per unordered pair of agents who disagree on j.
Agent i's utility over the expanded goods composes her original spec with a
per-issue minimum across her own pairwise goods: to secure amount t of issue
j she must hold t of every good she shares with an opponent on j.

Issues everyone agrees on produce no goods. They are resolved at the shared
alternative with probability 1 and price 0, and the agents' utility specs
are restricted to the contested issues before nesting.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .model import (
    CES,
    CobbDouglas,
    Leontief,
    Linear,
    NestedLeontief,
    Outcome,
    PdmInstance,
    Personalized,
    UtilitySpec,
    _as_float_vector,
)


@dataclass(frozen=True)
class Plain:
    """A good that is not pair-derived (hand-built Fisher instances)."""

    index: int


@dataclass(frozen=True)
class Pairwise:
    """The good (i, k, j): agents i and k disagree on issue j.

    The pair is unordered; construction normalizes to i < k.
    """

    i: int
    k: int
    j: int

    def __post_init__(self):
        i, k, j = int(self.i), int(self.k), int(self.j)
        if i == k:
            raise ValueError("pairwise good needs two distinct agents")
        if i > k:
            i, k = k, i
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "j", j)


@dataclass(frozen=True, eq=False)
class ReductionRecord:
    """Provenance tying a reduced Fisher market back to its source PDM.

    ``contested`` lists issue indices with both sides populated, ascending.
    ``unanimous`` holds (issue, shared alternative) pairs for the rest.
    ``groups[i][c]`` are the good indices agent i holds for contested issue
    ``contested[c]``; ``outer_specs[i]`` is her original spec restricted to
    the contested issues.
    """

    pdm: PdmInstance
    contested: tuple
    unanimous: tuple
    groups: tuple
    outer_specs: tuple


@dataclass(frozen=True, eq=False)
class FisherInstance:
    """A private-goods market: unit supply per good, budgets, utility specs."""

    goods: tuple
    budgets: np.ndarray
    utilities: tuple
    provenance: ReductionRecord | None = None

    def __post_init__(self):
        goods = tuple(self.goods)
        b = _as_float_vector(self.budgets, "budgets")
        if np.any(b <= 0):
            raise ValueError("budgets must be strictly positive")
        utilities = tuple(self.utilities)
        if len(utilities) != len(b):
            raise ValueError("one utility spec per agent required")
        for i, spec in enumerate(utilities):
            if spec.dimension != len(goods):
                raise ValueError(
                    f"agent {i} spec dimension {spec.dimension} != good count {len(goods)}"
                )
        b.setflags(write=False)
        object.__setattr__(self, "goods", goods)
        object.__setattr__(self, "budgets", b)
        object.__setattr__(self, "utilities", utilities)

    @property
    def n(self) -> int:
        return len(self.budgets)

    @property
    def num_goods(self) -> int:
        return len(self.goods)


def _restrict_spec(spec: UtilitySpec, issues: list) -> UtilitySpec:
    """The utility spec induced on a subset of issues, same family and parameters."""
    if isinstance(spec, NestedLeontief):
        raise ValueError("nested specs cannot appear in a source PDM")
    w = spec.weights[issues]
    if w.size and not np.any(w > 0):
        raise ValueError(
            "an agent weights only unanimous issues; her reduced utility "
            "would be constant"
        )
    if isinstance(spec, Linear):
        return Linear(w)
    if isinstance(spec, Leontief):
        return Leontief(w)
    if isinstance(spec, CobbDouglas):
        return CobbDouglas(w)
    if isinstance(spec, CES):
        return CES(w, spec.rho)
    raise TypeError(f"unknown utility spec {type(spec).__name__}")


def _sides(preferred: np.ndarray, j: int):
    col = preferred[:, j]
    return np.flatnonzero(col == 0), np.flatnonzero(col == 1)


@functools.lru_cache(maxsize=256)
def reduce_instance(pdm: PdmInstance) -> FisherInstance:
    """Expand a PDM into its pairwise-good Fisher market, with provenance.

    Goods are ordered by (issue, side-1 agent, side-0 agent), all ascending.
    A Leontief source spec collapses to a flat Leontief over the goods
    (minimum of minima); other families nest their restriction over the
    per-issue groups.
    """
    n, m = pdm.n, pdm.m
    contested, unanimous = [], []
    for j in range(m):
        side0, side1 = _sides(pdm.preferred, j)
        if len(side0) and len(side1):
            contested.append(j)
        else:
            unanimous.append((j, int(pdm.preferred[0, j])))

    goods = []
    agent_goods = [[[] for _ in contested] for _ in range(n)]
    for c, j in enumerate(contested):
        side0, side1 = _sides(pdm.preferred, j)
        for k in side1:
            for i in side0:
                idx = len(goods)
                goods.append(Pairwise(int(i), int(k), int(j)))
                agent_goods[i][c].append(idx)
                agent_goods[k][c].append(idx)

    num_goods = len(goods)
    outer_specs, specs = [], []
    for i in range(n):
        restricted = _restrict_spec(pdm.utilities[i], contested)
        outer_specs.append(restricted)
        if num_goods == 0:
            specs.append(Linear(np.zeros(0)))
        elif isinstance(restricted, Leontief):
            w = np.zeros(num_goods)
            for c in range(len(contested)):
                w[agent_goods[i][c]] = restricted.weights[c]
            specs.append(Leontief(w))
        else:
            specs.append(
                NestedLeontief(
                    restricted,
                    tuple(tuple(g) for g in agent_goods[i]),
                    num_goods,
                )
            )

    record = ReductionRecord(
        pdm=pdm,
        contested=tuple(contested),
        unanimous=tuple(unanimous),
        groups=tuple(tuple(tuple(g) for g in agent_goods[i]) for i in range(n)),
        outer_specs=tuple(outer_specs),
    )
    return FisherInstance(tuple(goods), pdm.budgets, tuple(specs), record)


def lift_bundle(pdm: PdmInstance, agent: int, bundle) -> np.ndarray:
    """R: per-issue amounts to pairwise goods, y_ij on each of agent's goods.

    Amounts on unanimous issues are dropped; goods of other agent pairs
    stay 0.
    """
    fisher = reduce_instance(pdm)
    record = fisher.provenance
    y = _as_float_vector(bundle, "bundle")
    if len(y) != pdm.m:
        raise ValueError("bundle must have one amount per issue")
    out = np.zeros(fisher.num_goods)
    for c, j in enumerate(record.contested):
        out[list(record.groups[agent][c])] = y[j]
    return out


def project_bundle(pdm: PdmInstance, agent: int, bundle) -> np.ndarray:
    """R^-1 on bundles: per-issue minimum over the agent's pairwise goods.

    Unanimous issues project to 1: they resolve at the shared alternative
    with full probability, so every agent enjoys them outright.
    """
    fisher = reduce_instance(pdm)
    record = fisher.provenance
    y = _as_float_vector(bundle, "bundle")
    if len(y) != fisher.num_goods:
        raise ValueError("bundle must have one amount per good")
    out = np.ones(pdm.m)
    for c, j in enumerate(record.contested):
        out[j] = y[list(record.groups[agent][c])].min()
    return out


def project_prices(pdm: PdmInstance, prices) -> Personalized:
    """R^-1 on prices: p_ij = sum of agent i's pairwise-good prices on j.

    Unanimous issues cost nothing.
    """
    fisher = reduce_instance(pdm)
    record = fisher.provenance
    p = prices.values if hasattr(prices, "values") else prices
    p = _as_float_vector(p, "prices")
    if len(p) != fisher.num_goods:
        raise ValueError("prices must have one entry per good")
    out = np.zeros((pdm.n, pdm.m))
    for i in range(pdm.n):
        for c, j in enumerate(record.contested):
            out[i, j] = p[list(record.groups[i][c])].sum()
    return Personalized(out)


def outcome_from_reduced_equilibrium(
    pdm: PdmInstance, allocation, tol: float = 1e-6
) -> Outcome:
    """Rebuild the public outcome from a reduced-market allocation.

    z_j0 is the largest side-0 projected amount, z_j1 its clamped
    complement; unanimous issues get probability 1 on the shared
    alternative. Raises if any projected amount exceeds 1 + tol.
    """
    fisher = reduce_instance(pdm)
    record = fisher.provenance
    alloc = np.asarray(allocation, dtype=float)
    if alloc.shape != (pdm.n, fisher.num_goods):
        raise ValueError("allocation must be n x goods")
    projected = np.vstack([project_bundle(pdm, i, alloc[i]) for i in range(pdm.n)])
    z = np.zeros((pdm.m, 2))
    for j, shared in record.unanimous:
        z[j, shared] = 1.0
    for j in record.contested:
        side0, _ = _sides(pdm.preferred, j)
        z0 = float(projected[side0, j].max())
        if z0 > 1 + tol:
            raise ValueError(f"projected amount {z0} on issue {j} exceeds 1")
        z0 = min(z0, 1.0)
        z[j] = (z0, max(1.0 - z0, 0.0))
    return Outcome(z)
