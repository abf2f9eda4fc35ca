"""Closed-form demand oracles for every supported utility family.

A demand is a utility-maximizing affordable bundle at given prices. For the
homogeneous families here the maximizers have explicit forms:

  linear        all budget at the best bang-per-buck w_j/p_j, split equally
                across ties
  Cobb-Douglas  spending proportional to weights
  Leontief      the profile t*w with t = B / sum_j w_j p_j
  CES           quantities proportional to (w_j^rho / p_j)^(1/(1-rho))

Zero-priced desired goods make demand unbounded except under Leontief, where
any paid desired good pins t. The ``ceiling`` knob caps the free coordinates
(at probability 1 by default, the natural bound in a decision market) and the
budget formulas run over the positively priced goods. Passing ceiling=None
disables the cap, so a free desired good raises UnboundedDemand unless the
Leontief budget parameter stays finite.

Nested Leontief demand reduces to the outer family: holding issue j costs
the sum q_j of the agent's pairwise-good prices for j, so the outer demand
at aggregated prices q expands equally within each group.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expansion import FisherInstance
from .model import CES, CobbDouglas, Leontief, Linear, NestedLeontief, UtilitySpec

# Relative bang-per-buck gap treated as an exact tie for the equal-split rule.
_TIE_RTOL = 1e-12


class UnboundedDemand(ValueError):
    """A desired good is free and no ceiling bounds the demand."""


@dataclass(frozen=True)
class DemandRequest:
    spec: UtilitySpec
    budget: float
    prices: object
    ceiling: float | None = 1.0


def _price_vector(prices, dim: int) -> np.ndarray:
    p = prices.values if hasattr(prices, "values") else prices
    p = np.asarray(p, dtype=float)
    if p.shape != (dim,):
        raise ValueError(f"prices have shape {p.shape}, expected ({dim},)")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("prices must be finite and nonnegative")
    return p


def _flat_demand(
    weights: np.ndarray,
    kind: str,
    rho: float,
    p: np.ndarray,
    budget: float,
    ceiling: float | None,
) -> np.ndarray:
    """Demand for a flat (non-nested) family over its own good space."""
    out = np.zeros(len(p))
    desired = weights > 0
    if not desired.any():
        return out
    free = desired & (p == 0)
    paid = desired & (p > 0)

    if kind == "leontief":
        # One parameter t: buy t*w_j of every desired good. The budget
        # binds on the paid goods, so free goods only cap t (at ceiling/w_j)
        # or make it infinite when nothing is paid.
        t = np.inf
        if paid.any():
            t = budget / float(weights[paid] @ p[paid])
        if free.any() and ceiling is not None:
            t = min(t, float(np.min(ceiling / weights[free])))
        if not np.isfinite(t):
            raise UnboundedDemand("every desired good is free with no ceiling")
        out[desired] = t * weights[desired]
        return out

    if free.any() and ceiling is None:
        raise UnboundedDemand("zero price on a desired good with no ceiling")

    if free.any():
        out[free] = ceiling
    if not paid.any():
        return out

    if kind == "linear" or (kind == "ces" and rho == 1.0):
        bpb = weights[paid] / p[paid]
        top = bpb.max()
        tie = bpb >= top * (1 - _TIE_RTOL)
        idx = np.flatnonzero(paid)[tie]
        out[idx] = (budget / len(idx)) / p[idx]
        return out

    if kind == "cobb_douglas":
        # Free goods consume no budget, so shares renormalize over the rest.
        w = weights[paid]
        out[paid] = budget * (w / w.sum()) / p[paid]
        return out

    if kind == "ces":
        s = 1.0 / (1.0 - rho)
        with np.errstate(over="ignore", divide="ignore"):
            base = weights[paid] ** (rho * s) * p[paid] ** (-s)
        if not np.all(np.isfinite(base)):
            # Extreme rho/price mixes overflow the power form; rescale by
            # the dominant coordinate, which is exact in infinite precision.
            logb = rho * s * np.log(weights[paid]) - s * np.log(p[paid])
            base = np.exp(logb - logb.max())
        out[paid] = budget * base / float(p[paid] @ base)
        return out

    raise TypeError(f"unknown flat demand kind {kind!r}")


def _spec_parts(spec: UtilitySpec):
    if isinstance(spec, Linear):
        return spec.weights, "linear", 0.0
    if isinstance(spec, Leontief):
        return spec.weights, "leontief", 0.0
    if isinstance(spec, CobbDouglas):
        return spec.weights, "cobb_douglas", 0.0
    if isinstance(spec, CES):
        return spec.weights, "ces", spec.rho
    raise TypeError(f"no closed-form demand for {type(spec).__name__}")


def demand(req: DemandRequest) -> np.ndarray:
    """A member of the demand set at the requested prices.

    Ties in the linear family are split equally; all other families have
    singleton demand sets at positive prices.
    """
    if req.budget <= 0:
        raise ValueError("budget must be strictly positive")
    if req.ceiling is not None and req.ceiling <= 0:
        raise ValueError("ceiling must be positive or None")
    spec = req.spec
    p = _price_vector(req.prices, spec.dimension)
    if isinstance(spec, NestedLeontief):
        q = np.array([p[list(grp)].sum() for grp in spec.groups])
        weights, kind, rho = _spec_parts(spec.outer)
        inner = _flat_demand(weights, kind, rho, q, req.budget, req.ceiling)
        out = np.zeros(spec.num_goods)
        for c, grp in enumerate(spec.groups):
            out[list(grp)] = inner[c]
        return out
    weights, kind, rho = _spec_parts(spec)
    return _flat_demand(weights, kind, rho, p, req.budget, req.ceiling)


def demand_reduced(
    fisher: FisherInstance,
    agent: int,
    prices,
    ceiling: float | None = 1.0,
) -> np.ndarray:
    """Demand of one agent in a reduced market, via its provenance record.

    Computes the restricted outer demand at per-issue aggregated prices and
    expands it across the agent's pairwise goods, the same per-issue-equal
    shape the lifting map produces.
    """
    if fisher.provenance is None:
        raise ValueError("demand_reduced requires a provenance-carrying market")
    record = fisher.provenance
    p = _price_vector(prices, fisher.num_goods)
    groups = record.groups[agent]
    q = np.array([p[list(grp)].sum() for grp in groups])
    weights, kind, rho = _spec_parts(record.outer_specs[agent])
    inner = _flat_demand(weights, kind, rho, q, float(fisher.budgets[agent]), ceiling)
    out = np.zeros(fisher.num_goods)
    for c, grp in enumerate(groups):
        out[list(grp)] = inner[c]
    return out
