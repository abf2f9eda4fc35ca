"""Maximum-Nash-welfare solvers and an independent brute-force oracle.

Both solve paths maximize the budget-weighted log objective
sum_i B_i log u_i(x_i), the convex program whose optimizers coincide with
market equilibria for the utility families in this package. The public
decision form optimizes per-issue probability pairs; the private-goods form
optimizes an allocation matrix under unit supply. Prices fall out of the
supply constraints' KKT multipliers.

The programs are handed to a conic solver through cvxpy; any convergent
convex method would do, and correctness is certified downstream by the
equilibrium checkers, not by trusting the solver. brute_force_max_welfare
is the deliberately independent cross-check: plain grid search, no convex
machinery shared with the solvers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .expansion import FisherInstance
from .model import (
    CES,
    CobbDouglas,
    Leontief,
    Linear,
    NestedLeontief,
    Outcome,
    PdmInstance,
    PerGood,
    PerIssue,
    UtilitySpec,
    WelfareFunction,
    agent_utilities,
    nash_welfare,
)

_CLARABEL_OPTS = dict(tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)


@dataclass(frozen=True)
class SolveResult:
    """Solver output: an outcome (public form) or allocation (private form),
    recovered prices, the realized Nash welfare, and KKT residuals."""

    outcome: Outcome | None
    allocation: np.ndarray | None
    prices: object
    objective: float
    iterations: int
    residual_feasibility: float
    residual_stationarity: float
    excluded_agents: tuple = ()


def _log_utility(spec: UtilitySpec, x):
    """cvxpy expression for log u(x), plus any auxiliary constraints."""
    if isinstance(spec, Linear):
        return cp.log(spec.weights @ x), []
    if isinstance(spec, Leontief):
        idx = np.flatnonzero(spec.weights > 0)
        ratios = cp.multiply(x[idx], 1.0 / spec.weights[idx])
        return cp.log(cp.min(ratios)), []
    if isinstance(spec, CobbDouglas):
        idx = np.flatnonzero(spec.weights > 0)
        exponents = spec.weights[idx] / spec.weights.sum()
        return exponents @ cp.log(x[idx]), []
    if isinstance(spec, CES):
        if spec.rho == 1.0:
            return cp.log(spec.weights @ x), []
        idx = np.flatnonzero(spec.weights > 0)
        terms = cp.multiply(spec.weights[idx], x[idx])
        return cp.log(cp.pnorm(terms, spec.rho)), []
    if isinstance(spec, NestedLeontief):
        t = cp.Variable(len(spec.groups), nonneg=True)
        good_idx = np.concatenate([np.array(g, dtype=int) for g in spec.groups])
        grp_idx = np.concatenate(
            [np.full(len(g), c, dtype=int) for c, g in enumerate(spec.groups)]
        )
        constraints = [t[grp_idx] <= x[good_idx]]
        inner, inner_cons = _log_utility(spec.outer, t)
        return inner, constraints + inner_cons
    raise TypeError(f"no log-utility form for {type(spec).__name__}")


def _run(problem: cp.Problem) -> int:
    # "inaccurate" statuses are acceptable here: every solve is followed by
    # an equilibrium checker, so we silence cvxpy's warning about them.
    status = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        try:
            problem.solve(solver="CLARABEL", **_CLARABEL_OPTS)
            status = problem.status
        except cp.SolverError:
            status = None
        if status not in ("optimal", "optimal_inaccurate"):
            problem.solve(solver="SCS", eps=1e-10, max_iters=200_000)
            status = problem.status
    if status not in ("optimal", "optimal_inaccurate"):
        raise RuntimeError(f"convex solve failed with status {status}")
    stats = problem.solver_stats
    return int(stats.num_iters) if stats and stats.num_iters else 0


def solve_pdm_nash(pdm: PdmInstance, tol: float = 1e-8) -> SolveResult:
    """Maximize budget-weighted Nash welfare over valid outcomes.

    Deterministic: the program is convex and solved with fixed settings.
    """
    m = pdm.m
    z0 = cp.Variable(m, nonneg=True)
    z1 = cp.Variable(m, nonneg=True)
    supply = z0 + z1 <= 1
    constraints = [supply]
    objective_terms = []
    for i in range(pdm.n):
        a = pdm.preferred[i].astype(float)
        x = cp.multiply(1 - a, z0) + cp.multiply(a, z1)
        expr, extra = _log_utility(pdm.utilities[i], x)
        objective_terms.append(pdm.budgets[i] * expr)
        constraints.extend(extra)
    problem = cp.Problem(cp.Maximize(cp.sum(cp.hstack(objective_terms))), constraints)
    iterations = _run(problem)

    raw0 = np.clip(z0.value, 0.0, 1.0)
    raw1 = np.clip(z1.value, 0.0, 1.0)
    sums = raw0 + raw1
    feasibility = max(0.0, float(np.max(z0.value + z1.value - 1)))
    over = sums > 1
    if over.any():
        raw0[over] = raw0[over] / sums[over]
        raw1[over] = raw1[over] / sums[over]
    outcome = Outcome(np.stack([raw0, raw1], axis=1))

    duals = np.maximum(np.asarray(supply.dual_value, dtype=float), 0.0)
    stationarity = float(np.max(np.minimum(duals, np.abs(1 - sums)))) if m else 0.0
    return SolveResult(
        outcome=outcome,
        allocation=None,
        prices=PerIssue(duals),
        objective=nash_welfare(agent_utilities(pdm, outcome), pdm.budgets),
        iterations=iterations,
        residual_feasibility=feasibility,
        residual_stationarity=stationarity,
    )


def solve_fisher_eg(fisher: FisherInstance, tol: float = 1e-8) -> SolveResult:
    """Eisenberg-Gale solve: max Nash welfare under unit supply per good."""
    n, num_goods = fisher.n, fisher.num_goods
    excluded = tuple(
        i
        for i, spec in enumerate(fisher.utilities)
        if spec.dimension == 0 or spec.value(np.ones(spec.dimension)) <= 0
    )
    included = [i for i in range(n) if i not in excluded]
    if num_goods == 0 or not included:
        return SolveResult(
            outcome=None,
            allocation=np.zeros((n, num_goods)),
            prices=PerGood(np.zeros(num_goods)),
            objective=0.0,
            iterations=0,
            residual_feasibility=0.0,
            residual_stationarity=0.0,
            excluded_agents=excluded,
        )

    X = cp.Variable((n, num_goods), nonneg=True)
    supply = cp.sum(X, axis=0) <= 1
    constraints = [supply]
    objective_terms = []
    for i in included:
        expr, extra = _log_utility(fisher.utilities[i], X[i])
        objective_terms.append(fisher.budgets[i] * expr)
        constraints.extend(extra)
    if excluded:
        constraints.append(X[list(excluded)] == 0)
    problem = cp.Problem(cp.Maximize(cp.sum(cp.hstack(objective_terms))), constraints)
    iterations = _run(problem)

    alloc = np.maximum(np.asarray(X.value, dtype=float), 0.0)
    sold = alloc.sum(axis=0)
    feasibility = max(0.0, float(np.max(sold - 1)), float(np.max(-X.value)))
    prices = np.maximum(np.asarray(supply.dual_value, dtype=float), 0.0)
    stationarity = float(np.max(np.minimum(prices, np.abs(1 - sold))))
    utilities = np.array(
        [fisher.utilities[i].value(alloc[i]) for i in range(n)]
    )
    objective = nash_welfare(utilities[included], fisher.budgets[included])
    return SolveResult(
        outcome=None,
        allocation=alloc,
        prices=PerGood(prices),
        objective=objective,
        iterations=iterations,
        residual_feasibility=feasibility,
        residual_stationarity=stationarity,
        excluded_agents=excluded,
    )


def linear_closed_form_prices(fisher: FisherInstance, allocation) -> np.ndarray:
    """KKT prices for an all-linear market: p_l = max_i B_i w_il / u_i.

    The maximum runs over agents holding good l; a cross-check for the
    multipliers reported by solve_fisher_eg.
    """
    alloc = np.asarray(allocation, dtype=float)
    prices = np.zeros(fisher.num_goods)
    for i, spec in enumerate(fisher.utilities):
        if not isinstance(spec, Linear):
            raise TypeError("closed-form prices require all-linear utilities")
        u = spec.value(alloc[i])
        if u <= 0:
            continue
        holder = alloc[i] > 1e-9
        prices[holder] = np.maximum(
            prices[holder], fisher.budgets[i] * spec.weights[holder] / u
        )
    return prices


def _batch_value(spec: UtilitySpec, X: np.ndarray) -> np.ndarray:
    """Utility of every row of X under spec, vectorized."""
    if isinstance(spec, Linear):
        return X @ spec.weights
    if isinstance(spec, Leontief):
        mask = spec.weights > 0
        if not mask.any():
            return np.zeros(len(X))
        return (X[:, mask] / spec.weights[mask]).min(axis=1)
    if isinstance(spec, CobbDouglas):
        mask = spec.weights > 0
        if not mask.any():
            return np.zeros(len(X))
        exponents = spec.weights[mask] / spec.weights.sum()
        dead = (X[:, mask] <= 1e-300).any(axis=1)
        vals = np.exp(np.log(np.maximum(X[:, mask], 1e-300)) @ exponents)
        vals[dead] = 0.0
        return vals
    if isinstance(spec, CES):
        mask = spec.weights > 0
        if not mask.any():
            return np.zeros(len(X))
        terms = X[:, mask] * spec.weights[mask]
        if spec.rho < 0:
            dead = (terms <= 0).any(axis=1)
            with np.errstate(divide="ignore", over="ignore"):
                s = np.sum(np.maximum(terms, 1e-300) ** spec.rho, axis=1)
                vals = s ** (1.0 / spec.rho)
            vals[dead | ~np.isfinite(vals)] = 0.0
            return vals
        return np.sum(terms**spec.rho, axis=1) ** (1.0 / spec.rho)
    if isinstance(spec, NestedLeontief):
        inner = np.stack([X[:, list(g)].min(axis=1) for g in spec.groups], axis=1)
        return _batch_value(spec.outer, inner)
    raise TypeError(f"no batch form for {type(spec).__name__}")


def brute_force_max_welfare(
    pdm: PdmInstance,
    psi: WelfareFunction = WelfareFunction.NASH,
    grid: int = 100,
    max_points: int = 2_000_000,
):
    """Grid-search oracle over outcomes with z_j0 + z_j1 = 1.

    Restricting to sum-1 outcomes loses nothing: utilities are monotone, so
    slack never helps. Returns (best Outcome, welfare value); ties go to the
    lexicographically first grid point.
    """
    m = pdm.m
    points = (grid + 1) ** m
    if points > max_points:
        raise ValueError(f"grid of {points} points exceeds cap {max_points}")
    levels = np.linspace(0.0, 1.0, grid + 1)
    Z0 = np.stack(
        np.meshgrid(*([levels] * m), indexing="ij"), axis=-1
    ).reshape(-1, m)
    U = np.empty((pdm.n, points))
    for i in range(pdm.n):
        a = pdm.preferred[i]
        Xi = np.where(a == 0, Z0, 1.0 - Z0)
        U[i] = _batch_value(pdm.utilities[i], Xi)

    if psi is WelfareFunction.NASH:
        b = pdm.budgets
        dead = (U <= 1e-300).any(axis=0)
        W = np.exp(b @ np.log(np.maximum(U, 1e-300)) / b.sum())
        W[dead] = 0.0
    elif psi is WelfareFunction.UTILITARIAN:
        W = U.sum(axis=0)
    else:
        W = U.min(axis=0)

    best = int(np.argmax(W))
    z0 = Z0[best]
    outcome = Outcome(np.stack([z0, 1.0 - z0], axis=1))
    return outcome, float(W[best])
