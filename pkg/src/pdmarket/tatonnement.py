"""Projected price dynamics for Fisher markets and their public lifts.

The update is stochastic-subgradient descent on the dual of the budget-
weighted log-utility program: p_{t+1} = clip(p_t - eta_t * (1 - demand),
box), with eta_t = eta_scale / t. Demands come from the closed forms in
:mod:`pdmarket.demand` with the ceiling disabled; inside the price box all
prices are positive, so demands stay finite.

Noise, when enabled, perturbs only what the update sees. Convergence checks
always use exact demands at the current prices, so a reported verdict never
depends on the noise path.

Linear-family demand sets are not singletons at tie prices; the update
always uses the deterministic equal split, and certification may instead
submit a different demand-set member chosen by a small linear program over
near-tied goods. The selection window is sized so the submitted bundles
still pass the checker's value-based demand test at its tolerance.

``run_lifted_tatonnement`` drives the same engine on the reduced market and
translates only at the boundary: prices project to personalized per-issue
rows, demands compose back to per-issue bundles, and the final state is
checked as an approximate pairwise equilibrium at three times the target.
With equal configs the hidden price path is bit-identical to the direct
Fisher run by construction.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .checkers import EquilibriumReport, check_delta_eq, check_delta_pme
from .demand import _TIE_RTOL, DemandRequest, _spec_parts, demand
from .expansion import FisherInstance, project_prices, reduce_instance
from .model import NestedLeontief, PdmInstance, Outcome, PerGood, Personalized

_ZERO_UTIL = 1e-300


@dataclass(frozen=True)
class TatonnementConfig:
    """Step schedule, price box, noise model, and stopping parameters.

    eta_scale / t keeps the usual conditions (positive, non-summable,
    square-summable). The bias sequence is bias / t^2, which is summable.
    """

    eta_scale: float = 1.0
    p_min: float = 1e-3
    p_max: float = 2.0
    max_steps: int = 100_000
    delta: float = 0.05
    noise_std: float = 0.0
    bias: float = 0.0
    seed: int | None = None
    initial_prices: object = None
    record_every: int = 1
    check_every: int = 10
    adaptive_box: bool = False
    demand_tol: float = 1e-6

    def __post_init__(self):
        if self.eta_scale <= 0:
            raise ValueError("eta_scale must be positive")
        if self.p_min < 0 or self.p_max <= self.p_min:
            raise ValueError("price box requires 0 <= p_min < p_max")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.record_every < 1 or self.check_every < 1:
            raise ValueError("record_every and check_every must be >= 1")
        if self.demand_tol <= 0:
            raise ValueError("demand_tol must be positive")


@dataclass(frozen=True, eq=False)
class TatonnementTrace:
    """Recorded price path plus the final certified state.

    ``report`` holds the stopping checker's output: the approximate Fisher
    report for the direct run, the approximate pairwise report for the
    lifted run (whose hidden Fisher report is kept alongside).
    """

    steps: np.ndarray
    prices: np.ndarray
    aggregate_demand: np.ndarray
    dual_estimate: np.ndarray
    excess_norm: np.ndarray
    converged: bool
    stopped_at: int
    final_prices: np.ndarray
    final_allocation: np.ndarray
    report: EquilibriumReport
    config: TatonnementConfig
    hidden_report: EquilibriumReport | None = None
    personalized_prices: Personalized | None = None
    final_bundles: np.ndarray | None = None
    final_outcome: Outcome | None = None

    def to_csv(self, target) -> None:
        """Write (t, per-good price, per-good excess demand) rows."""
        if isinstance(target, (str, bytes)):
            with open(target, "w", newline="") as fh:
                self.to_csv(fh)
            return
        num_goods = self.prices.shape[1]
        writer = csv.writer(target)
        writer.writerow(
            ["t"]
            + [f"price_{g}" for g in range(num_goods)]
            + [f"excess_{g}" for g in range(num_goods)]
        )
        excess = self.aggregate_demand - 1.0
        for r, t in enumerate(self.steps):
            writer.writerow(
                [int(t)] + list(self.prices[r]) + list(excess[r])
            )

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    def summary_dict(self) -> dict:
        out = {
            "converged": bool(self.converged),
            "stopped_at": int(self.stopped_at),
            "rows_recorded": int(len(self.steps)),
            "delta": float(self.config.delta),
            "eta_scale": float(self.config.eta_scale),
            "noise_std": float(self.config.noise_std),
            "seed": self.config.seed,
            "final_prices": self.final_prices.tolist(),
            "final_excess_norm": float(self.excess_norm[-1]),
            "final_dual_estimate": float(self.dual_estimate[-1]),
            "report": self.report.to_dict(),
        }
        if self.hidden_report is not None:
            out["hidden_report"] = self.hidden_report.to_dict()
        if self.personalized_prices is not None:
            out["personalized_prices"] = self.personalized_prices.values.tolist()
        if self.final_bundles is not None:
            out["final_bundles"] = self.final_bundles.tolist()
        if self.final_outcome is not None:
            out["final_outcome"] = self.final_outcome.z.tolist()
        return out


def dual_gradient(fisher: FisherInstance, prices) -> np.ndarray:
    """Subgradient of the dual objective: 1 - aggregate demand, per good.

    Uses the fixed equal-split tie rule, so the returned element is
    deterministic. Zero prices with the ceiling disabled raise
    UnboundedDemand.
    """
    p = np.asarray(prices, dtype=float)
    total = np.zeros(fisher.num_goods)
    for i in range(fisher.n):
        total += demand(
            DemandRequest(fisher.utilities[i], float(fisher.budgets[i]), p, None)
        )
    return 1.0 - total


def eg_dual_value(fisher: FisherInstance, prices) -> float:
    """Dual objective sum(p) + sum_i B_i (log u_i(D_i(p)) - 1)."""
    p = np.asarray(prices, dtype=float)
    value = float(p.sum())
    for i in range(fisher.n):
        spec = fisher.utilities[i]
        b = float(fisher.budgets[i])
        d = demand(DemandRequest(spec, b, p, None))
        u = max(spec.value(d), _ZERO_UTIL)
        value += b * (np.log(u) - 1.0)
    return value


class _Engine:
    """Per-agent demand plans over a shared component space.

    A component is one positively weighted argument of an agent's flat
    form: the good itself for flat specs, a good group for nested specs.
    ``membership`` maps components to goods, so q = membership @ p prices
    all components at once and membership.T @ x aggregates demand.
    """

    def __init__(self, fisher: FisherInstance):
        self.fisher = fisher
        num_goods = fisher.num_goods
        plans = []
        rows = []
        start = 0
        for i, spec in enumerate(fisher.utilities):
            if isinstance(spec, NestedLeontief):
                weights, kind, rho = _spec_parts(spec.outer)
                groups = spec.groups
            else:
                weights, kind, rho = _spec_parts(spec)
                groups = tuple((g,) for g in range(spec.dimension))
            if kind == "ces" and rho == 1.0:
                kind = "linear"
            keep = np.flatnonzero(weights > 0)
            w = weights[keep]
            for c in keep:
                row = np.zeros(num_goods)
                row[list(groups[c])] = 1.0
                rows.append(row)
            plans.append(
                {
                    "kind": kind,
                    "rho": rho,
                    "budget": float(fisher.budgets[i]),
                    "weights": w,
                    "shares": w / w.sum() if w.size else w,
                    "s": 1.0 / (1.0 - rho) if kind == "ces" else 0.0,
                    "sl": slice(start, start + len(keep)),
                    "issues": keep,
                }
            )
            start += len(keep)
        self.plans = plans
        self.num_components = start
        self.membership = (
            np.array(rows) if rows else np.zeros((0, num_goods))
        )
        self.has_linear = any(pl["kind"] == "linear" for pl in self.plans)

    def component_prices(self, p: np.ndarray) -> np.ndarray:
        return self.membership @ p

    def demands(self, q: np.ndarray) -> np.ndarray:
        """Equal-split demand per component at component prices q."""
        x = np.zeros(self.num_components)
        for pl in self.plans:
            w = pl["weights"]
            if not w.size:
                continue
            qa = q[pl["sl"]]
            b = pl["budget"]
            kind = pl["kind"]
            if kind == "linear":
                bpb = w / qa
                tie = bpb >= bpb.max() * (1 - _TIE_RTOL)
                out = np.zeros(len(w))
                out[tie] = (b / tie.sum()) / qa[tie]
            elif kind == "leontief":
                out = (b / float(w @ qa)) * w
            elif kind == "cobb_douglas":
                out = b * pl["shares"] / qa
            else:
                logb = pl["rho"] * pl["s"] * np.log(w) - pl["s"] * np.log(qa)
                base = np.exp(logb - logb.max())
                out = b * base / float(qa @ base)
            x[pl["sl"]] = out
        return x

    def utilities(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(len(self.plans))
        for i, pl in enumerate(self.plans):
            w = pl["weights"]
            if not w.size:
                continue
            xa = x[pl["sl"]]
            kind = pl["kind"]
            if kind == "linear":
                out[i] = w @ xa
            elif kind == "leontief":
                out[i] = float(np.min(xa / w))
            elif kind == "cobb_douglas":
                out[i] = float(np.exp(pl["shares"] @ np.log(np.maximum(xa, _ZERO_UTIL))))
            else:
                rho = pl["rho"]
                logt = rho * np.log(np.maximum(w * xa, _ZERO_UTIL))
                peak = logt.max()
                out[i] = float(np.exp((peak + np.log(np.sum(np.exp(logt - peak)))) / rho))
        return out

    def allocation(self, x: np.ndarray) -> np.ndarray:
        """Scatter component demands to an (n, goods) allocation matrix."""
        alloc = np.zeros((self.fisher.n, self.fisher.num_goods))
        for i, pl in enumerate(self.plans):
            sl = pl["sl"]
            if sl.stop > sl.start:
                alloc[i] = x[sl] @ self.membership[sl]
        return alloc

    def dual_value(self, p: np.ndarray, x: np.ndarray) -> float:
        u = np.maximum(self.utilities(x), _ZERO_UTIL)
        budgets = self.fisher.budgets
        return float(p.sum() + budgets @ (np.log(u) - 1.0))


def _tie_window(tol: float, best_value: float) -> float:
    # Spending inside a window of relative width gamma loses at most
    # gamma * u_opt in value; half the checker's allowance keeps the
    # reselected bundle certifiable with margin.
    if best_value <= 0:
        return 0.0
    return 0.5 * tol * (1.0 + best_value) / best_value


def _lp_reselect(engine: _Engine, p, q, x, delta, tol):
    """A demand-set reselection for linear agents that best clears the market.

    Returns a component vector, or None when no agent has near-tied goods
    or the program cannot reach the delta target. Only spend patterns whose
    utility loss stays within the checker's value tolerance are feasible.
    """
    entries = []
    for idx, pl in enumerate(engine.plans):
        if pl["kind"] != "linear" or not pl["weights"].size:
            continue
        qa = q[pl["sl"]]
        bpb = pl["weights"] / qa
        top = bpb.max()
        gamma = _tie_window(tol, pl["budget"] * top)
        tied = np.flatnonzero(bpb >= top * (1.0 - gamma))
        if len(tied) >= 2:
            entries.append((idx, pl["sl"].start + tied))
    if not entries:
        return None

    moving = np.concatenate([cols for _, cols in entries])
    fixed = engine.membership.T @ x
    for idx, _ in entries:
        sl = engine.plans[idx]["sl"]
        fixed -= x[sl] @ engine.membership[sl]

    num_goods = len(p)
    num_s = len(moving)
    # variables: spend on each movable component, then the violation bound v
    coeff = engine.membership[moving] / q[moving][:, None]
    rows_ub, rhs_ub = [], []
    for g in range(num_goods):
        row = np.append(coeff[:, g], -1.0)
        rows_ub.append(row)
        rhs_ub.append(1.0 - fixed[g])
        if p[g] > delta:
            rows_ub.append(np.append(-coeff[:, g], -1.0))
            rhs_ub.append(fixed[g] - 1.0)
    rows_eq, rhs_eq = [], []
    pos = 0
    for idx, cols in entries:
        row = np.zeros(num_s + 1)
        row[pos : pos + len(cols)] = 1.0
        rows_eq.append(row)
        rhs_eq.append(engine.plans[idx]["budget"])
        pos += len(cols)

    res = linprog(
        c=np.append(np.zeros(num_s), 1.0),
        A_ub=np.array(rows_ub),
        b_ub=np.array(rhs_ub),
        A_eq=np.array(rows_eq),
        b_eq=np.array(rhs_eq),
        bounds=[(0, None)] * num_s + [(0, None)],
        method="highs",
    )
    if not res.success or res.fun > delta:
        return None
    xr = x.copy()
    for idx, _ in entries:
        xr[engine.plans[idx]["sl"]] = 0.0
    xr[moving] = res.x[:num_s] / q[moving]
    return xr


def _certify(engine, p, q, x, delta, tol):
    """(allocation, report) for the best certifiable state at p, else None."""
    fisher = engine.fisher
    agg = engine.membership.T @ x
    oversell = float(np.max(agg - 1.0)) if len(p) else 0.0
    priced = p > delta
    undersell = float(np.max(1.0 - agg[priced])) if priced.any() else 0.0
    candidate = x
    if oversell > delta or undersell > delta:
        candidate = None
        if engine.has_linear:
            candidate = _lp_reselect(engine, p, q, x, delta, tol)
    if candidate is None:
        return None
    alloc = engine.allocation(candidate)
    report = check_delta_eq(fisher, alloc, PerGood(p), delta, tol)
    return (alloc, candidate, report) if report.verdict else None


def _initial_prices(config: TatonnementConfig, num_goods: int) -> np.ndarray:
    if config.initial_prices is None:
        p = np.ones(num_goods)
    else:
        p = np.asarray(config.initial_prices, dtype=float)
        if p.shape != (num_goods,):
            raise ValueError("initial_prices must have one entry per good")
    return np.clip(p, config.p_min, config.p_max)


def run_fisher_tatonnement(
    fisher: FisherInstance, config: TatonnementConfig
) -> TatonnementTrace:
    """Iterate the projected update until delta-clearing certifies or T.

    Each iteration: exact demands at the current prices, optional record,
    certification attempt on cadence (exact demands, never the noisy ones),
    then one projected subgradient step using the noisy observation.
    """
    engine = _Engine(fisher)
    num_goods = fisher.num_goods
    p = _initial_prices(config, num_goods)
    p_floor = np.full(num_goods, config.p_min)
    rng = np.random.default_rng(config.seed)

    rec_t, rec_p, rec_d, rec_phi, rec_norm = [], [], [], [], []
    converged = False
    certified = None
    stopped_at = config.max_steps

    def record(t, p, agg, phi):
        rec_t.append(t)
        rec_p.append(p.copy())
        rec_d.append(agg.copy())
        rec_phi.append(phi)
        rec_norm.append(float(np.max(np.abs(agg - 1.0))) if num_goods else 0.0)

    for t in range(1, config.max_steps + 1):
        q = engine.component_prices(p)
        x = engine.demands(q)
        agg = engine.membership.T @ x
        if t % config.record_every == 0 or t == 1:
            record(t, p, agg, engine.dual_value(p, x))
        if t % config.check_every == 0 or t == config.max_steps:
            found = _certify(engine, p, q, x, config.delta, config.demand_tol)
            if found is not None:
                converged = True
                certified = found
                stopped_at = t
                break
        if t == config.max_steps:
            stopped_at = t
            break
        observed = agg
        if config.noise_std > 0:
            observed = observed + rng.normal(0.0, config.noise_std, num_goods)
        if config.bias:
            observed = observed + config.bias / (t * t)
        p = np.clip(p - (config.eta_scale / t) * (1.0 - observed), p_floor, config.p_max)
        if config.adaptive_box:
            at_floor = p <= p_floor + 1e-15
            dead = at_floor & (agg <= 1e-12)
            hot = at_floor & (agg >= 1.0 + config.delta)
            if dead.any():
                p_floor[dead] = np.maximum(p_floor[dead] / 2.0, 1e-9)
            if hot.any():
                p_floor[hot] = np.minimum(p_floor[hot] * 2.0, config.p_max / 4.0)

    if certified is None:
        q = engine.component_prices(p)
        x = engine.demands(q)
        alloc = engine.allocation(x)
        report = check_delta_eq(
            fisher, alloc, PerGood(p), config.delta, config.demand_tol
        )
        certified = (alloc, x, report)
        converged = report.verdict
    alloc, x_final, report = certified

    if not rec_t or rec_t[-1] != stopped_at:
        agg = engine.membership.T @ x_final
        record(stopped_at, p, agg, engine.dual_value(p, x_final))

    return TatonnementTrace(
        steps=np.array(rec_t, dtype=int),
        prices=np.array(rec_p),
        aggregate_demand=np.array(rec_d),
        dual_estimate=np.array(rec_phi),
        excess_norm=np.array(rec_norm),
        converged=converged,
        stopped_at=stopped_at,
        final_prices=p,
        final_allocation=alloc,
        report=report,
        config=config,
    )


def _compose_bundles(pdm: PdmInstance, fisher: FisherInstance, alloc) -> np.ndarray:
    """Per-issue bundles from a reduced allocation plus unanimous top-ups.

    Contested amounts are the per-group minima of the agent's goods (the
    goods of one issue always carry equal amounts here). Unanimous issues
    are free, so every agent who values one takes the full unit.
    """
    record = fisher.provenance
    bundles = np.zeros((pdm.n, pdm.m))
    for i in range(pdm.n):
        for c, j in enumerate(record.contested):
            grp = record.groups[i][c]
            if grp:
                bundles[i, j] = alloc[i, list(grp)].min()
        for j, _ in record.unanimous:
            if pdm.utilities[i].weights[j] > 0:
                bundles[i, j] = 1.0
    return bundles


def run_lifted_tatonnement(
    pdm: PdmInstance, config: TatonnementConfig
) -> TatonnementTrace:
    """Public-side loop: hidden Fisher dynamics on the reduced market.

    Personalized prices are the projections of the hidden good prices, and
    the agents' per-issue demands at those prices lift back to exactly the
    hidden demands, so the price path matches run_fisher_tatonnement on
    reduce_instance(pdm) bit for bit. The final state composes per-issue
    bundles and is checked as a pairwise equilibrium at three times delta.
    """
    fisher = reduce_instance(pdm)
    trace = run_fisher_tatonnement(fisher, config)
    personalized = project_prices(pdm, trace.final_prices)
    bundles = _compose_bundles(pdm, fisher, trace.final_allocation)
    pme_report = check_delta_pme(
        pdm, bundles, personalized, 3.0 * config.delta, config.demand_tol
    )
    return TatonnementTrace(
        steps=trace.steps,
        prices=trace.prices,
        aggregate_demand=trace.aggregate_demand,
        dual_estimate=trace.dual_estimate,
        excess_norm=trace.excess_norm,
        converged=trace.converged,
        stopped_at=trace.stopped_at,
        final_prices=trace.final_prices,
        final_allocation=trace.final_allocation,
        report=pme_report,
        config=config,
        hidden_report=trace.report,
        personalized_prices=personalized,
        final_bundles=bundles,
        final_outcome=pme_report.witness,
    )
