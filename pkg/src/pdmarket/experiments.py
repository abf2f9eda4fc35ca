"""Reproducible experiments: pricing-inefficiency bounds and batch checks.

Each experiment builds its instances, verifies the claimed equilibrium
with the formal checkers, computes welfare quantities from first
principles, and reports a ratio against a closed-form bound.  A report
passes exactly when ``ratio >= bound - tol`` (batch experiments encode
their acceptance the same way; see the per-tag docstrings) and every
embedded checker verdict holds.

Tags accepted by :func:`run_inefficiency_experiment`:

* ``thm-3-2``: linear opposing-pairs family, issue pricing loses a
  factor (n - 1) / (1 + eps).
* ``thm-3-4``: Cobb-Douglas opposing-pairs family, factor
  (2 - 2/n) / (n - 1)^{1/n}.
* ``thm-3-5``: CES opposing-pairs family, factor 2 ((n-1)/n)^{1/rho}.
* ``prop-2-1``: the midpoint outcome is a 2-approximation of maximum
  Nash welfare on random instances.
* ``reduction-roundtrip``: solving the pairwise reduction reproduces
  the direct optimum and yields a pairwise pricing equilibrium.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .checkers import check_ime, check_pme
from .expansion import (
    outcome_from_reduced_equilibrium,
    project_bundle,
    project_prices,
    reduce_instance,
)
from .model import (
    CES,
    CobbDouglas,
    Leontief,
    Linear,
    Outcome,
    PdmInstance,
    PerIssue,
    build_phi,
    midpoint_outcome,
    welfare,
)
from .serialize import to_jsonable
from .solver import solve_fisher_eg, solve_pdm_nash

EXPERIMENT_TAGS = (
    "thm-3-2",
    "thm-3-4",
    "thm-3-5",
    "prop-2-1",
    "reduction-roundtrip",
)

DEFAULT_NS = (3, 5, 10)
DEFAULT_NS_LINEAR = (3, 5, 10, 50)
DEFAULT_RHOS = (-1.0, 0.5)

# Upper-side slack when comparing a closed-form witness against the
# numerical solver's optimum.
_SOLVER_SLACK = 1e-6


@dataclass(frozen=True)
class ExperimentReport:
    """One experiment run: identifying data, computed quantities, verdict.

    ``passed`` must be recomputable from the stored numbers:
    ratio >= bound - tol, and-ed with ``details["checks_ok"]`` when the
    experiment embeds formal checker runs.
    """

    experiment: str
    instance: dict
    ime_nw: float | None
    optimal_nw: float | None
    ratio: float
    bound: float
    tol: float
    passed: bool
    runtime: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return to_jsonable(
            {
                "experiment": self.experiment,
                "instance": self.instance,
                "ime_nw": self.ime_nw,
                "optimal_nw": self.optimal_nw,
                "ratio": self.ratio,
                "bound": self.bound,
                "tol": self.tol,
                "passed": self.passed,
                "runtime": self.runtime,
                "details": self.details,
            }
        )


def random_pdm(
    seed: int,
    max_n: int = 5,
    max_m: int = 4,
    classes=("linear", "leontief", "cobb_douglas", "ces"),
    ensure_contested: bool = True,
) -> PdmInstance:
    """Seeded random instance: n in [2, max_n], m in [1, max_m], unit budgets.

    With ``ensure_contested`` every issue has both sides populated, so the
    pairwise reduction preserves welfare exactly; without it preference
    columns are unconstrained.  Weights are uniform on [0.1, 2.0]; CES
    exponents are drawn from (-2, -0.25) and (0.25, 0.9).
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    for _ in range(1000):
        preferred = rng.integers(0, 2, (n, m))
        if not ensure_contested:
            break
        if all(
            preferred[:, j].min() == 0 and preferred[:, j].max() == 1
            for j in range(m)
        ):
            break
    specs = []
    for i in range(n):
        w = rng.uniform(0.1, 2.0, m)
        kind = classes[int(rng.integers(0, len(classes)))]
        if kind == "linear":
            specs.append(Linear(w))
        elif kind == "leontief":
            specs.append(Leontief(w))
        elif kind == "cobb_douglas":
            specs.append(CobbDouglas(w))
        else:
            u = rng.uniform()
            rho = -2.0 + u * 3.5 if u < 0.5 else 0.25 + (u - 0.5) * 1.3
            specs.append(CES(w, rho))
    return PdmInstance(preferred, np.ones(n), tuple(specs))


def _own_first_outcome(n: int) -> Outcome:
    """Every issue resolved for its owning agent: z_j = (1, 0)."""
    z = np.zeros((n, 2))
    z[:, 0] = 1.0
    return Outcome(z)


def _majority_outcome(n: int) -> Outcome:
    """Every issue resolved against its owning agent: z_j = (0, 1)."""
    z = np.zeros((n, 2))
    z[:, 1] = 1.0
    return Outcome(z)


def _half_half_outcome(n: int) -> Outcome:
    return Outcome(np.full((n, 2), 0.5))


def _half_split_bundles(n: int) -> np.ndarray:
    """Budget-1 purchases aggregating to z = (1/2, 1/2) on every issue:
    1/2 on the agent's own issue, 1/(2(n-1)) on each other issue."""
    y = np.full((n, n), 0.5 / (n - 1))
    np.fill_diagonal(y, 0.5)
    return y


def _thm_3_2(n: int, eps: float, tol: float, check_tol: float) -> ExperimentReport:
    t0 = time.perf_counter()
    pdm = build_phi(n, 1.0 + eps, "linear")
    prices = PerIssue(np.ones(n))
    report = check_ime(pdm, np.eye(n), prices, tol=check_tol)

    ime_nw = welfare(pdm, _own_first_outcome(n))
    witness_nw = welfare(pdm, _majority_outcome(n))
    solved = solve_pdm_nash(pdm)
    upper_ok = witness_nw <= solved.objective * (1.0 + _SOLVER_SLACK) + 1e-9

    ratio = witness_nw / ime_nw
    bound = (n - 1) / (1.0 + eps)
    checks_ok = report.verdict and upper_ok
    return ExperimentReport(
        experiment="thm-3-2",
        instance={"family": "linear", "n": n, "m": n, "own_weight": 1.0 + eps},
        ime_nw=ime_nw,
        optimal_nw=witness_nw,
        ratio=ratio,
        bound=bound,
        tol=tol,
        passed=bool(ratio >= bound - tol and checks_ok),
        runtime=time.perf_counter() - t0,
        details={
            "checks_ok": checks_ok,
            "ime_report": report.to_dict(),
            "solver_nw": solved.objective,
        },
    )


def _thm_3_4(n: int, tol: float, check_tol: float) -> ExperimentReport:
    t0 = time.perf_counter()
    pdm = build_phi(n, 1.0, "cobb_douglas")
    prices = PerIssue(np.ones(n))
    report = check_ime(pdm, _half_split_bundles(n), prices, tol=check_tol)

    ime_nw = welfare(pdm, _half_half_outcome(n))
    # Witness: own issue at 1/n, all others at (n-1)/n.
    z = np.column_stack([np.full(n, 1.0 / n), np.full(n, 1.0 - 1.0 / n)])
    witness_nw = welfare(pdm, Outcome(z))
    solved = solve_pdm_nash(pdm)
    upper_ok = witness_nw <= solved.objective * (1.0 + _SOLVER_SLACK) + 1e-9

    ratio = witness_nw / ime_nw
    bound = (2.0 - 2.0 / n) / (n - 1) ** (1.0 / n)
    checks_ok = report.verdict and upper_ok
    return ExperimentReport(
        experiment="thm-3-4",
        instance={"family": "cobb_douglas", "n": n, "m": n, "own_weight": 1.0},
        ime_nw=ime_nw,
        optimal_nw=witness_nw,
        ratio=ratio,
        bound=bound,
        tol=tol,
        passed=bool(ratio >= bound - tol and checks_ok),
        runtime=time.perf_counter() - t0,
        details={
            "checks_ok": checks_ok,
            "ime_report": report.to_dict(),
            "solver_nw": solved.objective,
        },
    )


def _thm_3_5(n: int, rho: float, tol: float, check_tol: float) -> ExperimentReport:
    t0 = time.perf_counter()
    pdm = build_phi(n, 1.0, "ces", rho=rho)
    prices = PerIssue(np.ones(n))
    report = check_ime(pdm, _half_split_bundles(n), prices, tol=check_tol)

    ime_nw = welfare(pdm, _half_half_outcome(n))
    # Witness value for the all-against-owner outcome, written directly as
    # the aggregate over each agent's n - 1 unit coordinates.  For rho < 0
    # this is the limiting value along interior outcomes; the pointwise
    # utility at the witness itself is 0 there, so it is not evaluated
    # through the utility class (and the solver, which optimizes the
    # pointwise model, is only used as an upper check when rho > 0).
    witness_nw = float((n - 1) ** (1.0 / rho))
    details: dict = {"ime_report": report.to_dict()}
    checks_ok = bool(report.verdict)
    if rho > 0:
        assert abs(welfare(pdm, _majority_outcome(n)) - witness_nw) < 1e-12
        solved = solve_pdm_nash(pdm)
        details["solver_nw"] = solved.objective
        checks_ok = checks_ok and (
            witness_nw <= solved.objective * (1.0 + _SOLVER_SLACK) + 1e-9
        )
    else:
        details["witness_note"] = (
            "limiting value over nonzero coordinates; pointwise utility at "
            "the witness is 0 for rho < 0"
        )
    details["checks_ok"] = checks_ok

    ratio = witness_nw / ime_nw
    bound = 2.0 * ((n - 1) / n) ** (1.0 / rho)
    return ExperimentReport(
        experiment="thm-3-5",
        instance={"family": "ces", "rho": rho, "n": n, "m": n, "own_weight": 1.0},
        ime_nw=ime_nw,
        optimal_nw=witness_nw,
        ratio=ratio,
        bound=bound,
        tol=tol,
        passed=bool(ratio >= bound - tol and checks_ok),
        runtime=time.perf_counter() - t0,
        details=details,
    )


def _prop_2_1(
    instances: int, seed0: int, max_n: int, max_m: int, tol: float
) -> ExperimentReport:
    """Midpoint 2-approximation batch.

    ratio is the worst observed 2 * NW(midpoint) / NW(optimal) and the
    bound is 1, so ratio >= bound - tol states that no instance beats the
    midpoint by more than a factor 2 (up to solver slack).
    """
    t0 = time.perf_counter()
    worst = np.inf
    worst_seed, worst_nash, worst_mid = None, None, None
    for seed in range(seed0, seed0 + instances):
        pdm = random_pdm(seed, max_n=max_n, max_m=max_m)
        nash = solve_pdm_nash(pdm).objective
        mid = welfare(pdm, midpoint_outcome(pdm))
        r = 2.0 * mid / nash
        if r < worst:
            worst, worst_seed, worst_nash, worst_mid = r, seed, nash, mid
    return ExperimentReport(
        experiment="prop-2-1",
        instance={
            "generator": "random_pdm",
            "instances": instances,
            "seeds": [seed0, seed0 + instances - 1],
            "max_n": max_n,
            "max_m": max_m,
        },
        ime_nw=None,
        optimal_nw=worst_nash,
        ratio=float(worst),
        bound=1.0,
        tol=tol,
        passed=bool(worst >= 1.0 - tol),
        runtime=time.perf_counter() - t0,
        details={
            "checks_ok": True,
            "worst_seed": worst_seed,
            "worst_nash": worst_nash,
            "worst_midpoint": worst_mid,
        },
    )


def _reduction_roundtrip(
    instances: int, seed0: int, max_n: int, max_m: int, tol: float
) -> ExperimentReport:
    """Reduce-solve-lift batch.

    ratio is the worst relative welfare agreement 1 - |direct - lifted| /
    max(direct, lifted) against bound 1, so ratio >= bound - tol states
    the two routes agree to relative tolerance tol.  Each lifted solution
    must additionally pass check_pme at the same tolerance.
    """
    t0 = time.perf_counter()
    worst_rel = 0.0
    worst_seed = None
    worst_pme = 0.0
    pme_failures = []
    for seed in range(seed0, seed0 + instances):
        pdm = random_pdm(seed, max_n=max_n, max_m=max_m)
        direct = solve_pdm_nash(pdm).objective
        fisher = reduce_instance(pdm)
        reduced = solve_fisher_eg(fisher)
        lifted_nw = welfare(
            pdm, outcome_from_reduced_equilibrium(pdm, reduced.allocation)
        )
        rel = abs(direct - lifted_nw) / max(direct, lifted_nw, 1e-12)
        if rel > worst_rel:
            worst_rel, worst_seed = rel, seed

        q = project_prices(pdm, reduced.prices)
        y = np.vstack(
            [project_bundle(pdm, i, reduced.allocation[i]) for i in range(pdm.n)]
        )
        pme = check_pme(pdm, y, q, tol=tol)
        worst_pme = max(
            worst_pme, max(c.residual / c.threshold for c in pme.conditions)
        )
        if not pme.verdict:
            pme_failures.append(seed)
    checks_ok = not pme_failures
    ratio = 1.0 - worst_rel
    return ExperimentReport(
        experiment="reduction-roundtrip",
        instance={
            "generator": "random_pdm",
            "instances": instances,
            "seeds": [seed0, seed0 + instances - 1],
            "max_n": max_n,
            "max_m": max_m,
        },
        ime_nw=None,
        optimal_nw=None,
        ratio=float(ratio),
        bound=1.0,
        tol=tol,
        passed=bool(ratio >= 1.0 - tol and checks_ok),
        runtime=time.perf_counter() - t0,
        details={
            "checks_ok": checks_ok,
            "worst_seed": worst_seed,
            "worst_rel_diff": worst_rel,
            "worst_pme_residual_over_threshold": worst_pme,
            "pme_failures": pme_failures,
        },
    )


def run_inefficiency_experiment(
    tag: str,
    ns=None,
    eps: float = 0.01,
    rhos=None,
    instances: int | None = None,
    seed0: int = 0,
    max_n: int = 5,
    max_m: int = 4,
    tol: float | None = None,
    check_tol: float = 1e-8,
) -> list[ExperimentReport]:
    """Run one experiment tag; returns one report per parameter point."""
    if tag == "thm-3-2":
        t = 1e-9 if tol is None else tol
        return [_thm_3_2(n, eps, t, check_tol) for n in (ns or DEFAULT_NS_LINEAR)]
    if tag == "thm-3-4":
        t = 1e-9 if tol is None else tol
        return [_thm_3_4(n, t, check_tol) for n in (ns or DEFAULT_NS)]
    if tag == "thm-3-5":
        t = 1e-9 if tol is None else tol
        return [
            _thm_3_5(n, rho, t, check_tol)
            for n in (ns or DEFAULT_NS)
            for rho in (rhos or DEFAULT_RHOS)
        ]
    if tag == "prop-2-1":
        return [
            _prop_2_1(
                instances or 100, seed0, max_n, max_m, 1e-6 if tol is None else tol
            )
        ]
    if tag == "reduction-roundtrip":
        return [
            _reduction_roundtrip(
                instances or 50, seed0, max_n, max_m, 1e-4 if tol is None else tol
            )
        ]
    raise ValueError(f"unknown experiment tag {tag!r}; use one of {EXPERIMENT_TAGS}")
