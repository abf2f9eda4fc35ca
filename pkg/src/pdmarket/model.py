"""Domain model for binary-issue public decision markets.

An instance couples n agents with m binary issues. Agent i carries a
preferred alternative a_ij in {0, 1} for every issue, a budget B_i > 0 of
artificial currency, and a utility function over per-issue quantities. A
randomized outcome puts probability z_j0 on alternative 0 and z_j1 on
alternative 1 of issue j, with z_j0 + z_j1 <= 1; agent i experiences the
public bundle x_ij = z^(j, a_ij).

Utility functions here are continuous, normalized (u(0) = 0), non-constant,
monotone, concave, and homogeneous of degree one. The supported families are
linear, Leontief, Cobb-Douglas, CES, and nested Leontief compositions (an
outer spec applied to per-group minima), which is the class produced by the
pairwise issue expansion in :mod:`pdmarket.expansion`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

# Tolerance for accepting slightly-negative numerical noise in inputs.
_NEG_NOISE = 1e-9
# Below this, a utility is treated as exactly zero inside log-space welfare.
_ZERO_UTIL = 1e-300


def _as_float_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def _clean_bundle(bundle, dim: int) -> np.ndarray:
    x = np.asarray(bundle, dtype=float)
    if x.shape != (dim,):
        raise ValueError(f"bundle has shape {x.shape}, spec dimension is {dim}")
    if np.any(x < -_NEG_NOISE):
        raise ValueError(f"bundle has negative entries: min {x.min()}")
    return np.maximum(x, 0.0)


class UtilitySpec:
    """Base class for utility specifications. Instances are immutable."""

    @property
    def dimension(self) -> int:
        raise NotImplementedError

    def value(self, bundle) -> float:
        """Evaluate the utility at a nonnegative bundle of matching dimension."""
        raise NotImplementedError


def _check_weights(weights: np.ndarray) -> None:
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    # Size-0 specs are the degenerate empty-market case (every issue
    # unanimous); they are constant by necessity and valued at 0.
    if weights.size and not np.any(weights > 0):
        raise ValueError("all-zero weights: utility would be constant")


@dataclass(frozen=True, eq=False)
class Linear(UtilitySpec):
    """u(x) = sum_j w_j x_j."""

    weights: np.ndarray

    def __post_init__(self):
        w = _as_float_vector(self.weights, "weights")
        _check_weights(w)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return len(self.weights)

    def value(self, bundle) -> float:
        x = _clean_bundle(bundle, self.dimension)
        return float(self.weights @ x)


@dataclass(frozen=True, eq=False)
class Leontief(UtilitySpec):
    """u(x) = min over j with w_j != 0 of x_j / w_j."""

    weights: np.ndarray

    def __post_init__(self):
        w = _as_float_vector(self.weights, "weights")
        _check_weights(w)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return len(self.weights)

    def value(self, bundle) -> float:
        x = _clean_bundle(bundle, self.dimension)
        mask = self.weights > 0
        if not mask.any():
            return 0.0
        return float(np.min(x[mask] / self.weights[mask]))


@dataclass(frozen=True, eq=False)
class CobbDouglas(UtilitySpec):
    """u(x) = (prod_j x_j^{w_j})^{1 / sum_j w_j}.

    Evaluated in log space; any zero quantity on a positively weighted
    coordinate gives utility exactly 0.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = _as_float_vector(self.weights, "weights")
        _check_weights(w)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return len(self.weights)

    def value(self, bundle) -> float:
        x = _clean_bundle(bundle, self.dimension)
        mask = self.weights > 0
        if not mask.any():
            return 0.0
        if np.any(x[mask] <= _ZERO_UTIL):
            return 0.0
        exponents = self.weights[mask] / self.weights.sum()
        return float(np.exp(exponents @ np.log(x[mask])))


@dataclass(frozen=True, eq=False)
class CES(UtilitySpec):
    """u(x) = (sum_j (w_j x_j)^rho)^{1/rho} with rho in (-inf, 0) or (0, 1].

    rho = 1 degenerates to the linear form; rho < 0 gives complements and
    evaluates to 0 whenever a positively weighted coordinate is 0.
    """

    weights: np.ndarray
    rho: float

    def __post_init__(self):
        w = _as_float_vector(self.weights, "weights")
        _check_weights(w)
        rho = float(self.rho)
        if rho == 0 or rho > 1:
            raise ValueError("CES rho must lie in (-inf, 0) or (0, 1]")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rho", rho)

    @property
    def dimension(self) -> int:
        return len(self.weights)

    def value(self, bundle) -> float:
        x = _clean_bundle(bundle, self.dimension)
        mask = self.weights > 0
        if not mask.any():
            return 0.0
        terms = self.weights[mask] * x[mask]
        if self.rho < 0:
            if np.any(terms <= 0):
                return 0.0
            with np.errstate(over="ignore"):
                s = np.sum(terms**self.rho)
                if not np.isfinite(s):
                    return 0.0
                return float(s ** (1.0 / self.rho))
        return float(np.sum(terms**self.rho) ** (1.0 / self.rho))


@dataclass(frozen=True, eq=False)
class NestedLeontief(UtilitySpec):
    """Outer spec applied to per-group minima: u(y) = h(min_{g in G_1} y_g, ...).

    ``groups`` are disjoint nonempty index sets into a good space of size
    ``num_goods``; the outer spec's dimension must equal the group count.
    Goods outside every group never affect the value.
    """

    outer: UtilitySpec
    groups: tuple
    num_goods: int

    def __post_init__(self):
        groups = tuple(tuple(int(g) for g in grp) for grp in self.groups)
        if len(groups) != self.outer.dimension:
            raise ValueError("outer spec dimension must equal the group count")
        seen = set()
        for grp in groups:
            if not grp:
                raise ValueError("empty group in NestedLeontief")
            for g in grp:
                if not 0 <= g < self.num_goods:
                    raise ValueError(f"group index {g} outside good space")
                if g in seen:
                    raise ValueError(f"good {g} appears in two groups")
                seen.add(g)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "num_goods", int(self.num_goods))

    @property
    def dimension(self) -> int:
        return self.num_goods

    def inner_values(self, bundle) -> np.ndarray:
        x = _clean_bundle(bundle, self.num_goods)
        return np.array([x[list(grp)].min() for grp in self.groups])

    def value(self, bundle) -> float:
        return self.outer.value(self.inner_values(bundle))


def evaluate_utility(spec: UtilitySpec, bundle) -> float:
    """Utility of ``bundle`` under ``spec``; raises on dimension mismatch."""
    return spec.value(bundle)


@dataclass(frozen=True, eq=False)
class PdmInstance:
    """A public decision market: preferences, budgets, and utility specs.

    ``preferred`` is the n x m matrix of preferred alternatives a_ij in
    {0, 1}; ``budgets`` holds B_i > 0; ``utilities`` one spec per agent,
    each of dimension m.
    """

    preferred: np.ndarray
    budgets: np.ndarray
    utilities: tuple

    def __post_init__(self):
        a = np.asarray(self.preferred, dtype=int)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError("preferred must be a nonempty n x m matrix")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("preferred alternatives must be 0 or 1")
        b = _as_float_vector(self.budgets, "budgets")
        if len(b) != a.shape[0]:
            raise ValueError("one budget per agent required")
        if np.any(b <= 0):
            raise ValueError("budgets must be strictly positive")
        utilities = tuple(self.utilities)
        if len(utilities) != a.shape[0]:
            raise ValueError("one utility spec per agent required")
        for i, spec in enumerate(utilities):
            if spec.dimension != a.shape[1]:
                raise ValueError(
                    f"agent {i} spec dimension {spec.dimension} != issue count {a.shape[1]}"
                )
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "preferred", a)
        object.__setattr__(self, "budgets", b)
        object.__setattr__(self, "utilities", utilities)

    @property
    def n(self) -> int:
        return self.preferred.shape[0]

    @property
    def m(self) -> int:
        return self.preferred.shape[1]

    @property
    def total_budget(self) -> float:
        return float(self.budgets.sum())


@dataclass(frozen=True, eq=False)
class Outcome:
    """Per-issue probability pairs z = ((z_j0, z_j1))_j with z_j0 + z_j1 <= 1.

    Construction is strict: sums may exceed 1 only by 1e-12 numerical noise.
    Checkers, not this type, own any delta-relaxed notion of validity.
    """

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 2 or z.shape[1] != 2:
            raise ValueError("outcome must have shape (m, 2)")
        if np.any(z < -1e-12) or np.any(z > 1 + 1e-12):
            raise ValueError("outcome probabilities must lie in [0, 1]")
        if np.any(z.sum(axis=1) > 1 + 1e-12):
            raise ValueError("z_j0 + z_j1 must not exceed 1")
        z = np.clip(z, 0.0, 1.0)
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def m(self) -> int:
        return self.z.shape[0]


class WelfareFunction(enum.Enum):
    NASH = "nash"
    UTILITARIAN = "utilitarian"
    EGALITARIAN = "egalitarian"


@dataclass(frozen=True, eq=False)
class PerGood:
    """One price per Fisher good."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _clean_prices(self.values, 1))


@dataclass(frozen=True, eq=False)
class PerIssue:
    """One common price per issue (issue pricing)."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _clean_prices(self.values, 1))


@dataclass(frozen=True, eq=False)
class Personalized:
    """Per-agent per-issue prices p_ij, one row per agent."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _clean_prices(self.values, 2))

    def row(self, agent: int) -> np.ndarray:
        return self.values[agent]


def _clean_prices(values, ndim: int) -> np.ndarray:
    p = np.asarray(values, dtype=float)
    if p.ndim != ndim:
        raise ValueError(f"prices must be {ndim}-dimensional, got shape {p.shape}")
    if np.any(p < -_NEG_NOISE):
        raise ValueError(f"prices must be nonnegative, min {p.min()}")
    p = np.maximum(p, 0.0)
    p.setflags(write=False)
    return p


def public_bundle(instance: PdmInstance, outcome: Outcome, agent: int) -> np.ndarray:
    """Agent's experienced bundle x_ij = z^(j, a_ij)."""
    a = instance.preferred[agent]
    return outcome.z[np.arange(instance.m), a]


def agent_utilities(instance: PdmInstance, outcome: Outcome) -> np.ndarray:
    return np.array(
        [
            instance.utilities[i].value(public_bundle(instance, outcome, i))
            for i in range(instance.n)
        ]
    )


def nash_welfare(utilities, budgets) -> float:
    """Budget-weighted geometric mean, computed in log space.

    Returns exactly 0 when any utility is (numerically) zero, which avoids
    log underflow for large n.
    """
    u = np.asarray(utilities, dtype=float)
    b = np.asarray(budgets, dtype=float)
    if np.any(u <= _ZERO_UTIL):
        return 0.0
    return float(np.exp(b @ np.log(u) / b.sum()))


def welfare(
    instance: PdmInstance,
    outcome: Outcome,
    psi: WelfareFunction = WelfareFunction.NASH,
) -> float:
    """Apply the welfare function psi to the outcome's agent utilities."""
    u = agent_utilities(instance, outcome)
    if psi is WelfareFunction.NASH:
        return nash_welfare(u, instance.budgets)
    if psi is WelfareFunction.UTILITARIAN:
        return float(u.sum())
    return float(u.min())


def midpoint_outcome(instance: PdmInstance) -> Outcome:
    """The outcome putting probability 1/2 on both alternatives of every issue."""
    return Outcome(np.full((instance.m, 2), 0.5))


_PHI_CLASSES = ("linear", "leontief", "cobb_douglas", "ces")


def build_phi(n: int, w: float, family: str, rho: float | None = None) -> PdmInstance:
    """The n-agent, n-issue family where agent i opposes all others on issue i.

    Weight matrix w_ii = w, w_ij = 1 for j != i; preferences a_ii = 0,
    a_ij = 1 for j != i; unit budgets. ``family`` picks the utility class;
    CES requires ``rho``.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if family not in _PHI_CLASSES:
        raise ValueError(f"unknown utility class {family!r}")
    if family == "ces":
        if rho is None:
            raise ValueError("CES requires rho")
        if rho == 0 or rho > 1:
            raise ValueError("CES rho must lie in (-inf, 0) or (0, 1]")
    weights = np.ones((n, n))
    np.fill_diagonal(weights, w)
    preferred = np.ones((n, n), dtype=int)
    np.fill_diagonal(preferred, 0)
    specs = []
    for i in range(n):
        if family == "linear":
            specs.append(Linear(weights[i]))
        elif family == "leontief":
            specs.append(Leontief(weights[i]))
        elif family == "cobb_douglas":
            specs.append(CobbDouglas(weights[i]))
        else:
            specs.append(CES(weights[i], rho))
    return PdmInstance(preferred, np.ones(n), tuple(specs))
