import numpy as np
import pytest

from pdmarket.model import (
    CES,
    CobbDouglas,
    Leontief,
    Linear,
    NestedLeontief,
    Outcome,
    PdmInstance,
    WelfareFunction,
    agent_utilities,
    build_phi,
    evaluate_utility,
    midpoint_outcome,
    nash_welfare,
    public_bundle,
    welfare,
)

NASH = WelfareFunction.NASH
UTIL = WelfareFunction.UTILITARIAN
EGAL = WelfareFunction.EGALITARIAN


def test_linear_value():
    assert evaluate_utility(Linear(np.array([2.0, 1.0])), [0.5, 1.0]) == 2.0


def test_leontief_value():
    assert evaluate_utility(Leontief(np.array([1.0, 2.0])), [1.0, 1.0]) == 0.5


def test_leontief_skips_zero_weights():
    spec = Leontief(np.array([1.0, 0.0]))
    assert spec.value([0.5, 0.0]) == 0.5


def test_ces_value():
    # (sum (w x)^rho)^(1/rho) with w=(1,1), rho=1/2, x=(1,1) -> 2^2
    assert evaluate_utility(CES(np.array([1.0, 1.0]), 0.5), [1.0, 1.0]) == pytest.approx(
        4.0, abs=1e-12
    )


def test_cobb_douglas_normalizes_exponents():
    spec = CobbDouglas(np.array([2.0, 2.0]))
    assert spec.value([4.0, 1.0]) == pytest.approx(2.0, abs=1e-12)


def test_zero_bundle_gives_zero_everywhere():
    specs = [
        Linear(np.array([1.0, 2.0])),
        Leontief(np.array([1.0, 2.0])),
        CobbDouglas(np.array([1.0, 2.0])),
        CES(np.array([1.0, 2.0]), 0.5),
        CES(np.array([1.0, 2.0]), -1.0),
        NestedLeontief(Linear(np.array([1.0])), ((0, 1),), 2),
    ]
    for spec in specs:
        assert evaluate_utility(spec, np.zeros(spec.dimension)) == 0.0


def test_ces_negative_rho_zero_coordinate():
    spec = CES(np.array([1.0, 1.0]), -1.0)
    assert spec.value([1.0, 0.0]) == 0.0
    assert spec.value([1.0, 1.0]) == pytest.approx(0.5, abs=1e-12)


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        evaluate_utility(Linear(np.array([1.0, 2.0])), [1.0])


def test_all_zero_weights_rejected():
    for cls in (Linear, Leontief, CobbDouglas):
        with pytest.raises(ValueError):
            cls(np.zeros(2))
    with pytest.raises(ValueError):
        CES(np.zeros(2), 0.5)


def test_ces_rho_domain():
    with pytest.raises(ValueError):
        CES(np.array([1.0]), 0.0)
    with pytest.raises(ValueError):
        CES(np.array([1.0]), 1.5)
    CES(np.array([1.0]), 1.0)
    CES(np.array([1.0]), -10.0)


def test_nested_leontief_groups_validated():
    with pytest.raises(ValueError):
        NestedLeontief(Linear(np.array([1.0, 1.0])), ((0,), (0,)), 2)
    with pytest.raises(ValueError):
        NestedLeontief(Linear(np.array([1.0])), ((),), 1)
    with pytest.raises(ValueError):
        NestedLeontief(Linear(np.array([1.0, 1.0])), ((0,),), 2)


def test_nested_leontief_value():
    spec = NestedLeontief(Linear(np.array([1.0, 3.0])), ((0, 1), (2,)), 3)
    assert spec.value([0.5, 0.2, 0.7]) == pytest.approx(0.2 + 3 * 0.7, abs=1e-12)


def test_outcome_validation():
    Outcome(np.array([[0.5, 0.5]]))
    Outcome(np.array([[0.3, 0.2]]))
    with pytest.raises(ValueError):
        Outcome(np.array([[0.6, 0.5]]))
    with pytest.raises(ValueError):
        Outcome(np.array([[-0.1, 0.5]]))


def test_instance_validation():
    with pytest.raises(ValueError):
        PdmInstance(np.array([[2]]), np.ones(1), (Linear(np.ones(1)),))
    with pytest.raises(ValueError):
        PdmInstance(np.array([[0]]), np.zeros(1), (Linear(np.ones(1)),))


def test_public_bundle_definition():
    pdm = PdmInstance(
        np.array([[0, 1]]), np.ones(1), (Linear(np.array([1.0, 1.0])),)
    )
    z = Outcome(np.array([[0.3, 0.7], [0.4, 0.6]]))
    assert np.allclose(public_bundle(pdm, z, 0), [0.3, 0.6])


def test_public_bundle_all_side_zero():
    pdm = PdmInstance(
        np.zeros((2, 3), dtype=int),
        np.ones(2),
        tuple(Linear(np.ones(3)) for _ in range(2)),
    )
    z = Outcome(np.column_stack([np.ones(3), np.zeros(3)]))
    for i in range(2):
        assert np.array_equal(public_bundle(pdm, z, i), np.ones(3))


def test_midpoint_bundle_is_half_for_everyone():
    pdm = build_phi(4, 1.3, "linear")
    z = midpoint_outcome(pdm)
    assert z.z.shape == (4, 2)
    assert np.all(z.z == 0.5)
    for i in range(4):
        assert np.all(public_bundle(pdm, z, i) == 0.5)


def test_phi_welfare_examples():
    n, eps = 4, 0.01
    pdm = build_phi(n, 1 + eps, "linear")
    own = np.zeros((n, 2))
    own[:, 0] = 1.0
    against = np.zeros((n, 2))
    against[:, 1] = 1.0
    assert welfare(pdm, Outcome(own)) == pytest.approx(1 + eps, abs=1e-12)
    assert welfare(pdm, Outcome(against)) == pytest.approx(n - 1, abs=1e-12)


def test_phi_midpoint_welfare():
    # each agent: w/2 on her issue plus (n-1)/2 elsewhere = n/2 at w=1
    for n in (3, 6):
        pdm = build_phi(n, 1.0, "linear")
        assert welfare(pdm, midpoint_outcome(pdm)) == pytest.approx(n / 2, abs=1e-9)


def test_equal_utilities_collapse_welfares():
    pdm = PdmInstance(
        np.array([[0], [0]]),
        np.ones(2),
        (Linear(np.array([2.0])), Linear(np.array([2.0]))),
    )
    z = Outcome(np.array([[0.5, 0.5]]))
    c = 1.0
    assert welfare(pdm, z, NASH) == pytest.approx(c, abs=1e-12)
    assert welfare(pdm, z, UTIL) == pytest.approx(2 * c, abs=1e-12)
    assert welfare(pdm, z, EGAL) == pytest.approx(c, abs=1e-12)


def test_nash_zero_short_circuit():
    assert nash_welfare(np.array([0.0, 5.0]), np.ones(2)) == 0.0
    assert nash_welfare(np.array([1e-301, 5.0]), np.ones(2)) == 0.0
    assert nash_welfare(np.array([1e-200, 1e200]), np.ones(2)) == pytest.approx(
        1.0, rel=1e-9
    )


def test_nash_agent_reordering_invariance():
    rng = np.random.default_rng(3)
    u = rng.uniform(0.1, 5.0, 6)
    b = rng.uniform(0.5, 2.0, 6)
    perm = rng.permutation(6)
    assert nash_welfare(u[perm], b[perm]) == pytest.approx(
        nash_welfare(u, b), rel=1e-12
    )


def test_nash_homogeneity():
    rng = np.random.default_rng(4)
    u = rng.uniform(0.1, 5.0, 5)
    b = rng.uniform(0.5, 2.0, 5)
    assert nash_welfare(3.0 * u, b) == pytest.approx(
        3.0 * nash_welfare(u, b), rel=1e-12
    )


def test_midpoint_two_approximation_sampled():
    # NW(midpoint) >= NW(z)/2 for sampled valid z
    from pdmarket.experiments import random_pdm

    rng = np.random.default_rng(11)
    for seed in range(6):
        pdm = random_pdm(seed)
        mid = welfare(pdm, midpoint_outcome(pdm))
        for _ in range(40):
            z0 = rng.uniform(0.0, 1.0, pdm.m)
            z1 = rng.uniform(0.0, 1.0, pdm.m) * (1.0 - z0)
            val = welfare(pdm, Outcome(np.column_stack([z0, z1])))
            assert mid >= val / 2 - 1e-9


def test_build_phi_structure():
    pdm = build_phi(3, 1.1, "linear")
    assert pdm.n == pdm.m == 3
    expected = np.ones((3, 3))
    np.fill_diagonal(expected, 1.1)
    for i in range(3):
        assert np.allclose(pdm.utilities[i].weights, expected[i])
    assert np.array_equal(np.diag(pdm.preferred), np.zeros(3, dtype=int))
    assert pdm.preferred.sum() == 6
    assert np.all(pdm.budgets == 1.0)


def test_build_phi_leontief_and_errors():
    pdm = build_phi(2, 1.0, "leontief")
    assert pdm.n == pdm.m == 2
    assert pdm.preferred[0, 0] != pdm.preferred[1, 0]
    assert pdm.preferred[0, 1] != pdm.preferred[1, 1]
    with pytest.raises(ValueError):
        build_phi(1, 1.0, "linear")
    with pytest.raises(ValueError):
        build_phi(3, 1.0, "ces")
    with pytest.raises(ValueError):
        build_phi(3, 1.0, "ces", rho=2.0)


def _axiom_battery(spec, rng, samples=60):
    d = spec.dimension
    assert spec.value(np.zeros(d)) == 0.0
    for _ in range(samples):
        x = rng.uniform(0.0, 2.0, d)
        xp = rng.uniform(0.0, 2.0, d)
        lam = float(rng.uniform(0.0, 1.0))
        ux, uxp = spec.value(x), spec.value(xp)
        # homogeneity of degree one
        scaled = spec.value(lam * x)
        assert scaled == pytest.approx(lam * ux, rel=1e-9, abs=1e-12)
        # concavity
        mix = spec.value(lam * x + (1 - lam) * xp)
        assert mix >= lam * ux + (1 - lam) * uxp - 1e-9
        # monotonicity
        bump = x + rng.uniform(0.0, 1.0, d)
        assert spec.value(bump) >= ux - 1e-9


def test_utility_axioms_base_classes():
    rng = np.random.default_rng(21)
    w = np.array([0.4, 1.7, 0.9])
    for spec in (
        Linear(w),
        Leontief(w),
        CobbDouglas(w),
        CES(w, 0.5),
        CES(w, 1.0),
        CES(w, -1.5),
    ):
        _axiom_battery(spec, rng)


def test_utility_axioms_nested():
    rng = np.random.default_rng(22)
    outer = CobbDouglas(np.array([1.0, 2.0]))
    spec = NestedLeontief(outer, ((0, 2), (1, 3)), 4)
    _axiom_battery(spec, rng)


def test_agent_utilities_matches_scalar_path():
    pdm = build_phi(3, 1.0, "cobb_douglas")
    z = midpoint_outcome(pdm)
    u = agent_utilities(pdm, z)
    for i in range(3):
        assert u[i] == pytest.approx(
            pdm.utilities[i].value(public_bundle(pdm, z, i)), abs=1e-15
        )
