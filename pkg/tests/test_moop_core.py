import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pareto_contracts.lq_model import (LqParams, a_star_from_aggregates, a_star_lq, g_na,
                                       g_pareto_value, nash_actions, pareto_aggregates, z_aggregates,
                                       z_nash, z_pareto)
from pareto_contracts.moop_core import (
    FixedPointError, GeneralModel, GrowthConstants, ModelError, check_bmo_condition,
    check_growth_conditions, check_weights, condition_a1, golden_section_max, hamiltonian_argmax,
    lemma_b1_constant, lq_general_model, lq_growth_constants, nash_driver, nash_fixed_point,
    planner_driver, validate_model,
)

T0, X0 = 0.0, np.zeros(2)


@pytest.fixture
def lq_gm(fig1):
    return lq_general_model(fig1)


def _weights(lam):
    return (lam, 1 - lam)


# --- helpers -------------------------------------------------------------------------------------

def test_golden_section_on_parabola():
    x, fx = golden_section_max(lambda v: -(v - 0.3) ** 2 + 2, -3, 3)
    # the maximum is flat to second order, so x is only located to ~sqrt(eps)
    assert x == pytest.approx(0.3, abs=1e-6)
    assert fx == pytest.approx(2, abs=1e-12)


def test_weights_validation():
    check_weights([0.2, 0.8])
    for bad in ([0, 1], [0.5, 0.6], [[0.5, 0.5]]):
        with pytest.raises(ValueError):
            check_weights(bad)


def test_lq_model_is_valid(lq_gm):
    assert all(validate_model(lq_gm).values())


# --- Planner ------------------------------------------------------------------------------------

def test_argmax_at_zero_sensitivity(lq_gm):
    a, value = hamiltonian_argmax(T0, X0, np.zeros(2), _weights(0.4), lq_gm)
    np.testing.assert_allclose(a, 0, atol=1e-8)
    assert value == pytest.approx(0, abs=1e-14)
    assert planner_driver(T0, X0, np.zeros(2), _weights(0.4), lq_gm) == pytest.approx(0, abs=1e-14)


def test_argmax_matches_closed_form(fig1, lq_gm):
    lam = 1 / 3
    agg = z_aggregates(z_pareto(lam, fig1), lam)
    a, _ = hamiltonian_argmax(T0, X0, agg, _weights(lam), lq_gm)
    np.testing.assert_allclose(a, a_star_lq(z_pareto(lam, fig1), lam, fig1), atol=1e-4)


def test_argmax_beats_random_probes(fig1, lq_gm):
    lam = 0.3
    agg = np.array([0.4, -0.7])
    a, value = hamiltonian_argmax(T0, X0, agg, _weights(lam), lq_gm)
    rng = np.random.default_rng(0)
    probes = rng.uniform(-3, 3, size=(10_000, 2, 2))
    b = np.stack([probes[:, 0, 0] - probes[:, 0, 1], probes[:, 1, 1] - probes[:, 1, 0]], axis=1)
    k = fig1.k_array
    cost = (lam * 0.5 * (k[0, 0] * probes[:, 0, 0] ** 2 + k[1, 0] * probes[:, 1, 0] ** 2)
            + (1 - lam) * 0.5 * (k[0, 1] * probes[:, 0, 1] ** 2 + k[1, 1] * probes[:, 1, 1] ** 2))
    assert value >= np.max(b @ agg - cost)


@settings(max_examples=100, deadline=None)
@given(st.tuples(*[st.floats(0.5, 10)] * 4), st.floats(0.05, 0.95),
       st.tuples(st.floats(-1, 1), st.floats(-1, 1)))
def test_argmax_matches_closed_form_randomly(k, lam, agg):
    p = LqParams(k=((k[0], k[1]), (k[2], k[3])))
    a, _ = hamiltonian_argmax(T0, X0, np.array(agg), _weights(lam), lq_general_model(p),
                              a_max=50)
    np.testing.assert_allclose(a, a_star_from_aggregates(agg, lam, p), atol=1e-4)


def test_planner_driver_equals_planner_value_at_optimum(fig1, lq_gm):
    # at the optimal sensitivity the driver is b(a*).z_lam - k^lam(a*); with rows of
    # z summing to one, b(a*).1 - sum of costs is the Principal's rate g
    lam = 1 / 3
    agg = np.array(pareto_aggregates(lam, fig1))
    a, f_star = hamiltonian_argmax(T0, X0, agg, _weights(lam), lq_gm)
    c = lq_gm.costs
    g_direct = float(np.sum(lq_gm.drift(T0, X0, a)) - c[0](T0, X0, a[:, 0]) - c[1](T0, X0, a[:, 1]))
    # g is not the searched objective, so its error is first order in the argmax error
    assert g_direct == pytest.approx(g_pareto_value(lam, fig1), abs=1e-7)
    assert g_direct == pytest.approx(0.8, abs=1e-7)
    assert f_star == pytest.approx(48 / 135, abs=1e-9)


def test_planner_driver_is_convex(lq_gm):
    rng = np.random.default_rng(5)
    for _ in range(100):
        z1, z2 = rng.uniform(-1, 1, size=(2, 2))
        mid = planner_driver(T0, X0, (z1 + z2) / 2, _weights(0.4), lq_gm, grid=5)
        ends = (planner_driver(T0, X0, z1, _weights(0.4), lq_gm, grid=5)
                + planner_driver(T0, X0, z2, _weights(0.4), lq_gm, grid=5)) / 2
        assert mid <= ends + 1e-9


def test_planner_driver_grows_quadratically(lq_gm):
    z = np.array([0.03, -0.02])
    values = [planner_driver(T0, X0, c * z, _weights(0.5), lq_gm, a_max=10) for c in (1, 10, 100)]
    np.testing.assert_allclose(np.array(values) / values[0], [1, 100, 10_000], rtol=1e-6)


def test_non_finite_objective_is_reported():
    gm = GeneralModel(1, lambda t, x, a: np.array([np.nan]), (lambda t, x, c: 0.0,),
                      (lambda x: 0.0,))
    with pytest.raises(ModelError):
        hamiltonian_argmax(T0, np.zeros(1), np.ones(1), [1.0], gm)


# --- Nash -----------------------------------------------------------------------------------------

def test_nash_fixed_point_lq(fig1, lq_gm):
    z = z_nash(fig1)
    res = nash_fixed_point(T0, X0, z, lq_gm)
    np.testing.assert_allclose(res.a, nash_actions(z, fig1), atol=1e-7)
    assert res.iterations == 1
    again = nash_fixed_point(T0, X0, z, lq_gm, a0=res.a)
    assert again.iterations == 0
    np.testing.assert_allclose(nash_fixed_point(T0, X0, np.zeros((2, 2)), lq_gm).a, 0, atol=1e-8)


def test_nash_point_is_deviation_proof(fig1, lq_gm):
    z = z_nash(fig1)
    a = nash_fixed_point(T0, X0, z, lq_gm).a
    rng = np.random.default_rng(7)
    for i in range(2):
        def objective(col):
            trial = a.copy()
            trial[:, i] = col
            return lq_gm.drift(T0, X0, trial) @ z[:, i] - lq_gm.costs[i](T0, X0, col)

        base = objective(a[:, i])
        for col in rng.uniform(-3, 3, size=(5_000, 2)):
            assert objective(col) <= base + 1e-7


def test_nash_driver_values(fig1, lq_gm):
    assert not np.any(nash_driver(T0, X0, np.zeros((2, 2)), lq_gm))
    z = z_nash(fig1)
    f = nash_driver(T0, X0, z, lq_gm, a_nash=nash_actions(z, fig1))
    b = lq_gm.drift(T0, X0, nash_actions(z, fig1))
    # the driver sum equals the Principal's rate once the penalty and the
    # excess loadings are removed
    excess = float(b @ (z.sum(axis=1) - 1))
    assert f.sum() - excess == pytest.approx(g_na(z, fig1) + 0.03125 + 0.001953125, abs=1e-12)
    assert f.sum() - excess == pytest.approx(0.776953125, abs=1e-12)
    assert f.sum() == pytest.approx(1.037890625, abs=1e-12)


def test_nash_driver_convex_in_own_column_not_linear(lq_gm):
    # each agent's driver is convex in its own sensitivities; the other agent's
    # column enters bilinearly through the equilibrium effort
    rng = np.random.default_rng(2)
    nonlinear = False
    for _ in range(20):
        z1, z2 = rng.uniform(-1, 1, size=(2, 2, 2))
        for i in range(2):
            w = z1.copy()
            w[:, i] = z2[:, i]
            mid_z = (z1 + w) / 2
            mid = nash_driver(T0, X0, mid_z, lq_gm)[i]
            ends = (nash_driver(T0, X0, z1, lq_gm)[i] + nash_driver(T0, X0, w, lq_gm)[i]) / 2
            assert mid <= ends + 1e-8
            nonlinear |= ends - mid > 1e-3
    assert nonlinear


def test_fixed_point_failure_is_explicit():
    # the best response of each agent flips with the other's action, so iteration cycles
    gm = GeneralModel(
        2,
        lambda t, x, a: np.array([-a[0, 0] * a[0, 1], a[0, 0] * a[0, 1]]),
        (lambda t, x, c: 0.5 * float(c @ c), lambda t, x, c: 0.5 * float(c @ c)),
        (lambda x: 0.0, lambda x: 0.0),
    )
    z = np.array([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(FixedPointError):
        nash_fixed_point(T0, X0, z, gm, max_iter=3, a0=np.array([[1.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        nash_fixed_point(T0, X0, z, gm, max_iter=0)


# --- assumption checks --------------------------------------------------------------------------

def test_condition_a1():
    r1, r2, holds = condition_a1(GrowthConstants())
    assert (r1, r2, holds) == (2, 2, True)
    assert condition_a1(GrowthConstants(m=3))[2] is False
    with pytest.raises(ValueError):
        condition_a1(GrowthConstants(l=2, m_under=1))


def test_lemma_b1_constant():
    assert lemma_b1_constant(GrowthConstants(c_b=0, c=1, c_a=1, c_k=1), 2) == 14
    gc = GrowthConstants(c_b=0.5, c_a=0, c_k=3)
    assert lemma_b1_constant(gc, 2) == pytest.approx(0.5 + 2 * 3 * 2)
    with pytest.raises(ValueError):
        lemma_b1_constant(GrowthConstants(m=2), 2)


def test_bmo_condition():
    assert check_bmo_condition(GrowthConstants(k_bmo=0.01, c_p_prime=2), 14) is True
    assert check_bmo_condition(GrowthConstants(k_bmo=0, c_p_prime=2), 14) is True
    assert check_bmo_condition(GrowthConstants(k_bmo=1, c_p_prime=2), 14) is False


def test_growth_constants_validation():
    with pytest.raises(ValueError):
        GrowthConstants(l=0.5)
    with pytest.raises(ValueError):
        GrowthConstants(c=0)


def test_growth_conditions_lq(fig1):
    report = check_growth_conditions(lq_growth_constants(fig1), lq_general_model(fig1))
    assert report.passed
    assert all(margin > 0 for _, margin in report.bounds.values())


@settings(max_examples=20, deadline=None)
@given(st.tuples(*[st.floats(0.05, 50)] * 4))
def test_growth_conditions_never_fail_on_lq(k):
    p = LqParams(k=((k[0], k[1]), (k[2], k[3])))
    report = check_growth_conditions(lq_growth_constants(p), lq_general_model(p), sample=200)
    assert report.passed


def test_growth_report_flags_ill_posed(fig1):
    report = check_growth_conditions(GrowthConstants(l=3, m_under=1), lq_general_model(fig1),
                                     sample=10)
    assert report.ill_posed and not report.passed
    assert report.to_dict()["condition_a1"] is None
