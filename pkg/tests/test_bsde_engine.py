import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pareto_contracts.bsde_engine import (
    DivergenceError, PicardError, TimeGrid, ValueProcessSpec, backward_euler_solve,
    contract_from_value, forward_value_process, lq_optimal_aggregates, picard_iterate,
)
from pareto_contracts.lq_model import (LqParams, a_star_lq, appetence_vector, contracts_pareto,
                                       cost_lq, drift_lq, pareto_aggregates, z_cooperative,
                                       z_pareto)
from pareto_contracts.mc_verify import simulate_paths


def test_time_grid():
    grid = TimeGrid(2.0, 4)
    assert grid.dt == 0.5
    np.testing.assert_array_equal(grid.times, [0, 0.5, 1, 1.5, 2])
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 5)


def test_value_spec_validation():
    with pytest.raises(ValueError):
        ValueProcessSpec(math.nan, (0, 0), lambda t, x, z: 0)


# --- forward value processes -------------------------------------------------------------------

def _noise(n_paths=50, n_steps=20, seed=0):
    return np.random.default_rng(seed).normal(scale=math.sqrt(1 / n_steps), size=(n_paths, n_steps, 2))


def test_zero_sensitivity_and_cost_is_constant():
    grid = TimeGrid(1.0, 20)
    y = forward_value_process(ValueProcessSpec(0.7, (0, 0), lambda t, x, z: 0.0), grid, _noise())
    assert np.all(y == 0.7)


def test_initial_value_shift():
    grid = TimeGrid(1.0, 20)
    dw = _noise()
    base = forward_value_process(ValueProcessSpec(1.0, (0.3, -0.2), lambda t, x, z: 0.4), grid, dw)
    double = forward_value_process(ValueProcessSpec(2.0, (0.3, -0.2), lambda t, x, z: 0.4), grid, dw)
    np.testing.assert_allclose(double - base, 1.0, atol=1e-14)


def test_grid_mismatch_rejected():
    with pytest.raises(ValueError):
        forward_value_process(ValueProcessSpec(0, (0, 0), lambda t, x, z: 0), TimeGrid(1, 5), _noise())


@pytest.mark.parametrize("lam", [0.5, 0.3])
def test_value_process_reproduces_contracts(fig1, lam):
    p = fig1.replace(gamma=0.4, r0=(0.2, -0.1))
    z = z_cooperative(p) if lam == 0.5 else z_pareto(lam, p)
    a = a_star_lq(z, lam, p)
    grid = TimeGrid(p.horizon, 50)
    ens = simulate_paths(a, p, grid, 1000, seed=3)
    costs = cost_lq(a, p)
    for i, c in enumerate(contracts_pareto(lam, p)):
        spec = ValueProcessSpec(p.r0[i], z[:, i], lambda t, x, zz, k=float(costs[i]): k)
        y = forward_value_process(spec, grid, ens.increments)
        pay = contract_from_value(y[:, -1], ens.x_terminal, i, p)
        np.testing.assert_allclose(pay, c.pay(ens.x_terminal), atol=1e-10, rtol=0)


@settings(max_examples=25)
@given(st.floats(0.05, 0.95), st.floats(-2, 2), st.floats(-2, 2))
def test_weighted_value_process_is_linear(lam, y1, y2):
    grid = TimeGrid(1.0, 30)
    dw = _noise(n_steps=30, seed=4)
    z1, z2 = np.array([0.4, -0.3]), np.array([0.6, 1.3])

    def drv1(t, x, z):
        return 0.3 + 0.1 * t

    def drv2(t, x, z):
        return 0.05 * t ** 2

    first = forward_value_process(ValueProcessSpec(y1, z1, drv1), grid, dw)
    second = forward_value_process(ValueProcessSpec(y2, z2, drv2), grid, dw)
    mixed = forward_value_process(
        ValueProcessSpec(lam * y1 + (1 - lam) * y2, lam * z1 + (1 - lam) * z2,
                         lambda t, x, z: lam * drv1(t, x, z) + (1 - lam) * drv2(t, x, z)),
        grid, dw)
    np.testing.assert_allclose(mixed, lam * first + (1 - lam) * second, atol=1e-12, rtol=0)


# --- backward scheme ------------------------------------------------------------------------------

@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(1, 200))
def test_constant_driver_exact(xi, c, n):
    y0, _ = backward_euler_solve(lambda x: xi, lambda t, y, z: c, TimeGrid(2.0, n))
    assert y0 == pytest.approx(xi + 2 * c, abs=1e-10)


def test_linear_driver_first_order():
    alpha, xi = 0.8, 1.5
    exact = xi * math.exp(alpha)
    errors = [abs(backward_euler_solve(lambda x: xi, lambda t, y, z: alpha * y,
                                       TimeGrid(1.0, n))[0] - exact) for n in (50, 100, 200, 400)]
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    assert np.all((ratios >= 1.8) & (ratios <= 2.2))


def test_divergence_reported():
    with pytest.raises(DivergenceError):
        backward_euler_solve(lambda x: 1.0, lambda t, y, z: 1e6 * y, TimeGrid(1.0, 10))


def test_x_path_shape_checked():
    with pytest.raises(ValueError):
        backward_euler_solve(lambda x: 0.0, lambda t, y, z: 0.0, TimeGrid(1.0, 10), np.zeros(5))


@pytest.mark.parametrize("lam", [0.25, 0.5, 0.7])
def test_weighted_planner_value_is_weighted_reservation(fig1, lam):
    p = fig1.replace(gamma=0.3, r0=(0.4, -0.25))
    z = z_cooperative(p) if lam == 0.5 else z_pareto(lam, p)
    a = a_star_lq(z, lam, p)
    w = np.array([lam, 1 - lam])
    contracts = contracts_pareto(lam, p)
    z_lam = z @ w
    f_star = float(drift_lq(a) @ z_lam - cost_lq(a, p) @ w)

    def terminal(x):
        x = np.asarray(x)
        return sum(w[i] * (contracts[i].pay(x) + x @ appetence_vector(i, p.gamma)) for i in range(2))

    grid = TimeGrid(p.horizon, 100)
    path = np.outer(grid.times, drift_lq(a))
    y0, z_found = backward_euler_solve(terminal, lambda t, y, zz: f_star, grid, path)
    np.testing.assert_allclose(z_found, z_lam, atol=1e-8)
    assert y0 == pytest.approx(w @ np.array(p.r0), abs=1e-8)


# --- Picard ---------------------------------------------------------------------------------------

def test_picard_identity_and_halving():
    assert picard_iterate(3.0, lambda z: z) == 3.0
    assert picard_iterate(0.0, lambda z: (z + 4.0) / 2) == pytest.approx(4.0, abs=1e-11)


def test_picard_failure():
    with pytest.raises(PicardError):
        picard_iterate(1.0, lambda z: z + 1, max_iter=10)
    with pytest.raises(PicardError):
        picard_iterate(1.0, lambda z: math.inf)


@given(st.tuples(*[st.floats(0.2, 10)] * 4), st.floats(0.05, 0.95))
def test_lq_fixed_point_matches_closed_form(k, lam):
    p = LqParams(k=((k[0], k[1]), (k[2], k[3])))
    np.testing.assert_allclose(lq_optimal_aggregates(lam, p), pareto_aggregates(lam, p),
                               atol=1e-10, rtol=0)
