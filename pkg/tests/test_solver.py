import logging
import math

import numpy as np
import pytest
from scipy import optimize, stats

from newsvendor_poa.demand_models import HalfNormalDemand, PointMassDemand, UniformDemand
from newsvendor_poa.errors import DerivativeUnavailable, InadmissibleRatio
from newsvendor_poa.generalized_model import NewsvendorModel, PiecewiseLogModel, TanhModel
from newsvendor_poa.solver import (
    ChainConfig,
    Scenario,
    brute_force_optimum,
    expected_profit,
    n_serial_operator,
    solve,
    solve_centralized,
    solve_n_serial,
    solve_pull_manufacturer,
    solve_pull_retailer,
    solve_push_manufacturer,
    solve_push_retailer,
    stackelberg_oracle,
)

UNIFORM = UniformDemand(1.0)
HALFNORMAL = HalfNormalDemand(1.0)
TANH = TanhModel()


# -- profit and centralized --------------------------------------------------------


def test_expected_profit_examples():
    assert expected_profit(UNIFORM, 0.5, 0.0) == 0.0
    assert expected_profit(UNIFORM, 0.5, 0.5) == pytest.approx(0.125, abs=1e-15)
    q = math.atanh(0.5)
    assert expected_profit(TANH, 0.75, q) == pytest.approx(-0.75 * q + 0.5, rel=1e-12)
    assert expected_profit(TANH, 0.75, q) == pytest.approx(0.08802, abs=1e-5)


def test_centralized_examples():
    assert solve_centralized(UNIFORM, 0.5) == pytest.approx(0.5, abs=1e-14)
    median = optimize.brentq(lambda x: stats.halfnorm.sf(x) - 0.5, 0.0, 5.0, xtol=1e-15)
    assert solve_centralized(HALFNORMAL, 0.5) == pytest.approx(median, abs=1e-10)
    assert solve_centralized(HALFNORMAL, 0.5) == pytest.approx(0.67449, abs=1e-5)
    assert solve_centralized(PiecewiseLogModel(1.0, 0.1), 0.3) == 1.0


@pytest.mark.parametrize("r", [0.0, 1.0, -0.2, 1.5])
def test_inadmissible_ratio(r):
    with pytest.raises(InadmissibleRatio):
        solve_centralized(UNIFORM, r)


def test_ratio_below_tail_slope_is_inadmissible():
    with pytest.raises(InadmissibleRatio):
        Scenario(PiecewiseLogModel(1.0, 0.1), 0.05)


# -- two-echelon solvers ---------------------------------------------------------


@pytest.mark.parametrize("method", ["bisection", "fixed_point"])
def test_push_manufacturer_uniform(method):
    res = solve_push_manufacturer(UNIFORM, 0.5, method)
    assert res.Q_d == pytest.approx(0.25, abs=1e-10)
    assert res.w_over_p == pytest.approx(0.75, abs=1e-10)
    assert res.Q_c == pytest.approx(0.5)
    assert res.k == pytest.approx(1 / 3, abs=1e-9)


@pytest.mark.parametrize("method", ["bisection", "fixed_point"])
def test_push_manufacturer_tanh_root(method):
    expected = optimize.brentq(
        lambda q: (1 - math.tanh(q) ** 2) * (1 - 2 * q * math.tanh(q)) - 0.3, 1e-9, math.atanh(math.sqrt(0.7)),
        xtol=1e-15,
    )
    assert solve_push_manufacturer(TANH, 0.3, method).Q_d == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("method", ["bisection", "fixed_point"])
def test_pull_retailer_uniform_cubic(method):
    r = 0.5
    expected = optimize.brentq(lambda q: (1 - q) ** 3 - r * ((1 - q) ** 2 + q - q * q / 2), 0.0, 0.5, xtol=1e-15)
    res = solve_pull_retailer(UNIFORM, r, method)
    assert res.Q_d == pytest.approx(expected, abs=1e-9)
    assert res.Q_d == pytest.approx(0.275, abs=1e-3)
    assert res.w_over_p == pytest.approx(r / (1 - expected), rel=1e-8)


@pytest.mark.parametrize("method", ["bisection", "fixed_point"])
def test_pull_retailer_tanh_root(method):
    expected = optimize.brentq(
        lambda q: (1 - math.tanh(q) ** 2) / (1 + 2 * math.sinh(q) ** 2) - 0.3, 1e-9, 2.0, xtol=1e-15
    )
    assert solve_pull_retailer(TANH, 0.3, method).Q_d == pytest.approx(expected, abs=1e-10)


def test_trivial_configurations():
    res = solve_push_retailer(UNIFORM, 0.5)
    assert res.Q_d == res.Q_c == pytest.approx(0.5) and res.w_over_p == 0.5
    assert res.profit_d == res.profit_c
    assert solve_push_retailer(HALFNORMAL, 0.25).Q_d == pytest.approx(stats.halfnorm.isf(0.25), abs=1e-10)
    res = solve_pull_manufacturer(TANH, 0.4)
    assert res.Q_d == res.Q_c and res.w_over_p == 1.0


@pytest.mark.parametrize("config", list(ChainConfig))
@pytest.mark.parametrize("r", [0.1, 0.5, 0.9])
def test_point_mass_fixed_order(config, r):
    res = solve(Scenario(PointMassDemand(2.0), r, config))
    assert res.Q_d == 2.0 and res.Q_c == 2.0


def test_piecewise_gap_push_is_smooth_root_below_knee():
    m = PiecewiseLogModel(1.0, 0.1)
    res = solve_push_manufacturer(m, 0.3)
    # below the knee X = 1/(1+Q), g = Q/(1+Q): X(1-g) = 1/(1+Q)^2
    assert res.Q_d == pytest.approx(1 / math.sqrt(0.3) - 1, abs=1e-10)
    assert res.Q_c == 1.0


@pytest.mark.parametrize("model", [UNIFORM, HALFNORMAL, TANH])
@pytest.mark.parametrize("r", np.linspace(0.1, 0.9, 9))
def test_methods_agree_and_residual_small(model, r):
    for config, solver in [("push", solve_push_manufacturer), ("pull", solve_pull_retailer)]:
        a = solver(model, r, "bisection")
        b = solver(model, r, "fixed_point")
        assert a.Q_d == pytest.approx(b.Q_d, abs=1e-9)
        assert a.residual < 1e-9 and b.residual < 1e-9


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        solve_push_manufacturer(UNIFORM, 0.5, "newton")


# -- brute-force oracle -----------------------------------------------------------


def test_brute_force_examples():
    q, v = brute_force_optimum(lambda x: expected_profit(UNIFORM, 0.5, x), 1.0, 10_000)
    assert q == pytest.approx(0.5, abs=1e-8) and v == pytest.approx(0.125, abs=1e-12)
    q, _ = brute_force_optimum(lambda x: 0.0 * np.asarray(x) + 3.0, 2.0, 100)
    assert q == 0.0
    q, _ = brute_force_optimum(lambda x: -0.75 * np.asarray(x) + UNIFORM.cumulative_order(x), 1.0)
    assert q == pytest.approx(0.25, abs=1e-7)


@pytest.mark.parametrize("model", [UNIFORM, HALFNORMAL, TANH])
def test_follower_and_leader_by_brute_force(model):
    r = 0.4
    for solver, cfg in [(solve_push_manufacturer, "push"), (solve_pull_retailer, "pull")]:
        res = solver(model, r)
        gm = NewsvendorModel(model) if not isinstance(model, TanhModel) else model
        if cfg == "push":
            # leader profit (w - r) Q(w) with Q(w) = X^-1(w), parametrized by Q
            lead = lambda q: (np.asarray(gm.marginal(q)) - r) * q
        else:
            # leader keeps (1 - w) M(Q) with w = r / X(Q)
            lead = lambda q: (1 - r / np.asarray(gm.marginal(q))) * np.asarray(gm.order_fn(q))
        q, _ = brute_force_optimum(lead, res.Q_c, 10_000)
        assert q == pytest.approx(res.Q_d, abs=1e-5)


@pytest.mark.slow
def test_stackelberg_oracle_halfnormal():
    for cfg, solver in [("push_manufacturer", solve_push_manufacturer), ("pull_retailer", solve_pull_retailer)]:
        res = solver(HALFNORMAL, 0.5)
        w, _ = stackelberg_oracle(HALFNORMAL, 0.5, cfg, grid_points=2_000, price_points=201)
        assert w == pytest.approx(res.w_over_p, abs=1e-3)


# -- N-serial chains -------------------------------------------------------------


@pytest.mark.parametrize("model", [UNIFORM, HALFNORMAL, TANH])
@pytest.mark.parametrize("r", [0.2, 0.5, 0.8])
def test_n_serial_two_echelons_reduce(model, r):
    assert solve_n_serial(model, r, 2, "push_manufacturer") == pytest.approx(
        solve_push_manufacturer(model, r).Q_d, abs=1e-9
    )
    assert solve_n_serial(model, r, 2, "pull_retailer") == pytest.approx(solve_pull_retailer(model, r).Q_d, abs=1e-9)


def three_tier_uniform_push(r: float) -> float:
    """Brute-force subgame-perfect order of a three-tier uniform chain.

    Top sets w1, middle sets w2, bottom orders Q = 1 - w2. Each stage is
    solved on a grid with no use of first-order conditions.
    """
    def middle_best_w2(w1):
        w2_grid = np.linspace(w1, 1.0, 4001)
        profit = (w2_grid - w1) * (1.0 - w2_grid)
        return w2_grid[np.argmax(profit)]

    w1_grid = np.linspace(r, 1.0, 4001)
    q = np.array([1.0 - middle_best_w2(w1) for w1 in w1_grid])
    i = int(np.argmax((w1_grid - r) * q))
    return q[i]


@pytest.mark.parametrize("r", [0.2, 0.5])
def test_n_serial_three_echelons_against_game_oracle(r):
    q = solve_n_serial(UNIFORM, r, 3, "push_manufacturer")
    assert q == pytest.approx((1 - r) / 4, abs=1e-12)
    assert q == pytest.approx(three_tier_uniform_push(r), abs=2e-3)


def test_n_serial_tanh_against_finite_difference_operator():
    # (1 + Q d/dQ)^2 X = X + 3 Q X' + Q^2 X'' for N = 3 push
    x = lambda q: 1.0 / math.cosh(q) ** 2
    h = 1e-4

    def op(q):
        d1 = (x(q + h) - x(q - h)) / (2 * h)
        d2 = (x(q + h) - 2 * x(q) + x(q - h)) / h**2
        return x(q) + 3 * q * d1 + q * q * d2

    expected = optimize.brentq(lambda q: op(q) - 0.3, 1e-6, 0.6)
    assert solve_n_serial(TANH, 0.3, 3, "push_manufacturer") == pytest.approx(expected, abs=1e-6)


def test_n_serial_more_echelons_order_less():
    qs = [solve_n_serial(HALFNORMAL, 0.3, n, "push_manufacturer") for n in (2, 3, 4)]
    assert qs[0] > qs[1] > qs[2] > 0


def test_n_serial_piecewise_root_below_knee():
    # X = 1/(1+Q) below the knee: X + 3QX' + Q^2 X'' = (1 - Q)/(1 + Q)^3
    m = PiecewiseLogModel(1.0, 0.1)
    expected = optimize.brentq(lambda q: (1 - q) / (1 + q) ** 3 - 0.3, 0.0, 1.0, xtol=1e-15)
    assert solve_n_serial(m, 0.3, 3, "push_manufacturer") == pytest.approx(expected, abs=1e-10)


def test_n_serial_operator_at_kink_raises():
    with pytest.raises(DerivativeUnavailable):
        n_serial_operator(PiecewiseLogModel(1.0, 0.1), 1.0, 3, ChainConfig.PUSH_MANUFACTURER)


def test_n_serial_rejects_trivial_config():
    with pytest.raises(ValueError):
        solve_n_serial(UNIFORM, 0.5, 3, "push_retailer")


def test_solve_dispatches_n_serial():
    res = solve(Scenario(UNIFORM, 0.5, "push_manufacturer", echelons=3))
    assert res.Q_d == pytest.approx(0.125) and math.isnan(res.w_over_p)


def test_n_serial_uniform_root_meets_inequality(caplog):
    caplog.set_level(logging.WARNING, logger="newsvendor_poa.solver")
    solve_n_serial(UNIFORM, 0.5, 3, "push_manufacturer")
    assert not any("violates" in rec.message for rec in caplog.records)
