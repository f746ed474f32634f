"""Acceptance suite: one group of tests per criterion, at the stated tolerances.

Each test carries ``@pytest.mark.criterion(n)``; the conftest prints one
``CRITERION n: PASS/FAIL`` line per criterion after the run.
"""

import math
import sys
import time

import numpy as np
import pytest
from click.testing import CliRunner
from scipy import integrate

from newsvendor_poa.ar_simulator import (
    ArConfig,
    build_empirical_model,
    fit_log_density,
    generate_series,
    summarize_series,
)
from newsvendor_poa.cli import main
from newsvendor_poa.demand_models import (
    DemandModel,
    HalfNormalDemand,
    PointMassDemand,
    UniformDemand,
)
from newsvendor_poa.errors import InadmissibleRatio
from newsvendor_poa.generalized_model import PiecewiseLogModel, TanhModel, as_generalized, gen_gfr, gen_lfr
from newsvendor_poa.poa_bounds import ALPHA_SMALL, poa_report, prev_upper_push, price_of_anarchy
from newsvendor_poa.solver import (
    ChainConfig,
    Scenario,
    brute_force_optimum,
    expected_profit,
    solve,
    solve_centralized,
    solve_n_serial,
    solve_pull_retailer,
    solve_push_manufacturer,
    stackelberg_oracle,
)

R_GRID = np.linspace(0.05, 0.95, 19)
NONTRIVIAL = ("push_manufacturer", "pull_retailer")
BUILTIN = {
    "uniform": UniformDemand(1.0),
    "halfnormal": HalfNormalDemand(1.0),
    "tanh": TanhModel(),
    "piecewise": PiecewiseLogModel(1.0, 0.1),
    "pointmass": PointMassDemand(1.0),
}
SMOOTH = {k: BUILTIN[k] for k in ("uniform", "halfnormal", "tanh")}


def admissible(model, r):
    try:
        Scenario(model, r)
        return True
    except InadmissibleRatio:
        return False


# -- shared checks for criteria 4, 8 and 9 ----------------------------------------------


def igfr_r_grid(model, r_values):
    """r values whose order range ``(0, Qc(r))`` keeps g nondecreasing on a 256-point grid."""
    gm = as_generalized(model)
    out = []
    for r in r_values:
        q_c = solve_centralized(gm, r)
        qs = [q for q in np.linspace(1e-6 * q_c, q_c * (1 - 1e-9), 256) if not gm.is_kink(q)]
        g = np.array([gen_gfr(gm, q) for q in qs])
        if np.all(np.diff(g) >= -1e-9 * np.maximum(1.0, g[:-1])):
            out.append(float(r))
    return out


def assert_sandwich(model, r_values, tol=1e-6):
    strictly_better = False
    for config in NONTRIVIAL:
        for r in r_values:
            rep = poa_report(model, r, config)
            assert rep.lower <= rep.poa + tol, (config, r, rep.lower, rep.poa)
            assert rep.poa <= rep.improved_upper + tol, (config, r, rep.poa, rep.improved_upper)
            if rep.branch == ALPHA_SMALL:
                assert rep.improved_upper <= rep.prev_upper + tol, (config, r)
            strictly_better |= rep.improved_upper < rep.prev_upper - tol
    assert strictly_better, "improved upper bound never beats the previous one"


def assert_ordering(model, r_values):
    for r in r_values:
        push = solve_push_manufacturer(model, r)
        pull = solve_pull_retailer(model, r)
        assert pull.Q_d >= push.Q_d - 1e-12, r
        poa_push = push.profit_c / push.profit_d
        poa_pull = pull.profit_c / pull.profit_d
        assert poa_push >= 1.0 - 1e-12 and poa_pull >= 1.0 - 1e-12, r
        assert poa_push >= poa_pull - 1e-12, r


def assert_rates(model, q_lo, q_hi, points=400):
    qs = np.linspace(q_lo, q_hi, points)
    g = np.array([gen_gfr(model, q) for q in qs])
    l = np.array([gen_lfr(model, q) for q in qs])
    assert np.all(l >= g - 1e-10)
    if np.all(np.diff(g) >= -1e-10):
        assert np.all(np.diff(l) >= -1e-9)


def assert_young(model: DemandModel, q_hi, rng, count=20):
    for q, phi in zip(rng.uniform(0.0, q_hi, count), rng.uniform(0.0, 1.0, count)):
        co = float(model.cumulative_order(q))
        tail, _ = integrate.quad(model.inverse_survival, phi, 1.0, limit=200)
        assert q * float(model.survival(q)) <= co + 1e-10
        assert co <= q * phi + tail + 1e-7


def assert_concave(model, q_hi, rng, count=100):
    gm = as_generalized(model)
    for a, b, lam in zip(rng.uniform(0, q_hi, count), rng.uniform(0, q_hi, count), rng.uniform(0, 1, count)):
        left = lam * float(gm.order_fn(a)) + (1 - lam) * float(gm.order_fn(b))
        assert left <= float(gm.order_fn(lam * a + (1 - lam) * b)) + 1e-12


# -- criteria ---------------------------------------------------------------------------


@pytest.mark.criterion(1)
def test_criterion_1_uniform_closed_form_poa():
    start = time.perf_counter()
    values = [price_of_anarchy(UniformDemand(1.0), r, "push_manufacturer") for r in R_GRID]
    elapsed = time.perf_counter() - start
    assert values == pytest.approx([4 / 3] * 19, abs=1e-8)
    assert elapsed < 1.0


@pytest.mark.criterion(2)
@pytest.mark.parametrize("name", BUILTIN)
@pytest.mark.parametrize("config", ["push_retailer", "pull_manufacturer"])
def test_criterion_2_trivial_configurations(name, config):
    model = BUILTIN[name]
    checked = 0
    for r in R_GRID:
        if not admissible(model, r):
            continue
        assert price_of_anarchy(model, r, config) == pytest.approx(1.0, abs=1e-10)
        checked += 1
    assert checked > 0


@pytest.mark.criterion(3)
@pytest.mark.parametrize("r", [0.1, 0.5, 0.9])
def test_criterion_3_fixed_order_degeneracy(r):
    model = PointMassDemand(1.0)
    results = [solve(Scenario(model, r, c)) for c in ChainConfig]
    assert len({res.Q_d for res in results}) == 1
    for c in ChainConfig:
        assert price_of_anarchy(model, r, c) == 1.0


@pytest.mark.criterion(4)
@pytest.mark.parametrize("name", ["halfnormal", "tanh"])
def test_criterion_4_sandwich(name):
    model = BUILTIN[name]
    start = time.perf_counter()
    grid = igfr_r_grid(model, R_GRID)
    assert len(grid) == 19
    assert_sandwich(model, grid)
    assert time.perf_counter() - start < 10.0


@pytest.mark.criterion(5)
def test_criterion_5_small_k_bound_curves():
    out = CliRunner().invoke(main, ["bound-curves", "--k", "0.01", "--survival-at-qd", "0.5", "--steps", "100"])
    assert out.exit_code == 0
    first = out.output.splitlines()[1].split(",")
    alpha, upper, lower = map(float, first)
    assert alpha == pytest.approx((1 - 0.01) ** (-1 / (1 - 1e-9)), rel=1e-10)
    assert abs(upper - 1.0) <= 0.05 and abs(lower - 1.0) <= 0.05


@pytest.mark.criterion(5)
def test_criterion_5_k_020_bound_curves():
    out = CliRunner().invoke(main, ["bound-curves", "--k", "0.2", "--r", "0.4", "--steps", "200"])
    assert out.exit_code == 0
    rows = [list(map(float, line.split(","))) for line in out.output.splitlines()[1:]]
    assert min(row[1] for row in rows) > 1.0
    assert min(row[2] for row in rows) > 1.0


@pytest.mark.criterion(6)
def test_criterion_6_previous_work_limit():
    assert prev_upper_push(0.0) == pytest.approx(math.e - 1, abs=1e-9)
    assert prev_upper_push(1e-12) == pytest.approx(math.e - 1, abs=1e-9)
    assert 1 - 1 / prev_upper_push(0.0) == pytest.approx(0.418, abs=1e-3)


def _leader_objective(model, r, config):
    gm = as_generalized(model)
    if config == "push_manufacturer":
        return lambda q: (np.asarray(gm.marginal(q)) - r) * q
    return lambda q: (1 - r / np.asarray(gm.marginal(q))) * np.asarray(gm.order_fn(q))


@pytest.mark.criterion(7)
@pytest.mark.parametrize("name", SMOOTH)
@pytest.mark.parametrize("config", NONTRIVIAL)
def test_criterion_7_oracle_equivalence(name, config):
    model = BUILTIN[name]
    for r in (0.2, 0.5, 0.8):
        res = solve(Scenario(model, r, config))
        q_c, _ = brute_force_optimum(lambda q: expected_profit(model, r, q), 2 * res.Q_c, 10_000)
        assert q_c == pytest.approx(res.Q_c, abs=1e-5)
        q_d, _ = brute_force_optimum(_leader_objective(model, r, config), res.Q_c, 10_000)
        assert q_d == pytest.approx(res.Q_d, abs=1e-5)
    r = 0.4
    res = solve(Scenario(model, r, config))
    w, _ = stackelberg_oracle(model, r, config, grid_points=10_000, price_points=201)
    x_d = float(as_generalized(model).marginal(res.Q_d))
    expected = x_d if config == "push_manufacturer" else r / x_d
    assert w == pytest.approx(expected, abs=1e-3)


@pytest.mark.criterion(8)
@pytest.mark.parametrize("name", BUILTIN)
def test_criterion_8_poa_at_least_one(name):
    model = BUILTIN[name]
    for config in ChainConfig:
        for r in R_GRID:
            if admissible(model, r):
                assert price_of_anarchy(model, r, config) >= 1.0 - 1e-12


@pytest.mark.criterion(8)
@pytest.mark.parametrize("name", ["uniform", "halfnormal", "tanh", "pointmass"])
def test_criterion_8_push_pull_ordering(name):
    assert_ordering(BUILTIN[name], R_GRID)


@pytest.mark.criterion(8)
@pytest.mark.parametrize("name,q_hi", [("uniform", 0.99), ("halfnormal", 4.0), ("tanh", 4.0)])
def test_criterion_8_rates(name, q_hi):
    assert_rates(as_generalized(BUILTIN[name]), 1e-3, q_hi)


@pytest.mark.criterion(8)
@pytest.mark.parametrize("name,q_hi", [("uniform", 1.0), ("halfnormal", 4.0), ("pointmass", 2.0)])
def test_criterion_8_young_sandwich(name, q_hi):
    assert_young(BUILTIN[name], q_hi, np.random.default_rng(2024))


@pytest.mark.criterion(8)
@pytest.mark.parametrize("name", BUILTIN)
def test_criterion_8_concavity(name):
    assert_concave(BUILTIN[name], 4.0, np.random.default_rng(99))


@pytest.fixture(scope="module")
def ar_pipeline():
    start = time.perf_counter()
    config = ArConfig(beta=0.9, sigma2=100.0, n_samples=1_000_000)
    samples = generate_series(config)
    summary = summarize_series(samples)
    fit = fit_log_density(samples, config)
    model = build_empirical_model(fit)
    return config, summary, fit, model, time.perf_counter() - start


@pytest.mark.criterion(9)
def test_criterion_9_ar_moments(ar_pipeline):
    config, summary, _, _, _ = ar_pipeline
    assert summary.n == 1_000_000
    assert abs(summary.mean - 1000.0) < 5 * summary.mean_se
    assert abs(summary.variance - 2 * 100.0**2 / (1 - 0.9**2)) < 5 * summary.variance_se


@pytest.mark.criterion(9)
def test_criterion_9_empirical_model_properties(ar_pipeline):
    _, _, fit, model, setup_time = ar_pipeline
    start = time.perf_counter()
    grid = [r for r in igfr_r_grid(model, R_GRID) if admissible(model, r)]
    assert len(grid) >= 10
    assert_sandwich(model, grid)
    assert_ordering(model, grid)
    for config in ChainConfig:
        for r in grid:
            assert price_of_anarchy(model, r, config) >= 1.0 - 1e-12
    lo, _ = fit.support_range
    q_top = solve_centralized(model, min(grid))
    # the lower support edge is a kink of X, so start just inside it
    assert_rates(as_generalized(model), lo * (1 + 1e-9), q_top)
    rng = np.random.default_rng(9)
    assert_young(model, q_top, rng)
    assert_concave(model, 1.2 * q_top, rng)
    assert setup_time + time.perf_counter() - start < 60.0


@pytest.mark.criterion(10)
@pytest.mark.parametrize("name", SMOOTH)
@pytest.mark.parametrize("r", [0.2, 0.5, 0.8])
def test_criterion_10_two_echelon_reduction(name, r):
    model = BUILTIN[name]
    assert solve_n_serial(model, r, 2, "push_manufacturer") == pytest.approx(
        solve_push_manufacturer(model, r).Q_d, abs=1e-6
    )
    assert solve_n_serial(model, r, 2, "pull_retailer") == pytest.approx(
        solve_pull_retailer(model, r).Q_d, abs=1e-6
    )


@pytest.mark.criterion(10)
@pytest.mark.parametrize("r", [0.2, 0.5, 0.8])
def test_criterion_10_three_echelon_uniform_push(r):
    # target value as stated in the acceptance criterion
    assert solve_n_serial(UniformDemand(1.0), r, 3, "push_manufacturer") == pytest.approx((1 - r) / 3, abs=1e-8)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
