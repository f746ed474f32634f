"""Property and oracle suites behind ``newsvendor-poa validate``.

Each check returns a :class:`Check` with a violation count, so the command
can list failures by name and exit nonzero when any check fails.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import integrate

from .demand_models import DemandModel, HalfNormalDemand, PointMassDemand, UniformDemand
from .errors import NewsvendorError
from .generalized_model import (
    GeneralizedModel,
    PiecewiseLogModel,
    TanhModel,
    as_generalized,
    gen_gfr,
    gen_lfr,
)
from .poa_bounds import lower_bound_push, lower_bound_push_detail, poa_report, price_of_anarchy
from .solver import (
    ChainConfig,
    brute_force_optimum,
    solve_centralized,
    solve_n_serial,
    solve_pull_retailer,
    solve_push_manufacturer,
    stackelberg_oracle,
)

R_GRID = tuple(round(0.05 * i, 10) for i in range(1, 20))
NONTRIVIAL = (ChainConfig.PUSH_MANUFACTURER, ChainConfig.PULL_RETAILER)
FAULTS = ("unclamped-lower",)


def builtin_models() -> dict[str, GeneralizedModel | DemandModel]:
    return {
        "uniform": UniformDemand(1.0),
        "halfnormal": HalfNormalDemand(1.0),
        "tanh": TanhModel(),
        "piecewise": PiecewiseLogModel(),
        "pointmass": PointMassDemand(1.0),
    }


SMOOTH_MODELS = ("uniform", "halfnormal", "tanh")
# Q ranges inside which X stays well above the survival floor
Q_RANGES = {"uniform": (1e-3, 0.999), "halfnormal": (1e-3, 4.0), "tanh": (1e-3, 5.0)}


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    violations: int
    cases: int
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.cases > 0


def _count(name: str, suite: str, items: Iterable[tuple[bool, str]]) -> Check:
    failures, cases = [], 0
    for ok, label in items:
        cases += 1
        if not ok:
            failures.append(label)
    detail = "; ".join(failures[:5]) + (" ..." if len(failures) > 5 else "")
    return Check(suite, name, len(failures), cases, detail)


def _guard(fn: Callable[[], bool], label: str) -> tuple[bool, str]:
    try:
        return bool(fn()), label
    except (NewsvendorError, ArithmeticError) as exc:
        return False, f"{label} ({type(exc).__name__})"


# -- invariant suite ------------------------------------------------------------


def _lower_values(fault: str | None) -> Callable[[float, float, float], float]:
    if fault == "unclamped-lower":
        return lambda k, s, rt: lower_bound_push_detail(k, s, rt).raw
    return lower_bound_push


def invariant_checks(fault: str | None = None, seed: int = 7) -> list[Check]:
    models = builtin_models()
    rng = np.random.default_rng(seed)
    suite = "invariants"
    checks = []

    checks.append(_count("poa>=1", suite, (
        _guard(lambda m=m, r=r, c=c: price_of_anarchy(models[m], r, c) >= 1.0 - 1e-9, f"{m} {c.value} r={r}")
        for m in SMOOTH_MODELS for c in ChainConfig for r in R_GRID
    )))

    checks.append(_count("trivial_configs_poa==1", suite, (
        _guard(lambda m=m, r=r, c=c: abs(price_of_anarchy(models[m], r, c) - 1.0) <= 1e-10, f"{m} {c.value} r={r}")
        for m in models for c in (ChainConfig.PUSH_RETAILER, ChainConfig.PULL_MANUFACTURER) for r in R_GRID
        if r > as_generalized(models[m]).marginal_at_infinity
    )))

    def sandwich(m, r, c):
        return poa_report(models[m], r, c).valid

    checks.append(_count("lower<=poa<=improved_upper<=prev_upper", suite, (
        _guard(lambda m=m, r=r, c=c: sandwich(m, r, c), f"{m} {c.value} r={r}")
        for m in SMOOTH_MODELS for c in NONTRIVIAL for r in R_GRID
    )))

    lower = _lower_values(fault)
    grid = [(k, s, rt) for k in (0.05, 0.2, 0.5, 0.8) for s in (k, 0.5 * (k + 1.0), 1.0, 2.0) for rt in (0.1, 0.5, 0.9)]
    checks.append(_count("lower>=1", suite, (
        _guard(lambda k=k, s=s, rt=rt: lower(k, s, rt) >= 1.0, f"k={k} s={s} r~={rt}")
        for k, s, rt in grid if s >= k
    )))

    def ordering(m, r):
        push = solve_push_manufacturer(models[m], r)
        pull = solve_pull_retailer(models[m], r)
        return pull.Q_d >= push.Q_d - 1e-12

    checks.append(_count("Qd_pull>=Qd_push", suite, (
        _guard(lambda m=m, r=r: ordering(m, r), f"{m} r={r}") for m in SMOOTH_MODELS for r in R_GRID
    )))
    checks.append(_count("poa_push>=poa_pull", suite, (
        _guard(
            lambda m=m, r=r: price_of_anarchy(models[m], r, ChainConfig.PUSH_MANUFACTURER)
            >= price_of_anarchy(models[m], r, ChainConfig.PULL_RETAILER) - 1e-12,
            f"{m} r={r}",
        )
        for m in SMOOTH_MODELS for r in R_GRID
    )))

    def rate_grid(m):
        lo, hi = Q_RANGES[m]
        return np.linspace(lo, hi, 200)

    checks.append(_count("l>=g", suite, (
        _guard(
            lambda m=m, q=q: gen_lfr(as_generalized(models[m]), q) >= gen_gfr(as_generalized(models[m]), q) - 1e-12,
            f"{m} Q={q:.4g}",
        )
        for m in SMOOTH_MODELS for q in rate_grid(m)
    )))

    def l_monotone(m):
        model = as_generalized(models[m])
        values = [gen_lfr(model, float(q)) for q in rate_grid(m)]
        return all(b >= a - 1e-9 * max(1.0, abs(a)) for a, b in zip(values, values[1:]))

    checks.append(_count("l_nondecreasing", suite, (
        _guard(lambda m=m: l_monotone(m), m) for m in SMOOTH_MODELS
    )))

    def young(model: DemandModel, q: float, phi: float) -> bool:
        co = float(model.cumulative_order(q))
        tail, _ = integrate.quad(lambda y: model.inverse_survival(y), phi, 1.0, limit=200)
        return q * float(model.survival(q)) <= co + 1e-9 and co <= q * phi + tail + 1e-7

    young_cases = []
    for name in ("uniform", "halfnormal"):
        lo, hi = Q_RANGES[name]
        for q, phi in zip(rng.uniform(lo, hi, 20), rng.uniform(0.0, 1.0, 20)):
            young_cases.append((name, float(q), float(phi)))
    checks.append(_count("young_sandwich", suite, (
        _guard(lambda n=n, q=q, p=p: young(models[n], q, p), f"{n} Q={q:.4g} phi={p:.4g}")
        for n, q, p in young_cases
    )))

    def concave(model: GeneralizedModel, a: float, b: float, lam: float) -> bool:
        left = lam * float(model.order_fn(a)) + (1.0 - lam) * float(model.order_fn(b))
        return left <= float(model.order_fn(lam * a + (1.0 - lam) * b)) + 1e-12

    triples = []
    for name in ("uniform", "halfnormal", "tanh", "piecewise"):
        hi = Q_RANGES.get(name, (0.0, 3.0))[1]
        for a, b, lam in zip(rng.uniform(0, hi, 100), rng.uniform(0, hi, 100), rng.uniform(0, 1, 100)):
            triples.append((name, float(a), float(b), float(lam)))
    checks.append(_count("M_concave", suite, (
        _guard(lambda n=n, a=a, b=b, t=t: concave(as_generalized(models[n]), a, b, t), f"{n} ({a:.3g},{b:.3g},{t:.3g})")
        for n, a, b, t in triples
    )))

    def pointmass(r):
        model = models["pointmass"]
        qs = [poa_report(model, r, c).result.Q_d for c in ChainConfig]
        poas = [price_of_anarchy(model, r, c) for c in ChainConfig]
        return max(qs) - min(qs) <= 1e-12 and all(abs(p - 1.0) <= 1e-12 for p in poas)

    checks.append(_count("pointmass_degenerate", suite, (
        _guard(lambda r=r: pointmass(r), f"r={r}") for r in R_GRID
    )))
    return checks


# -- oracle suite -----------------------------------------------------------------


ORACLE_R = (0.1, 0.3, 0.5, 0.7, 0.9)


def _leader_objective(model: GeneralizedModel, r: float, config: ChainConfig):
    """Leader profit with the follower's response substituted, as a function of Q."""
    if config is ChainConfig.PUSH_MANUFACTURER:
        return lambda q: (np.asarray(model.marginal(q)) - r) * q
    return lambda q: (1.0 - r / np.asarray(model.marginal(q))) * np.asarray(model.order_fn(q))


def oracle_checks(q_tol: float = 1e-6) -> list[Check]:
    models = builtin_models()
    suite = "oracle"
    checks = []

    def central(m, r):
        model = as_generalized(models[m])
        q_c = solve_centralized(model, r)
        q_star, _ = brute_force_optimum(lambda q: -r * q + model.order_fn(q), 2.0 * q_c, 10_000)
        return abs(q_star - q_c) <= q_tol

    checks.append(_count("centralized_vs_grid", suite, (
        _guard(lambda m=m, r=r: central(m, r), f"{m} r={r}") for m in SMOOTH_MODELS for r in ORACLE_R
    )))

    def decentral(m, r, c):
        model = as_generalized(models[m])
        q_c = solve_centralized(model, r)
        solver = solve_push_manufacturer if c is ChainConfig.PUSH_MANUFACTURER else solve_pull_retailer
        q_d = solver(model, r).Q_d
        with np.errstate(divide="ignore", invalid="ignore"):
            q_star, _ = brute_force_optimum(_leader_objective(model, r, c), q_c, 10_000)
        return abs(q_star - q_d) <= q_tol

    checks.append(_count("decentralized_vs_grid", suite, (
        _guard(lambda m=m, r=r, c=c: decentral(m, r, c), f"{m} {c.value} r={r}")
        for m in SMOOTH_MODELS for c in NONTRIVIAL for r in ORACLE_R
    )))

    def methods(m, r, c):
        solver = solve_push_manufacturer if c is ChainConfig.PUSH_MANUFACTURER else solve_pull_retailer
        a, b = solver(models[m], r, "bisection"), solver(models[m], r, "fixed_point")
        return abs(a.Q_d - b.Q_d) <= 1e-7 and a.residual <= 1e-9 and b.residual <= 1e-9

    checks.append(_count("bisection==fixed_point", suite, (
        _guard(lambda m=m, r=r, c=c: methods(m, r, c), f"{m} {c.value} r={r}")
        for m in SMOOTH_MODELS for c in NONTRIVIAL for r in R_GRID
    )))

    def wholesale(m, r, c):
        solver = solve_push_manufacturer if c is ChainConfig.PUSH_MANUFACTURER else solve_pull_retailer
        w_oracle, _ = stackelberg_oracle(models[m], r, c, grid_points=2_000, price_points=101)
        return abs(w_oracle - solver(models[m], r).w_over_p) <= 1e-3

    checks.append(_count("stackelberg_wholesale", suite, (
        _guard(lambda m=m, r=r, c=c: wholesale(m, r, c), f"{m} {c.value} r={r}")
        for m in ("uniform", "halfnormal") for c in NONTRIVIAL for r in (0.3, 0.5, 0.7)
    )))

    def reduction(m, r, c):
        solver = solve_push_manufacturer if c is ChainConfig.PUSH_MANUFACTURER else solve_pull_retailer
        return abs(solve_n_serial(models[m], r, 2, c) - solver(models[m], r).Q_d) <= 1e-6

    checks.append(_count("n_serial_N2_reduction", suite, (
        _guard(lambda m=m, r=r, c=c: reduction(m, r, c), f"{m} {c.value} r={r}")
        for m in SMOOTH_MODELS for c in NONTRIVIAL for r in ORACLE_R
    )))
    return checks


def run_suite(suite: str = "all", fault: str | None = None) -> list[Check]:
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
    checks: list[Check] = []
    if suite in ("invariants", "all"):
        checks.extend(invariant_checks(fault))
    if suite in ("oracle", "all"):
        checks.extend(oracle_checks())
    if not checks:
        raise ValueError(f"unknown suite {suite!r}")
    return checks
