"""Centralized and decentralized (Stackelberg) inventory levels.

All prices are expressed in units of the selling price ``p``, so the only
cost parameter is ``r = c / p``. Four two-echelon configurations are
covered:

* ``push_manufacturer``: retailer stocks, manufacturer sets ``w``.
  ``X(Qd) (1 - g(Qd)) = r`` and ``w / p = X(Qd)``.
* ``push_retailer``: retailer stocks and leads; ``w = c`` and ``Qd = Qc``.
* ``pull_manufacturer``: manufacturer stocks and leads; ``w = p`` and ``Qd = Qc``.
* ``pull_retailer``: manufacturer stocks, retailer sets ``w``.
  ``X(Qd) / (1 + l(Qd)) = r`` and ``w / p = r / X(Qd)``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .demand_models import DemandModel
from .errors import (
    BracketFailure,
    DerivativeUnavailable,
    InadmissibleRatio,
    NoConvergence,
    NonDifferentiablePoint,
    SurvivalUnderflow,
)
from .generalized_model import GeneralizedModel, as_generalized, gen_gfr, gen_lfr
from .numerics import (
    bisect_root,
    golden_section_max,
    jet_antiderivative,
    jet_derivative,
    jet_mul,
    jet_recip,
)

log = logging.getLogger(__name__)

FIXED_POINT_DAMPING = 0.5
FIXED_POINT_MAXITER = 10_000
RESIDUAL_TOL = 1e-9


class ChainConfig(str, enum.Enum):
    PUSH_MANUFACTURER = "push_manufacturer"
    PUSH_RETAILER = "push_retailer"
    PULL_MANUFACTURER = "pull_manufacturer"
    PULL_RETAILER = "pull_retailer"

    @property
    def is_trivial(self) -> bool:
        """Inventory sits with the leader, so the chain behaves as integrated."""
        return self in (ChainConfig.PUSH_RETAILER, ChainConfig.PULL_MANUFACTURER)


@dataclass(frozen=True)
class Scenario:
    model: GeneralizedModel
    r: float
    config: ChainConfig = ChainConfig.PUSH_MANUFACTURER
    echelons: int = 2

    def __post_init__(self):
        object.__setattr__(self, "model", as_generalized(self.model))
        object.__setattr__(self, "config", ChainConfig(self.config))
        check_ratio(self.model, self.r)
        if self.echelons < 2:
            raise ValueError("a chain needs at least two echelons")

    @property
    def r_tilde(self) -> float:
        """Cost ratio rescaled by ``X(0)``."""
        return self.r / self.model.marginal_at_zero


@dataclass(frozen=True)
class EquilibriumResult:
    config: ChainConfig
    r: float
    Q_c: float
    Q_d: float
    w_over_p: float
    profit_c: float
    profit_d: float
    alpha: float
    k: float
    s: float
    l_d: float
    l_c: float
    iterations: int = 0
    residual: float = 0.0
    method: str = "closed_form"
    diagnostics: dict = field(default_factory=dict)


def check_ratio(model: GeneralizedModel, r: float) -> None:
    x0 = model.marginal_at_zero
    if not (0.0 < r < x0):
        raise InadmissibleRatio(f"cost ratio r={r!r} must lie in (0, X(0)={x0:g})")
    x_inf = model.marginal_at_infinity
    if r <= x_inf:
        raise InadmissibleRatio(f"cost ratio r={r!r} is not above X(inf)={x_inf:g}; profit grows without bound")


def expected_profit(model: GeneralizedModel | DemandModel, r: float, q):
    """``-r Q + M(Q)`` in units of the selling price."""
    model = as_generalized(model)
    q = np.asarray(q, dtype=float)
    val = -r * q + np.asarray(model.order_fn(q))
    return float(val) if val.ndim == 0 else val


def solve_centralized(model: GeneralizedModel | DemandModel, r: float) -> float:
    """``Qc = X^{-1}(r)``; a kink whose jump straddles ``r`` is returned as is."""
    model = as_generalized(model)
    check_ratio(model, r)
    for kink in model.kinks:
        left, right = model.marginal_limits(kink)
        if right <= r <= left:
            return float(kink)
    return float(model.inverse_marginal(r))


# -- helpers ----------------------------------------------------------------


def _left_of_kink(model: GeneralizedModel, q: float) -> float:
    return q * (1.0 - 1e-9) if model.is_kink(q) else q


def _safe(fn: Callable[[GeneralizedModel, float], float], model: GeneralizedModel, q: float) -> float:
    """Evaluate a rate, taking the left limit at kinks; ``nan`` on underflow."""
    try:
        return fn(model, _left_of_kink(model, q))
    except SurvivalUnderflow:
        return math.nan


def push_residual(model: GeneralizedModel, r: float, q: float) -> float:
    """``X(Q)(1 - g(Q)) - r``, written as ``X + Q X' - r``."""
    return float(model.marginal(q)) + q * model.marginal_derivative(q) - r


def pull_residual(model: GeneralizedModel, r: float, q: float) -> float:
    """``X(Q) / (1 + l(Q)) - r``."""
    return float(model.marginal(q)) / (1.0 + gen_lfr(model, q)) - r


def _kink_aware_root(
    model: GeneralizedModel, residual: Callable[[float], float], lo: float, hi: float
) -> tuple[float, int]:
    """Root of a residual that is positive near ``lo`` and negative near ``hi``.

    Kinks inside ``[lo, hi]`` split the interval; if the residual jumps
    across zero at a kink, the kink is the root.
    """
    pad = 1e-9
    cuts = sorted(k for k in model.kinks if lo < k <= hi * (1.0 + 1e-12))
    points = [lo]
    for k in cuts:
        points.extend([k * (1.0 - pad), k])
        if k * (1.0 + pad) < hi:
            points.append(k * (1.0 + pad))
    if not cuts or cuts[-1] < hi * (1.0 - pad):
        points.append(hi)

    def value(q: float) -> float:
        if model.is_kink(q):
            return math.nan
        return residual(q)

    previous_q, previous_v = points[0], value(points[0])
    for q in points[1:]:
        if model.is_kink(q):
            # compare the two one-sided values around the kink
            right_q = q * (1.0 + pad)
            right_v = value(right_q) if right_q <= hi * (1.0 + 1e-12) else -math.inf
            if previous_v > 0.0 and right_v <= 0.0 and previous_q >= q * (1.0 - 2 * pad):
                return float(q), 0
            continue
        v = value(q)
        if previous_v > 0.0 and v <= 0.0:
            return bisect_root(residual, previous_q, q, xtol=1e-14 * max(1.0, q))
        previous_q, previous_v = q, v
    raise BracketFailure("residual has no sign change on [eps, Qc]; is the model IGFR?")


def damped_fixed_point(
    update: Callable[[float], float],
    q0: float,
    lower: float,
    upper: float,
    damping: float = FIXED_POINT_DAMPING,
    xtol: float = 1e-12,
    maxiter: int = FIXED_POINT_MAXITER,
) -> tuple[float, int]:
    """Iterate ``Q <- Q + lam (update(Q) - Q)`` until the step is below ``xtol``.

    ``lam`` starts at ``damping`` and is then re-estimated each step from the
    secant slope of ``update`` (Wegstein's rule), clipped to ``[1e-3, 1]``.
    """
    q = q0
    phi = update(q)
    lam = damping
    for it in range(1, maxiter + 1):
        q_new = min(max(q + lam * (phi - q), lower), upper)
        if abs(q_new - q) <= xtol * max(1.0, abs(q)):
            return q_new, it
        phi_new = update(q_new)
        if q_new != q:
            slope = (phi_new - phi) / (q_new - q)
            lam = 1.0 / (1.0 - slope) if slope < 1.0 else 1.0
            lam = min(max(lam, 1e-3), 1.0)
        q, phi = q_new, phi_new
    raise NoConvergence(f"fixed-point iteration did not converge in {maxiter} steps")


def _result(
    model: GeneralizedModel,
    r: float,
    config: ChainConfig,
    q_c: float,
    q_d: float,
    w_over_p: float,
    iterations: int = 0,
    residual: float = 0.0,
    method: str = "closed_form",
) -> EquilibriumResult:
    return EquilibriumResult(
        config=config,
        r=r,
        Q_c=q_c,
        Q_d=q_d,
        w_over_p=w_over_p,
        profit_c=expected_profit(model, r, q_c),
        profit_d=expected_profit(model, r, q_d),
        alpha=q_c / q_d,
        k=_safe(gen_gfr, model, q_d),
        s=_safe(gen_gfr, model, q_c),
        l_d=_safe(gen_lfr, model, q_d),
        l_c=_safe(gen_lfr, model, q_c),
        iterations=iterations,
        residual=residual,
        method=method,
    )


def _residual_at(fn, model: GeneralizedModel, r: float, q: float) -> float:
    if model.is_kink(q):
        return 0.0
    return abs(fn(model, r, q))


# -- two-echelon solvers ----------------------------------------------------


def solve_push_manufacturer(
    model: GeneralizedModel | DemandModel, r: float, method: str = "bisection"
) -> EquilibriumResult:
    """Manufacturer leads, retailer stocks: ``X(Qd)(1 - g(Qd)) = r``."""
    model = as_generalized(model)
    q_c = solve_centralized(model, r)
    eps = 1e-12 * q_c
    if method == "bisection":
        q_d, iterations = _kink_aware_root(model, lambda q: push_residual(model, r, q), eps, q_c)
    elif method == "fixed_point":
        x0 = model.marginal_at_zero

        def update(q: float) -> float:
            q = _left_of_kink(model, q)
            target = r - q * model.marginal_derivative(q)  # r + g X
            return 0.0 if target >= x0 else solve_centralized_level(model, target)

        q_d, iterations = damped_fixed_point(update, q_c, eps, q_c)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _result(
        model,
        r,
        ChainConfig.PUSH_MANUFACTURER,
        q_c,
        q_d,
        w_over_p=float(model.marginal(_left_of_kink(model, q_d))),
        iterations=iterations,
        residual=_residual_at(push_residual, model, r, q_d),
        method=method,
    )


def solve_centralized_level(model: GeneralizedModel, level: float) -> float:
    """``X^{-1}(level)`` honouring kinks; ``level`` in ``(0, X(0))``."""
    for kink in model.kinks:
        left, right = model.marginal_limits(kink)
        if right <= level <= left:
            return float(kink)
    return float(model.inverse_marginal(level))


def solve_push_retailer(model: GeneralizedModel | DemandModel, r: float) -> EquilibriumResult:
    """Retailer leads and stocks: wholesale price equals cost, ``Qd = Qc``."""
    model = as_generalized(model)
    q_c = solve_centralized(model, r)
    return _result(model, r, ChainConfig.PUSH_RETAILER, q_c, q_c, w_over_p=r)


def solve_pull_manufacturer(model: GeneralizedModel | DemandModel, r: float) -> EquilibriumResult:
    """Manufacturer leads and stocks: wholesale price equals ``p``, ``Qd = Qc``."""
    model = as_generalized(model)
    q_c = solve_centralized(model, r)
    return _result(model, r, ChainConfig.PULL_MANUFACTURER, q_c, q_c, w_over_p=1.0)


def solve_pull_retailer(
    model: GeneralizedModel | DemandModel, r: float, method: str = "bisection"
) -> EquilibriumResult:
    """Retailer leads, manufacturer stocks: ``X(Qd) / (1 + l(Qd)) = r``."""
    model = as_generalized(model)
    q_c = solve_centralized(model, r)
    eps = 1e-12 * q_c
    if method == "bisection":
        q_d, iterations = _kink_aware_root(model, lambda q: pull_residual(model, r, q), eps, q_c)
    elif method == "fixed_point":
        x0 = model.marginal_at_zero

        def update(q: float) -> float:
            q = _left_of_kink(model, q)
            inv_delta = 1.0 / r - gen_lfr(model, q) / float(model.marginal(q))
            if inv_delta <= 1.0 / x0:
                return 0.0
            return solve_centralized_level(model, 1.0 / inv_delta)

        q_d, iterations = damped_fixed_point(update, q_c, eps, q_c)
    else:
        raise ValueError(f"unknown method {method!r}")
    x_d = float(model.marginal(_left_of_kink(model, q_d)))
    return _result(
        model,
        r,
        ChainConfig.PULL_RETAILER,
        q_c,
        q_d,
        w_over_p=r / x_d,
        iterations=iterations,
        residual=_residual_at(pull_residual, model, r, q_d),
        method=method,
    )


def solve(scenario: Scenario, method: str = "bisection") -> EquilibriumResult:
    """Dispatch on the scenario's configuration."""
    model, r, config = scenario.model, scenario.r, scenario.config
    if scenario.echelons > 2 and not config.is_trivial:
        q_c = solve_centralized(model, r)
        q_d = solve_n_serial(model, r, scenario.echelons, config)
        return _result(model, r, config, q_c, q_d, w_over_p=math.nan, method="n_serial")
    if config is ChainConfig.PUSH_MANUFACTURER:
        return solve_push_manufacturer(model, r, method)
    if config is ChainConfig.PULL_RETAILER:
        return solve_pull_retailer(model, r, method)
    if config is ChainConfig.PUSH_RETAILER:
        return solve_push_retailer(model, r)
    return solve_pull_manufacturer(model, r)


# -- N-serial chains ----------------------------------------------------------


def n_serial_operator(model: GeneralizedModel, q: float, n: int, config: ChainConfig) -> float:
    """Left-hand side of the N-echelon first-order condition at ``q``.

    push: ``(1 + Q d/dQ)^(N-1) X(Q)``.
    pull: ``(1 + (M/X) d/dQ)^(N-1) (1/X(Q))``, to be compared with ``1/r``.
    Both are evaluated exactly on truncated Taylor series of ``X``.
    """
    order = n - 1
    try:
        x = model.marginal_jet(q, order)
    except NonDifferentiablePoint as exc:
        raise DerivativeUnavailable(str(exc)) from exc
    if config is ChainConfig.PUSH_MANUFACTURER:
        weight = np.zeros(order + 1)
        weight[0] = q
        if order:
            weight[1] = 1.0
        h = x
    elif config is ChainConfig.PULL_RETAILER:
        h = jet_recip(x)
        m = jet_antiderivative(x, float(model.order_fn(q)))[: order + 1]
        weight = jet_mul(m, h)
    else:
        raise ValueError(f"N-serial solve is only defined for nontrivial configs, got {config}")
    for _ in range(order):
        h = h[:-1] + jet_mul(weight[: len(h) - 1], jet_derivative(h))
    return float(h[0])


def n_serial_inequality_margin(
    model: GeneralizedModel, r: float, n: int, config: ChainConfig, q: float
) -> float:
    """``X(1-g)^(N-1) - r`` (push) or ``X (1+l)^-(N-1) - r`` (pull) at ``q``."""
    x = float(model.marginal(q))
    if config is ChainConfig.PUSH_MANUFACTURER:
        return x * (1.0 - gen_gfr(model, q)) ** (n - 1) - r
    return x * (1.0 + gen_lfr(model, q)) ** (-(n - 1)) - r


def solve_n_serial(
    model: GeneralizedModel | DemandModel,
    r: float,
    n: int,
    config: ChainConfig | str = ChainConfig.PUSH_MANUFACTURER,
    scan_points: int = 256,
) -> float:
    """Root of the N-echelon operator equation on ``(0, Qc]``.

    The first sign change on a uniform scan is refined by bisection. A
    warning is logged when the root violates the companion inequality.
    """
    model = as_generalized(model)
    config = ChainConfig(config)
    if n < 2:
        raise ValueError("N must be at least 2")
    q_c = solve_centralized(model, r)
    if config is ChainConfig.PUSH_MANUFACTURER:
        def residual(q: float) -> float:
            return n_serial_operator(model, q, n, config) - r
    elif config is ChainConfig.PULL_RETAILER:
        def residual(q: float) -> float:
            return 1.0 / r - n_serial_operator(model, q, n, config)
    else:
        raise ValueError(f"N-serial solve is only defined for nontrivial configs, got {config}")

    grid = np.linspace(1e-12 * q_c, q_c, scan_points)
    prev_q, prev_v = None, None
    for q in grid:
        q = float(q)
        if model.is_kink(q):
            raise DerivativeUnavailable(f"operator crosses the kink at Q={q}")
        v = residual(q)
        if prev_v is not None and prev_v > 0.0 and v <= 0.0:
            if any(prev_q < k < q for k in model.kinks):
                raise DerivativeUnavailable("sign change brackets a kink")
            root, _ = bisect_root(residual, prev_q, q, xtol=1e-15 * max(1.0, q))
            margin = n_serial_inequality_margin(model, r, n, config, root)
            if margin < -1e-9:
                log.warning(
                    "N=%d %s root Q=%.6g violates the inequality condition (margin %.3g)",
                    n, config.value, root, margin,
                )
            return root
        prev_q, prev_v = q, v
    if any(0.0 < k <= q_c * (1.0 + 1e-12) for k in model.kinks):
        raise DerivativeUnavailable("no smooth root; the solution sits on a kink")
    raise BracketFailure(f"N={n} operator residual has no sign change on (0, Qc]")


# -- brute-force oracles ------------------------------------------------------


def _evaluate(objective: Callable, grid: np.ndarray) -> np.ndarray:
    try:
        values = np.asarray(objective(grid), dtype=float)
        if values.shape == grid.shape:
            return values
    except (TypeError, ValueError):
        pass
    return np.array([float(objective(float(q))) for q in grid])


def brute_force_optimum(
    objective: Callable, q_max: float, grid_points: int = 10_000, q_min: float = 0.0
) -> tuple[float, float]:
    """Grid argmax (first wins on ties) refined by golden section on the
    bracketing cells. The refined point replaces the grid point only when it
    is strictly better."""
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    grid = np.linspace(q_min, q_max, grid_points)
    values = _evaluate(objective, grid)
    i = int(np.argmax(values))
    best_q, best_v = float(grid[i]), float(values[i])
    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, grid_points - 1)])
    q_ref, v_ref = golden_section_max(lambda q: float(objective(q)), a, b, xtol=1e-14)
    if v_ref > best_v:
        return q_ref, v_ref
    return best_q, best_v


def stackelberg_oracle(
    model: GeneralizedModel | DemandModel,
    r: float,
    config: ChainConfig | str,
    grid_points: int = 10_000,
    price_points: int = 201,
) -> tuple[float, float]:
    """Solve the leader/follower game by nested grid search.

    Returns ``(w / p, Q)``: the leader's best wholesale price over a price
    grid, and the follower's brute-force response to it.
    """
    model = as_generalized(model)
    config = ChainConfig(config)
    q_c = solve_centralized(model, r)
    x0 = model.marginal_at_zero

    if config is ChainConfig.PUSH_MANUFACTURER:
        def follower(w: float) -> float:
            return brute_force_optimum(lambda q: -w * q + model.order_fn(q), q_c, grid_points)[0]

        def leader(w: float) -> float:
            return (w - r) * follower(w)

        lo, hi = r, x0
    elif config is ChainConfig.PULL_RETAILER:
        def follower(w: float) -> float:
            return brute_force_optimum(lambda q: -r * q + w * model.order_fn(q), q_c, grid_points)[0]

        def leader(w: float) -> float:
            return (1.0 - w) * float(model.order_fn(follower(w)))

        lo, hi = r / x0, 1.0
    else:
        raise ValueError("the oracle is only meaningful for nontrivial configurations")
    w_best, _ = brute_force_optimum(leader, hi, price_points, q_min=lo)
    return w_best, follower(w_best)
