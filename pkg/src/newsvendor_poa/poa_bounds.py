"""Price of Anarchy and its bounds.

Notation: ``k = g(Qd)``, ``s = g(Qc)``, ``alpha = Qc / Qd``, ``u = 1 - k``
and ``A = Qd X(Qd)``. Every bound is assembled from two integral estimates
that share the factor ``A``:

* the tail ``int_{Qd}^{Qc} X``, bracketed by :func:`integral_tail_bounds`;
* the head ``M(Qd) = int_0^{Qd} X``, bracketed by :func:`integral_head_bounds`.

Pull-side bounds follow from the push ones with ``k -> l / (1 + l)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .demand_models import DemandModel
from .errors import DegenerateScenario, NewsvendorError, OutOfRange, SingularParameter
from .generalized_model import GeneralizedModel, as_generalized
from .solver import ChainConfig, EquilibriumResult, Scenario, solve

DEGENERACY_FLOOR = 1e-12
SANDWICH_TOL = 1e-6
ALPHA_SMALL = "alpha_small"
ALPHA_LARGE = "alpha_large"


# -- scalar building blocks ---------------------------------------------------


def _check_k(k: float, allow_zero: bool = True) -> None:
    if not math.isfinite(k) or k < 0.0 or (k == 0.0 and not allow_zero) or k > 1.0:
        raise OutOfRange(f"k must lie in {'[0' if allow_zero else '(0'}, 1), got {k!r}")
    if 1.0 - k < 1e-12:
        raise SingularParameter(f"k={k!r} is at the singular point k = 1")


def _check_alpha(alpha: float) -> None:
    if not math.isfinite(alpha) or alpha < 1.0 - 1e-12:
        raise OutOfRange(f"alpha must be >= 1, got {alpha!r}")


def _expm1_ratio(x: float) -> float:
    """``expm1(x) / x`` with the removable singularity at 0 filled in."""
    if abs(x) < 1e-8:
        return 1.0 + 0.5 * x
    return math.expm1(x) / x


def threshold_alpha(k: float) -> float:
    """``(1 - k)^(-1/k)``; tends to ``e`` as ``k -> 0``."""
    _check_k(k)
    if k < 1e-8:
        return math.e * (1.0 + 0.5 * k)
    return math.exp(-math.log1p(-k) / k)


def feasible_alpha_min(k: float, s: float) -> float:
    """Smallest ratio compatible with the boundary conditions, ``(1 - k)^(-1/s)``."""
    _check_k(k)
    if s <= 0.0:
        return 1.0
    return math.exp(-math.log1p(-k) / s)


def _slope_term(k: float, s: float) -> float:
    """``s ((1-k)^(1-1/s) - 1) / (1 - s)``, continuous through ``s = 1``.

    Written as ``-log(1-k) * expm1(x)/x`` with ``x = -(1-s) log(1-k) / s`` so
    no cancellation occurs near ``s = 1``.
    """
    log_u = math.log1p(-k)
    x = -(1.0 - s) * log_u / s
    return -log_u * _expm1_ratio(x)


def _head_decay(k: float, x_ratio: float) -> float:
    """``(X(Qd)/X(0))^(1/k - 1)``; zero in the ``k -> 0`` limit."""
    if k == 0.0:
        return 0.0
    if x_ratio <= 0.0:
        return 0.0
    exponent = (1.0 / k - 1.0) * math.log(x_ratio)
    return math.inf if exponent > 700.0 else math.exp(exponent)


def tail_lower_coefficient(k: float, s: float, alpha: float) -> float:
    """``L(alpha, s) / A = (1-k) alpha + (s (1-k)^(1-1/s) - 1) / (1 - s)``."""
    return (1.0 - k) * alpha + _slope_term(k, s) - 1.0


def tail_upper_coefficient(k: float, alpha: float) -> float:
    """Upper estimate of the tail integral in units of ``A``.

    Below the threshold ``(1-k)^(-1/k)`` the power-law envelope
    ``(alpha^(1-k) - 1)/(1-k)`` is used; beyond it, its tangent line there,
    which is ``L(alpha, k) / A``.
    """
    if alpha >= threshold_alpha(k):
        return tail_lower_coefficient(k, k, alpha)
    log_a = math.log(alpha)
    return math.expm1((1.0 - k) * log_a) / (1.0 - k)


def head_upper_coefficient(k: float, x_ratio: float) -> float:
    """Upper estimate of ``M(Qd) / A``: ``1 + k (1 - Z) / (1 - k)``."""
    return 1.0 + k * (1.0 - _head_decay(k, x_ratio)) / (1.0 - k)


# -- previous-work and improved upper bounds ------------------------------------


def prev_upper_push(k: float) -> float:
    """``(1-k)^(-1/k) - (1-k)^(-1)``; equals ``e - 1`` at ``k = 0``."""
    _check_k(k)
    if k < 1e-6:
        return math.e * (1.0 + k / 2.0 + 11.0 * k * k / 24.0) - 1.0 / (1.0 - k)
    return threshold_alpha(k) - 1.0 / (1.0 - k)


def prev_upper_pull(l: float) -> float:
    """``(1+l)^(1+1/l) - (1+l)``; equals ``e - 1`` at ``l = 0``."""
    if not math.isfinite(l) or l < 0.0:
        raise OutOfRange(f"l must be nonnegative, got {l!r}")
    if l < 1e-6:
        # (1+l)^(1/l) = e (1 - l/2 + 11 l^2/24 - ...)
        return math.e * (1.0 + l) * (1.0 - l / 2.0 + 11.0 * l * l / 24.0) - (1.0 + l)
    return math.exp((1.0 + 1.0 / l) * math.log1p(l)) - (1.0 + l)


def improved_upper_push(k: float, alpha: float) -> tuple[float, str]:
    """Two-branch upper bound on the push PoA.

    For ``alpha < (1-k)^(-1/k)``:
    ``(alpha^(1-k) - (1-k)^2 alpha) / (k (1-k)) - 1/(1-k)``; otherwise the
    previous bound. The two pieces meet at the threshold.
    """
    _check_k(k)
    _check_alpha(alpha)
    alpha = max(alpha, 1.0)
    if alpha >= threshold_alpha(k):
        return prev_upper_push(k), ALPHA_LARGE
    log_a = math.log(alpha)
    # (alpha^-k - 1) / k, exact for small k through expm1
    power = -log_a if k == 0.0 else math.expm1(-k * log_a) / k
    value = (alpha * (power + 2.0 - k) - 1.0) / (1.0 - k)
    return value, ALPHA_SMALL


def improved_upper_pull(l: float, alpha: float) -> tuple[float, str]:
    """Pull analogue: ``((1+l)^2 alpha^(1/(1+l)) - alpha)/l - (1+l)`` below
    the threshold ``(1+l)^(1+1/l)``, the previous bound above it."""
    if not math.isfinite(l) or l < 0.0:
        raise OutOfRange(f"l must be nonnegative, got {l!r}")
    _check_alpha(alpha)
    k = l / (1.0 + l)
    if alpha >= threshold_alpha(k):
        return prev_upper_pull(l), ALPHA_LARGE
    value, _ = improved_upper_push(k, alpha)
    return value, ALPHA_SMALL


# -- lower bounds -----------------------------------------------------------------


@dataclass(frozen=True)
class LowerBound:
    value: float  # max(raw, 1)
    raw: float  # assembled from the integral estimates
    printed: float  # closed-form ratio, kept as a regression check


def lower_bound_push_detail(k: float, s: float, r_tilde: float) -> LowerBound:
    """Lower bound on the push PoA from the tail and head estimates.

    ``PoA = 1 + (tail - r Qd (alpha-1)) / (M(Qd) - r Qd)`` with ``r Qd = (1-k) A``
    and ``X(Qd)/X(0) = r_tilde / (1-k)``; ``alpha`` cancels.
    """
    _check_k(k, allow_zero=False)
    if not math.isfinite(s) or s < k * (1.0 - 1e-9) - 1e-12:
        raise OutOfRange(f"need s >= k, got k={k!r}, s={s!r}")
    if not (0.0 < r_tilde < 1.0):
        raise OutOfRange(f"r_tilde must lie in (0, 1), got {r_tilde!r}")
    u = 1.0 - k
    x_ratio = r_tilde / u
    alpha = 1.0
    numerator = tail_lower_coefficient(k, s, alpha) - u * (alpha - 1.0)
    denominator = head_upper_coefficient(k, x_ratio) - u
    raw = 1.0 + numerator / denominator

    z = _head_decay(k, x_ratio)
    slope = _slope_term(k, s)
    printed = (slope - (k * z - k) / u) / (k + (k - k * z) / u)
    return LowerBound(value=max(raw, 1.0), raw=raw, printed=printed)


def lower_bound_push(k: float, s: float, r_tilde: float) -> float:
    return lower_bound_push_detail(k, s, r_tilde).value


def lower_bound_pull(l: float, t: float, r_tilde: float) -> float:
    """Pull lower bound via ``1 - k = 1/(1+l)`` and ``1 - s = 1/(1+t)``."""
    if not (math.isfinite(l) and l > 0.0):
        raise OutOfRange(f"l must be positive, got {l!r}")
    if not (math.isfinite(t) and t >= 0.0):
        raise OutOfRange(f"t must be nonnegative, got {t!r}")
    return lower_bound_push(l / (1.0 + l), t / (1.0 + t), r_tilde)


# -- integral estimates -----------------------------------------------------------


def integral_tail_bounds(
    model: GeneralizedModel | DemandModel, Q_d: float, Q_c: float, k: float, s: float
) -> tuple[float, float]:
    """Bracket ``int_{Qd}^{Qc} X(xi) dxi``."""
    model = as_generalized(model)
    if Q_d <= 0.0 or Q_c < Q_d:
        raise OutOfRange(f"need 0 < Qd <= Qc, got Qd={Q_d!r}, Qc={Q_c!r}")
    if Q_c == Q_d:
        return 0.0, 0.0
    _check_k(k)
    alpha = Q_c / Q_d
    if alpha < feasible_alpha_min(k, s) * (1.0 - 1e-9):
        raise OutOfRange(f"alpha={alpha:.6g} is below (1-k)^(-1/s)={feasible_alpha_min(k, s):.6g}")
    a = Q_d * float(model.marginal(Q_d))
    return a * tail_lower_coefficient(k, s, alpha), a * tail_upper_coefficient(k, alpha)


def integral_head_bounds(
    model: GeneralizedModel | DemandModel, Q_d: float, k: float
) -> tuple[float, float]:
    """Bracket ``M(Qd) = int_0^{Qd} X(xi) dxi``."""
    model = as_generalized(model)
    if Q_d < 0.0:
        raise OutOfRange(f"Qd must be nonnegative, got {Q_d!r}")
    _check_k(k)
    x_d = float(model.marginal(Q_d))
    a = Q_d * x_d
    return a, a * head_upper_coefficient(k, x_d / model.marginal_at_zero)


# -- reports ------------------------------------------------------------------------


def price_of_anarchy(
    model: GeneralizedModel | DemandModel,
    r: float,
    config: ChainConfig | str = ChainConfig.PUSH_MANUFACTURER,
    method: str = "bisection",
) -> float:
    return _poa_from_result(solve(Scenario(model, r, config), method))


def _poa_from_result(result: EquilibriumResult) -> float:
    if result.profit_d <= DEGENERACY_FLOOR:
        raise DegenerateScenario(
            f"decentralized profit {result.profit_d:.3g} is at the degeneracy floor"
        )
    return result.profit_c / result.profit_d


@dataclass(frozen=True)
class PoaReport:
    poa: float
    prev_upper: float
    improved_upper: float
    lower: float
    lower_raw: float
    lower_printed: float
    branch: str
    valid: bool
    params: dict
    result: EquilibriumResult
    violations: tuple[str, ...] = field(default_factory=tuple)


def _violations(poa: float, lower: float, improved: float, prev: float, branch: str, tol: float):
    out = []
    if not poa >= 1.0 - tol:
        out.append("poa>=1")
    if not lower <= poa + tol:
        out.append("lower<=poa")
    if not poa <= improved + tol:
        out.append("poa<=improved_upper")
    if branch == ALPHA_SMALL and not improved <= prev + tol:
        out.append("improved_upper<=prev_upper")
    if branch == ALPHA_LARGE and not abs(improved - prev) <= tol:
        out.append("improved_upper==prev_upper")
    return tuple(out)


def poa_report(
    model: GeneralizedModel | DemandModel,
    r: float,
    config: ChainConfig | str = ChainConfig.PUSH_MANUFACTURER,
    method: str = "bisection",
    tol: float = SANDWICH_TOL,
) -> PoaReport:
    """Exact PoA alongside every bound, with a sandwich validity flag.

    Configurations where the leader holds the stock have ``PoA = 1`` and all
    bounds are reported as 1.
    """
    scenario = Scenario(model, r, config)
    result = solve(scenario, method)
    poa = _poa_from_result(result)
    params = {
        "k": result.k,
        "s": result.s,
        "l_d": result.l_d,
        "l_c": result.l_c,
        "alpha": result.alpha,
        "r_tilde": scenario.r_tilde,
    }
    config = scenario.config
    if config.is_trivial:
        prev = improved = lower = raw = printed = 1.0
        branch = ALPHA_SMALL
    else:
        if config is ChainConfig.PUSH_MANUFACTURER:
            k_eff = result.k
            prev = prev_upper_push(k_eff)
            improved, branch = improved_upper_push(k_eff, result.alpha)
        else:
            k_eff = result.l_d / (1.0 + result.l_d)
            prev = prev_upper_pull(result.l_d)
            improved, branch = improved_upper_pull(result.l_d, result.alpha)
        if k_eff == 0.0:
            # X is flat at Qd: nothing to lose, only the trivial bound remains
            lower = raw = printed = 1.0
        else:
            try:
                detail = lower_bound_push_detail(k_eff, result.s, scenario.r_tilde)
                lower, raw, printed = detail.value, detail.raw, detail.printed
            except NewsvendorError:
                lower = raw = printed = math.nan
    violations = _violations(poa, lower, improved, prev, branch, tol)
    return PoaReport(
        poa=poa,
        prev_upper=prev,
        improved_upper=improved,
        lower=lower,
        lower_raw=raw,
        lower_printed=printed,
        branch=branch,
        valid=not violations,
        params=params,
        result=result,
        violations=violations,
    )
