"""Generalized newsvendor: a concave order function ``M(Q)`` with marginal
``X(Q) = dM/dQ``.

The expected profit in units of the selling price is ``-r Q + M(Q)``. The
classical newsvendor is the special case ``X = survival`` (see
:class:`NewsvendorModel`).
"""

from __future__ import annotations

import abc
import math

import numpy as np

from .demand_models import SURVIVAL_FLOOR, DemandModel, _out
from .errors import BracketFailure, NonDifferentiablePoint, OutOfRange, SurvivalUnderflow
from .numerics import central_difference, finite_difference_taylor, jet_mul, monotone_crossing

KINK_TOL = 1e-12


class GeneralizedModel(abc.ABC):
    """Order function ``M`` with nonincreasing positive marginal ``X``.

    Subclasses implement :meth:`order_fn` and :meth:`marginal`. Analytic
    derivatives and inverses are optional overrides.
    """

    @property
    def kinks(self) -> tuple[float, ...]:
        """Points where ``X`` or ``X'`` is discontinuous."""
        return ()

    @property
    def marginal_at_zero(self) -> float:
        return float(self.marginal(0.0))

    @property
    def marginal_at_infinity(self) -> float:
        """``lim X(Q)`` as ``Q -> inf``; cost ratios at or below it never stop paying off."""
        return 0.0

    @abc.abstractmethod
    def order_fn(self, q): ...

    @abc.abstractmethod
    def marginal(self, q): ...

    def marginal_derivative(self, q: float) -> float:
        return central_difference(lambda x: float(self.marginal(x)), q, rel_step=1e-6)

    def marginal_limits(self, q: float) -> tuple[float, float]:
        """One-sided limits ``(X(q-), X(q+))``."""
        h = max(KINK_TOL, KINK_TOL * q) * 1e3
        return float(self.marginal(max(q - h, 0.0))), float(self.marginal(q + h))

    def inverse_marginal(self, y: float) -> float:
        """Smallest ``Q`` with ``X(Q) <= y``."""
        return monotone_crossing(lambda q: float(self.marginal(q)), y, lo=0.0, hi=1.0, xtol=1e-12)

    def marginal_jet(self, q: float, order: int) -> np.ndarray:
        """Taylor coefficients ``X^(n)(q)/n!`` for ``n <= order``."""
        return finite_difference_taylor(lambda x: float(self.marginal(x)), q, order)

    def is_kink(self, q: float) -> bool:
        return any(abs(q - k) <= KINK_TOL * max(1.0, k) for k in self.kinks)


class NewsvendorModel(GeneralizedModel):
    """The classical case ``M(Q) = E[min(Q, demand)]``, ``X = survival``."""

    def __init__(self, demand: DemandModel):
        self.demand = demand

    def __repr__(self) -> str:
        return f"NewsvendorModel({self.demand!r})"

    @property
    def kinks(self) -> tuple[float, ...]:
        return self.demand.kinks

    @property
    def marginal_at_zero(self) -> float:
        return 1.0

    def order_fn(self, q):
        return self.demand.cumulative_order(q)

    def marginal(self, q):
        return self.demand.survival(q)

    def marginal_derivative(self, q: float) -> float:
        return -float(self.demand.density(q))

    def inverse_marginal(self, y: float) -> float:
        return self.demand.inverse_survival(y)

    def marginal_jet(self, q: float, order: int) -> np.ndarray:
        out = np.empty(order + 1)
        out[0] = float(self.demand.survival(q))
        if order:
            f = self.demand.density_jet(q, order - 1)
            out[1:] = -f / np.arange(1, order + 1)
        return out


class TanhModel(GeneralizedModel):
    """``M(Q) = tanh Q`` so that ``X = sech^2 Q``, ``g = 2Q tanh Q`` and
    ``l = 2 sinh^2 Q`` in closed form."""

    def __repr__(self) -> str:
        return "TanhModel()"

    @property
    def marginal_at_zero(self) -> float:
        return 1.0

    def order_fn(self, q):
        q = np.asarray(q, dtype=float)
        return _out(np.tanh(q), q)

    def marginal(self, q):
        q = np.asarray(q, dtype=float)
        with np.errstate(over="ignore"):
            return _out(1.0 / np.cosh(q) ** 2, q)

    def marginal_derivative(self, q: float) -> float:
        return -2.0 * math.tanh(q) * float(self.marginal(q))

    def inverse_marginal(self, y: float) -> float:
        if not (0.0 < y <= 1.0):
            raise OutOfRange(f"marginal level must lie in (0, 1], got {y!r}")
        return math.acosh(1.0 / math.sqrt(y))

    def marginal_jet(self, q: float, order: int) -> np.ndarray:
        # tanh' = 1 - tanh^2, solved coefficient by coefficient
        t = np.zeros(order + 2)
        t[0] = math.tanh(q)
        for k in range(order + 1):
            rhs = -jet_mul(t[: k + 1], t[: k + 1])[k]
            if k == 0:
                rhs += 1.0
            t[k + 1] = rhs / (k + 1)
        x = -jet_mul(t[: order + 1], t[: order + 1])
        x[0] = float(self.marginal(q))
        return x

    @staticmethod
    def gfr_closed_form(q: float) -> float:
        return 2.0 * q * math.tanh(q)

    @staticmethod
    def lfr_closed_form(q: float) -> float:
        return 2.0 * math.sinh(q) ** 2


class PiecewiseLogModel(GeneralizedModel):
    """``M = log(1 + Q)`` up to ``knee``, then linear with slope ``tail_slope``.

    ``X`` jumps from ``1/(1 + knee)`` down to ``tail_slope`` at the knee, so
    any cost ratio inside that gap is optimised exactly at the knee without a
    first-order condition holding there.
    """

    def __init__(self, knee: float = 1.0, tail_slope: float = 0.1):
        if not knee > 0:
            raise ValueError("knee must be positive")
        if not (0.0 < tail_slope < 1.0 / (1.0 + knee)):
            raise ValueError("tail_slope must lie in (0, 1/(1 + knee))")
        self.knee = float(knee)
        self.tail_slope = float(tail_slope)

    def __repr__(self) -> str:
        return f"PiecewiseLogModel(knee={self.knee}, tail_slope={self.tail_slope})"

    @property
    def kinks(self) -> tuple[float, ...]:
        return (self.knee,)

    @property
    def marginal_at_infinity(self) -> float:
        return self.tail_slope

    @property
    def marginal_at_zero(self) -> float:
        return 1.0

    def order_fn(self, q):
        q = np.asarray(q, dtype=float)
        head = np.log1p(np.minimum(q, self.knee))
        tail = self.tail_slope * np.maximum(q - self.knee, 0.0)
        return _out(head + tail, q)

    def marginal(self, q):
        # right-continuous at the knee
        q = np.asarray(q, dtype=float)
        return _out(np.where(q < self.knee, 1.0 / (1.0 + q), self.tail_slope), q)

    def marginal_limits(self, q: float) -> tuple[float, float]:
        if self.is_kink(q):
            return 1.0 / (1.0 + self.knee), self.tail_slope
        return super().marginal_limits(q)

    def marginal_derivative(self, q: float) -> float:
        if self.is_kink(q):
            raise NonDifferentiablePoint(f"X jumps at the knee Q={self.knee}")
        return -1.0 / (1.0 + q) ** 2 if q < self.knee else 0.0

    def inverse_marginal(self, y: float) -> float:
        if y > 1.0 / (1.0 + self.knee):
            return 1.0 / y - 1.0
        if y >= self.tail_slope:
            return self.knee
        raise BracketFailure(f"X never falls to {y} (tail slope {self.tail_slope})")

    def marginal_jet(self, q: float, order: int) -> np.ndarray:
        if self.is_kink(q):
            raise NonDifferentiablePoint(f"X jumps at the knee Q={self.knee}")
        out = np.zeros(order + 1)
        if q < self.knee:
            out[:] = [(-1) ** n / (1.0 + q) ** (n + 1) for n in range(order + 1)]
        else:
            out[0] = self.tail_slope
        return out


def _positive_marginal(model: GeneralizedModel, q: float) -> float:
    x = float(model.marginal(q))
    if x <= SURVIVAL_FLOOR:
        raise SurvivalUnderflow(f"X({q:.6g}) = {x:.3g} is below {SURVIVAL_FLOOR}")
    return x


def gen_gfr(model: GeneralizedModel, q: float) -> float:
    """``g(Q) = -Q d/dQ log X(Q)``."""
    if q == 0.0:
        return 0.0
    if model.is_kink(q):
        raise NonDifferentiablePoint(f"g is undefined at the kink Q={q}")
    x = _positive_marginal(model, q)
    return -q * model.marginal_derivative(q) / x


def gen_lfr(model: GeneralizedModel, q: float) -> float:
    """``l(Q) = -X'(Q) M(Q) / X(Q)^2``."""
    if q == 0.0:
        return 0.0
    if model.is_kink(q):
        raise NonDifferentiablePoint(f"l is undefined at the kink Q={q}")
    x = _positive_marginal(model, q)
    return -model.marginal_derivative(q) * float(model.order_fn(q)) / (x * x)


def as_generalized(model: GeneralizedModel | DemandModel) -> GeneralizedModel:
    """Wrap a bare demand model; pass generalized models through."""
    if isinstance(model, DemandModel):
        return NewsvendorModel(model)
    return model
