"""Stochastic demand distributions and their failure-rate functionals.

Every model exposes the survival function ``P(demand >= x)``, its density,
an inverse of the survival function, and the expected sold quantity
``E[min(Q, demand)] = int_0^Q survival``. Methods accept scalars or numpy
arrays unless noted otherwise.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, special

from .errors import NonNormalizable, OutOfRange, SurvivalUnderflow
from .numerics import (
    adaptive_simpson,
    bisect_root,
    finite_difference_taylor,
    gauss_legendre_cells,
    gauss_legendre_partial,
    jet_exp,
    jet_log_of_variable,
    jet_polyval,
    monotone_crossing,
)

SURVIVAL_FLOOR = 1e-14
IGFR_TOL = 1e-9


def _out(value: np.ndarray, like) -> float | np.ndarray:
    return float(value) if np.ndim(like) == 0 else value


class DemandModel(abc.ABC):
    """Nonnegative continuous demand.

    Subclasses must implement :meth:`survival` and :meth:`density`; the
    remaining capabilities fall back to bisection and adaptive Simpson.
    """

    #: upper end of the support (``inf`` when unbounded)
    support_upper: float = math.inf

    @property
    def kinks(self) -> tuple[float, ...]:
        """Points where the density is discontinuous."""
        return ()

    @abc.abstractmethod
    def survival(self, xi): ...

    @abc.abstractmethod
    def density(self, xi): ...

    def inverse_survival(self, y: float) -> float:
        _check_probability(y)
        return monotone_crossing(self.survival, y, lo=0.0, hi=1.0, xtol=1e-10)

    def cumulative_order(self, q):
        """``int_0^Q survival(x) dx`` by adaptive Simpson (relative tol 1e-9)."""
        scalar = np.ndim(q) == 0
        qs = np.atleast_1d(np.asarray(q, dtype=float))
        out = np.array([adaptive_simpson(self.survival, 0.0, float(v), rtol=1e-9) for v in qs])
        return float(out[0]) if scalar else out

    def density_jet(self, xi: float, order: int) -> np.ndarray:
        """Taylor coefficients of the density at ``xi`` up to ``order``."""
        return finite_difference_taylor(lambda x: float(self.density(x)), xi, order)


def _check_probability(y: float) -> None:
    if not (0.0 < y <= 1.0):
        raise OutOfRange(f"survival level must lie in (0, 1], got {y!r}")


@dataclass(frozen=True)
class UniformDemand(DemandModel):
    """Demand uniform on ``[0, upper]``."""

    upper: float = 1.0

    def __post_init__(self):
        if not self.upper > 0:
            raise ValueError("upper must be positive")

    @property
    def support_upper(self) -> float:  # type: ignore[override]
        return self.upper

    @property
    def kinks(self) -> tuple[float, ...]:
        return (self.upper,)

    def survival(self, xi):
        xi = np.asarray(xi, dtype=float)
        return _out(np.clip(1.0 - xi / self.upper, 0.0, 1.0), xi)

    def density(self, xi):
        xi = np.asarray(xi, dtype=float)
        return _out(np.where((xi >= 0) & (xi <= self.upper), 1.0 / self.upper, 0.0), xi)

    def inverse_survival(self, y: float) -> float:
        _check_probability(y)
        return self.upper * (1.0 - y)

    def cumulative_order(self, q):
        q = np.asarray(q, dtype=float)
        qq = np.minimum(q, self.upper)
        return _out(qq - qq * qq / (2.0 * self.upper), q)

    def density_jet(self, xi: float, order: int) -> np.ndarray:
        out = np.zeros(order + 1)
        out[0] = self.density(xi)
        return out


@dataclass(frozen=True)
class HalfNormalDemand(DemandModel):
    """Absolute value of a centred normal with standard deviation ``scale``."""

    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def survival(self, xi):
        xi = np.asarray(xi, dtype=float)
        return _out(special.erfc(np.maximum(xi, 0.0) / (self.scale * math.sqrt(2.0))), xi)

    def density(self, xi):
        xi = np.asarray(xi, dtype=float)
        z = xi / self.scale
        val = math.sqrt(2.0 / math.pi) / self.scale * np.exp(-0.5 * z * z)
        return _out(np.where(xi >= 0, val, 0.0), xi)

    def inverse_survival(self, y: float) -> float:
        _check_probability(y)
        return float(self.scale * math.sqrt(2.0) * special.erfcinv(y))

    def cumulative_order(self, q):
        q = np.asarray(q, dtype=float)
        s = self.scale
        qq = np.maximum(q, 0.0)
        val = qq * special.erfc(qq / (s * math.sqrt(2.0))) + s * math.sqrt(2.0 / math.pi) * (
            -np.expm1(-0.5 * (qq / s) ** 2)
        )
        return _out(val, q)

    def density_jet(self, xi: float, order: int) -> np.ndarray:
        # d^n/dx^n exp(-z^2/2) = (-1)^n He_n(z) exp(-z^2/2) / scale^n
        z = xi / self.scale
        base = float(self.density(xi))
        out = np.empty(order + 1)
        for n in range(order + 1):
            he = special.eval_hermitenorm(n, z)
            out[n] = (-1) ** n * he * base / self.scale**n / math.factorial(n)
        return out


@dataclass(frozen=True)
class PointMassDemand(DemandModel):
    """Deterministic demand fixed at ``atom``."""

    atom: float = 1.0

    def __post_init__(self):
        if not self.atom > 0:
            raise ValueError("atom must be positive")

    @property
    def support_upper(self) -> float:  # type: ignore[override]
        return self.atom

    @property
    def kinks(self) -> tuple[float, ...]:
        return (self.atom,)

    def survival(self, xi):
        xi = np.asarray(xi, dtype=float)
        return _out(np.where(xi <= self.atom, 1.0, 0.0), xi)

    def density(self, xi):
        # the atom itself carries no representable density
        xi = np.asarray(xi, dtype=float)
        return _out(np.zeros_like(xi), xi)

    def inverse_survival(self, y: float) -> float:
        _check_probability(y)
        return self.atom

    def cumulative_order(self, q):
        q = np.asarray(q, dtype=float)
        return _out(np.clip(q, 0.0, self.atom), q)

    def density_jet(self, xi: float, order: int) -> np.ndarray:
        return np.zeros(order + 1)


class EmpiricalDemand(DemandModel):
    """Density ``exp(P(log x)) / normalization`` on ``[x_min, x_max]``.

    ``P`` is a polynomial with ascending coefficients ``log_poly_coeffs``.
    Survival and the expected sold quantity are read from cumulative tables
    built once with 12-point Gauss-Legendre on log-spaced cells, completed
    by a Gauss-Legendre partial cell at evaluation time.
    """

    def __init__(
        self,
        log_poly_coeffs: Sequence[float],
        support_range: tuple[float, float],
        normalization: float | None = None,
        n_cells: int = 2048,
    ):
        lo, hi = map(float, support_range)
        if not (0.0 < lo < hi and math.isfinite(hi)):
            raise ValueError(f"support_range must satisfy 0 < min < max, got {support_range}")
        if n_cells < 512:
            raise ValueError("n_cells must be at least 512")
        self.log_poly_coeffs = np.asarray(log_poly_coeffs, dtype=float)
        self.support_range = (lo, hi)
        self.support_upper = hi
        self._edges = np.exp(np.linspace(math.log(lo), math.log(hi), n_cells + 1))
        self._edges[0], self._edges[-1] = lo, hi

        with np.errstate(over="ignore"):
            mass = gauss_legendre_cells(self._raw_density, self._edges)
        raw_total = float(np.sum(mass))
        if not (math.isfinite(raw_total) and raw_total > 0.0):
            raise NonNormalizable(f"density integral is {raw_total!r}")
        self.normalization = raw_total if normalization is None else float(normalization)
        if not (math.isfinite(self.normalization) and self.normalization > 0.0):
            raise NonNormalizable(f"normalization must be positive, got {normalization!r}")

        mass = mass / self.normalization
        moment = gauss_legendre_cells(lambda x: x * self._raw_density(x), self._edges)
        moment = moment / self.normalization
        # tail[i] = mass right of edges[i]; head1[i] = first moment left of edges[i]
        self._tail = np.concatenate((np.cumsum(mass[::-1])[::-1], [0.0]))
        self._head1 = np.concatenate(([0.0], np.cumsum(moment)))

    def __repr__(self) -> str:
        return (
            f"EmpiricalDemand(degree={len(self.log_poly_coeffs) - 1}, "
            f"support_range={self.support_range})"
        )

    @property
    def kinks(self) -> tuple[float, ...]:
        return self.support_range

    def _raw_density(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(np.polynomial.polynomial.polyval(np.log(x), self.log_poly_coeffs))

    def density(self, xi):
        xi = np.asarray(xi, dtype=float)
        lo, hi = self.support_range
        inside = (xi >= lo) & (xi <= hi)
        safe = np.where(inside, xi, lo)
        val = np.where(inside, self._raw_density(safe) / self.normalization, 0.0)
        return _out(val, xi)

    def _cell_index(self, x: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._edges, x, side="right") - 1
        return np.clip(idx, 0, len(self._edges) - 2)

    def survival(self, xi):
        xi = np.asarray(xi, dtype=float)
        lo, hi = self.support_range
        x = np.clip(xi, lo, hi)
        idx = self._cell_index(x)
        right = self._edges[idx + 1]
        partial = gauss_legendre_partial(self.density, x, right)
        val = np.clip(self._tail[idx + 1] + partial, 0.0, 1.0)
        val = np.where(xi <= lo, 1.0, np.where(xi >= hi, 0.0, val))
        return _out(val, xi)

    def cumulative_order(self, q):
        q = np.asarray(q, dtype=float)
        lo, hi = self.support_range
        x = np.clip(q, lo, hi)
        idx = self._cell_index(x)
        left = self._edges[idx]
        partial = gauss_legendre_partial(lambda t: t * self.density(t), left, x)
        first_moment = self._head1[idx] + partial
        # int_0^Q S = Q S(Q) + int_0^Q x f(x) dx
        val = np.where(q <= lo, q, q * self.survival(q) + first_moment)
        return _out(val, q)

    def inverse_survival(self, y: float) -> float:
        _check_probability(y)
        lo, _ = self.support_range
        if y >= 1.0:
            return lo
        # tail is decreasing along the edges: locate the cell holding level y
        j = int(np.searchsorted(-self._tail, -y, side="left"))
        j = min(max(j, 1), len(self._edges) - 1)
        a, b = self._edges[j - 1], self._edges[j]
        # survival is smooth inside a cell, so Brent beats plain bisection here
        return float(optimize.brentq(lambda x: float(self.survival(x)) - y, a, b, xtol=1e-12 * b))

    def density_jet(self, xi: float, order: int) -> np.ndarray:
        lo, hi = self.support_range
        if not (lo < xi < hi):
            return np.zeros(order + 1)
        log_jet = jet_log_of_variable(xi, order)
        return jet_exp(jet_polyval(self.log_poly_coeffs, log_jet)) / self.normalization


# -- failure-rate functionals ---------------------------------------------


def _positive_survival(model: DemandModel, q: float) -> float:
    surv = float(model.survival(q))
    if surv <= SURVIVAL_FLOOR:
        raise SurvivalUnderflow(f"survival({q:.6g}) = {surv:.3g} is below {SURVIVAL_FLOOR}")
    return surv


def gfr(model: DemandModel, q: float) -> float:
    """Generalized failure rate ``Q f(Q) / S(Q)``."""
    if q == 0.0:
        return 0.0
    surv = _positive_survival(model, q)
    return q * float(model.density(q)) / surv


def lfr(model: DemandModel, q: float) -> float:
    """Companion rate ``f(Q) int_0^Q S / S(Q)^2`` governing the pull equilibrium."""
    if q == 0.0:
        return 0.0
    surv = _positive_survival(model, q)
    return float(model.density(q)) * float(model.cumulative_order(q)) / surv**2


@dataclass(frozen=True)
class IgfrReport:
    is_nondecreasing: bool
    max_violation: float
    range_where_g_exceeds_1: tuple[float, float] | None
    checked_upto: float


def check_igfr(model: DemandModel, q_lo: float, q_hi: float, grid_points: int = 256) -> IgfrReport:
    """Sample ``gfr`` on a uniform grid and report monotonicity and ``g > 1``.

    Grid points past the survival floor are dropped; ``checked_upto`` is the
    last point actually evaluated.
    """
    if not (0.0 <= q_lo < q_hi):
        raise ValueError("need 0 <= q_lo < q_hi")
    grid = np.linspace(q_lo, q_hi, grid_points)
    values = []
    for q in grid:
        try:
            values.append(gfr(model, float(q)))
        except SurvivalUnderflow:
            break
    g = np.asarray(values)
    grid = grid[: len(g)]
    drops = g[:-1] - g[1:]
    tol = IGFR_TOL * np.maximum(1.0, np.abs(g[:-1]))
    max_violation = float(max(0.0, np.max(drops, initial=0.0)))
    is_nondecreasing = bool(np.all(drops <= tol))

    above = np.flatnonzero(g > 1.0)
    exceed = None
    if above.size:
        first, last = int(above[0]), int(above[-1])
        start = float(grid[first])
        if first > 0:
            start, _ = bisect_root(
                lambda q: gfr(model, q) - 1.0, float(grid[first - 1]), start, xtol=1e-12
            )
        exceed = (start, float(grid[last]))
    return IgfrReport(is_nondecreasing, max_violation, exceed, float(grid[-1]))
