"""Correlated demand from an AR(1) recursion with chi-square noise, and a
log-polynomial density fit that turns the samples into a demand model.

The recursion is ``xi[T+1] = beta * xi[T] + sigma2 * chi2_1`` with
independent noise. Its stationary law has mean ``sigma2 / (1 - beta)`` and
variance ``2 sigma2^2 / (1 - beta^2)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .demand_models import EmpiricalDemand
from .errors import EmptyBins, InsufficientData

MIN_FIT_SAMPLES = 10_000
EMPTY_BIN_LIMIT = 0.5


@dataclass(frozen=True)
class ArConfig:
    beta: float = 0.9
    sigma2: float = 100.0
    n_samples: int = 1_000_000
    burn_in: int = 1_000
    seed: int = 20240101
    n_bins: int = 128
    fit_degrees: tuple[int, ...] = (2, 3, 4, 5, 6)
    n_chains: int = 1
    min_bin_count: int = 5

    def __post_init__(self):
        if not (0.0 <= self.beta < 1.0):
            raise ValueError(f"beta must lie in [0, 1), got {self.beta!r}")
        if not self.sigma2 > 0.0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2!r}")
        if self.n_samples < 1 or self.burn_in < 0 or self.n_chains < 1:
            raise ValueError("n_samples and n_chains must be positive, burn_in nonnegative")
        if not self.fit_degrees or min(self.fit_degrees) < 1:
            raise ValueError("fit_degrees must be a nonempty set of positive integers")
        object.__setattr__(self, "fit_degrees", tuple(sorted(set(int(d) for d in self.fit_degrees))))

    @property
    def stationary_mean(self) -> float:
        return self.sigma2 / (1.0 - self.beta)

    @property
    def stationary_variance(self) -> float:
        return 2.0 * self.sigma2**2 / (1.0 - self.beta**2)

    def cumulant(self, n: int) -> float:
        """n-th stationary cumulant from ``K(t) = -1/2 sum_j log(1 - 2 t sigma2 beta^j)``."""
        return 0.5 * math.factorial(n - 1) * (2.0 * self.sigma2) ** n / (1.0 - self.beta**n)


def _chain(rng: np.random.Generator, config: ArConfig, length: int) -> np.ndarray:
    noise = config.sigma2 * rng.standard_normal(length + config.burn_in) ** 2
    # start from the stationary mean so a short burn-in suffices
    zi = [config.beta * config.stationary_mean]
    series, _ = lfilter([1.0], [1.0, -config.beta], noise, zi=zi)
    return series[config.burn_in :]


def generate_series(config: ArConfig) -> np.ndarray:
    """Post-burn-in samples, pooled over ``n_chains`` independent chains.

    Each chain gets its own child of ``SeedSequence(seed)``, so the output is
    a deterministic function of the config.
    """
    children = np.random.SeedSequence(config.seed).spawn(config.n_chains)
    sizes = np.full(config.n_chains, config.n_samples // config.n_chains)
    sizes[: config.n_samples % config.n_chains] += 1
    chains = [
        _chain(np.random.Generator(np.random.PCG64(child)), config, int(size))
        for child, size in zip(children, sizes)
    ]
    return np.concatenate(chains)


def batch_means_se(values: np.ndarray, n_batches: int = 100) -> float:
    """Standard error of the mean of a correlated series by non-overlapping batch means."""
    values = np.asarray(values, dtype=float)
    size = len(values) // n_batches
    if size < 1:
        raise InsufficientData(f"need at least {n_batches} samples for batch means")
    means = values[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


@dataclass(frozen=True)
class SeriesSummary:
    n: int
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    minimum: float
    maximum: float


def summarize_series(samples: np.ndarray, n_batches: int = 100) -> SeriesSummary:
    samples = np.asarray(samples, dtype=float)
    mean = float(samples.mean())
    centred_sq = (samples - mean) ** 2
    return SeriesSummary(
        n=len(samples),
        mean=mean,
        mean_se=batch_means_se(samples, n_batches),
        variance=float(centred_sq.mean()),
        variance_se=batch_means_se(centred_sq, n_batches),
        minimum=float(samples.min()),
        maximum=float(samples.max()),
    )


@dataclass(frozen=True)
class DensityFit:
    coefficients: tuple[float, ...]  # ascending, in log(xi)
    chosen_degree: int
    loo_cv_error: float
    cv_by_degree: dict
    bin_edges: tuple[float, ...]
    bin_counts: tuple[int, ...]
    normalization: float
    n_samples: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def support_range(self) -> tuple[float, float]:
        return self.bin_edges[0], self.bin_edges[-1]

    def fitted_log_density(self, x) -> np.ndarray:
        """Log of the normalized fitted density."""
        logs = np.log(np.asarray(x, dtype=float))
        return np.polynomial.polynomial.polyval(logs, self.coefficients) - math.log(self.normalization)


def _loo_fit(
    z: np.ndarray, y: np.ndarray, weights: np.ndarray, degree: int
) -> tuple[np.ndarray, float]:
    """Weighted least squares in the scaled variable ``z``.

    Returns the coefficients and the closed-form leave-one-out mean squared
    (weighted) residual, using the hat-matrix diagonal of the weighted design.
    """
    root_w = np.sqrt(weights)
    design = np.polynomial.polynomial.polyvander(z, degree)
    q, rr = np.linalg.qr(design * root_w[:, None])
    coef = np.linalg.solve(rr, q.T @ (y * root_w))
    resid = (y - design @ coef) * root_w
    leverage = np.sum(q * q, axis=1)
    loo = resid / (1.0 - leverage)
    return coef, float(np.mean(loo**2))


def fit_log_density(samples: np.ndarray, config: ArConfig) -> DensityFit:
    """Fit ``log f`` as a polynomial in ``log xi`` to a log-binned histogram.

    Bins with fewer than ``config.min_bin_count`` samples are left out and
    the rest are weighted by their counts, since ``log(count)`` has variance
    close to ``1 / count``. The degree with the smallest leave-one-out error
    among ``config.fit_degrees`` wins (lower degree on ties), and the density
    is normalized by quadrature.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size < MIN_FIT_SAMPLES:
        raise InsufficientData(f"need at least {MIN_FIT_SAMPLES} samples, got {samples.size}")
    if np.any(samples <= 0.0) or not np.all(np.isfinite(samples)):
        raise ValueError("samples must be positive and finite")
    if config.n_bins < 2 * (max(config.fit_degrees) + 1):
        raise ValueError("n_bins must be at least twice the number of coefficients")

    lo, hi = float(samples.min()), float(samples.max())
    edges = np.exp(np.linspace(math.log(lo), math.log(hi), config.n_bins + 1))
    edges[0], edges[-1] = lo, hi
    counts, _ = np.histogram(samples, bins=edges)
    empty = np.count_nonzero(counts == 0)
    if empty > EMPTY_BIN_LIMIT * config.n_bins:
        raise EmptyBins(f"{empty} of {config.n_bins} bins are empty")
    filled = counts >= max(config.min_bin_count, 1)
    if np.count_nonzero(filled) <= max(config.fit_degrees) + 1:
        raise EmptyBins("too few populated bins for the requested degrees")

    centres = np.sqrt(edges[1:] * edges[:-1])
    log_density = np.log(counts[filled] / (samples.size * np.diff(edges)[filled]))
    log_x = np.log(centres[filled])
    # scale to [-1, 1] for conditioning; converted back below
    domain = (math.log(lo), math.log(hi))
    mid, half = 0.5 * (domain[0] + domain[1]), 0.5 * (domain[1] - domain[0])
    z = (log_x - mid) / half

    cv = {}
    best = None
    for degree in config.fit_degrees:
        coef_z, err = _loo_fit(z, log_density, counts[filled].astype(float), degree)
        cv[degree] = err
        if best is None or err < best[2]:
            best = (degree, coef_z, err)
    degree, coef_z, err = best
    coeffs = np.polynomial.Polynomial(coef_z, domain=list(domain)).convert().coef
    coeffs = np.pad(coeffs, (0, degree + 1 - len(coeffs)))

    model = EmpiricalDemand(coeffs, (lo, hi))
    return DensityFit(
        coefficients=tuple(float(c) for c in coeffs),
        chosen_degree=degree,
        loo_cv_error=err,
        cv_by_degree=cv,
        bin_edges=tuple(float(e) for e in edges),
        bin_counts=tuple(int(c) for c in counts),
        normalization=model.normalization,
        n_samples=int(samples.size),
    )


def build_empirical_model(fit: DensityFit, n_cells: int = 2048) -> EmpiricalDemand:
    return EmpiricalDemand(fit.coefficients, fit.support_range, fit.normalization, n_cells=n_cells)


def histogram_rows(fit: DensityFit) -> list[tuple[float, int, float, float]]:
    edges = np.asarray(fit.bin_edges)
    counts = np.asarray(fit.bin_counts)
    centres = np.sqrt(edges[1:] * edges[:-1])
    with np.errstate(divide="ignore"):
        observed = np.log(counts / (fit.n_samples * np.diff(edges)))
    fitted = fit.fitted_log_density(centres)
    return [
        (float(c), int(n), float(o) if n > 0 else math.nan, float(f))
        for c, n, o, f in zip(centres, counts, observed, fitted)
    ]


def write_histogram_csv(fit: DensityFit, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_center", "count", "log_density", "fitted_log_density"])
        for centre, count, observed, fitted in histogram_rows(fit):
            writer.writerow([f"{centre:.11e}", count, f"{observed:.11e}", f"{fitted:.11e}"])


def save_fit(fit: DensityFit, path: str | Path) -> None:
    payload = asdict(fit)
    payload["cv_by_degree"] = {str(k): v for k, v in fit.cv_by_degree.items()}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_fit(path: str | Path) -> DensityFit:
    payload = json.loads(Path(path).read_text())
    payload["cv_by_degree"] = {int(k): v for k, v in payload["cv_by_degree"].items()}
    for key in ("coefficients", "bin_edges", "bin_counts"):
        payload[key] = tuple(payload[key])
    return DensityFit(**payload)
