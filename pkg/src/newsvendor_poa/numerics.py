"""Small numerical kernels: bisection, golden section, adaptive Simpson,
fixed-cell Gauss-Legendre and truncated Taylor arithmetic.

Everything here is scalar and dependency-light so the model and solver
modules can share one implementation of each primitive.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import BracketFailure, NoConvergence

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def bisect_root(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-13,
    maxiter: int = 400,
) -> tuple[float, int]:
    """Root of ``fn`` on ``[lo, hi]`` by bisection.

    Requires ``fn(lo)`` and ``fn(hi)`` of opposite sign (zero counts as
    either). Returns the midpoint of the final bracket and the number of
    halvings performed.
    """
    f_lo = fn(lo)
    f_hi = fn(hi)
    if f_lo == 0.0:
        return lo, 0
    if f_hi == 0.0:
        return hi, 0
    if np.sign(f_lo) == np.sign(f_hi) or not (np.isfinite(f_lo) and np.isfinite(f_hi)):
        raise BracketFailure(
            f"no sign change on [{lo:.6g}, {hi:.6g}]: f={f_lo:.3g}, {f_hi:.3g}"
        )
    for it in range(1, maxiter + 1):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= xtol:
            return mid, it
        f_mid = fn(mid)
        if f_mid == 0.0:
            return mid, it
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    raise NoConvergence(f"bisection did not reach xtol={xtol} in {maxiter} steps")


def monotone_crossing(
    fn: Callable[[float], float],
    target: float,
    lo: float = 0.0,
    hi: float = 1.0,
    xtol: float = 1e-10,
    max_doublings: int = 200,
) -> float:
    """Smallest ``x >= lo`` with ``fn(x) <= target`` for nonincreasing ``fn``.

    ``hi`` is expanded geometrically until ``fn(hi) < target``. At a jump
    discontinuity straddling ``target`` the jump location is returned.
    """
    if fn(lo) <= target:
        return lo
    width = max(hi - lo, 1e-300)
    for _ in range(max_doublings):
        if fn(lo + width) <= target:
            break
        width *= 2.0
    else:
        raise BracketFailure(f"fn never falls to {target!r} on [{lo}, {lo + width:.3g}]")
    a, b = lo, lo + width
    while b - a > xtol:
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        if fn(mid) <= target:
            b = mid
        else:
            a = mid
    return 0.5 * (a + b)


def golden_section_max(
    fn: Callable[[float], float], a: float, b: float, xtol: float = 1e-12, maxiter: int = 300
) -> tuple[float, float]:
    """Maximise a unimodal ``fn`` on ``[a, b]``; returns ``(x, fn(x))``."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(maxiter):
        if abs(b - a) <= xtol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def adaptive_simpson(
    fn: Callable[[float], float],
    a: float,
    b: float,
    rtol: float = 1e-9,
    atol: float = 1e-15,
    max_depth: int = 48,
) -> float:
    """Integral of ``fn`` over ``[a, b]`` by adaptive Simpson with Richardson
    correction. Uses an explicit stack instead of recursion."""
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    fa, fm, fb = fn(a), fn(0.5 * (a + b)), fn(b)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    # Seed the tolerance from a coarse composite estimate so the relative
    # target is not fooled by a lucky three-point sample.
    xs = np.linspace(a, b, 33)
    ys = np.array([fn(x) for x in xs])
    coarse = float(np.sum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs)))
    tol = max(rtol * abs(coarse), atol)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, f_lo, f_mid, f_hi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        f_lm, f_rm = fn(lm), fn(rm)
        left = (mid - lo) * (f_lo + 4.0 * f_lm + f_mid) / 6.0
        right = (hi - mid) * (f_mid + 4.0 * f_rm + f_hi) / 6.0
        delta = left + right - est
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((lo, mid, f_lo, f_lm, f_mid, left, 0.5 * eps, depth + 1))
            stack.append((mid, hi, f_mid, f_rm, f_hi, right, 0.5 * eps, depth + 1))
    return sign * total


def gauss_legendre_cells(fn: Callable[[np.ndarray], np.ndarray], edges: np.ndarray) -> np.ndarray:
    """Integral of a vectorised ``fn`` over every cell ``[edges[i], edges[i+1]]``."""
    edges = np.asarray(edges, dtype=float)
    half = 0.5 * np.diff(edges)
    centre = 0.5 * (edges[1:] + edges[:-1])
    pts = centre[:, None] + half[:, None] * _GL_NODES[None, :]
    return half * (fn(pts) @ _GL_WEIGHTS)


def gauss_legendre_partial(
    fn: Callable[[np.ndarray], np.ndarray], a: np.ndarray, b: np.ndarray
) -> np.ndarray:
    """Elementwise integral of ``fn`` from ``a`` to ``b`` (short intervals)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    centre = 0.5 * (a + b)
    pts = centre[..., None] + half[..., None] * _GL_NODES
    return half * (fn(pts) @ _GL_WEIGHTS)


def central_difference(fn: Callable[[float], float], x: float, rel_step: float = 1e-6) -> float:
    h = max(rel_step, rel_step * abs(x))
    if x - h < 0.0:
        # one-sided second-order stencil at the left boundary
        return (-3.0 * fn(x) + 4.0 * fn(x + h) - fn(x + 2.0 * h)) / (2.0 * h)
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def finite_difference_taylor(fn: Callable[[float], float], x: float, order: int) -> np.ndarray:
    """Taylor coefficients ``f^(n)(x)/n!`` for ``n <= order`` by nested
    central differences. Accuracy degrades quickly with ``order``; analytic
    jets should be preferred where a model can provide them."""
    out = np.empty(order + 1)
    out[0] = fn(x)
    for n in range(1, order + 1):
        h = np.finfo(float).eps ** (1.0 / (n + 2)) * max(1.0, abs(x))
        if x - 0.5 * n * h >= 0.0:
            offsets = [(0.5 * n - i) * h for i in range(n + 1)]
        else:
            offsets = [(n - i) * h for i in range(n + 1)]
        acc = sum((-1) ** i * math.comb(n, i) * fn(x + off) for i, off in enumerate(offsets))
        out[n] = acc / h**n / math.factorial(n)
    return out


# -- truncated Taylor series ("jets") -------------------------------------
# A jet is a 1-D array of Taylor coefficients a[k] = f^(k)(x0) / k!.


def jet_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = min(len(a), len(b))
    return np.convolve(a[:n], b[:n])[:n]


def jet_recip(a: np.ndarray) -> np.ndarray:
    if a[0] == 0.0:
        raise ZeroDivisionError("jet with zero constant term has no reciprocal")
    out = np.zeros_like(a, dtype=float)
    out[0] = 1.0 / a[0]
    for k in range(1, len(a)):
        out[k] = -np.dot(a[1 : k + 1], out[k - 1 :: -1][:k]) / a[0]
    return out


def jet_exp(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a, dtype=float)
    out[0] = math.exp(a[0])
    for k in range(1, len(a)):
        j = np.arange(1, k + 1)
        out[k] = np.dot(j * a[1 : k + 1], out[k - j]) / k
    return out


def jet_log_of_variable(x0: float, order: int) -> np.ndarray:
    """Jet of ``log(x0 + t)``."""
    out = np.zeros(order + 1)
    out[0] = math.log(x0)
    for k in range(1, order + 1):
        out[k] = (-1) ** (k + 1) / (k * x0**k)
    return out


def jet_polyval(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate the ascending-coefficient polynomial at jet ``x`` (Horner)."""
    out = np.zeros_like(x, dtype=float)
    for c in coeffs[::-1]:
        out = jet_mul(out, x)
        out[0] += c
    return out


def jet_derivative(a: np.ndarray) -> np.ndarray:
    """Jet of the derivative; one order shorter."""
    k = np.arange(1, len(a))
    return a[1:] * k


def jet_antiderivative(a: np.ndarray, constant: float) -> np.ndarray:
    """Jet of the antiderivative with the given value at the expansion point."""
    k = np.arange(1, len(a) + 1)
    return np.concatenate(([constant], a / k))
