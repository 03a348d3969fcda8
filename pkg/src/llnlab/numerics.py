"""Shared numeric machinery: improper-integral block sums and limit gates.

The symbol "infinity" is replaced everywhere by two stated stopping rules:

* Integrals over [A, inf) are summed over dyadic blocks [2^j, 2^(j+1)].
  A block below ``block_tol`` (1e-12) certifies convergence for nonincreasing
  integrands; 60 blocks without that certificate yield a divergence marker
  carrying the partial value.
* "Decays to 0" for a sequence on a geometric grid means: last ``window``
  values below ``eps`` (1e-3) and nonincreasing.  A second certificate accepts
  sequences that are positive, nonincreasing, and fit a power law in the grid
  index with slope <= -1/2 (this covers exact-closed-form sequences that reach
  0 at a 1/log rate, far too slowly for any float-feasible grid to cross eps).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad

DECAY_EPS = 1e-3
BLOCK_TOL = 1e-12
MAX_BLOCKS = 60
QUAD_ABS_TOL = 1e-9


def geometric_grid(j0: int = 0, j1: int = 60) -> tuple[float, ...]:
    return tuple(2.0**j for j in range(j0, j1 + 1))


def finite_integral(
    f: Callable[[float], float],
    a: float,
    b: float,
    *,
    breakpoints: Sequence[float] = (),
    abs_tol: float = QUAD_ABS_TOL,
) -> float:
    """Adaptive quadrature on [a, b], split at interior breakpoints."""
    if b <= a:
        return 0.0
    pts = sorted({a, b, *(p for p in breakpoints if a < p < b)})
    total = 0.0
    with warnings.catch_warnings():
        # step-tail integrands trip scipy's roundoff heuristic; the achieved
        # accuracy is still far inside our tolerances on these piecewise pieces
        warnings.simplefilter("ignore", IntegrationWarning)
        for lo, hi in zip(pts[:-1], pts[1:]):
            val, _ = quad(f, lo, hi, epsabs=abs_tol, epsrel=1e-10, limit=200)
            total += val
    return total


@dataclass(frozen=True)
class BlockIntegral:
    value: float  # inf when not converged
    partial: float
    converged: bool
    blocks: tuple[float, ...]


def integrate_tail_blocks(
    f: Callable[[float], float],
    start: float,
    *,
    breakpoints_in: Callable[[float, float], Sequence[float]] = lambda lo, hi: (),
    upper: float | None = None,
    block_tol: float = BLOCK_TOL,
    max_blocks: int = MAX_BLOCKS,
    abs_tol: float = QUAD_ABS_TOL,
) -> BlockIntegral:
    """Sum integral(f) over dyadic blocks from ``start`` toward infinity.

    ``upper`` short-circuits the block walk when the integrand is known to
    vanish beyond it (compact support).
    """
    start = max(start, 0.0)
    if upper is not None and upper <= start:
        return BlockIntegral(0.0, 0.0, True, ())
    lo = start
    total = 0.0
    blocks: list[float] = []
    # first partial block up to the next power of two
    first_hi = 2.0 ** math.ceil(math.log2(lo)) if lo > 0 else 1.0
    if first_hi <= lo:
        first_hi = 2.0 * lo
    if upper is not None:
        first_hi = min(first_hi, upper)
    if first_hi > lo:
        total += finite_integral(
            f, lo, first_hi, breakpoints=breakpoints_in(lo, first_hi), abs_tol=abs_tol
        )
    lo = first_hi
    for _ in range(max_blocks):
        if upper is not None and lo >= upper:
            return BlockIntegral(total, total, True, tuple(blocks))
        hi = 2.0 * lo
        if upper is not None:
            hi = min(hi, upper)
        b = finite_integral(
            f, lo, hi, breakpoints=breakpoints_in(lo, hi), abs_tol=abs_tol
        )
        blocks.append(b)
        total += b
        lo = hi
        if abs(b) < block_tol:
            return BlockIntegral(total, total, True, tuple(blocks))
    return BlockIntegral(math.inf, total, False, tuple(blocks))


# ---------------------------------------------------------------------------
# Limit gates for sequences on geometric grids
# ---------------------------------------------------------------------------


def nonincreasing(values: Sequence[float], tol: float = 1e-12) -> bool:
    v = list(values)
    return all(b <= a + tol for a, b in zip(v[:-1], v[1:]))


def decay_gate(
    values: Sequence[float], *, eps: float = DECAY_EPS, window: int = 5
) -> bool:
    """Last ``window`` values below eps and nonincreasing."""
    v = list(values)
    if len(v) < window:
        return False
    tail = v[-window:]
    return all(t < eps for t in tail) and nonincreasing(tail)


def slope_certified_decay(
    values: Sequence[float],
    *,
    min_slope: float = -0.5,
    max_residual: float = 1.0,
    min_points: int = 8,
) -> bool:
    """Power-law-in-index decay certificate for positive nonincreasing sequences.

    Fits log(v_j) against log(j) over the second half of the grid; a fitted
    slope <= min_slope with small residuals certifies v_j -> 0 even when the
    values never cross the eps threshold on a feasible grid.
    """
    v = np.asarray([float(x) for x in values])
    if len(v) < min_points or np.any(v <= 0.0):
        return False
    if not nonincreasing(v, tol=1e-12 * max(1.0, float(v[0]))):
        return False
    half = len(v) // 2
    idx = np.arange(1, len(v) + 1, dtype=float)[half:]
    ys = np.log(v[half:])
    xs = np.log(idx)
    if np.ptp(xs) <= 0:
        return False
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    return slope <= min_slope and float(np.max(np.abs(resid))) <= max_residual


def growth_gate(values: Sequence[float], *, eps: float = DECAY_EPS) -> bool:
    """Sequence is (weakly) growing over its second half and ends above eps."""
    v = [float(x) for x in values]
    if len(v) < 4:
        return False
    half = len(v) // 2
    tail = v[half:]
    growing = all(b >= a - 1e-12 * max(1.0, abs(a)) for a, b in zip(tail[:-1], tail[1:]))
    return growing and tail[-1] > eps and tail[-1] >= v[0] - 1e-12


def fitted_block_slope(blocks: Sequence[float], run: int = 10) -> float | None:
    """Least-squares slope of log2(block) over the last ``run`` positive blocks.

    For integrands ~ x^s on dyadic blocks the slope equals s + 1, so a slope
    near 0 or above means the underlying integral/series diverges.
    """
    b = [x for x in blocks if x > 0.0]
    if len(b) < run:
        return None
    window = np.log2(np.asarray(b[-run:]))
    xs = np.arange(run, dtype=float)
    slope, _ = np.polyfit(xs, window, 1)
    return float(slope)
