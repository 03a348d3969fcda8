"""Expectation machinery built on the tail-integral decomposition.

For a nonnegative variable xi with tail T(x) = P(xi > x) and a function h with
h(0) = 0, bounded on [0, A] and differentiable beyond A,

    E h(xi) = E(h(xi) 1(xi <= A)) + h(A) P(xi > A) + int_A^inf h'(x) T(x) dx.

Discrete distributions are evaluated by atom enumeration (the integral
telescopes exactly through the step tail); continuous ones by adaptive
quadrature with the dyadic block rule of :mod:`llnlab.numerics` standing in
for the upper limit.  Divergent integrals return an inf marker that still
carries the partial value at the cutoff.

The module also houses the weighted moment scans used by the domination and
condition checks: bounded weighted moments, weighted uniform integrability,
superlinear witness functions, and the rescaled tail-decay sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from . import svf as _svf
from .errors import SuperlinearityError
from .model import (
    ArraySpec,
    CellGroup,
    CustomDist,
    DistSpec,
    ParetoTail,
    SymmetricPM1,
    SymmetricTwoPoint,
    TailFunction,
    WeightScheme,
    DEFAULT_N_SUP,
    tail_of,
)
from .numerics import BlockIntegral, finite_integral, integrate_tail_blocks
from .svf import SlowlyVaryingSpec


class ExpectationValue(float):
    """A float expectation; inf when the tail blocks never certified convergence.

    ``partial`` holds the accumulated value at the integration cutoff and
    ``converged`` says whether the block rule certified the integral.
    """

    partial: float
    converged: bool

    def __new__(cls, value, partial=None, converged=True):
        obj = super().__new__(cls, value)
        obj.partial = float(value if partial is None else partial)
        obj.converged = bool(converged)
        return obj


class SupValue(float):
    """sup over a scanned row range, with the attaining row and a growth flag."""

    attained_at: int
    growing: bool

    def __new__(cls, value, attained_at=0, growing=False):
        obj = super().__new__(cls, value)
        obj.attained_at = int(attained_at)
        obj.growing = bool(growing)
        return obj


# ---------------------------------------------------------------------------
# Moment functions g(x) = x^p * L(x^c) * [iterated-log factor]
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentFunction:
    """Composite x^power * sv(x^sv_arg_power) * log-product factor.

    ``log_factor_nu`` multiplies by log_nu(x); ``log_sq_factor_nu`` by
    log_nu_sq(x) (last factor squared).  Either may be None.
    """

    power: float
    sv: Optional[SlowlyVaryingSpec] = None
    sv_arg_power: float = 1.0
    log_factor_nu: Optional[int] = None
    log_sq_factor_nu: Optional[int] = None

    def __post_init__(self):
        if not (self.power > 0):
            raise ValueError("power must be positive")

    def eval(self, x: float) -> float:
        x = float(x)
        if x <= 0.0:
            return 0.0
        out = x**self.power
        if self.sv is not None:
            out *= self.sv.eval(x**self.sv_arg_power)
        if self.log_factor_nu is not None:
            out *= _svf.log_nu(x, self.log_factor_nu)
        if self.log_sq_factor_nu is not None:
            out *= _svf.log_nu_sq(x, self.log_sq_factor_nu)
        return out

    __call__ = eval

    def derivative(self, x: float) -> float:
        x = float(x)
        if x <= 0.0:
            return 0.0
        parts = [x**self.power]
        dparts = [self.power * x ** (self.power - 1.0)]
        if self.sv is not None:
            arg = x**self.sv_arg_power
            parts.append(self.sv.eval(arg))
            dparts.append(
                self.sv.derivative(arg) * self.sv_arg_power * x ** (self.sv_arg_power - 1.0)
            )
        if self.log_factor_nu is not None:
            parts.append(_svf.log_nu(x, self.log_factor_nu))
            dparts.append(_svf.log_nu_derivative(x, self.log_factor_nu))
        if self.log_sq_factor_nu is not None:
            parts.append(_svf.log_nu_sq(x, self.log_sq_factor_nu))
            dparts.append(
                _svf.log_nu_derivative(x, self.log_sq_factor_nu, last_squared=True)
            )
        total = 0.0
        for j in range(len(parts)):
            prod = dparts[j]
            for i, v in enumerate(parts):
                if i != j:
                    prod *= v
            total += prod
        return total

    @property
    def anchor(self) -> float:
        if self.sv is not None and self.sv.anchor > 0.0:
            return self.sv.anchor ** (1.0 / self.sv_arg_power)
        return 0.0

    def breakpoints(self) -> tuple[float, ...]:
        pts: set[float] = set()
        if self.log_factor_nu is not None or self.log_sq_factor_nu is not None:
            pts.update(_svf.LOG_CHAIN_KINKS)
        if self.sv is not None:
            for k in self.sv.kinks():
                if k > 0.0:
                    pts.add(k ** (1.0 / self.sv_arg_power))
        return tuple(sorted(pts))

    def inverse(self, y: float) -> float:
        """Inverse on the increasing branch (bisection with geometric bracket)."""
        if y <= 0.0:
            return 0.0
        lo, hi = 0.0, 1.0
        while self.eval(hi) <= y:
            hi *= 2.0
            if hi > 1e300:
                return hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.eval(mid) <= y:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14 * max(1.0, hi):
                break
        return 0.5 * (lo + hi)


def power_function(p: float) -> MomentFunction:
    return MomentFunction(power=p)


# ---------------------------------------------------------------------------
# Core expectation via the tail decomposition
# ---------------------------------------------------------------------------


def _discrete_expectation(
    atoms: Sequence[tuple[float, float]], h: Callable[[float], float], A: float
) -> float:
    """Exact decomposition for purely discrete |X|: atom sums + telescoped tail."""
    srt = sorted(atoms)
    below = math.fsum(h(m) * p for m, p in srt if m <= A and m > 0.0)
    above = [(m, p) for m, p in srt if m > A]
    tail_at_a = math.fsum(p for _, p in above)
    integral = 0.0
    cur, t_cur = A, tail_at_a
    for m, p in above:
        integral += t_cur * (h(m) - h(cur))
        t_cur -= p
        cur = m
    return below + h(A) * tail_at_a + integral


def expectation_via_tail(
    tail: TailFunction, h, A: float = 0.0, *, max_blocks: int = 60
) -> ExpectationValue:
    """E h(|X|) by the tail-integral decomposition split at A.

    ``h`` is a :class:`MomentFunction` or any object with eval/derivative/
    breakpoints.  The result is A-invariant for h differentiable on [0, inf).
    ``max_blocks`` extends the dyadic budget for tails that converge too
    slowly for the default 60 blocks.
    """
    h_eval = h.eval if hasattr(h, "eval") else h
    if tail.atoms is not None:
        return ExpectationValue(_discrete_expectation(tail.atoms, h_eval, A))

    h_deriv = h.derivative
    brk = tuple(h.breakpoints()) if hasattr(h, "breakpoints") else ()

    def integrand(t: float) -> float:
        return h_deriv(t) * tail.fn(t)

    below = 0.0
    if A > 0.0:
        pts = list(brk) + list(tail.knots_in(0.0, A))
        below = finite_integral(integrand, 0.0, A, breakpoints=pts)

    def block_breaks(lo: float, hi: float):
        return tuple(p for p in brk if lo < p < hi) + tail.knots_in(lo, hi)

    res: BlockIntegral = integrate_tail_blocks(
        integrand,
        A,
        breakpoints_in=block_breaks,
        upper=tail.support_hint,
        max_blocks=max_blocks,
    )
    if not res.converged:
        return ExpectationValue(math.inf, partial=below + res.partial, converged=False)
    return ExpectationValue(below + res.value)


def moment_g(
    tail: TailFunction, g: MomentFunction, *, max_blocks: int = 60
) -> ExpectationValue:
    """E g(|X|), splitting at the anchor of g's slowly varying factor."""
    return expectation_via_tail(tail, g, A=g.anchor, max_blocks=max_blocks)


def truncated_abs_moment(
    tail: TailFunction, r: float, x: float, side: str
) -> ExpectationValue:
    """E(|X|^r 1(|X| <= x)) for side='below', E(|X|^r 1(|X| > x)) for 'above'."""
    if side not in ("below", "above"):
        raise ValueError("side must be 'below' or 'above'")
    if tail.atoms is not None:
        if side == "below":
            val = math.fsum(m**r * p for m, p in tail.atoms if 0.0 < m <= x)
        else:
            val = math.fsum(m**r * p for m, p in tail.atoms if m > x)
        return ExpectationValue(val)

    def integrand(t: float) -> float:
        return r * t ** (r - 1.0) * tail.fn(t)

    if side == "below":
        val = finite_integral(integrand, 0.0, x, breakpoints=tail.knots_in(0.0, x))
        return ExpectationValue(val - x**r * tail.fn(x))
    res = integrate_tail_blocks(
        integrand,
        x,
        breakpoints_in=lambda lo, hi: tail.knots_in(lo, hi),
        upper=tail.support_hint,
    )
    head = x**r * tail.fn(x)
    if not res.converged:
        return ExpectationValue(math.inf, partial=head + res.partial, converged=False)
    return ExpectationValue(head + res.value)


# ---------------------------------------------------------------------------
# Per-cell helpers (exact for discrete specs)
# ---------------------------------------------------------------------------


def cell_moment(dist: DistSpec, g) -> float:
    """E g(|X|) for a single cell; closed form for the discrete built-ins."""
    g_eval = g.eval if hasattr(g, "eval") else g
    if isinstance(dist, SymmetricPM1):
        return g_eval(1.0)
    if isinstance(dist, SymmetricTwoPoint):
        return g_eval(dist.magnitude) * dist.prob
    return float(moment_g(tail_of(dist), g))


def cell_transformed_tail_mass(dist: DistSpec, t, a: float) -> float:
    """E(t(|X|) 1(t(|X|) > a)) for one cell; t strictly increasing, t(0) = 0."""
    t_eval = t.eval if hasattr(t, "eval") else t
    if isinstance(dist, SymmetricPM1):
        v = t_eval(1.0)
        return v if v > a else 0.0
    if isinstance(dist, SymmetricTwoPoint):
        v = t_eval(dist.magnitude)
        return v * dist.prob if v > a else 0.0
    tail = tail_of(dist)
    x_a = t.inverse(a) if hasattr(t, "inverse") else _numeric_inverse(t_eval, a)

    def integrand(x: float) -> float:
        return t.derivative(x) * tail.fn(x)

    res = integrate_tail_blocks(
        integrand,
        x_a,
        breakpoints_in=lambda lo, hi: tail.knots_in(lo, hi),
        upper=tail.support_hint,
    )
    head = t_eval(x_a) * tail.fn(x_a)
    return head + (res.value if res.converged else math.inf)


def _numeric_inverse(f: Callable[[float], float], y: float) -> float:
    if y <= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while f(hi) <= y:
        hi *= 2.0
        if hi > 1e300:
            return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) <= y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def clamped_mean(dist: DistSpec, a: float) -> float:
    """E of X clamped to [-a, a]; zero for the symmetric built-ins."""
    if isinstance(dist, (SymmetricPM1, SymmetricTwoPoint, ParetoTail)):
        return 0.0
    if isinstance(dist, CustomDist):
        if dist.quantile is None:
            raise ValueError("custom distribution has no quantile for clamped mean")
        q = dist.quantile

        def f(u: float) -> float:
            v = float(np.asarray(q(np.array([u])))[0])
            return max(-a, min(a, v))

        val, _ = quad(f, 0.0, 1.0, epsabs=1e-10, limit=200)
        return val
    raise TypeError(f"not a DistSpec: {dist!r}")


def clamped_square_mean(dist: DistSpec, a: float) -> float:
    """E (X clamped to [-a,a])^2 = E(|X|^2 1(|X|<=a)) + a^2 P(|X|>a)."""
    tail = tail_of(dist)
    below = truncated_abs_moment(tail, 2.0, a, "below")
    return float(below) + a * a * tail.fn(a)


def truncated_mean(dist: DistSpec, b: float) -> float:
    """E(X 1(|X| <= b)); exactly zero for the symmetric built-ins."""
    if isinstance(dist, (SymmetricPM1, SymmetricTwoPoint, ParetoTail)):
        return 0.0
    if isinstance(dist, CustomDist):
        if dist.quantile is None:
            raise ValueError("custom distribution has no quantile for truncated mean")
        q = dist.quantile

        def f(u: float) -> float:
            v = float(np.asarray(q(np.array([u])))[0])
            return v if abs(v) <= b else 0.0

        val, _ = quad(f, 0.0, 1.0, epsabs=1e-10, limit=200)
        return val
    raise TypeError(f"not a DistSpec: {dist!r}")


# ---------------------------------------------------------------------------
# Array transforms
# ---------------------------------------------------------------------------


def transformed_array(arr: ArraySpec, t) -> ArraySpec:
    """Array of t(|X[n,i]|) cells for strictly increasing t with t(0) = 0.

    Discrete cells map exactly (atom at t(m)); others become custom tail cells
    with the composed survival function.
    """
    t_eval = t.eval if hasattr(t, "eval") else t

    def map_dist(d: DistSpec) -> DistSpec:
        if isinstance(d, SymmetricPM1):
            return SymmetricTwoPoint(magnitude=t_eval(1.0), prob=1.0)
        if isinstance(d, SymmetricTwoPoint):
            return SymmetricTwoPoint(magnitude=t_eval(d.magnitude), prob=d.prob)
        base = tail_of(d)
        inv = t.inverse if hasattr(t, "inverse") else (
            lambda y: _numeric_inverse(t_eval, y)
        )

        def composed(x: float) -> float:
            if x < 0.0:
                return 1.0
            return base.fn(inv(x))

        sup = None
        if base.support_hint is not None:
            sup = t_eval(base.support_hint)
        return CustomDist(
            tail=TailFunction(fn=composed, kind="piecewise", support_hint=sup),
            mean_zero=False,
        )

    if arr.is_sequence:
        cell = arr.sequence_cell
        return ArraySpec(
            row_length=arr.row_length,
            sequence_cell=lambda i: map_dist(cell(i)),
            mean_zero=False,
            label=f"{arr.label}|transformed",
        )
    groups = arr.groups_fn
    return ArraySpec(
        row_length=arr.row_length,
        groups_fn=lambda n: tuple(CellGroup(g.count, map_dist(g.dist)) for g in groups(n)),
        mean_zero=False,
        n_max=arr.n_max,
        label=f"{arr.label}|transformed",
    )


# ---------------------------------------------------------------------------
# Weighted scans
# ---------------------------------------------------------------------------


def _scan_top(arr: ArraySpec, w: WeightScheme, n_sup: int) -> int:
    top = n_sup
    for bound in (arr.n_max, w.n_max):
        if bound is not None:
            top = min(top, bound)
    return top


def _row_values(
    arr: ArraySpec,
    w: WeightScheme,
    cell_value: Callable[[DistSpec], float],
    n_sup: int,
) -> np.ndarray:
    """sum_i a(n,i) * cell_value(dist of cell i) for n = 1..n_sup."""
    top = _scan_top(arr, w, n_sup)
    if arr.is_sequence and w.kind == "uniform":
        vals = np.fromiter(
            (cell_value(arr.sequence_cell(i)) for i in range(1, top + 1)),
            dtype=float,
            count=top,
        )
        return np.cumsum(vals) / np.arange(1, top + 1)
    out = np.empty(top, dtype=float)
    cache: dict[DistSpec, float] = {}
    for n in range(1, top + 1):
        pos = 0
        acc = 0.0
        for g in arr.row_groups(n):
            if g.dist not in cache:
                cache[g.dist] = cell_value(g.dist)
            acc += w.range_sum(n, pos + 1, pos + g.count) * cache[g.dist]
            pos += g.count
        out[n - 1] = acc
    return out


def _sup_with_growth(values: np.ndarray) -> SupValue:
    if np.any(np.isinf(values)):
        n = int(np.argmax(np.isinf(values))) + 1
        return SupValue(math.inf, attained_at=n, growing=True)
    idx = int(np.argmax(values))
    half = len(values) // 2
    growing = False
    if half >= 1:
        growing = values[half:].max() > values[:half].max() * 1.01 + 1e-300
    return SupValue(float(values[idx]), attained_at=idx + 1, growing=growing)


def bounded_moment_condition(
    arr: ArraySpec, w: WeightScheme, g, *, n_sup: int = DEFAULT_N_SUP
) -> SupValue:
    """sup_n sum_i a(n,i) E g(|X[n,i]|) over the scan range.

    The float result carries ``attained_at`` and a ``growing`` flag; growth
    across the scan is how divergence shows up (no exception).
    """
    return _sup_with_growth(_row_values(arr, w, lambda d: cell_moment(d, g), n_sup))


def ui_check(
    arr: ArraySpec,
    w: WeightScheme,
    transform,
    a_grid: Sequence[float],
    *,
    n_sup: int = DEFAULT_N_SUP,
    closed_sup: Optional[Callable[[float], float]] = None,
) -> list[float]:
    """Weighted uniform-integrability sequence over truncation levels.

    Entry for level a: sup_n sum_i a(n,i) E(t(|X[n,i]|) 1(t(|X[n,i]|) > a)).
    ``closed_sup`` (when a fixture provides the exact sup over all n) replaces
    the finite row scan.
    """
    if closed_sup is not None:
        return [float(closed_sup(a)) for a in a_grid]
    out = []
    for a in a_grid:
        vals = _row_values(
            arr, w, lambda d: cell_transformed_tail_mass(d, transform, a), n_sup
        )
        out.append(float(np.max(vals)))
    return out


def dlvp_witness(
    arr: ArraySpec, w: WeightScheme, g, *, n_sup: int = DEFAULT_N_SUP
) -> SupValue:
    """sup_n sum_i a(n,i) E g(|X[n,i]|) for a superlinear witness g.

    Finiteness certifies weighted uniform integrability of the raw cells by
    the de La Vallee Poussin criterion; g must satisfy g(x)/x -> inf, checked
    on a geometric grid before any scanning.
    """
    g_eval = g.eval if hasattr(g, "eval") else g
    ratios = [g_eval(2.0**j) / 2.0**j for j in range(0, 41)]
    half = ratios[len(ratios) // 2 :]
    increasing_tail = all(b >= a - 1e-12 for a, b in zip(half[:-1], half[1:]))
    if not (increasing_tail and ratios[-1] > 10.0 * max(ratios[0], 1e-300)):
        raise SuperlinearityError("witness fails g(x)/x -> infinity on the scan grid")
    return bounded_moment_condition(arr, w, g, n_sup=n_sup)


def tail_along_norming(
    tail: TailFunction,
    p: float,
    conj: Optional[SlowlyVaryingSpec],
    x_grid: Sequence,
) -> list[float]:
    """Sequence x * P(|X| > x^(1/p) * Lt(x)^(1/p)) over the grid.

    Integer grid points are kept exact when the norming map allows it, so the
    sequence can be evaluated far beyond float range for closed-form tails.
    """
    inv = 1.0 / p
    trivial = conj is None or conj.family == "constant"
    int_exact = trivial and float(inv).is_integer()
    out = []
    for x in x_grid:
        if int_exact and isinstance(x, int):
            arg = x ** int(inv)
        else:
            arg = float(x) ** inv
            if not trivial:
                arg *= conj.eval(float(x)) ** inv
        t = tail.fn(arg)
        if isinstance(t, Fraction) or (isinstance(x, int) and x > 2**53):
            out.append(float(Fraction(x) * (t if isinstance(t, Fraction) else Fraction(t))))
        else:
            out.append(float(x) * float(t))
    return out
