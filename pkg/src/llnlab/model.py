"""Arrays of random variables, their tails, weights, and norming sequences.

The central object is a triangular array {X[n,i], 1 <= i <= k_n} described
row-by-row as groups of identically distributed cells.  Grouping keeps row
scans cheap: a row with half +-1 cells and half +-n cells is two groups, not n
cells.  Sequence-shaped arrays (X[n,i] = X_i with k_n = n) are marked as such
so that downstream scans can use prefix sums and path simulation can realize a
whole path from the longest row.

Tail functions always mean the survival function of the absolute value,
x -> P(|X| > x), with the strict inequality: a unit atom at 5 gives tail 0 at
x = 5.  Purely discrete distributions carry their atom list so expectations
can be computed exactly downstream.

Sampling is deterministic per (seed, n) via counter-based Philox streams, so
rows can be drawn concurrently without shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from numpy.random import Generator, Philox, SeedSequence
from scipy.special import ndtr

from .errors import RowRangeError, SamplingError

DEFAULT_N_SUP = 10_000


# ---------------------------------------------------------------------------
# Tail functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailFunction:
    """Queryable survival function x -> P(|X| > x).

    ``atoms`` lists (magnitude, probability) pairs when |X| is purely discrete;
    ``support_hint`` is an upper endpoint beyond which the tail is exactly 0;
    ``knot_fn(lo, hi)`` enumerates discontinuities inside (lo, hi) for step
    tails whose atom list is unbounded (used to split quadrature segments).
    """

    fn: Callable[[float], float]
    kind: str = "analytic"  # analytic | piecewise | empirical
    support_hint: Optional[float] = None
    atoms: Optional[tuple[tuple[float, float], ...]] = None
    knot_fn: Optional[Callable[[float, float], tuple[float, ...]]] = None

    def eval(self, x) -> float:
        return self.fn(x)

    __call__ = eval

    def on_grid(self, xs: Sequence[float]) -> list[float]:
        return [self.fn(x) for x in xs]

    def knots_in(self, lo: float, hi: float) -> tuple[float, ...]:
        if self.atoms is not None:
            return tuple(m for m, _ in self.atoms if lo < m < hi)
        if self.knot_fn is not None:
            return self.knot_fn(lo, hi)
        return ()


def empirical_tail(samples: np.ndarray) -> TailFunction:
    """Right-continuous empirical tail P(|X| > x) = #{|sample| > x} / N."""
    mags = np.sort(np.abs(np.asarray(samples, dtype=float)))
    n = len(mags)

    def fn(x: float) -> float:
        return float(n - np.searchsorted(mags, x, side="right")) / n

    return TailFunction(fn=fn, kind="empirical", support_hint=float(mags[-1]))


# ---------------------------------------------------------------------------
# Distribution specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymmetricTwoPoint:
    """P(X = +-magnitude) = prob/2 each, rest of the mass at 0."""

    magnitude: float
    prob: float = 1.0

    def __post_init__(self):
        if not (self.magnitude > 0):
            raise ValueError("magnitude must be positive")
        if not (0.0 < self.prob <= 1.0):
            raise ValueError("prob must lie in (0, 1]")


@dataclass(frozen=True)
class SymmetricPM1:
    """X = +-1 with probability 1/2 each."""


@dataclass(frozen=True)
class ParetoTail:
    """Symmetric heavy-tailed law with P(|X| > x) = min(1, (x/cutoff)^-alpha)."""

    alpha: float
    cutoff: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ValueError("alpha must be positive")
        if not (self.cutoff >= 1.0):
            raise ValueError("cutoff must be >= 1")


@dataclass(frozen=True)
class CustomDist:
    """Arbitrary law given by its |X| tail and a quantile function for X."""

    tail: TailFunction
    quantile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    mean_zero: bool = False


DistSpec = Union[SymmetricTwoPoint, SymmetricPM1, ParetoTail, CustomDist]


def tail_of(spec: DistSpec) -> TailFunction:
    """Exact survival function of |X| for the given spec."""
    if isinstance(spec, SymmetricPM1):
        return TailFunction(
            fn=lambda x: 1.0 if x < 1.0 else 0.0,
            kind="piecewise",
            support_hint=1.0,
            atoms=((1.0, 1.0),),
        )
    if isinstance(spec, SymmetricTwoPoint):
        m, q = spec.magnitude, spec.prob

        def two_point_tail(x: float) -> float:
            if x < 0.0:
                return 1.0
            return q if x < m else 0.0

        atoms = ((m, q),) if q == 1.0 else ((0.0, 1.0 - q), (m, q))
        return TailFunction(
            fn=two_point_tail, kind="piecewise", support_hint=m, atoms=atoms
        )
    if isinstance(spec, ParetoTail):
        a, c = spec.alpha, spec.cutoff

        def pareto_tail(x: float) -> float:
            if x <= c:
                return 1.0
            return (x / c) ** (-a)

        return TailFunction(fn=pareto_tail, kind="analytic")
    if isinstance(spec, CustomDist):
        return spec.tail
    raise TypeError(f"not a DistSpec: {spec!r}")


def quantile_of(spec: DistSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized inverse-transform sampler u in [0,1) -> X."""
    if isinstance(spec, SymmetricPM1):
        return lambda u: np.where(np.asarray(u) < 0.5, -1.0, 1.0)
    if isinstance(spec, SymmetricTwoPoint):
        m, q = spec.magnitude, spec.prob

        def two_point_q(u):
            u = np.asarray(u)
            return np.where(u < q / 2.0, -m, np.where(u >= 1.0 - q / 2.0, m, 0.0))

        return two_point_q
    if isinstance(spec, ParetoTail):
        a, c = spec.alpha, spec.cutoff

        def pareto_q(u):
            u = np.asarray(u)
            w = 2.0 * np.abs(u - 0.5)
            mag = c * np.power(np.maximum(1.0 - w, 1e-300), -1.0 / a)
            return np.where(u < 0.5, -mag, mag)

        return pareto_q
    if isinstance(spec, CustomDist):
        if spec.quantile is None:
            raise SamplingError("custom distribution has no quantile function")
        return spec.quantile
    raise TypeError(f"not a DistSpec: {spec!r}")


def mean_zero_ok(spec: DistSpec) -> bool:
    """Symmetric built-ins are mean zero by construction; customs must declare."""
    if isinstance(spec, (SymmetricPM1, SymmetricTwoPoint, ParetoTail)):
        return True
    return spec.mean_zero


# ---------------------------------------------------------------------------
# Row dependence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Independent:
    pass


@dataclass(frozen=True)
class GaussianNA:
    """Negatively associated rows via a moving-average Gaussian construction.

    Cells are monotone transforms of Z_i = (W_i + theta * W_{i+1}) / sqrt(1 +
    theta^2) with theta < 0 chosen so neighbours have the declared nonpositive
    correlation (|rho| <= 1/2); non-neighbour covariances are 0.  A Gaussian
    vector with nonpositive covariances is negatively associated, and
    coordinatewise nondecreasing transforms preserve that.
    """

    correlation: float

    def __post_init__(self):
        if not (-0.5 <= self.correlation <= 0.0):
            raise ValueError("correlation must lie in [-1/2, 0]")

    def theta(self) -> float:
        r = self.correlation
        if r == 0.0:
            return 0.0
        return (1.0 - math.sqrt(1.0 - 4.0 * r * r)) / (2.0 * r)


Dependence = Union[Independent, GaussianNA]

INDEPENDENT = Independent()


# ---------------------------------------------------------------------------
# Arrays
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellGroup:
    count: int
    dist: DistSpec


@dataclass(frozen=True)
class ArraySpec:
    """Triangular array of cells given per-row as groups of identical cells."""

    row_length: Callable[[int], int]
    groups_fn: Optional[Callable[[int], tuple[CellGroup, ...]]] = None
    sequence_cell: Optional[Callable[[int], DistSpec]] = None
    mean_zero: bool = True
    dependence: Dependence = INDEPENDENT
    label: str = ""
    n_max: Optional[int] = None
    closed_cesaro_sup: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.groups_fn is None and self.sequence_cell is None:
            raise ValueError("array needs groups_fn or sequence_cell")

    @property
    def is_sequence(self) -> bool:
        return self.sequence_cell is not None

    def k(self, n: int) -> int:
        if n < 1:
            raise RowRangeError(f"row index must be >= 1, got {n}")
        if self.n_max is not None and n > self.n_max:
            raise RowRangeError(f"row {n} beyond declared n_max={self.n_max}")
        return self.row_length(n)

    def row_groups(self, n: int) -> tuple[CellGroup, ...]:
        k = self.k(n)
        if self.groups_fn is not None:
            groups = self.groups_fn(n)
        else:
            groups = tuple(CellGroup(1, self.sequence_cell(i)) for i in range(1, k + 1))
        if sum(g.count for g in groups) != k:
            raise ValueError(f"row {n}: group counts do not sum to k_n={k}")
        return groups

    def cell(self, n: int, i: int) -> DistSpec:
        k = self.k(n)
        if not (1 <= i <= k):
            raise RowRangeError(f"cell index {i} outside 1..{k} in row {n}")
        if self.sequence_cell is not None:
            return self.sequence_cell(i)
        pos = 0
        for g in self.row_groups(n):
            pos += g.count
            if i <= pos:
                return g.dist
        raise RowRangeError(f"cell ({n},{i}) not covered by groups")

    def validate_mean_zero(self) -> None:
        if not self.mean_zero:
            return
        probe_rows = [1, 2, 3] if self.n_max is None else [1, min(2, self.n_max)]
        for n in probe_rows:
            for g in self.row_groups(n):
                if not mean_zero_ok(g.dist):
                    raise ValueError(
                        f"row {n} holds a custom cell that does not declare mean 0"
                    )


def identical_array(
    dist: DistSpec,
    *,
    row_length: Callable[[int], int] = lambda n: n,
    mean_zero: bool = True,
    dependence: Dependence = INDEPENDENT,
    label: str = "",
) -> ArraySpec:
    """All cells share one distribution; the Cesaro sup reduces to its tail."""
    tail = tail_of(dist)
    return ArraySpec(
        row_length=row_length,
        groups_fn=lambda n: (CellGroup(row_length(n), dist),),
        mean_zero=mean_zero,
        dependence=dependence,
        label=label,
        closed_cesaro_sup=tail.fn,
    )


def sequence_array(
    cell: Callable[[int], DistSpec],
    *,
    mean_zero: bool = True,
    dependence: Dependence = INDEPENDENT,
    label: str = "",
    closed_cesaro_sup: Optional[Callable[[float], float]] = None,
) -> ArraySpec:
    """Array with X[n,i] = X_i and k_n = n."""
    return ArraySpec(
        row_length=lambda n: n,
        sequence_cell=cell,
        mean_zero=mean_zero,
        dependence=dependence,
        label=label,
        closed_cesaro_sup=closed_cesaro_sup,
    )


# ---------------------------------------------------------------------------
# Weight schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightScheme:
    """Nonnegative weights a(n, i) tied to a row-length map.

    ``range_sum_fn`` gives the closed sum of a(n, i) over lo <= i <= hi when
    the scheme has block structure; otherwise sums fall back to a loop.
    ``closed_weighted_sup`` is an exact sup_n sum_i a(n,i) P(|X[n,i]| > x) for
    the array this scheme was built for (fixtures attach it).
    """

    kind: str  # uniform | explicit | c-normalized
    row_length: Callable[[int], int]
    a_fn: Optional[Callable[[int, int], float]] = None
    range_sum_fn: Optional[Callable[[int, int, int], float]] = None
    closed_weighted_sup: Optional[Callable[[float], float]] = None
    n_max: Optional[int] = None
    flavor: str = ""  # for c-normalized: "sum" (A_n = sum c) or "sum-sq" (A_n = sum c^2)
    growth_constant: Optional[float] = None

    def _check_row(self, n: int) -> int:
        if n < 1:
            raise RowRangeError(f"row index must be >= 1, got {n}")
        if self.n_max is not None and n > self.n_max:
            raise RowRangeError(f"row {n} beyond declared n_max={self.n_max}")
        return self.row_length(n)

    def a(self, n: int, i: int) -> float:
        k = self._check_row(n)
        if not (1 <= i <= k):
            raise RowRangeError(f"weight index {i} outside 1..{k} in row {n}")
        if self.kind == "uniform":
            return 1.0 / k
        return self.a_fn(n, i)  # type: ignore[misc]

    def range_sum(self, n: int, lo: int, hi: int) -> float:
        k = self._check_row(n)
        lo, hi = max(lo, 1), min(hi, k)
        if hi < lo:
            return 0.0
        if self.kind == "uniform":
            return (hi - lo + 1) / k
        if self.range_sum_fn is not None:
            return self.range_sum_fn(n, lo, hi)
        return math.fsum(self.a_fn(n, i) for i in range(lo, hi + 1))  # type: ignore[misc]

    def row_sum(self, n: int) -> float:
        return self.range_sum(n, 1, self._check_row(n))

    def c0(self, n_sup: int = DEFAULT_N_SUP) -> tuple[float, int]:
        """sup of row sums over the scan range, with the attaining row."""
        top = min(n_sup, self.n_max) if self.n_max is not None else n_sup
        best, best_n = -math.inf, 0
        for n in range(1, top + 1):
            s = self.row_sum(n)
            if s > best:
                best, best_n = s, n
        if not (best > 0.0 and math.isfinite(best)):
            raise ValueError(f"row-sum sup {best} violates C0 in (0, inf)")
        return best, best_n


def uniform_weights(row_length: Callable[[int], int] = lambda n: n) -> WeightScheme:
    return WeightScheme(kind="uniform", row_length=row_length)


def explicit_weights(
    a_fn: Callable[[int, int], float],
    row_length: Callable[[int], int],
    *,
    range_sum_fn: Optional[Callable[[int, int, int], float]] = None,
    closed_weighted_sup: Optional[Callable[[float], float]] = None,
    n_max: Optional[int] = None,
) -> WeightScheme:
    return WeightScheme(
        kind="explicit",
        row_length=row_length,
        a_fn=a_fn,
        range_sum_fn=range_sum_fn,
        closed_weighted_sup=closed_weighted_sup,
        n_max=n_max,
    )


def c_normalized_weights(
    c_fn: Callable[[int, int], float],
    row_length: Callable[[int], int],
    *,
    flavor: str = "sum",
    growth_constant: Optional[float] = None,
    closed_weighted_sup: Optional[Callable[[float], float]] = None,
    n_max: Optional[int] = None,
) -> WeightScheme:
    """a(n,i) = c(n,i)/A_n with A_n = sum c, or c(n,i)^2/A_n with A_n = sum c^2."""
    if flavor not in ("sum", "sum-sq"):
        raise ValueError("flavor must be 'sum' or 'sum-sq'")
    norms: dict[int, float] = {}

    def a_norm(n: int) -> float:
        if n not in norms:
            k = row_length(n)
            if flavor == "sum":
                norms[n] = math.fsum(c_fn(n, i) for i in range(1, k + 1))
            else:
                norms[n] = math.fsum(c_fn(n, i) ** 2 for i in range(1, k + 1))
            if not norms[n] > 0.0:
                raise ValueError(f"A_{n} = {norms[n]} must be positive")
            if growth_constant is not None and norms[n] > growth_constant * n:
                raise ValueError(
                    f"A_{n} = {norms[n]} exceeds declared bound {growth_constant}*n"
                )
        return norms[n]

    def a_fn(n: int, i: int) -> float:
        c = c_fn(n, i)
        return (c if flavor == "sum" else c * c) / a_norm(n)

    return WeightScheme(
        kind="c-normalized",
        row_length=row_length,
        a_fn=a_fn,
        closed_weighted_sup=closed_weighted_sup,
        n_max=n_max,
        flavor=flavor,
        growth_constant=growth_constant,
    )


def row_weight_sum(w: WeightScheme, n: int) -> float:
    """Sum of a(n, i) over the row; RowRangeError beyond a declared range."""
    return w.row_sum(n)


# ---------------------------------------------------------------------------
# Normalizing sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizingSequence:
    """Positive nondecreasing b_n with the convention b_0 = 0.

    ``fn`` may return exact ints for int input (used by closed-form checks far
    beyond float range); the tag records a closed form when one applies.
    """

    fn: Callable[[int], float]
    tag: str = ""

    def eval(self, n):
        if n == 0:
            return 0
        if n < 0:
            raise ValueError("normalizing sequence index must be >= 0")
        return self.fn(n)

    __call__ = eval

    def check_nondecreasing(self, upto: int, step: int = 1) -> None:
        prev = 0
        for n in range(1, upto + 1, step):
            cur = self.fn(n)
            if cur < prev:
                raise ValueError(f"b_{n} = {cur} decreases below {prev}")
            prev = cur


def power_norming(
    p: float,
    conj=None,
    *,
    conj_of_power: bool = True,
) -> NormalizingSequence:
    """b_n = n^(1/p) * Lt(n^(1/p)) (default) or n^(1/p) * Lt(n)^(1/p).

    With a trivial conjugate and integral 1/p the map is integer-exact.
    """
    inv = 1.0 / p
    trivial = conj is None or getattr(conj, "family", None) == "constant"
    if trivial and float(inv).is_integer():
        e = int(inv)

        def int_fn(n):
            return n**e

        return NormalizingSequence(fn=int_fn, tag=f"power:p={p}")

    def fn(n):
        base = float(n) ** inv
        if trivial:
            return base
        if conj_of_power:
            return base * conj.eval(base)
        return base * conj.eval(float(n)) ** inv

    return NormalizingSequence(fn=fn, tag=f"power:p={p}")


def explicit_norming(values: Sequence[float]) -> NormalizingSequence:
    vals = [float(v) for v in values]

    def fn(n):
        if n > len(vals):
            raise RowRangeError(f"b_{n} beyond declared table of {len(vals)}")
        return vals[n - 1]

    return NormalizingSequence(fn=fn, tag="explicit")


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def rng_for(seed: int, *key: int) -> Generator:
    """Counter-based generator for a (seed, key...) address, order-independent."""
    return Generator(Philox(SeedSequence(entropy=seed, spawn_key=tuple(key))))


def _row_uniforms(arr: ArraySpec, k: int, rng: Generator) -> np.ndarray:
    dep = arr.dependence
    if isinstance(dep, Independent):
        return rng.random(k)
    if isinstance(dep, GaussianNA):
        w = rng.standard_normal(k + 1)
        th = dep.theta()
        z = (w[:k] + th * w[1:]) / math.sqrt(1.0 + th * th)
        return ndtr(z)
    raise SamplingError(f"unsupported dependence {dep!r}")


def sample_row_with(arr: ArraySpec, n: int, rng: Generator) -> np.ndarray:
    """Draw one realization of row n using the supplied generator."""
    k = arr.k(n)
    u = _row_uniforms(arr, k, rng)
    out = np.empty(k, dtype=float)
    pos = 0
    for g in arr.row_groups(n):
        q = quantile_of(g.dist)
        out[pos : pos + g.count] = q(u[pos : pos + g.count])
        pos += g.count
    return out


def sample_row(arr: ArraySpec, n: int, seed: int) -> np.ndarray:
    """Deterministic row draw: same (seed, n) always gives the same vector."""
    return sample_row_with(arr, n, rng_for(seed, n))
