"""Named worked examples with exact closed forms and expected verdicts.

Each fixture packages an array, its weight scheme(s), a norming sequence, and
closed-form row sups where they exist, so every other module can be checked
against exact values.  The closed forms accept Python ints and then stay
exact (returning ``Fraction`` tails where needed), which lets the limit gates
run on grids far beyond float range when a condition decays only at a 1/log
rate.

The four names:

* ``example-2.1``         - two-block array (half +-1 cells, half +-n cells)
  whose row-averaged tails never fall below 1/2, yet whose two-block weights
  admit a dominating distribution.
* ``example-4.1``         - sequence with rare spikes of size (n+1)^(1/p) at
  rate 1/(n log_nu n): bounded weighted moments, divergent exceedance series.
* ``wlln-counterexample`` - rows of +-1 cells plus one deterministic-magnitude
  cell that carries all the weight; the weighted count-tail limit fails and
  the weighted maximal partial sum blows up like n / log(n)^(1/p).
* ``x2m-example``         - +-1 sequence with spikes at powers of two; no
  single dominating variable exists but the Cesaro construction works and the
  weak law holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .errors import SpecError
from .model import (
    ArraySpec,
    CellGroup,
    NormalizingSequence,
    SymmetricPM1,
    SymmetricTwoPoint,
    TailFunction,
    WeightScheme,
    explicit_weights,
    power_norming,
    sequence_array,
    uniform_weights,
)
from .svf import clog2

FIXTURE_NAMES = (
    "example-2.1",
    "example-4.1",
    "wlln-counterexample",
    "x2m-example",
)


@dataclass(frozen=True)
class Fixture:
    name: str
    arr: ArraySpec
    weights: WeightScheme
    p: float
    nu: int
    b: NormalizingSequence
    description: str
    c_fn: Optional[Callable[[int, int], float]] = None
    closed: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    ui_grid: tuple = ()
    kg_grid: tuple = ()

    def cesaro_tail(self) -> TailFunction:
        """Tail of the canonical Cesaro dominating variable (closed form)."""
        fn = self.closed["cesaro_sup"]
        return TailFunction(
            fn=fn, kind="piecewise", knot_fn=self.closed.get("cesaro_knots")
        )


# ---------------------------------------------------------------------------
# example-2.1: two-block array
# ---------------------------------------------------------------------------


def _build_example_21(p: float, nu: int) -> Fixture:
    pm1 = SymmetricPM1()

    def groups(n: int) -> tuple[CellGroup, ...]:
        if n == 1:
            return (CellGroup(1, SymmetricTwoPoint(1.0, 1.0)),)
        m = n // 2
        return (
            CellGroup(m, pm1),
            CellGroup(n - m, SymmetricTwoPoint(float(n), 1.0)),
        )

    def cesaro_sup(x) -> float:
        x = float(x)
        if x < 1.0:
            return 1.0
        n0 = int(math.floor(x)) + 1
        nstar = n0 if n0 % 2 == 1 else n0 + 1
        return (nstar + 1) / (2.0 * nstar)

    def weighted_sup(x) -> float:
        x = float(x)
        if x < 1.0:
            return 1.25
        n0 = int(math.floor(x)) + 1
        return math.ceil(n0 / 2) / (n0 * n0)

    def a_fn(n: int, i: int) -> float:
        if n == 1:
            return 1.0
        m = n // 2
        return 1.0 / m if i <= m else 1.0 / (n * n)

    def range_sum(n: int, lo: int, hi: int) -> float:
        if n == 1:
            return 1.0 if lo <= 1 <= hi else 0.0
        m = n // 2
        c1 = max(0, min(hi, m) - lo + 1)
        c2 = max(0, hi - max(lo, m + 1) + 1)
        return c1 / m + c2 / (n * n)

    def odd_knots(lo: float, hi: float) -> tuple[float, ...]:
        start = int(math.floor(lo)) + 1
        if hi - lo > 130:
            return ()
        return tuple(float(k) for k in range(start, int(math.ceil(hi)) + 1) if lo < k < hi)

    def big_cell_row_value(n: int) -> float:
        # sup candidate f(n) = ceil(n/2) * n^(p-2) for the transformed ui sum
        return math.ceil(n / 2) * float(n) ** (p - 2.0)

    def ui_weighted(a: float) -> float:
        a = float(a)
        if a < 1.0:
            return 1.0 + big_cell_row_value(3)
        n0 = int(math.floor(a ** (1.0 / p))) + 1
        nstar = n0 if n0 % 2 == 1 else n0 + 1
        return max(big_cell_row_value(n0), big_cell_row_value(nstar))

    arr = ArraySpec(
        row_length=lambda n: n,
        groups_fn=groups,
        mean_zero=True,
        label="example-2.1",
        closed_cesaro_sup=cesaro_sup,
    )
    weights = explicit_weights(
        a_fn,
        lambda n: n,
        range_sum_fn=range_sum,
        closed_weighted_sup=weighted_sup,
    )
    return Fixture(
        name="example-2.1",
        arr=arr,
        weights=weights,
        p=p,
        nu=nu,
        b=power_norming(p),
        description="two-block array: Cesaro domination impossible, weighted possible",
        closed={
            "cesaro_sup": cesaro_sup,
            "weighted_sup": weighted_sup,
            "cesaro_knots": odd_knots,
            "weighted_knots": odd_knots,
            "ui_weighted_pow_p": ui_weighted,
        },
        expected={
            "cesaro-domination": "invalid",
            "weighted-domination": "valid",
            "c0": 1.25,
            "chandra-ghosal": "fails",
        },
        ui_grid=tuple(2.0**j for j in range(0, 41, 2)),
        kg_grid=tuple(2**j for j in range(0, 41, 2)),
    )


# ---------------------------------------------------------------------------
# example-4.1: spikes of size (n+1)^(1/p) at rate 1/(n log_nu n)
# ---------------------------------------------------------------------------


def _build_example_41(p: float, nu: int) -> Fixture:
    from .svf import log_nu as _log_nu

    def cell(i: int) -> SymmetricTwoPoint:
        return SymmetricTwoPoint(
            magnitude=float(i + 1) ** (1.0 / p), prob=1.0 / (i * _log_nu(i, nu))
        )

    arr = sequence_array(cell, label="example-4.1")
    return Fixture(
        name="example-4.1",
        arr=arr,
        weights=uniform_weights(),
        p=p,
        nu=nu,
        b=power_norming(p),
        description="rare-spike sequence: bounded weighted moments, divergent series",
        expected={
            "bounded-moment": "finite",
            "series": "fails",
            "b-regularity-wlln": "holds" if p < 1.0 else "fails",
        },
        ui_grid=tuple(2.0**j for j in range(0, 41, 2)),
        kg_grid=tuple(2**j for j in range(0, 41, 2)),
    )


# ---------------------------------------------------------------------------
# wlln-counterexample: one dominant deterministic-magnitude cell per row
# ---------------------------------------------------------------------------


def _wlln_big_magnitude(n: int, p: float) -> float:
    return (n / clog2(n)) ** (1.0 / p)


def _first_row_ratio_exceeding(a: float) -> float:
    """min{n >= 1 : n / log2(max(2,n)) > a}; exact walk small, fixed point large.

    The return value may be a float approximation of the (astronomically
    large) integer index; the downstream use is only through log2 of it.
    """
    for n in range(1, 9):
        if n / clog2(n) > a:
            return float(n)
    if a <= 2.0**40:
        lo, hi = 8, 16
        while hi / clog2(hi) <= a:
            hi *= 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if mid / clog2(mid) <= a:
                lo = mid
            else:
                hi = mid
        return float(hi)
    # n ~ a * log2(n): solve s = log2(a) + log2(s) for s = log2(n)
    s = math.log2(a) + 1.0
    for _ in range(60):
        s = math.log2(a) + math.log2(s)
    return 2.0**s


def _build_wlln_counterexample(p: float, nu: int) -> Fixture:
    pm1 = SymmetricPM1()

    def groups(n: int) -> tuple[CellGroup, ...]:
        big = SymmetricTwoPoint(_wlln_big_magnitude(n, p), 1.0)
        if n == 1:
            return (CellGroup(1, big),)
        return (CellGroup(n - 1, pm1), CellGroup(1, big))

    def cesaro_sup(x) -> float:
        x = float(x)
        if x < 1.0:
            return 1.0
        n = _first_row_ratio_exceeding(x**p)
        return 1.0 / n

    def weighted_sup(x):
        # magnitudes are unbounded, so some row's dominant cell always exceeds x
        if isinstance(x, int):
            return 1
        return 1.0

    def a_fn(n: int, i: int) -> float:
        return 1.0 if i == n else 0.0

    def range_sum(n: int, lo: int, hi: int) -> float:
        return 1.0 if lo <= n <= hi else 0.0

    def c_fn(n: int, i: int) -> float:
        return float(n) if i == n else 0.0

    def ui_cesaro(a: float) -> float:
        a = float(a)
        if a < 1.0:
            xi2 = 2.0 / clog2(2)
            return max(1.0, 0.5 + xi2 / 2.0, 2.0 / 3.0 + _row_spike_term(3, p))
        n = _first_row_ratio_exceeding(a)
        return 1.0 / clog2(n)

    def _row_spike_term(n: int, pp: float) -> float:
        return (n / clog2(n)) / n

    def mag_knots(lo: float, hi: float) -> tuple[float, ...]:
        start = _first_row_ratio_exceeding(max(lo, 1.0) ** p)
        if start > 1e6:  # steps too dense to enumerate: treat as smooth
            return ()
        out = []
        n = max(1, int(start) - 8)
        while True:
            m = _wlln_big_magnitude(n, p)
            if m >= hi and n > 8:  # magnitudes are monotone beyond the early dips
                break
            if lo < m < hi:
                out.append(m)
            n += 1
            if len(out) > 130 or n - start > 2000:
                return ()
        return tuple(sorted(set(out)))

    arr = ArraySpec(
        row_length=lambda n: n,
        groups_fn=groups,
        mean_zero=True,
        label="wlln-counterexample",
        closed_cesaro_sup=cesaro_sup,
    )
    weights = explicit_weights(
        a_fn,
        lambda n: n,
        range_sum_fn=range_sum,
        closed_weighted_sup=weighted_sup,
    )
    return Fixture(
        name="wlln-counterexample",
        arr=arr,
        weights=weights,
        p=p,
        nu=nu,
        b=power_norming(p),
        description="dominant single-cell rows: Cesaro UI holds, weighted count-tail fails",
        c_fn=c_fn,
        closed={
            "cesaro_sup": cesaro_sup,
            "weighted_sup": weighted_sup,
            "cesaro_knots": mag_knots,
            "ui_cesaro_pow_p": ui_cesaro,
        },
        expected={
            "cesaro-domination": "valid",
            "weighted-domination": "invalid",
            "ui": "decays",
            "kG": "holds",
            "kG-hat": "fails",
        },
        ui_grid=tuple(2.0**j for j in range(0, 1014, 4)),
        kg_grid=tuple(2**j for j in range(0, 41, 1)),
    )


# ---------------------------------------------------------------------------
# x2m-example: +-1 off powers of two, spikes (2^m / m)^(1/p) at n = 2^m
# ---------------------------------------------------------------------------


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


def _x2m_spike_base(n: int) -> tuple[int, int]:
    m = n.bit_length() - 1
    return (2**m, m)


def _first_spike_index_exceeding(a) -> int:
    """min{m >= 1 : 2^m / m > a}, exact for int a of any size."""
    if isinstance(a, int):
        m, pw = 1, 2
        while pw <= a * m:
            m += 1
            pw *= 2
        return m
    if a < 2.0**1000:
        m, pw = 1, 2.0
        while pw <= a * m:
            m += 1
            pw *= 2.0
        return m
    s = math.log2(a) + 1.0
    for _ in range(60):
        s = math.log2(a) + math.log2(s)
    return int(math.ceil(s))


def _build_x2m(p: float, nu: int) -> Fixture:
    pm1 = SymmetricPM1()
    half = p == 0.5

    def cell(i: int) -> object:
        if _is_power_of_two(i):
            base, m = _x2m_spike_base(i)
            return SymmetricTwoPoint((base / m) ** (1.0 / p), 1.0)
        return pm1

    def first_exponent_for(xp) -> int:
        """min{n >= 1 : 2^n / n > x^p} given x^p (exact when xp is an int)."""
        return _first_spike_index_exceeding(xp)

    def cesaro_sup(x):
        if isinstance(x, int):
            if x < 1:
                return 1
            if half:
                # 2^n / n > sqrt(x)  <=>  4^n > x * n^2, exactly in integers
                n, pw4 = 1, 4
                while pw4 <= x * n * n:
                    n += 1
                    pw4 *= 4
                return Fraction(1, 2**n)
        elif x < 1.0:
            return 1.0
        xp_log = p * math.log2(x)  # safe for ints of any size
        if xp_log <= 40.0:
            n = first_exponent_for(2.0**xp_log)
        else:
            s = xp_log + 1.0
            for _ in range(60):
                s = xp_log + math.log2(s)
            n = max(2, int(math.ceil(s)))
            while n > 2 and (n - 1) - math.log2(n - 1) > xp_log:
                n -= 1
            while n - math.log2(n) <= xp_log:
                n += 1
        return 2.0 ** (-n) if n < 1060 else 0.0

    def spike_knots(lo: float, hi: float) -> tuple[float, ...]:
        out = []
        m = 1
        while True:
            v = (2.0**m / m) ** (1.0 / p)
            if v >= hi:
                break
            if v > lo:
                out.append(v)
            m += 1
            if m > 4000 or len(out) > 130:
                return ()
        return tuple(out)

    def ui_cesaro(a) -> float:
        """sup_n (1/n) sum of spike masses above level a, exact for int a."""
        if not isinstance(a, int):
            a = float(a)
        if (a < 1) if isinstance(a, int) else (a < 1.0):
            m_a = 1
            base = 1.0  # the +-1 cells contribute fully below level 1
        else:
            m_a = _first_spike_index_exceeding(a)
            base = 0.0
        best = 0.0
        for cap in range(m_a, m_a + 81):
            acc = 0.0
            for d in range(0, min(cap - m_a, 60) + 1):
                acc += 2.0 ** (-d) / (cap - d)
            best = max(best, acc)
        return base + best

    arr = sequence_array(cell, label="x2m-example", closed_cesaro_sup=cesaro_sup)
    return Fixture(
        name="x2m-example",
        arr=arr,
        weights=uniform_weights(),
        p=p,
        nu=nu,
        b=power_norming(p),
        description="power-of-two spikes: no dominating variable, Cesaro works, WLLN holds",
        closed={
            "cesaro_sup": cesaro_sup,
            "cesaro_knots": spike_knots,
            "ui_cesaro_pow_p": ui_cesaro,
        },
        expected={
            "cesaro-domination": "valid",
            "series": "holds",
            "chandra-ghosal": "fails",
            "kG": "holds",
            "ui": "decays",
        },
        ui_grid=tuple(2**j for j in range(0, 4201, 25)),
        kg_grid=tuple(2**j for j in range(0, 1301, 10)),
    )


# ---------------------------------------------------------------------------
# Loader
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "example-2.1": (0.5, 1),
    "example-4.1": (0.5, 1),
    "wlln-counterexample": (0.5, 1),
    "x2m-example": (0.5, 1),
}

_BUILDERS = {
    "example-2.1": _build_example_21,
    "example-4.1": _build_example_41,
    "wlln-counterexample": _build_wlln_counterexample,
    "x2m-example": _build_x2m,
}


def load(name: str, *, p: Optional[float] = None, nu: Optional[int] = None) -> Fixture:
    """Build a named fixture; p and nu may override the defaults (p=1/2, nu=1)."""
    if name not in _BUILDERS:
        raise SpecError(
            f"unknown fixture {name!r}; expected one of {', '.join(FIXTURE_NAMES)}"
        )
    dp, dn = _DEFAULTS[name]
    pp = dp if p is None else float(p)
    nn = dn if nu is None else int(nu)
    if not (0.0 < pp < 2.0):
        raise SpecError(f"fixture p must lie in (0, 2), got {pp}")
    if nn < 1:
        raise SpecError(f"fixture nu must be a positive integer, got {nn}")
    return _BUILDERS[name](pp, nn)
