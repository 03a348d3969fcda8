"""Monte Carlo engine for partial-sum laws of large numbers.

Replication randomness is addressed, not streamed: the generator for one
replication derives from (master seed, row n, replication index) through
counter-based Philox streams, and results land in preallocated slots indexed
by replication.  Reports are therefore bitwise identical across runs, thread
counts, and scheduling orders.

Estimates are exceedance frequencies of max_j |sum_{i<=j} c_i X_i| / b_n over
epsilon levels, with binomial standard errors.  Almost-sure statements are
approximated by a labeled proxy: the per-path suffix supremum of the same
statistic over a sampled row grid.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import digamma

from .model import (
    ArraySpec,
    NormalizingSequence,
    SymmetricPM1,
    SymmetricTwoPoint,
    rng_for,
    sample_row_with,
)
from .moments import clamped_mean, clamped_square_mean, truncated_mean
from .svf import SlowlyVaryingSpec

EULER_GAMMA = 0.5772156649015328606


def harmonic(n: int) -> float:
    """H_n = sum_{i<=n} 1/i via the digamma identity (float-exact for our use)."""
    return float(digamma(n + 1)) + EULER_GAMMA


# ---------------------------------------------------------------------------
# Elementwise truncation schemes
# ---------------------------------------------------------------------------


def truncate(values: np.ndarray, flavor: str, level: float) -> np.ndarray:
    """Apply one truncation flavor at the given positive level.

    ``clamp`` caps magnitudes preserving sign; ``zero`` empties exceedances;
    ``none`` returns the input unchanged.
    """
    if flavor == "none":
        return np.asarray(values, dtype=float)
    if not level > 0.0:
        raise ValueError("truncation level must be positive")
    v = np.asarray(values, dtype=float)
    if flavor == "clamp":
        return np.clip(v, -level, level)
    if flavor == "zero":
        return np.where(np.abs(v) <= level, v, 0.0)
    raise ValueError(f"unknown truncation flavor {flavor!r}")


def max_partial_sums(row: np.ndarray, weights: Optional[np.ndarray] = None) -> float:
    """max over prefixes of |weighted prefix sum|."""
    r = np.asarray(row, dtype=float)
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != r.shape:
            raise ValueError(f"weights shape {w.shape} != row shape {r.shape}")
        r = w * r
    return float(np.max(np.abs(np.cumsum(r))))


# ---------------------------------------------------------------------------
# Plans and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimPlan:
    """One simulation request; everything needed to reproduce it bitwise."""

    arr: ArraySpec
    b: NormalizingSequence
    rows: tuple[int, ...]
    reps: int = 2000
    eps: tuple[float, ...] = (0.1, 0.5, 1.0)
    seed: int = 0
    c: Optional[Callable[[int, int], float]] = None
    truncation: str = "none"  # none | clamp | clamp-at-b | zero-beyond-b
    truncation_level: float = 0.0
    center_truncated: bool = False

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if any(e <= 0.0 for e in self.eps):
            raise ValueError("epsilon levels must be positive")
        if list(self.rows) != sorted(self.rows) or len(self.rows) == 0:
            raise ValueError("rows must be a nonempty ascending sequence")
        if self.truncation == "clamp" and not self.truncation_level > 0.0:
            raise ValueError("clamp truncation needs a positive level")


@dataclass(frozen=True)
class RowEstimate:
    n: int
    epsilon: float
    p_hat: float
    se: float
    reps: int


@dataclass(frozen=True)
class SimReport:
    mode: str
    seed: int
    entries: tuple[RowEstimate, ...]
    ratio_means: tuple[tuple[int, float], ...]
    series: Optional[dict] = None
    extras: dict = field(default_factory=dict)

    def p_hat(self, n: int, epsilon: float) -> float:
        for e in self.entries:
            if e.n == n and e.epsilon == epsilon:
                return e.p_hat
        raise KeyError((n, epsilon))

    def to_csv_str(self) -> str:
        lines = ["n,epsilon,p_hat,se,R,seed"]
        for e in self.entries:
            lines.append(
                f"{e.n},{e.epsilon!r},{e.p_hat!r},{e.se!r},{e.reps},{self.seed}"
            )
        return "\n".join(lines) + "\n"

    def to_json_obj(self) -> dict:
        out = {
            "mode": self.mode,
            "seed": self.seed,
            "entries": [
                {
                    "n": e.n,
                    "epsilon": e.epsilon,
                    "p_hat": e.p_hat,
                    "se": e.se,
                    "R": e.reps,
                }
                for e in self.entries
            ],
            "ratio_means": [{"n": n, "mean": m} for n, m in self.ratio_means],
        }
        if self.series is not None:
            out["series"] = self.series
        out.update(self.extras)
        return out


# ---------------------------------------------------------------------------
# Fast sequence sampling
# ---------------------------------------------------------------------------

# keyed by the array object itself: id()-based keys could be reused after gc
_profile_cache: dict[tuple[ArraySpec, int], Optional[tuple[np.ndarray, np.ndarray]]] = {}


def two_point_profile(arr: ArraySpec, upto: int):
    """(magnitude, prob) arrays for sequence arrays made of two-point cells."""
    if not arr.is_sequence:
        return None
    key = (arr, upto)
    if key in _profile_cache:
        return _profile_cache[key]
    if len(_profile_cache) > 128:
        _profile_cache.clear()
    mags = np.empty(upto)
    probs = np.empty(upto)
    profile = None
    for i in range(1, upto + 1):
        d = arr.sequence_cell(i)
        if isinstance(d, SymmetricPM1):
            mags[i - 1], probs[i - 1] = 1.0, 1.0
        elif isinstance(d, SymmetricTwoPoint):
            mags[i - 1], probs[i - 1] = d.magnitude, d.prob
        else:
            break
    else:
        profile = (mags, probs)
    _profile_cache[key] = profile
    return profile


def _draw_row(arr: ArraySpec, n: int, rng, profile) -> np.ndarray:
    if profile is not None:
        mags, probs = profile
        u = rng.random(n)
        half = probs[:n] / 2.0
        return np.where(
            u < half, -mags[:n], np.where(u >= 1.0 - half, mags[:n], 0.0)
        )
    return sample_row_with(arr, n, rng)


def sequence_paths(arr: ArraySpec, length: int, reps: int, seed: int):
    """Yield (rep, path) realizations X_1..X_length of a sequence array."""
    if not arr.is_sequence:
        raise ValueError("paths need a sequence-shaped array")
    profile = two_point_profile(arr, length)
    for rep in range(reps):
        yield rep, _draw_row(arr, length, rng_for(seed, length, rep), profile)


# ---------------------------------------------------------------------------
# WLLN exceedance estimates
# ---------------------------------------------------------------------------


def _row_centers(arr: ArraySpec, n: int, level: float) -> Optional[np.ndarray]:
    """Exact per-cell E(X 1(|X| <= level)); None when identically zero."""
    out = np.zeros(arr.k(n))
    pos = 0
    nonzero = False
    for g in arr.row_groups(n):
        m = truncated_mean(g.dist, level)
        if m != 0.0:
            out[pos : pos + g.count] = m
            nonzero = True
        pos += g.count
    return out if nonzero else None


def _weights_vector(plan: SimPlan, n: int) -> Optional[np.ndarray]:
    if plan.c is None:
        return None
    k = plan.arr.k(n)
    return np.fromiter((plan.c(n, i) for i in range(1, k + 1)), dtype=float, count=k)


def _estimate_row(plan: SimPlan, n: int, profile) -> tuple[np.ndarray, float]:
    """Exceedance counts per epsilon and mean normalized max for one row."""
    bn = float(plan.b(n))
    eps_arr = np.asarray(plan.eps)
    cvec = _weights_vector(plan, n)
    if plan.truncation == "clamp":
        flavor, level = "clamp", plan.truncation_level
    elif plan.truncation == "clamp-at-b":
        flavor, level = "clamp", bn
    elif plan.truncation == "zero-beyond-b":
        flavor, level = "zero", bn
    else:
        flavor, level = "none", 0.0
    centers = _row_centers(plan.arr, n, bn) if plan.center_truncated else None
    counts = np.zeros(len(eps_arr), dtype=np.int64)
    stat_sum = 0.0
    for rep in range(plan.reps):
        row = _draw_row(plan.arr, n, rng_for(plan.seed, n, rep), profile)
        if flavor != "none":
            row = truncate(row, flavor, level)
        if centers is not None:
            row = row - centers
        stat = max_partial_sums(row, cvec) / bn
        stat_sum += stat
        counts += stat > eps_arr
    return counts, stat_sum / plan.reps


def _binomial_se(p_hat: float, reps: int) -> float:
    return math.sqrt(p_hat * (1.0 - p_hat) / reps)


def wlln_estimate(plan: SimPlan, threads: int = 1) -> SimReport:
    """Exceedance frequencies of the normalized maximal partial sum per row."""
    profile = two_point_profile(plan.arr, plan.rows[-1])

    def task(n: int):
        return _estimate_row(plan, n, profile)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, plan.rows))
    else:
        results = [task(n) for n in plan.rows]
    entries = []
    ratio_means = []
    for n, (counts, mean_stat) in zip(plan.rows, results):
        ratio_means.append((n, float(mean_stat)))
        for eps, cnt in zip(plan.eps, counts):
            p_hat = float(cnt) / plan.reps
            entries.append(
                RowEstimate(n, eps, p_hat, _binomial_se(p_hat, plan.reps), plan.reps)
            )
    return SimReport(
        mode="wlln",
        seed=plan.seed,
        entries=tuple(entries),
        ratio_means=tuple(ratio_means),
    )


# ---------------------------------------------------------------------------
# Complete-convergence series estimate
# ---------------------------------------------------------------------------


def slln_series_estimate(
    plan: SimPlan,
    sv: Optional[SlowlyVaryingSpec] = None,
    p: float = 1.0,
    threads: int = 1,
) -> SimReport:
    """Estimate sum_n n^-1 P(max_k |S_k| > eps n^(1/p) Lt(n^(1/p))) blockwise.

    Exceedance probabilities are sampled on the plan's row grid and the
    harmonic mass between consecutive sampled rows is weighted by the
    trapezoid of neighbouring estimates.  The head below the first sampled row
    uses the first estimate, flat.
    """
    conj = sv.conjugate() if sv is not None else None
    inv = 1.0 / p

    def b_fn(n):
        base = float(n) ** inv
        return base * conj.eval(base) if conj is not None else base

    b = NormalizingSequence(fn=b_fn, tag=f"series:p={p}")
    base_plan = SimPlan(
        arr=plan.arr,
        b=b,
        rows=plan.rows,
        reps=plan.reps,
        eps=plan.eps,
        seed=plan.seed,
        c=plan.c,
        truncation=plan.truncation,
        truncation_level=plan.truncation_level,
        center_truncated=plan.center_truncated,
    )
    rep = wlln_estimate(base_plan, threads=threads)
    rows = list(plan.rows)
    series: dict = {"eps": list(plan.eps), "per_eps": []}
    for eps in plan.eps:
        phats = [rep.p_hat(n, eps) for n in rows]
        contributions = [harmonic(rows[0]) * phats[0]]
        for j in range(len(rows) - 1):
            mass = harmonic(rows[j + 1]) - harmonic(rows[j])
            contributions.append(mass * 0.5 * (phats[j] + phats[j + 1]))
        partials = [float(x) for x in np.cumsum(contributions)]
        tail3 = contributions[-3:]
        if contributions[-1] <= 1e-6:
            diagnostic = "bounded"
        elif (
            len(tail3) == 3
            and all(b2 >= a2 - 1e-12 for a2, b2 in zip(tail3[:-1], tail3[1:]))
            and tail3[-1] > 1e-3
        ):
            diagnostic = "unbounded"
        else:
            diagnostic = "indeterminate"
        series["per_eps"].append(
            {
                "epsilon": eps,
                "contributions": contributions,
                "partials": partials,
                "diagnostic": diagnostic,
            }
        )
    return SimReport(
        mode="slln-series",
        seed=plan.seed,
        entries=rep.entries,
        ratio_means=rep.ratio_means,
        series=series,
    )


# ---------------------------------------------------------------------------
# Path proxy for almost-sure convergence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathReport:
    """Tail-sup proxy: this is a sampled-grid stand-in for an a.s. limit."""

    rows: tuple[int, ...]
    eps: tuple[float, ...]
    seed: int
    reps: int
    stats: np.ndarray  # (reps, len(rows)) normalized max partial sums
    suffix_sups: np.ndarray  # (reps, len(rows)) sup over sampled m >= rows[j]

    def fraction_below(self, n: int, epsilon: float) -> float:
        j = self.rows.index(n)
        return float(np.mean(self.suffix_sups[:, j] < epsilon))


def slln_path_diagnostic(plan: SimPlan) -> PathReport:
    """Per-path suffix sup of max_j|S_j|/b_m over the sampled row grid."""
    if not plan.arr.is_sequence:
        raise ValueError("path diagnostic needs a sequence-shaped array")
    rows = plan.rows
    nmax = rows[-1]
    bvals = np.array([float(plan.b(m)) for m in rows])
    stats = np.empty((plan.reps, len(rows)))
    for rep, path in sequence_paths(plan.arr, nmax, plan.reps, plan.seed):
        run_max = np.maximum.accumulate(np.abs(np.cumsum(path)))
        stats[rep] = run_max[np.asarray(rows) - 1] / bvals
    suffix = np.flip(np.maximum.accumulate(np.flip(stats, axis=1), axis=1), axis=1)
    return PathReport(
        rows=tuple(rows),
        eps=tuple(plan.eps),
        seed=plan.seed,
        reps=plan.reps,
        stats=stats,
        suffix_sups=suffix,
    )


# ---------------------------------------------------------------------------
# Maximal-inequality constant probe
# ---------------------------------------------------------------------------


def condition_h_probe(
    arr: ArraySpec, a: float, n: int, reps: int, seed: int
) -> float:
    """Monte Carlo estimate of the maximal-inequality constant for one row.

    Ratio of E(max_k |sum_{i<=k} (clamped X_i - E clamped X_i)|)^2 to
    sum_i E(clamped X_i)^2 at clamp level ``a``.
    """
    k = arr.k(n)
    rhs = 0.0
    centers = np.zeros(k)
    pos = 0
    for g in arr.row_groups(n):
        rhs += g.count * clamped_square_mean(g.dist, a)
        m = clamped_mean(g.dist, a)
        if m != 0.0:
            centers[pos : pos + g.count] = m
        pos += g.count
    if rhs == 0.0:
        raise ValueError("all cells degenerate at 0: probe ratio undefined")
    profile = two_point_profile(arr, n) if arr.is_sequence else None
    acc = 0.0
    for rep in range(reps):
        row = _draw_row(arr, n, rng_for(seed, n, rep), profile)
        clamped = np.clip(row, -a, a) - centers
        acc += max_partial_sums(clamped) ** 2
    return (acc / reps) / rhs
