"""Hypothesis checkers for the limit theorems: integrals, series, ratios, limits.

Finiteness of an improper integral or series is only semi-decidable at desk
scale, so every checker returns a three-way verdict with the numeric evidence
and the exact rule that fired:

* ``holds``  - the stated convergence rule certified the value;
* ``fails``  - the stated divergence/growth rule fired;
* ``inconclusive`` - neither rule fired within the scan budget.

The rules are deterministic: same inputs, same verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .model import ArraySpec, NormalizingSequence, TailFunction, tail_of
from .numerics import (
    BLOCK_TOL,
    DECAY_EPS,
    decay_gate,
    finite_integral,
    fitted_block_slope,
    growth_gate,
    nonincreasing,
    slope_certified_decay,
)
from .svf import SlowlyVaryingSpec

FLAT_SLOPE_TOL = 0.15
FLAT_RUN = 10


@dataclass(frozen=True)
class ConditionVerdict:
    name: str
    verdict: str  # holds | fails | inconclusive
    rule: str
    evidence: dict = field(default_factory=dict)
    value: Optional[float] = None
    notes: tuple[str, ...] = ()

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    @property
    def fails(self) -> bool:
        return self.verdict == "fails"

    def to_json_obj(self) -> dict:
        out = {
            "name": self.name,
            "verdict": self.verdict,
            "rule": self.rule,
            "value": self.value,
            "notes": list(self.notes),
        }
        for k, v in self.evidence.items():
            if isinstance(v, np.ndarray):
                v = v.tolist()
            out[k] = v
        return out


def _as_tail_callable(source) -> tuple[Callable[[float], float], Callable]:
    """Accept a TailFunction, a DominationReport, or a plain callable."""
    if isinstance(source, TailFunction):
        return source.fn, source.knots_in
    if hasattr(source, "sup_fn") and source.sup_fn is not None:
        return source.sup_fn, lambda lo, hi: ()
    if callable(source):
        return source, lambda lo, hi: ()
    raise TypeError(f"cannot interpret {source!r} as a tail-like map")


# ---------------------------------------------------------------------------
# Integral condition
# ---------------------------------------------------------------------------


def chandra_ghosal_integral(
    source,
    p: float,
    sv: Optional[SlowlyVaryingSpec] = None,
    *,
    max_blocks: int = 60,
    block_tol: float = BLOCK_TOL,
    flat_tol: float = FLAT_SLOPE_TOL,
    flat_run: int = FLAT_RUN,
) -> ConditionVerdict:
    """Convergence verdict for the moment integral of x^(p-1) L^p(x) G(x).

    ``source`` supplies the nonincreasing map G (a tail function, a domination
    report, or a callable).  Dyadic blocks certify convergence via the block
    tolerance; a fitted local exponent of x^p L^p(x) G(x) at or above flat
    (block log-slope >= -flat_tol) over ``flat_run`` consecutive blocks
    certifies a divergent lower envelope.
    """
    g, knots_in = _as_tail_callable(source)
    notes = []
    if not (1.0 <= p < 2.0):
        notes.append(f"p={p} outside [1,2); checked anyway")

    def rest(t: float) -> float:
        out = g(t)
        if sv is not None:
            out *= sv.eval(t) ** p
        return float(out)

    # head on [0,1] with the substitution t = u^(1/p) removing the x^(p-1) factor
    head = finite_integral(lambda u: rest(u ** (1.0 / p)) / p, 0.0, 1.0)

    def integrand(t: float) -> float:
        return t ** (p - 1.0) * rest(t)

    blocks: list[float] = []
    total = head
    lo = 1.0
    verdict, rule = "inconclusive", "budget exhausted without certificate"
    for _ in range(max_blocks):
        hi = 2.0 * lo
        b = finite_integral(integrand, lo, hi, breakpoints=knots_in(lo, hi))
        blocks.append(b)
        total += b
        lo = hi
        if abs(b) < block_tol:
            verdict, rule = "holds", f"block below {block_tol}"
            break
        slope = fitted_block_slope(blocks, run=flat_run)
        if slope is not None and slope >= -flat_tol:
            verdict, rule = (
                "fails",
                f"fitted block slope {slope:.3f} >= -{flat_tol} over {flat_run} blocks",
            )
            break
    return ConditionVerdict(
        name="moment-integral",
        verdict=verdict,
        rule=rule,
        value=total if verdict == "holds" else None,
        evidence={"head": head, "blocks": blocks, "partial": total},
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# Series condition
# ---------------------------------------------------------------------------


def exceedance_series(arr: ArraySpec, p: float, N: int = 100_000) -> ConditionVerdict:
    """Partial sums of P(|X_n|^p > n) for a sequence-shaped array.

    Dyadic block increments play the role of the integral blocks: three
    consecutive increments below the block tolerance certify convergence, a
    flat fitted slope over the last windows certifies divergence.
    """
    if not arr.is_sequence:
        raise ValueError("series condition needs a sequence-shaped array")
    if arr.n_max is not None:
        N = min(N, arr.n_max)
    cell = arr.sequence_cell
    checkpoints: list[int] = []
    partials: list[float] = []
    increments: list[float] = []
    total = 0.0
    next_cp = 1
    last_cp_total = 0.0
    for n in range(1, N + 1):
        tail = tail_of(cell(n))
        total += tail.fn(float(n) ** (1.0 / p))
        if n == next_cp:
            checkpoints.append(n)
            partials.append(total)
            increments.append(total - last_cp_total)
            last_cp_total = total
            next_cp *= 2
    full_blocks = list(increments)
    if checkpoints[-1] != N:
        checkpoints.append(N)
        partials.append(total)
        increments.append(total - last_cp_total)  # trailing partial block

    verdict, rule = "inconclusive", "no certificate within N"
    if all(abs(d) < BLOCK_TOL for d in increments[-3:]):
        verdict, rule = "holds", f"last 3 block increments below {BLOCK_TOL}"
    else:
        # the slope fit uses only full dyadic blocks
        slope = fitted_block_slope(full_blocks, run=FLAT_RUN)
        if slope is not None and slope >= -FLAT_SLOPE_TOL:
            verdict, rule = (
                "fails",
                f"fitted increment slope {slope:.3f} >= -{FLAT_SLOPE_TOL}",
            )
    return ConditionVerdict(
        name="exceedance-series",
        verdict=verdict,
        rule=rule,
        value=total if verdict == "holds" else None,
        evidence={
            "N": N,
            "checkpoints": checkpoints,
            "partials": partials,
            "increments": increments,
            "partial_sum": total,
        },
    )


# ---------------------------------------------------------------------------
# Normalizing-sequence regularity (big-O ratio checks)
# ---------------------------------------------------------------------------


def _ratio_verdict(name: str, ratio: np.ndarray, N: int) -> ConditionVerdict:
    half = N // 2
    first_max = float(ratio[:half].max())
    last_max = float(ratio[half:].max())
    plateaued = last_max <= first_max * 1.01
    tail = ratio[half:]
    diffs = np.diff(tail)
    monotone_growth = bool(np.all(diffs >= -1e-12 * np.maximum(1.0, np.abs(tail[:-1]))))
    if plateaued:
        verdict, rule = "holds", "last-half ratio max within 1% of first-half max"
    elif monotone_growth and last_max > first_max * 1.01:
        verdict, rule = "fails", "ratio grows monotonically over the last half"
    else:
        verdict, rule = "inconclusive", "ratio neither plateaued nor monotone growing"
    sub = np.unique(np.geomspace(1, N, num=min(64, N)).astype(int))
    return ConditionVerdict(
        name=name,
        verdict=verdict,
        rule=rule,
        value=float(ratio.max()),
        evidence={
            "N": N,
            "max_ratio": float(ratio.max()),
            "argmax": int(np.argmax(ratio)) + 1,
            "first_half_max": first_max,
            "last_half_max": last_max,
            "checkpoints": sub.tolist(),
            "ratio_at_checkpoints": ratio[sub - 1].tolist(),
        },
    )


def _ratio_sequence(b: NormalizingSequence, N: int, *, squared: bool) -> np.ndarray:
    idx = np.arange(1, N + 1, dtype=float)
    bv = np.fromiter((float(b(n)) for n in range(1, N + 1)), dtype=float, count=N)
    if np.any(bv <= 0.0):
        raise ValueError("normalizing sequence must be positive")
    if np.any(np.diff(bv) < 0.0):
        raise ValueError("normalizing sequence must be nondecreasing")
    top = bv**2 if squared else bv
    csum = np.cumsum(top / idx**2)
    denom = top / idx
    return csum / denom


def norming_ratio_bound(b: NormalizingSequence, N: int = 100_000) -> ConditionVerdict:
    """Is sum_{i<=n} b_i/i^2 = O(b_n/n)?  Ratio plateau => holds."""
    return _ratio_verdict("norming-ratio", _ratio_sequence(b, N, squared=False), N)


def norming_ratio_bound_sq(b: NormalizingSequence, N: int = 100_000) -> ConditionVerdict:
    """Is sum_{i<=n} b_i^2/i^2 = O(b_n^2/n)?  Same machinery with b squared."""
    return _ratio_verdict("norming-ratio-sq", _ratio_sequence(b, N, squared=True), N)


# ---------------------------------------------------------------------------
# k * G(b_k) -> 0
# ---------------------------------------------------------------------------


def count_tail_vanishes(
    source,
    b: NormalizingSequence,
    k_grid: Sequence,
    *,
    eps: float = DECAY_EPS,
) -> ConditionVerdict:
    """Verdict for lim_k k * G(b_k) = 0 along the given k grid.

    Exact integer grids are honoured: when ``b`` maps ints to ints and G
    returns a Fraction, the products stay exact far beyond float range.
    ``holds`` fires on the eps decay gate, or on the power-law decay
    certificate for positive nonincreasing sequences whose true rate (e.g.
    1/log k) cannot cross eps on any float-feasible grid.
    """
    g, _ = _as_tail_callable(source)
    values = []
    for k in k_grid:
        bk = b(k)
        t = g(bk)
        if isinstance(t, Fraction) or (isinstance(k, int) and k > 2**53):
            values.append(float(Fraction(k) * (t if isinstance(t, Fraction) else Fraction(t))))
        else:
            values.append(float(k) * float(t))
    if decay_gate(values, eps=eps):
        verdict, rule = "holds", f"last 5 grid values below {eps} and nonincreasing"
    elif slope_certified_decay(values):
        verdict, rule = "holds", "power-law decay certificate (slope <= -1/2 in grid index)"
    elif growth_gate(values, eps=eps):
        verdict, rule = "fails", "sequence grows over the last half and ends above eps"
    else:
        verdict, rule = "inconclusive", "no decay or growth certificate fired"
    return ConditionVerdict(
        name="count-tail-limit",
        verdict=verdict,
        rule=rule,
        value=values[-1],
        evidence={"k_grid": [int(k) if isinstance(k, int) else float(k) for k in k_grid],
                  "values": values},
    )
