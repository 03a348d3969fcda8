import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llnlab import model, simulate
from llnlab.fixtures import load
from llnlab.model import power_norming
from llnlab.simulate import SimPlan


# ---------------------------------------------------------------------------
# truncation and prefix maxima
# ---------------------------------------------------------------------------


def test_truncate_clamp():
    out = simulate.truncate(np.array([-3.0, 1.0, 5.0]), "clamp", 2.0)
    assert list(out) == [-2.0, 1.0, 2.0]


def test_truncate_zero():
    out = simulate.truncate(np.array([-3.0, 1.0, 5.0]), "zero", 2.0)
    assert list(out) == [0.0, 1.0, 0.0]


@pytest.mark.parametrize("flavor", ["clamp", "zero"])
def test_truncate_identity_above_range(flavor):
    v = np.array([-3.0, 1.0, 5.0])
    assert list(simulate.truncate(v, flavor, 5.0)) == list(v)


@given(
    st.lists(st.floats(-50, 50), min_size=1, max_size=30),
    st.floats(0.1, 100.0),
)
@settings(max_examples=60, deadline=None)
def test_truncate_clamp_never_grows_magnitudes(vals, level):
    v = np.asarray(vals)
    out = simulate.truncate(v, "clamp", level)
    assert np.all(np.abs(out) <= np.abs(v) + 1e-12)
    assert np.all(np.abs(out) <= level)


def test_max_partial_sums_basic():
    assert simulate.max_partial_sums(np.array([1.0, -2.0, 1.0])) == 1.0
    assert simulate.max_partial_sums(np.array([1.0, 1.0]), np.array([0.0, 3.0])) == 3.0


def test_max_partial_sums_shape_mismatch():
    with pytest.raises(ValueError):
        simulate.max_partial_sums(np.ones(3), np.ones(2))


def test_counterexample_statistic_exact_values():
    fx = load("wlln-counterexample")
    for n, expected in ((16, 1.0), (256, 4.0)):
        row = model.sample_row(fx.arr, n, seed=0)
        c = np.array([fx.c_fn(n, i) for i in range(1, n + 1)])
        stat = simulate.max_partial_sums(row, c) / float(fx.b(n))
        assert stat == expected  # exact in floats: n / log2(n)^(1/p)


# ---------------------------------------------------------------------------
# determinism
# ---------------------------------------------------------------------------


def _pm1_plan(**kw):
    arr = model.sequence_array(lambda i: model.SymmetricPM1())
    defaults = dict(
        arr=arr, b=power_norming(1.0), rows=(64, 128, 256), reps=200,
        eps=(0.5,), seed=11,
    )
    defaults.update(kw)
    return SimPlan(**defaults)


def test_wlln_estimate_bitwise_deterministic():
    plan = _pm1_plan()
    rep1 = simulate.wlln_estimate(plan)
    rep2 = simulate.wlln_estimate(plan)
    assert rep1.to_csv_str() == rep2.to_csv_str()
    assert rep1 == rep2


def test_wlln_estimate_thread_count_invariant():
    plan = _pm1_plan(rows=(64, 128, 256, 512))
    rep1 = simulate.wlln_estimate(plan, threads=1)
    rep8 = simulate.wlln_estimate(plan, threads=8)
    assert rep1.to_csv_str() == rep8.to_csv_str()


def test_replication_doubling_consistency():
    plan_r = _pm1_plan(rows=(32, 64), eps=(0.1, 0.2), reps=500, seed=3)
    plan_2r = _pm1_plan(rows=(32, 64), eps=(0.1, 0.2), reps=1000, seed=3)
    rep_r = simulate.wlln_estimate(plan_r)
    rep_2r = simulate.wlln_estimate(plan_2r)
    ok = 0
    cells = list(itertools.product((32, 64), (0.1, 0.2)))
    for n, eps in cells:
        p1, p2 = rep_r.p_hat(n, eps), rep_2r.p_hat(n, eps)
        se = math.sqrt(max(p1 * (1 - p1), 1e-6) / 500)
        ok += abs(p1 - p2) <= 4 * se
    assert ok >= 0.95 * len(cells)


# ---------------------------------------------------------------------------
# estimates against exact oracles
# ---------------------------------------------------------------------------


def max_abs_walk_exceedance_exact(n: int, t: int) -> float:
    """P(max_k |S_k| > t) for a +-1 walk by dynamic programming."""
    # state: distribution over S_k restricted to |S| <= t
    probs = {0: 1.0}
    escaped = 0.0
    for _ in range(n):
        nxt: dict[int, float] = {}
        for s, p in probs.items():
            for step in (-1, 1):
                v = s + step
                if abs(v) > t:
                    escaped += 0.5 * p
                else:
                    nxt[v] = nxt.get(v, 0.0) + 0.5 * p
        probs = nxt
    return escaped


def test_wlln_estimate_matches_exact_walk_probability():
    plan = _pm1_plan(rows=(64,), eps=(0.5,), reps=2000, seed=21)
    rep = simulate.wlln_estimate(plan)
    p_hat = rep.p_hat(64, 0.5)
    exact = max_abs_walk_exceedance_exact(64, 32)  # stat > 0.5 means max|S| > 32
    se = math.sqrt(exact * (1 - exact) / 2000) + 1e-9
    assert abs(p_hat - exact) <= 4 * se


def test_wlln_estimate_large_row_exceedance_negligible():
    plan = _pm1_plan(rows=(10_000,), eps=(0.5,), reps=2000, seed=4)
    rep = simulate.wlln_estimate(plan)
    # Hoeffding: P(max|S| > 5000) <= 4 exp(-1250), so 0.001 is generous
    assert rep.p_hat(10_000, 0.5) <= 0.001


def test_wlln_counterexample_exceeds_always():
    fx = load("wlln-counterexample")
    plan = SimPlan(
        arr=fx.arr, b=fx.b, rows=(64, 256, 1024), reps=100, eps=(0.1, 0.5, 1.0),
        seed=5, c=fx.c_fn,
    )
    rep = simulate.wlln_estimate(plan)
    for n in (64, 256, 1024):
        for eps in (0.1, 0.5, 1.0):
            assert rep.p_hat(n, eps) == 1.0


def test_centering_is_exact_zero_for_symmetric_cells():
    plan_plain = _pm1_plan(rows=(128,), reps=50, seed=9)
    plan_centered = _pm1_plan(
        rows=(128,), reps=50, seed=9, truncation="clamp-at-b", center_truncated=True
    )
    rep_a = simulate.wlln_estimate(plan_plain)
    rep_b = simulate.wlln_estimate(plan_centered)
    # clamping at b_n = 128 never binds for +-1 cells and centering terms vanish
    assert rep_a.entries == rep_b.entries


def test_series_estimate_iid_walk_bounded():
    plan = _pm1_plan(rows=tuple(2**j for j in range(4, 11)), reps=400, seed=13)
    rep = simulate.slln_series_estimate(plan, None, 1.0)
    per = rep.series["per_eps"][0]
    assert per["diagnostic"] == "bounded"
    contributions = per["contributions"]
    assert contributions[-1] <= 1e-6
    # sanity of the block estimate at a sampled row vs the exact walk value
    p64 = rep.p_hat(64, 0.5)
    exact = max_abs_walk_exceedance_exact(64, 32)
    assert abs(p64 - exact) <= 4 * math.sqrt(exact * (1 - exact) / 400) + 1e-9


def test_series_estimate_counterexample_unbounded():
    fx = load("wlln-counterexample")
    plan = SimPlan(
        arr=fx.arr, b=fx.b, rows=tuple(2**j for j in range(5, 12)), reps=60,
        eps=(0.5,), seed=2, c=fx.c_fn,
    )
    rep = simulate.slln_series_estimate(plan, None, fx.p)
    assert rep.series["per_eps"][0]["diagnostic"] == "unbounded"


def test_series_estimate_degenerate_cells_zero():
    arr = model.sequence_array(lambda i: model.SymmetricTwoPoint(1e-12, 1.0))
    plan = SimPlan(arr=arr, b=power_norming(1.0), rows=(16, 64), reps=20, eps=(0.5,), seed=1)
    rep = simulate.slln_series_estimate(plan, None, 1.0)
    per = rep.series["per_eps"][0]
    assert per["partials"][-1] == 0.0
    assert all(e.p_hat == 0.0 for e in rep.entries)


# ---------------------------------------------------------------------------
# path diagnostics
# ---------------------------------------------------------------------------


def test_path_diagnostic_iid_walk_converges():
    arr = model.sequence_array(lambda i: model.SymmetricPM1())
    plan = SimPlan(
        arr=arr, b=power_norming(1.0), rows=tuple(2**j for j in range(10, 17)),
        reps=50, eps=(0.1,), seed=6,
    )
    rep = simulate.slln_path_diagnostic(plan)
    assert rep.fraction_below(plan.rows[-1], 0.1) == 1.0


def test_path_diagnostic_deterministic_spikes_fail():
    arr = model.sequence_array(lambda i: model.SymmetricTwoPoint(float(i) ** 2, 1.0))
    plan = SimPlan(arr=arr, b=power_norming(0.5), rows=(16, 64, 256), reps=5, eps=(0.5,), seed=1)
    rep = simulate.slln_path_diagnostic(plan)
    assert rep.fraction_below(256, 0.5) == 0.0


def test_path_diagnostic_zero_sequence():
    arr = model.sequence_array(lambda i: model.SymmetricTwoPoint(1e-300, 1.0))
    plan = SimPlan(arr=arr, b=power_norming(1.0), rows=(8, 32), reps=4, eps=(0.01,), seed=1)
    rep = simulate.slln_path_diagnostic(plan)
    assert rep.fraction_below(32, 0.01) == 1.0


def test_path_diagnostic_needs_sequence_array():
    fx = load("example-2.1")
    plan = SimPlan(arr=fx.arr, b=fx.b, rows=(8,), reps=2, eps=(0.5,), seed=1)
    with pytest.raises(ValueError):
        simulate.slln_path_diagnostic(plan)


# ---------------------------------------------------------------------------
# maximal-inequality probe
# ---------------------------------------------------------------------------


def exact_probe_ratio_pm1(n: int) -> float:
    """Enumerate all sign paths: E(max_k |S_k|)^2 / n for +-1 cells, a >= 1."""
    total = 0.0
    for signs in itertools.product((-1, 1), repeat=n):
        s, best = 0, 0
        for x in signs:
            s += x
            best = max(best, abs(s))
        total += best**2
    return (total / 2**n) / n


def test_condition_h_probe_matches_enumeration():
    arr = model.identical_array(model.SymmetricPM1())
    exact = exact_probe_ratio_pm1(8)
    est = simulate.condition_h_probe(arr, 1.0, 8, reps=3000, seed=17)
    assert est == pytest.approx(exact, rel=0.1)


def test_condition_h_probe_single_cell_bounded_by_one():
    # exact ratio is variance / second moment = 1; allow 4-se sampling slack
    arr = model.identical_array(model.SymmetricTwoPoint(2.0, 0.5))
    reps = 20_000
    est = simulate.condition_h_probe(arr, 3.0, 1, reps=reps, seed=3)
    se = (2.0 / math.sqrt(reps)) / 2.0  # sd(X^2)=2, rhs=2
    assert est <= 1.0 + 4 * se


def test_condition_h_probe_iid_doob_range():
    arr = model.identical_array(model.SymmetricPM1())
    est = simulate.condition_h_probe(arr, 1.0, 100, reps=800, seed=23)
    assert 0.5 <= est <= 4.5


def test_condition_h_probe_negatively_associated_rows():
    arr = model.ArraySpec(
        row_length=lambda n: n,
        groups_fn=lambda n: (model.CellGroup(n, model.SymmetricPM1()),),
        dependence=model.GaussianNA(-0.1),
    )
    est = simulate.condition_h_probe(arr, 1.0, 100, reps=400, seed=29)
    assert math.isfinite(est) and est > 0.0


def test_condition_h_probe_degenerate_cells_rejected():
    zero = model.CustomDist(
        tail=model.TailFunction(
            fn=lambda x: 1.0 if x < 0 else 0.0, atoms=((0.0, 1.0),), support_hint=0.0
        ),
        quantile=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        mean_zero=True,
    )
    arr = model.identical_array(zero, mean_zero=False)
    with pytest.raises(ValueError):
        simulate.condition_h_probe(arr, 2.0, 4, reps=10, seed=1)


# ---------------------------------------------------------------------------
# plan validation
# ---------------------------------------------------------------------------


def test_plan_validation():
    arr = model.sequence_array(lambda i: model.SymmetricPM1())
    with pytest.raises(ValueError):
        SimPlan(arr=arr, b=power_norming(1.0), rows=(), reps=5, eps=(0.5,), seed=0)
    with pytest.raises(ValueError):
        SimPlan(arr=arr, b=power_norming(1.0), rows=(8, 4), reps=5, eps=(0.5,), seed=0)
    with pytest.raises(ValueError):
        SimPlan(arr=arr, b=power_norming(1.0), rows=(4,), reps=0, eps=(0.5,), seed=0)
    with pytest.raises(ValueError):
        SimPlan(arr=arr, b=power_norming(1.0), rows=(4,), reps=5, eps=(0.0,), seed=0)
