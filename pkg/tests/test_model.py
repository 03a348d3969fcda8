import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llnlab import model
from llnlab.errors import RowRangeError, SamplingError


# ---------------------------------------------------------------------------
# tails
# ---------------------------------------------------------------------------


def test_tail_of_pm1_below_support():
    assert model.tail_of(model.SymmetricPM1()).fn(0.5) == 1.0


def test_tail_of_two_point_strict_at_atom():
    assert model.tail_of(model.SymmetricTwoPoint(5.0, 1.0)).fn(5.0) == 0.0


def test_tail_of_pareto_value():
    assert model.tail_of(model.ParetoTail(alpha=2.0, cutoff=1.0)).fn(10.0) == pytest.approx(
        0.01, abs=1e-15
    )


def test_tail_negative_argument_is_one():
    for d in (model.SymmetricPM1(), model.SymmetricTwoPoint(2.0, 0.3), model.ParetoTail(3.0)):
        assert model.tail_of(d).fn(-1.0) == 1.0


@given(
    st.one_of(
        st.builds(
            model.SymmetricTwoPoint,
            magnitude=st.floats(0.1, 50.0),
            prob=st.floats(0.01, 1.0),
        ),
        st.builds(model.ParetoTail, alpha=st.floats(0.2, 5.0), cutoff=st.floats(1.0, 4.0)),
        st.just(model.SymmetricPM1()),
    )
)
@settings(max_examples=60, deadline=None)
def test_tail_monotone_on_grid(dist):
    tail = model.tail_of(dist)
    xs = np.geomspace(1e-3, 1e3, 100)
    vals = [tail.fn(x) for x in xs]
    assert all(0.0 <= v <= 1.0 for v in vals)
    assert all(b <= a for a, b in zip(vals[:-1], vals[1:]))


@pytest.mark.parametrize(
    "dist",
    [
        model.SymmetricPM1(),
        model.SymmetricTwoPoint(3.0, 0.4),
        model.ParetoTail(alpha=2.5, cutoff=1.0),
    ],
)
def test_sampler_tail_agreement(dist):
    # empirical tail of 1e5 inverse-transform samples vs the exact tail
    n = 100_000
    rng = model.rng_for(123, 0)
    samples = model.quantile_of(dist)(rng.random(n))
    tail = model.tail_of(dist)
    emp = model.empirical_tail(samples)
    for x in (0.5, 1.0, 1.5, 2.9, 3.0):
        p = tail.fn(x)
        se = math.sqrt(max(p * (1 - p), 1e-12) / n)
        assert abs(emp.fn(x) - p) <= 3 * se + 1e-9


def test_empirical_tail_right_continuous_step():
    emp = model.empirical_tail(np.array([1.0, -2.0, 2.0, 5.0]))
    assert emp.fn(2.0) == 0.25   # strictly-greater convention: only |5| > 2
    assert emp.fn(1.9999) == 0.75  # both |+-2| entries and |5|
    assert emp.fn(0.9999) == 1.0
    assert emp.fn(5.0) == 0.0


def test_custom_dist_requires_quantile_for_sampling():
    tail = model.TailFunction(fn=lambda x: max(0.0, 1.0 - x) if x >= 0 else 1.0)
    spec = model.CustomDist(tail=tail, quantile=None, mean_zero=True)
    with pytest.raises(SamplingError):
        model.quantile_of(spec)


# ---------------------------------------------------------------------------
# arrays and weights
# ---------------------------------------------------------------------------


def _two_block_weights():
    from llnlab.fixtures import load

    return load("example-2.1").weights


def test_row_weight_sum_two_block_row2():
    assert model.row_weight_sum(_two_block_weights(), 2) == pytest.approx(1.25, abs=1e-15)


def test_weight_sup_scan_matches_closed_value():
    c0, at = _two_block_weights().c0(10_000)
    assert c0 == pytest.approx(1.25, abs=1e-12)
    assert at == 2


def test_uniform_weights_row_sum_is_one():
    w = model.uniform_weights()
    for n in (1, 3, 17, 400):
        assert model.row_weight_sum(w, n) == pytest.approx(1.0, abs=1e-15)


def test_row_out_of_declared_range():
    w = model.explicit_weights(lambda n, i: 1.0, lambda n: n, n_max=5)
    with pytest.raises(RowRangeError):
        model.row_weight_sum(w, 6)


def test_c_normalized_rows_sum_to_one_exactly():
    w = model.c_normalized_weights(
        lambda n, i: float(i), lambda n: n, flavor="sum", growth_constant=None
    )
    for n in (1, 2, 7, 100):
        assert abs(model.row_weight_sum(w, n) - 1.0) < 1e-12


def test_c_normalized_growth_bound_enforced():
    w = model.c_normalized_weights(
        lambda n, i: float(n), lambda n: n, flavor="sum", growth_constant=1.0
    )
    with pytest.raises(ValueError):
        w.row_sum(3)  # A_3 = 9 > 1 * 3


def test_array_cell_lookup_and_bounds():
    arr = model.identical_array(model.SymmetricPM1())
    assert isinstance(arr.cell(4, 2), model.SymmetricPM1)
    with pytest.raises(RowRangeError):
        arr.cell(3, 4)
    with pytest.raises(RowRangeError):
        arr.k(0)


# ---------------------------------------------------------------------------
# norming sequences
# ---------------------------------------------------------------------------


def test_norming_zero_convention_and_int_exactness():
    b = model.power_norming(0.5)
    assert b(0) == 0
    assert b(3) == 9 and isinstance(b(3), int)
    b.check_nondecreasing(500)


def test_norming_with_conjugate_factor():
    from llnlab import svf

    b = model.power_norming(1.0, svf.log_power(1.0).conjugate())
    # b_n = n / log2(n) eventually grows
    assert b(2**10) == pytest.approx(2**10 / 10.0, rel=1e-12)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def test_sample_row_support_and_determinism():
    arr = model.identical_array(model.SymmetricPM1())
    r1 = model.sample_row(arr, 64, seed=9)
    r2 = model.sample_row(arr, 64, seed=9)
    assert np.array_equal(r1, r2)
    assert set(np.unique(r1)) <= {-1.0, 1.0}
    assert not np.array_equal(r1, model.sample_row(arr, 64, seed=10))


def test_sample_mean_zero_clt_width():
    dist = model.SymmetricTwoPoint(2.0, 0.5)  # variance = 4 * 0.5 = 2
    n = 100_000
    samples = model.quantile_of(dist)(model.rng_for(5, 1).random(n))
    sd = math.sqrt(2.0)
    assert abs(float(np.mean(samples))) <= 4.0 * sd / math.sqrt(n)


def test_gaussian_na_rows_negative_neighbour_correlation():
    arr = model.ArraySpec(
        row_length=lambda n: n,
        groups_fn=lambda n: (model.CellGroup(n, model.SymmetricPM1()),),
        dependence=model.GaussianNA(-0.3),
    )
    reps, n = 4000, 8
    acc = np.zeros(n - 1)
    for rep in range(reps):
        row = model.sample_row_with(arr, n, model.rng_for(2, n, rep))
        acc += row[:-1] * row[1:]
    mean_prod = acc / reps  # E X_i X_{i+1} < 0 under negative association
    assert float(np.mean(mean_prod)) < -0.05


def test_gaussian_na_correlation_bounds():
    with pytest.raises(ValueError):
        model.GaussianNA(-0.7)
    with pytest.raises(ValueError):
        model.GaussianNA(0.1)
