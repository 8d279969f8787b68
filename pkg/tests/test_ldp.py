import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsbm import ldp
from lsbm.ldp import WeightDistribution as WD
from lsbm.model import ModelParams, tau

THREE = ModelParams.build(2.5, 1.5, ["x", "y", "z"], [0.6, 0.3, 0.1], [0.1, 0.3, 0.6])


def two_point_h0(alpha, p):
    terms = 0.0
    if alpha > 0:
        terms += alpha * math.log(alpha / p)
    if alpha < 1:
        terms += (1 - alpha) * math.log((1 - alpha) / (1 - p))
    return terms


def test_distribution_validation_and_merging():
    with pytest.raises(ValueError):
        WD((0.0, -1.0), (0.5, 0.6))
    with pytest.raises(ValueError):
        WD((-math.inf,), (1.0,))
    with pytest.raises(ValueError):
        WD((), (), 1.0)
    d = WD((-1.0, -0.5, -1.0 + 1e-15), (0.25, 0.5, 0.25))
    assert d.values == (-1.0, -0.5)
    assert d.probs == pytest.approx((0.5, 0.5))


def test_from_params():
    d = WD.from_params(ModelParams.two_label(3.0, 3.0, 0.2))
    # a = b: theta(+) = 2 eps = -theta(-), so one merged atom
    assert len(d.values) == 1
    assert d.values[0] == pytest.approx(math.log(0.4))
    z = WD.from_params(ModelParams.build(1.0, 1.0, ["x", "y", "z"], [0.5, 0.3, 0.2], [0.5, 0.1, 0.4]))
    assert z.neg_inf_mass == pytest.approx(0.5)


def test_log_mgf_examples():
    d = WD((-1.0, 0.0), (0.5, 0.5))
    assert ldp.log_mgf(d, 0.0) == 0.0
    assert ldp.log_mgf(d, 1.0) == pytest.approx(math.log((math.exp(-1) + 1) / 2), abs=1e-15)
    single = WD((-0.7,), (1.0,))
    for y in (-3.0, 0.5, 10.0):
        assert ldp.log_mgf(single, y) == pytest.approx(-0.7 * y, abs=1e-14)
    with_inf = WD((-1.0,), (0.5,), 0.5)
    assert ldp.log_mgf(with_inf, 1.0) == pytest.approx(math.log(0.5) - 1.0)
    with pytest.raises(ValueError):
        ldp.log_mgf(with_inf, -1.0)


@pytest.mark.parametrize("p", [0.2, 0.5, 0.77])
def test_cramer_matches_two_point_closed_form(p):
    w1, w2 = -2.0, -0.3
    d = WD((w1, w2), (p, 1 - p))
    alphas = np.linspace(0.1, 0.9, 9)
    xs = alphas * w1 + (1 - alphas) * w2
    got = ldp.cramer_transform(d, xs)
    for a, h in zip(alphas, got):
        assert h == pytest.approx(two_point_h0(a, p), abs=1e-8)


def test_cramer_special_points():
    d = WD((-2.0, -1.0, -0.1), (0.2, 0.5, 0.3))
    assert ldp.cramer_transform(d, d.mean) == pytest.approx(0.0, abs=1e-12)
    assert ldp.cramer_transform(d, -0.1) == pytest.approx(-math.log(0.3))
    assert ldp.cramer_transform(d, -2.0) == pytest.approx(-math.log(0.2))
    assert ldp.cramer_transform(d, 0.0) == math.inf
    assert ldp.cramer_transform(d, -2.5) == math.inf
    # approaching the endpoint from inside tends to -log p
    assert ldp.cramer_transform(d, -0.1 - 1e-9) == pytest.approx(-math.log(0.3), abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 0), st.floats(0.05, 1)), min_size=2, max_size=5))
def test_cramer_nonnegative_and_convex(atoms):
    w = [a for a, _ in atoms]
    p = np.array([q for _, q in atoms])
    d = WD(tuple(w), tuple(p / p.sum()))
    if d.w_max - d.w_min < 1e-3:
        return
    xs = np.linspace(d.w_min, d.w_max, 41)[1:-1]
    h = ldp.cramer_transform(d, xs)
    assert np.all(h >= 0)
    assert np.all(h[1:-1] <= 0.5 * (h[:-2] + h[2:]) + 1e-9)
    assert ldp.cramer_transform(d, d.mean) == pytest.approx(0.0, abs=1e-10)


def test_rate_window_examples():
    d = WD((-2.0, -1.0, -0.1), (0.2, 0.5, 0.3))
    lo, hi = ldp.rate_window(d, 1.0 + 1e-8)
    assert hi - lo < 1e-3 and lo <= d.mean <= hi
    single = WD((-0.4,), (1.0,))
    assert ldp.rate_window(single, 3.0) == (-0.4, -0.4)
    two = WD((-1.5, -0.2), (0.3, 0.7))
    assert ldp.rate_window(two, math.exp(-math.log(0.3)) * 1.01) == (-1.5, -0.2)
    lo, hi = ldp.rate_window(d, 2.0)
    assert ldp.cramer_transform(d, hi) == pytest.approx(math.log(2.0), abs=1e-9)
    assert ldp.cramer_transform(d, lo) == pytest.approx(math.log(2.0), abs=1e-9)
    with pytest.raises(ValueError):
        ldp.rate_window(d, 1.0)


def test_rate_h_and_prediction():
    d = WD.from_params(THREE)
    lam = THREE.mean_degree
    lo, hi = ldp.rate_window(d, lam)
    mid = 0.5 * (d.mean + hi)
    assert ldp.rate_h(d, lam, mid) == pytest.approx(ldp.cramer_transform(d, mid))
    assert ldp.rate_h(d, lam, hi + 0.01) == math.inf
    assert ldp.rate_h(d, lam, lo - 0.01) == math.inf
    assert ldp.rate_h(d, lam, d.mean) == pytest.approx(0.0, abs=1e-12)
    assert ldp.growth_prediction(d, lam, d.mean) == pytest.approx(lam)
    assert ldp.growth_prediction(d, lam, hi + 0.01) == 0.0
    xs = np.linspace(lo + 1e-6, hi - 1e-6, 400)
    pred = ldp.growth_prediction(d, lam, xs)
    assert np.max(np.abs(np.diff(pred))) < 0.05


@pytest.mark.parametrize("params", [
    THREE,
    ModelParams.build(3.0, 1.0, ["x", "y"], [0.8, 0.2], [0.3, 0.7]),
    ModelParams.two_label(2.0, 2.0, 0.45),
    ModelParams.build(4.0, 2.0, ["x", "y", "z", "w"], [0.4, 0.3, 0.2, 0.1], [0.1, 0.2, 0.3, 0.4]),
])
def test_duality_ties_rate_function_to_tau(params):
    d = WD.from_params(params)
    sup, _ = ldp.sup_linear_minus_rate(d, 2.0)
    assert sup == pytest.approx(ldp.log_mgf(d, 2.0), abs=1e-6)
    assert math.log(params.mean_degree) + ldp.log_mgf(d, 2.0) == pytest.approx(
        math.log(tau(params)), abs=1e-12)


def test_chi_growth_rate_above_threshold_is_log_tau():
    p = ModelParams.two_label(2.0, 2.0, 0.45)
    assert tau(p) > 1
    assert ldp.chi_growth_rate(p) == pytest.approx(math.log(tau(p)), abs=1e-6)


def test_neg_inf_mass_handling():
    d = WD((-1.0, -0.2), (0.3, 0.3), 0.4)
    assert d.mean == -math.inf
    # below the finite mean the optimum is the y -> 0+ limit
    assert ldp.cramer_transform(d, -0.9) == pytest.approx(-math.log(0.6))
    assert ldp.cramer_transform(d, -0.2) == pytest.approx(-math.log(0.3))
    lo, hi = ldp.rate_window(d, 3.0)
    assert lo == -math.inf
    assert ldp.cramer_transform(d, hi) == pytest.approx(math.log(3.0), abs=1e-9)
    assert ldp.rate_window(d, 1.2)[1] == -math.inf  # -log(0.6) > log 1.2 everywhere


def test_empirical_growth_far_below_support_tracks_population():
    rows = ldp.empirical_growth(THREE, -50.0, 10, 200, 1)
    assert len(rows) == 10 and all(r.surviving == 200 for r in rows)
    assert rows[-1].geo_mean_root == pytest.approx(THREE.mean_degree, rel=0.15)


def test_empirical_growth_above_window_dies_out():
    d = WD.from_params(THREE)
    _, hi = ldp.rate_window(d, THREE.mean_degree)
    rows = ldp.empirical_growth(THREE, 0.5 * (hi + d.w_max), 12, 100, 2)
    # the limit is zero; at finite d only a few trials keep a path above x d
    assert rows[-1].zero_fraction >= 0.95
    assert rows[-1].zero_fraction > rows[2].zero_fraction
    assert rows[-1].mean_root < 0.1


def test_empirical_growth_validation():
    with pytest.raises(ValueError):
        ldp.empirical_growth(ModelParams.two_label(1.0, 1.0, 0.3), -1.0, 5, 10, 0)
    with pytest.raises(ValueError):
        ldp.empirical_growth(THREE, -1.0, 15, 10, 0)
    a = ldp.empirical_growth(THREE, -0.8, 6, 20, 9)
    b = ldp.empirical_growth(THREE, -0.8, 6, 20, 9)
    assert a == b


def test_tabulate_rate_rows():
    d = WD.from_params(THREE)
    rows = ldp.tabulate_rate(d, 2.0, [-3.0, d.mean, 0.5])
    assert rows[0][1:] == (math.inf, math.inf, 0.0)
    assert rows[1][2] == pytest.approx(0.0, abs=1e-12)
    assert rows[1][3] == pytest.approx(2.0)
