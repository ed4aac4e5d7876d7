import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deephazard import nn
from deephazard.predict import (
    SurvivalCurve,
    conditional_variance,
    monotonize,
    predict_curves,
    predict_survival,
    risk_path,
    survival_at,
)
from deephazard.survival_data import TimeGrid
from deephazard.train import DeepHazardModel, StepFunction


def linear(weights, bias=0.0):
    return nn.IntervalNetwork([], np.array(weights, float), np.array([bias], float))


def const_model(risks, points, tau, p=1, knots=(), values=()):
    """Networks that output fixed constants; baseline given as step knots."""
    nets = [linear(np.zeros(p + j), r) for j, r in enumerate(risks)]
    return DeepHazardModel(TimeGrid(tuple(points), tau), nets, StepFunction(np.array(knots, float), np.array(values, float)))


def random_model(rng, p=2, M=2, tau=1.0):
    pts = np.concatenate(([0.001], np.sort(rng.uniform(0.05, 0.9 * tau, M))))
    grid = TimeGrid(tuple(pts), tau)
    nets = [nn.build_network(p + j, [3], "tanh", 0.0, rng) for j in range(M + 1)]
    knots = np.sort(rng.uniform(0, tau, 10))
    values = np.cumsum(rng.normal(0.1, 0.3, 10))
    return DeepHazardModel(grid, nets, StepFunction(knots, values))


def test_zero_networks_give_zero_risk():
    model = const_model([0.0, 0.0, 0.0], (0.0, 0.2, 0.4), 1.0, p=3)
    H = risk_path(model, np.random.default_rng(0).normal(size=(4, 3, 3)))
    assert np.all(H == 0)


def test_single_interval_is_one_forward():
    net = linear([2.0, -1.0], 0.5)
    model = DeepHazardModel(TimeGrid((0.0,), 1.0), [net], StepFunction(np.array([]), np.array([])))
    z = np.array([[1.0, 3.0]])
    assert risk_path(model, z)[0] == pytest.approx(2.0 - 3.0 + 0.5)


def test_recursion_by_hand():
    # h0 = 2 z0 + 1 ; h1 = -z1 + 0.5 h0 + 0.25
    model = DeepHazardModel(
        TimeGrid((0.0, 0.5), 1.0),
        [linear([2.0], 1.0), linear([-1.0, 0.5], 0.25)],
        StepFunction(np.array([]), np.array([])),
    )
    Z = np.array([[0.3], [1.7]])
    h0 = 2 * 0.3 + 1
    h1 = -1.7 + 0.5 * h0 + 0.25
    assert risk_path(model, Z) == pytest.approx([h0, h1], abs=1e-12)


def test_dimension_mismatch():
    model = const_model([0.0, 0.0], (0.0, 0.5), 1.0, p=2)
    with pytest.raises(ValueError):
        risk_path(model, np.zeros((2, 3)))
    with pytest.raises(ValueError):
        risk_path(model, np.zeros((3, 2)))


def test_prefix_stability():
    rng = np.random.default_rng(1)
    model = random_model(rng, M=3)
    Z = rng.normal(size=(5, 4, 2))
    full = risk_path(model, Z)
    for k in range(1, 4):
        sub = DeepHazardModel(TimeGrid(model.grid.points[:k], model.grid.tau), model.networks[:k], model.baseline)
        assert np.array_equal(risk_path(sub, Z[:, :k]), full[:, :k])


def test_survival_examples():
    m = const_model([0.0], (0.0,), 2.0)
    assert np.all(survival_at(m, np.zeros((1, 1)), [0.0, 0.7, 2.0]) == 1.0)
    m = const_model([1.0], (0.0,), 2.0)
    t = np.array([0.3, 1.2])
    assert survival_at(m, np.ones((1, 1)), t)[0] == pytest.approx(np.exp(-t), abs=1e-15)
    m = const_model([1.0, 2.0], (0.0, 0.5), 1.0)
    assert survival_at(m, np.array([[1.0, 2.0]]), [0.75])[0, 0] == pytest.approx(math.exp(-1), abs=1e-15)
    with pytest.raises(ValueError):
        survival_at(m, np.array([[1.0, 2.0]]), [1.5])


def test_monotonize_examples():
    assert monotonize([1.0, 0.8, 0.9, 0.7]).tolist() == [1.0, 0.8, 0.8, 0.7]
    assert monotonize([0.5, 0.5]).tolist() == [0.5, 0.5]
    assert monotonize([1.0, 0.6, 0.2]).tolist() == [1.0, 0.6, 0.2]


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_monotonize_properties(vals):
    m = monotonize(vals)
    assert np.array_equal(monotonize(m), m)
    assert np.all(m <= np.asarray(vals))
    assert np.all(np.diff(m) <= 0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_telescoping_identity(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng)
    H = risk_path(model, rng.normal(size=(3, 3, 2)))
    # keep survival away from the clamp so -log is exact
    model.baseline.values[:] = np.abs(model.baseline.values) * 0.01
    H = 0.01 * np.abs(H)
    t = rng.uniform(0, model.grid.tau, 10)
    J = model.grid.interval_of(t)
    tj = model.grid.edges[J]
    lhs = -np.log(survival_at(model, H, t)) + np.log(survival_at(model, H, tj))
    rhs = model.baseline(t) - model.baseline(tj) + H[:, J] * (t - tj)
    assert np.max(np.abs(lhs - rhs)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_curves_monotone_and_bounded(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng)
    Z = rng.normal(size=(4, 3, 2)) * 3
    times = rng.uniform(0, 1, 15)
    S = predict_survival(model, Z, times)
    assert np.all((S >= 0) & (S <= 1))
    order = np.argsort(times)
    assert np.all(np.diff(S[:, order], axis=1) <= 0)
    for c in predict_curves(model, Z):
        assert c.values[0] == 1.0 and c.eval_times[0] == 0.0
        assert np.all(np.diff(c.values) <= 0)


def test_unsorted_request_and_horizon_clip():
    rng = np.random.default_rng(2)
    model = random_model(rng)
    Z = rng.normal(size=(2, 3, 2))
    S = predict_survival(model, Z, [0.9, 0.1, 0.5])
    S_sorted = predict_survival(model, Z, [0.1, 0.5, 0.9])
    assert np.array_equal(S[:, [1, 2, 0]], S_sorted)
    with pytest.warns(UserWarning, match="exceed tau"):
        late = predict_survival(model, Z, [5.0])
    assert np.array_equal(late, predict_survival(model, Z, [1.0]))


def test_baseline_only_prediction():
    model = const_model([0.0, 0.0], (0.0, 0.5), 1.0, knots=[0.2, 0.6], values=[0.3, 0.9])
    S = predict_survival(model, np.zeros((1, 2, 1)), [0.1, 0.2, 0.7])
    assert S[0] == pytest.approx(np.exp([-0.0, -0.3, -0.9]))


def test_conditional_variance_examples():
    t = np.linspace(0, 2.0, 101)
    assert conditional_variance(SurvivalCurve(t, np.ones_like(t)), 2.0) == pytest.approx(0.0, abs=1e-12)
    t = np.linspace(0, 40, 400001)
    assert conditional_variance(SurvivalCurve(t, np.exp(-t)), 40.0) == pytest.approx(1.0, rel=0.02)
    for n in (1001, 100001):
        t = np.linspace(0, 2, n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # discretisation may dip just below zero
            v = conditional_variance(SurvivalCurve(t, (t < 1.0).astype(float)), 2.0)
        assert v < 10.0 / n
