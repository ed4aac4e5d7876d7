import math

import numpy as np
import pytest

from deephazard import simulate as S


def riemann_cumhaz(hazard, t, m=10**6):
    """Midpoint-rule oracle written straight from the model formula."""
    u = (np.arange(m) + 0.5) * (t / m)
    return float(np.sum(hazard(u)) * (t / m))


def path(z0, u):
    return np.sqrt(np.minimum(u, 0.6))[:, None] * np.asarray(z0)[None, :]


def model1_hazard(z0):
    def lam(u):
        Z = path(z0, u)
        return 4 * u**3 + Z[:, 0] * Z[:, 1] + Z[:, 0] * Z[:, 2] + Z[:, 0] * Z[:, 1] * Z[:, 2]
    return lam


def kaplan_meier(x, d, t):
    order = np.argsort(x)
    x, d = x[order], d[order]
    ev = np.unique(x[d == 1])
    at_risk = len(x) - np.searchsorted(x, ev, side="left")
    deaths = np.array([np.sum((x == u) & (d == 1)) for u in ev])
    surv = np.cumprod(1 - deaths / at_risk)
    k = np.searchsorted(ev, t, side="right") - 1
    return np.where(k >= 0, surv[np.clip(k, 0, None)], 1.0)


def test_covariate_path_examples():
    z0 = np.array([4.0, -2.0])
    assert np.all(S.covariate_path(z0, 0.0) == 0)
    assert S.covariate_path([4.0], 0.25).tolist() == [2.0]
    assert np.array_equal(S.covariate_path(z0, 0.9), S.covariate_path(z0, 0.6))
    assert np.allclose(S.covariate_path(z0, 0.9), math.sqrt(0.6) * z0)
    with pytest.raises(ValueError):
        S.covariate_path(z0, -0.1)


def test_cumulative_hazard_closed_forms():
    assert S.cumulative_hazard_true(S.PURE_BASELINE, [0.3], 1.0) == pytest.approx(1.0, abs=1e-10)
    assert S.cumulative_hazard_true(S.PURE_BASELINE, [0.3], 0.7) == pytest.approx(0.7**4, abs=1e-10)
    assert S.cumulative_hazard_true(S.get_model(1), [1.0, 2.0, 3.0], 0.0) == 0.0
    with pytest.raises(ValueError):
        S.cumulative_hazard_true(S.PURE_BASELINE, [0.3], -1.0)


def test_model4_zero_covariates_against_riemann():
    t = 1.3
    oracle = riemann_cumhaz(lambda u: 4 * u**3 + 1.0, t)
    got = S.cumulative_hazard_true(S.get_model(4), np.zeros(3), t)
    assert got == pytest.approx(oracle, abs=1e-6)
    assert got == pytest.approx(t**4 + t, abs=1e-9)


@pytest.mark.parametrize("t", [0.05, 0.35, 0.6, 0.95])
def test_model1_against_riemann(t):
    z0 = np.array([3.0, 7.0, 11.0])
    oracle = riemann_cumhaz(model1_hazard(z0), t)
    assert S.cumulative_hazard_true(S.get_model(1), z0, t) == pytest.approx(oracle, rel=1e-9, abs=1e-6)


def test_integrators_agree():
    rng = np.random.default_rng(0)
    for m in range(1, 7):
        spec = S.get_model(m)
        z = spec.draw_base(4, rng)
        t = rng.uniform(0.0, 1.2, 4)
        simpson = np.array([S.cumulative_hazard_true(spec, z[i], t[i]) for i in range(4)])
        batch = S.cumulative_hazard_batch(spec, z, t)
        matrix = np.array([S.true_cumhaz_matrix(spec, z[i : i + 1], [t[i]])[0, 0] for i in range(4)])
        assert batch == pytest.approx(simpson, rel=1e-9)
        assert matrix == pytest.approx(simpson, rel=1e-9)


def test_negative_integrand_is_reported():
    bad = S.SimModelSpec("bad", lambda u, Z: -10.0 + 0 * u, (0.0,), (1.0,))
    with pytest.raises(ValueError, match="negative hazard"):
        S.cumulative_hazard_true(bad, [0.5], 0.5)
    with pytest.raises(ValueError, match="negative hazard"):
        bad.check_nonnegative(np.random.default_rng(0), draws=100)


def test_event_time_closed_forms():
    assert S.sample_event_time(S.PURE_BASELINE, [0.0], math.exp(-1)) == pytest.approx(1.0, abs=1e-9)
    assert S.sample_event_time(S.CONSTANT_HAZARD, [0.0], 0.5) == pytest.approx(math.log(2), abs=1e-9)
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            S.sample_event_time(S.PURE_BASELINE, [0.0], bad)


def test_model1_root_residual_against_riemann():
    z0 = np.array([2.0, 5.0, 9.0])
    omega = 0.37
    t = S.sample_event_time(S.get_model(1), z0, omega)
    f = math.exp(-riemann_cumhaz(model1_hazard(z0), t))
    assert abs(f - omega) < 1e-8


def test_beyond_support_flag():
    tiny = S.SimModelSpec("tiny", lambda u, Z: 1e-9 + 0 * u, (0.0,), (1.0,), baseline=lambda u: 0 * u)
    T, beyond = S.sample_event_times(tiny, np.zeros((2, 1)), np.array([0.5, 0.9]))
    assert beyond.all() and np.all(T == S.HORIZON_CAP)


def test_model_hazards_finite_and_nonnegative():
    for m in range(1, 7):
        spec = S.get_model(m)
        low = spec.check_nonnegative(np.random.default_rng(m), draws=10_000)
        assert np.isfinite(low)
        rng = np.random.default_rng(m)
        z0 = spec.draw_base(10_000, rng)
        t = rng.uniform(0, 2, 10_000)
        lam = spec.total_hazard(t, S.covariate_path(z0, t))
        assert np.all(np.isfinite(lam)) and np.all(lam >= 0)


def test_covariate_supports():
    rng = np.random.default_rng(0)
    z = S.get_model(1).draw_base(5000, rng)
    assert z.max(axis=0) == pytest.approx([10, 20, 30], rel=0.01)
    z5 = S.get_model(5).draw_base(5000, rng)
    assert z5.shape[1] == 20 and z5[:, 0].min() >= 5 and z5[:, 15:18].max() <= 1 and z5[:, 18:].min() >= 3
    z6 = S.get_model(6).draw_base(5000, rng)
    assert z6[:, 3].min() >= 3 and z6[:, 3].max() <= 4
    with pytest.raises(ValueError):
        S.get_model(7)


def test_calibration():
    assert S.calibrate_censoring(1, 0.0) == math.inf
    with pytest.raises(ValueError):
        S.calibrate_censoring(1, 1.0)
    rng = np.random.default_rng(1)
    spec = S.get_model(5)
    c = S.calibrate_censoring(spec, 0.15, 4000, rng)
    # independent pilot with explicit censoring draws
    z0 = spec.draw_base(4000, rng)
    T, _ = S.sample_event_times(spec, z0, rng.uniform(size=4000))
    C = rng.uniform(0, c, 4000)
    assert 0.14 <= np.mean(C < T) <= 0.16
    assert S.expected_censoring(T, 1e12) < 1e-9


def test_generate_dataset_contract():
    a = S.generate_dataset(1, 1, [0.001, 0.2, 0.4, 0.6], seed=9)
    b = S.generate_dataset(1, 1, [0.001, 0.2, 0.4, 0.6], seed=9)
    assert a.records[0].x == b.records[0].x and np.array_equal(a.records[0].covariates, b.records[0].covariates)
    with pytest.raises(ValueError):
        S.generate_dataset(1, 0, [0.0])
    out = S.generate_dataset(4, 200, [0.001, 0.2, 0.4, 0.6], 0.2, seed=3)
    d = np.array([r.delta for r in out.records])
    assert out.achieved_censoring == pytest.approx(np.mean(1 - d))
    assert out.records[0].covariates.shape == (4, 3)
    assert np.allclose(out.records[5].covariates[2], math.sqrt(0.4) * out.z0[5])
    assert np.all(out.true_survival([0.0]) == 1.0)


def test_true_survival_monotone():
    out = S.generate_dataset(3, 100, [0.001, 0.2], seed=4)
    t = np.linspace(0, 1.0, 50)
    St = out.true_survival(t)
    assert np.all(St[:, 0] == 1) and np.all(np.diff(St, axis=1) <= 0)
    assert out.true_survival.at(7, 0.3) == pytest.approx(St[7, np.searchsorted(t, 0.3)] if 0.3 in t else math.exp(-S.cumulative_hazard_true(3, out.z0[7], 0.3)))


def test_pure_baseline_kaplan_meier():
    out = S.generate_dataset("pure-baseline", 5000, [0.0], seed=11)
    x = np.array([r.x for r in out.records])
    d = np.array([r.delta for r in out.records])
    t = np.linspace(0, 2, 2001)
    assert np.max(np.abs(kaplan_meier(x, d, t) - np.exp(-t**4))) < 0.03
