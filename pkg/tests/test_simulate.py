import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from pdmpkit import families as fam
from pdmpkit.model import EnvironmentField, ModelSpec, RateBoundError, SwitchLaw
from pdmpkit.polynomial import Poly
from pdmpkit.simulate import (SimConfig, flow_segment, rng_for, sample_jump, simulate,
                              simulate_ensemble)

from helpers import LV2


def one_env(*fitness, n=1):
    return ModelSpec(n, 1, (EnvironmentField(tuple(fitness)),), SwitchLaw.constant([[0.0]]))


def rk4(f, x, tau, h):
    steps = int(round(tau / h))
    for _ in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def test_flow_fixed_point():
    m = one_env(Poly.linear(1.0, [-1.0]))
    assert flow_segment(m, [1.0], 1, 7.3)[0] == pytest.approx(1.0, rel=1e-12)


def test_flow_exponential():
    m = one_env(Poly.linear(0.5, [0.0]))
    assert flow_segment(m, [1.0], 1, 2.0)[0] == pytest.approx(math.e, rel=1e-8)


def test_flow_zero_duration():
    assert flow_segment(LV2, [0.3, 0.4], 2, 0.0).tolist() == [0.3, 0.4]


def test_flow_matches_rk4_oracle():
    x0 = np.array([0.7, 1.9])
    for k in (1, 2):
        fld = LV2.fields[k - 1]
        ref = rk4(fld.drift, x0.copy(), 1.0, 1e-5)
        got = flow_segment(LV2, x0, k, 1.0)
        np.testing.assert_allclose(got, ref, rtol=1e-8)


def test_flow_logistic_closed_form():
    a, b, x0, t = 1.3, 0.4, 0.2, 3.0
    m = one_env(Poly.linear(a, [-b]))
    exact = a / b / (1 + (a / (b * x0) - 1) * math.exp(-a * t))
    assert flow_segment(m, [x0], 1, t)[0] == pytest.approx(exact, rel=1e-8)


def test_flow_deep_decay_keeps_positivity():
    m = one_env(Poly.linear(-50.0, [0.0]))
    x = flow_segment(m, [1.0], 1, 20.0)
    assert x[0] == 0.0 or x[0] > 0.0
    traj = simulate(m, [1.0], 1, SimConfig(t_max=20.0, record_dt=1.0))
    assert traj.logx[-1, 0] == pytest.approx(-1000.0, rel=1e-8)


def test_flow_rejects_negative_duration():
    with pytest.raises(ValueError):
        flow_segment(LV2, [1.0, 1.0], 1, -1.0)


def test_constant_holding_time_mean():
    m = fam.single_1d(**fam.FIG1)
    rng = rng_for(5)
    dts = np.array([sample_jump(m, [1.0], 1, rng).dt for _ in range(100_000)])
    se = dts.std(ddof=1) / math.sqrt(dts.size)
    assert abs(dts.mean() - 0.5) < 3 * se


def test_two_state_target_is_the_other_state():
    m = fam.single_1d(**fam.FIG1)
    rng = rng_for(1)
    assert all(sample_jump(m, [1.0], 1, rng).new_env == 2 for _ in range(100))
    assert all(sample_jump(m, [1.0], 2, rng).new_env == 1 for _ in range(100))


def test_three_state_target_frequencies():
    q = [[0, 1.0, 3.0], [1, 0, 1], [1, 1, 0]]
    m = ModelSpec(1, 3, tuple(EnvironmentField((Poly.linear(0.0, [0.0]),)) for _ in range(3)),
                  SwitchLaw.constant(q))
    rng = rng_for(2)
    targets = np.array([sample_jump(m, [1.0], 1, rng).new_env for _ in range(20_000)])
    frac = np.mean(targets == 3)
    assert abs(frac - 0.75) < 3 * math.sqrt(0.75 * 0.25 / targets.size)


def test_thinning_reproduces_constant_law():
    base = fam.single_1d(**fam.FIG1)
    law = SwitchLaw.state_dependent(2, {(1, 2): 2.0, (2, 1): 2.0}, rate_bound=5.0)
    m = replace(base, switch=law)
    rng = rng_for(3)
    dts = [sample_jump(m, [1.0], 1, rng).dt for _ in range(10_000)]
    assert stats.kstest(dts, "expon", args=(0, 0.5)).pvalue > 0.01


def test_thinning_with_state_dependent_rate():
    # q12(x) = 1 + x with x growing like e^t: survival exp(-(t + e^t - 1))
    law = SwitchLaw.state_dependent(2, {(1, 2): Poly.linear(1.0, [1.0]), (2, 1): 1.0}, rate_bound=60.0)
    flds = (EnvironmentField((Poly.linear(1.0, [0.0]),)), EnvironmentField((Poly.linear(0.0, [0.0]),)))
    m = ModelSpec(1, 2, flds, law)
    rng = rng_for(4)
    dts = np.array([sample_jump(m, [1.0], 1, rng).dt for _ in range(3000)])
    cdf = lambda t: 1 - np.exp(-(t + np.exp(t) - 1))  # noqa: E731
    assert stats.kstest(dts, cdf).pvalue > 0.01


def test_rate_bound_violation_is_an_error():
    law = SwitchLaw.state_dependent(2, {(1, 2): Poly.linear(1.0, [10.0]), (2, 1): 1.0}, rate_bound=2.0)
    flds = (EnvironmentField((Poly.linear(1.0, [0.0]),)), EnvironmentField((Poly.linear(0.0, [0.0]),)))
    m = ModelSpec(1, 2, flds, law)
    with pytest.raises(RateBoundError):
        simulate(m, [1.0], 1, SimConfig(t_max=50.0, seed=0))


def test_zero_species_stays_zero():
    tr = simulate(LV2, [1.0, 0.0], 1, SimConfig(t_max=50.0, seed=3))
    assert np.all(tr.x[:, 1] == 0.0)
    assert np.all(tr.x[:, 0] > 0.0)


def test_same_seed_is_bit_identical():
    cfg = SimConfig(t_max=100.0, seed=11)
    a = simulate(LV2, [1.0, 2.0], 1, cfg)
    b = simulate(LV2, [1.0, 2.0], 1, cfg)
    assert a.t.tobytes() == b.t.tobytes()
    assert a.logx.tobytes() == b.logx.tobytes()
    assert a.jump_t.tobytes() == b.jump_t.tobytes()
    c = simulate(LV2, [1.0, 2.0], 1, replace(cfg, seed=12))
    assert c.jump_t.size != a.jump_t.size or not np.array_equal(c.jump_t, a.jump_t)


def test_record_grid_and_environment_consistency():
    cfg = SimConfig(t_max=30.0, seed=8, record_dt=0.25)
    tr = simulate(LV2, [1.0, 2.0], 2, cfg)
    np.testing.assert_allclose(tr.t, np.arange(tr.t.size) * 0.25, atol=1e-12)
    assert tr.t[-1] == 30.0
    assert np.all(np.diff(tr.jump_t) > 0)
    assert np.all(tr.jump_from != tr.jump_to)
    # environment at each sample equals the last jump target before it
    for t, k in zip(tr.t, tr.k):
        i = np.searchsorted(tr.jump_t, t, side="right") - 1
        expected = 2 if i < 0 else tr.jump_to[i]
        if i >= 0 and tr.jump_t[i] == t:
            continue
        assert k == expected


def test_samples_satisfy_the_flow():
    cfg = SimConfig(t_max=40.0, seed=9, record_dt=0.5)
    tr = simulate(LV2, [1.0, 2.0], 1, cfg)
    checked = 0
    for i in range(tr.t.size - 1):
        a, b = tr.t[i], tr.t[i + 1]
        if np.any((tr.jump_t >= a) & (tr.jump_t <= b)):
            continue
        x = flow_segment(LV2, tr.x[i], int(tr.k[i]), b - a)
        np.testing.assert_allclose(x, tr.x[i + 1], rtol=10 * cfg.rtol)
        checked += 1
    assert checked > 5


def test_jump_count_mean():
    law = SwitchLaw.two_state(3.0, 1.0)
    m = replace(fam.single_1d(**fam.FIG1), switch=law)
    counts = np.array([tr.jump_t.size for tr in
                       simulate_ensemble(m, [1.0], 1, SimConfig(t_max=100.0, seed=2, record_dt=10.0), 60)])
    # stationary jump intensity nu1 q12 + nu2 q21 = 0.25 * 3 + 0.75 * 1
    se = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - 150.0) < 3 * se + 1.0


def test_ensemble_single_replicate_equals_simulate():
    cfg = SimConfig(t_max=20.0, seed=4)
    (a,) = simulate_ensemble(LV2, [1.0, 1.0], 1, cfg, 1)
    b = simulate(LV2, [1.0, 1.0], 1, cfg)
    assert a.logx.tobytes() == b.logx.tobytes()


def test_ensemble_replicates_are_order_independent():
    cfg = SimConfig(t_max=10.0, seed=4)
    runs = simulate_ensemble(LV2, [1.0, 1.0], 1, cfg, 4)
    third = simulate(LV2, [1.0, 1.0], 1, replace(cfg, replicate=2))
    assert runs[2].logx.tobytes() == third.logx.tobytes()
    assert len({r.jump_t.size for r in runs}) > 1 or not np.array_equal(runs[0].jump_t, runs[1].jump_t)


def test_ensemble_worker_pool_matches_serial():
    cfg = SimConfig(t_max=10.0, seed=6)
    a = simulate_ensemble(LV2, [1.0, 1.0], 1, cfg, 3, workers=1)
    b = simulate_ensemble(LV2, [1.0, 1.0], 1, cfg, 3, workers=2)
    assert [t.logx.tobytes() for t in a] == [t.logx.tobytes() for t in b]


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(t_max=0.0)
    with pytest.raises(ValueError):
        SimConfig(t_max=1.0, rtol=0.0)
    with pytest.raises(ValueError):
        SimConfig(t_max=1.0, record_dt=-1.0)


@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0), st.integers(0, 2**32))
def test_positive_start_stays_positive(x1, x2, seed):
    tr = simulate(LV2, [x1, x2], 1, SimConfig(t_max=5.0, seed=seed, record_dt=0.5))
    assert np.all(np.isfinite(tr.logx))
    assert np.all(tr.x > 0)
