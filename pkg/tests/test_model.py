import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pdmpkit import families as fam
from pdmpkit.model import (GaugeFunction, ModelError, SubspaceIndex, SwitchLaw, drift, rate_matrix,
                           restrict, validate)
from pdmpkit.polynomial import Poly

from helpers import LV2, LV3, PP, all_family_models


def test_single1d_logistic_equilibrium():
    m = fam.single_1d(**fam.FIG1)
    assert drift(m, [20.0], 2)[0] == pytest.approx(0.0, abs=1e-14)


def test_predprey_drift_at_unit_point():
    p = {f"{s}{i}_{k}": 1.0 for s in "abc" for i in (1, 2) for k in (1, 2)}
    m = fam.pred_prey(**p, q12=1, q21=1)
    np.testing.assert_allclose(drift(m, [1.0, 1.0], 1), [-1.0, -1.0])


@pytest.mark.parametrize("model", all_family_models(), ids=lambda m: m.family)
def test_zero_component_has_zero_drift(model, rng):
    for _ in range(20):
        x = rng.uniform(0, 5, model.n)
        j = rng.integers(model.n)
        x[j] = 0.0
        for k in range(1, model.n0 + 1):
            assert drift(model, x, k)[j] == 0.0


@pytest.mark.parametrize("model", all_family_models(), ids=lambda m: m.family)
def test_kolmogorov_factorization(model, rng):
    for _ in range(50):
        x = rng.uniform(0, 10, model.n)
        for k in range(1, model.n0 + 1):
            np.testing.assert_array_equal(drift(model, x, k), x * model.fitness(x, k))


def test_drift_rejects_bad_input():
    m = fam.single_1d(**fam.FIG1)
    with pytest.raises(ModelError):
        drift(m, [1.0], 3)
    with pytest.raises(ModelError):
        drift(m, [-1.0], 1)


def test_constant_rate_matrices():
    m = fam.single_1d(**fam.FIG1)
    np.testing.assert_array_equal(rate_matrix(m, [3.0]), [[-2, 2], [2, -2]])
    law = SwitchLaw.two_state(3, 1)
    np.testing.assert_array_equal(law.rates([0.0]), [[-3, 3], [1, -1]])


def test_state_dependent_rate_row():
    law = SwitchLaw.state_dependent(2, {(1, 2): lambda x: 1 + min(x[0], 1.0), (2, 1): 1.0}, 3.0)
    q = law.rates(np.array([0.5, 2.0]))
    np.testing.assert_allclose(q[0], [-1.5, 1.5])


def test_negative_callable_rate_is_an_error():
    law = SwitchLaw.state_dependent(2, {(1, 2): lambda x: -1.0, (2, 1): 1.0}, 3.0)
    with pytest.raises(ModelError):
        law.rates(np.zeros(1))


def test_state_dependent_needs_bound():
    with pytest.raises(ModelError):
        SwitchLaw.state_dependent(2, {(1, 2): 1.0}, None)


@given(st.lists(st.floats(0, 10), min_size=9, max_size=9))
def test_constant_law_rows_sum_to_zero(vals):
    q = np.array(vals).reshape(3, 3)
    law = SwitchLaw.constant(q)
    assert np.abs(law.rates(np.zeros(1)).sum(axis=1)).max() <= 1e-12


def test_state_dependent_rows_sum_to_zero(rng):
    entries = {(1, 2): Poly.linear(1.0, [0.5, 0.0]), (2, 1): lambda x: 2 + np.sin(x[1]),
               (2, 3): 0.5, (3, 1): Poly.linear(0.1, [0.0, 1.0])}
    law = SwitchLaw.state_dependent(3, entries, 100.0)
    for x in rng.uniform(0, 10, (1000, 2)):
        assert np.abs(law.rates(x).sum(axis=1)).max() <= 1e-12


def test_validate_lv2_gauge():
    rep = validate(LV2)
    assert rep.ok
    assert rep.ratio_bound == pytest.approx(1.0)


def test_validate_single1d_ratio_bound():
    rep = validate(fam.single_1d(**fam.FIG1))
    assert rep.gauge_present and rep.ratio_ok
    assert rep.ratio_bound == pytest.approx(2.0)
    assert rep.ok


def test_validate_reports_reducible_chain():
    m = fam.single_1d(**fam.FIG1)
    from dataclasses import replace
    bad = replace(m, switch=SwitchLaw.constant([[0.0, 1.0], [0.0, 0.0]]))
    rep = validate(bad)
    assert not rep.irreducible
    assert not rep.ok


@pytest.mark.parametrize("model", all_family_models(), ids=lambda m: m.family)
def test_builtin_families_validate(model):
    assert validate(model).ok


def test_validate_without_gauge_warns():
    from dataclasses import replace
    m = replace(LV2, gauge=None)
    with pytest.warns(UserWarning):
        rep = validate(m)
    assert rep.ok and not rep.gauge_present


def test_gauge_ratio_bound_from_weights():
    g = GaugeFunction("sqrt", (1.0, 0.5), (1.0,))
    assert g.ratio_bound == 2.0


def test_restrict_predprey_prey_axis():
    face = restrict(PP, [1])
    p = PP.param_dict
    assert face.n == 1 and face.labels == (1,)
    for k in (1, 2):
        for x in (0.3, 1.7):
            assert face.fitness([x], k)[0] == pytest.approx(p[f"a1_{k}"] - p[f"b1_{k}"] * x)


def test_restrict_to_origin():
    face = restrict(PP, [])
    assert face.n == 0
    assert face.fitness(np.zeros(0), 1).shape == (0,)


def test_restrict_full_set_is_identity():
    assert restrict(LV3, [1, 2, 3]) is LV3


def test_restrict_lv3_pair_drops_third_column(rng):
    face = restrict(LV3, SubspaceIndex({1, 2}, 3))
    for _ in range(10):
        y = rng.uniform(0, 3, 2)
        x = np.array([y[0], y[1], 0.0])
        for k in (1, 2):
            np.testing.assert_allclose(face.fitness(y, k), LV3.fitness(x, k)[:2])


@given(st.sets(st.integers(1, 3)), st.sets(st.integers(1, 3)))
def test_restrict_composes(a, b):
    two = restrict(restrict(LV3, a), b)
    one = restrict(LV3, a & b)
    assert two.labels == one.labels
    for f2, f1 in zip(two.fields, one.fields):
        assert [p.terms for p in f2.fitness] == [p.terms for p in f1.fitness]


def test_family_parameter_checks():
    p = dict(PP.param_dict)
    p["c1_1"] = -1.0
    with pytest.raises(ModelError):
        fam.pred_prey(**p)
    with pytest.raises(ModelError):
        fam.single_1d(0.5, 1.0, 0.05, -1.0, 2.0)
    with pytest.raises(ModelError):
        fam.from_params("LV2Comp", {"a1_1": 1.0})


def test_fingerprint_depends_on_parameters():
    a = fam.single_1d(**fam.FIG1)
    b = fam.single_1d(**dict(fam.FIG1, q12=2.5))
    assert a.fingerprint() == fam.single_1d(**fam.FIG1).fingerprint()
    assert a.fingerprint() != b.fingerprint()
