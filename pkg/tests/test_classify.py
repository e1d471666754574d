import dataclasses
import json

import numpy as np
import pytest
from scipy.optimize import linprog
from hypothesis import given
from hypothesis import strategies as st

from pdmpkit import families as fam
from pdmpkit.analytic import stationary_switch
from pdmpkit.classify import (MethodConfig, classify, closed_form_face, invasion_table,
                              minmax_weights)
from pdmpkit.model import ModelError

from helpers import CHAIN, LV2, LV3, PP


@pytest.fixture(scope="module")
def fig_verdicts():
    return {name: classify(fam.figure_model(name)) for name in ("fig1", "fig2a", "fig2b", "fig3b")}


def test_minmax_single_row():
    p, rho = minmax_weights([[1.0]])
    np.testing.assert_allclose(p, [1.0])
    assert rho == 1.0


def test_minmax_two_rows_balanced():
    p, rho = minmax_weights([[-1.0, 2.0], [2.0, -1.0]])
    np.testing.assert_allclose(p, [0.5, 0.5], atol=1e-12)
    assert rho == pytest.approx(0.5)


def test_minmax_infeasible():
    assert minmax_weights([[-1.0, -1.0]]) is None


def test_minmax_empty_and_lp_path():
    p, rho = minmax_weights(np.zeros((0, 2)))
    assert rho == np.inf and p.sum() == pytest.approx(1.0)
    lam = np.eye(4) - 0.1
    p, rho = minmax_weights(lam)
    np.testing.assert_allclose(p, 0.25, atol=1e-6)
    assert rho == pytest.approx(0.15, abs=1e-6)


@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6), st.floats(0.1, 10))
def test_minmax_scaling_invariance(vals, c):
    lam = np.reshape(vals, (3, 2))
    a, b = minmax_weights(lam), minmax_weights(c * lam)
    if a is None or b is None:
        # feasibility only flips on exact ties at zero
        other = b if a is None else a
        assert other is None or other[1] < 1e-12 * max(c, 1.0)
        return
    assert b[1] == pytest.approx(c * a[1], rel=1e-9)
    # ties aside, each argmax is optimal for both problems
    assert np.min(lam @ b[0]) == pytest.approx(a[1], rel=1e-9)


def _lp_optimum(lam):
    n = lam.shape[1]
    res = linprog(np.r_[np.zeros(n), -1.0], A_ub=np.column_stack([-lam, np.ones(len(lam))]),
                  b_ub=np.zeros(len(lam)), A_eq=[np.r_[np.ones(n), 0.0]], b_eq=[1.0],
                  bounds=[(0, 1)] * n + [(None, None)], method="highs")
    return -res.fun


@given(st.lists(st.floats(-3, 3), min_size=9, max_size=9))
def test_minmax_grid_near_lp_optimum(vals):
    lam = np.reshape(vals, (3, 3))
    best = _lp_optimum(lam)
    got = minmax_weights(lam)
    if got is None:
        assert best <= 2 * np.abs(lam).max() / 200 + 1e-12
        return
    p, rho = got
    assert p.min() > 0 and p.sum() == pytest.approx(1.0)
    assert np.min(lam @ p) == pytest.approx(rho)
    assert rho <= best + 1e-12
    assert rho >= best - 2 * np.abs(lam).max() / 200


def test_fig1_table_rows(fig_verdicts):
    t = fig_verdicts["fig1"].table
    origin, axis = t.row([]), t.row([1])
    assert origin.method == "PointMass" and origin.lambdas[0] == pytest.approx(0.75, abs=1e-12)
    assert axis.exists and axis.method == "Density" and axis.note == "CaseI"
    assert axis.lambdas[0] == pytest.approx(0.0, abs=1e-8)


def test_figure_verdicts(fig_verdicts):
    assert fig_verdicts["fig1"].outcome == "PersistAll"
    assert fig_verdicts["fig1"].unique_measure
    assert fig_verdicts["fig2b"].outcome == "PersistAll"
    v = fig_verdicts["fig2a"]
    assert v.outcome == "ExtinctionTo" and v.extinction_sets == [frozenset()]
    assert v.attractors[0].probability == "one"
    assert v.attractors[0].exterior[1] == pytest.approx(0.5 * 0.5 - 0.505 * 0.5)


def test_fig3b_second_species_dies_on_first_axis(fig_verdicts):
    v = fig_verdicts["fig3b"]
    assert v.outcome == "ExtinctionTo"
    assert frozenset({1}) in v.extinction_sets
    row = v.table.row([1])
    assert row.method == "Density" and row.lambdas[1] < 0
    assert not v.table.row([1, 2]).exists


def test_single1d_extinction_slope():
    m = fam.single_1d(a1_1=0.5, a1_2=-1.5, b1_2=0.05, q12=2.0, q21=2.0)
    v = classify(m)
    assert v.outcome == "ExtinctionTo" and v.extinction_sets == [frozenset()]
    assert v.attractors[0].exterior[1] == pytest.approx(-0.5)
    assert "accessible" in v.attractors[0].qualifiers[0]


def test_predprey_predator_axis_empty():
    t = invasion_table(PP)
    p = PP.param_dict
    nu = stationary_switch([[-p["q12"], p["q12"]], [p["q21"], -p["q21"]]])
    assert t.row([]).lambdas[1] == pytest.approx(-(p["a2_1"] * nu[0] + p["a2_2"] * nu[1]))
    assert not t.row([2]).exists
    assert classify(PP, table=t).outcome == "PersistAll"


def _swap(model):
    out = {}
    for key, val in model.param_dict.items():
        if key in ("q12", "q21"):
            out["q21" if key == "q12" else "q12"] = val
        elif key.endswith("_1"):
            out[key[:-2] + "_2"] = val
        elif key.endswith("_2"):
            out[key[:-2] + "_1"] = val
        else:
            out[key] = val
    return fam.from_params(model.family, out)


@pytest.mark.parametrize("model", [LV2, PP], ids=lambda m: m.family)
def test_relabeling_invariance(model):
    a, b = classify(model), classify(_swap(model))
    assert a.describe() == b.describe()
    for r, s in zip(a.table.rows, b.table.rows):
        assert r.subspace == s.subspace and r.exists == s.exists and r.method == s.method
        if not r.exists:
            continue
        if r.method == "MonteCarlo":
            band = 3 * np.hypot(r.se, s.se)
            assert np.all(np.abs(r.lambdas - s.lambdas) <= band)
        else:
            np.testing.assert_allclose(r.lambdas, s.lambdas, atol=1e-8)


@pytest.mark.parametrize("model", [fam.figure_model("fig1"), LV2, PP, LV3, CHAIN,
                                   fam.figure_model("fig3b")], ids=lambda m: m.family)
def test_self_consistency(model):
    t = invasion_table(model)
    for r in t.existing(boundary_only=False):
        for i in r.subspace.members:
            if r.method == "MonteCarlo":
                assert abs(r.lambdas[i - 1]) <= 3 * r.se[i - 1] + 1e-3
            else:
                assert r.lambdas[i - 1] == pytest.approx(0.0, abs=1e-7)


def test_chain_rate_formula():
    p = CHAIN.param_dict
    t = invasion_table(CHAIN)
    lam1 = t.row([]).lambdas[0]
    assert lam1 == pytest.approx(0.5 * (p["a10_1"] + p["a10_2"]))
    lam2 = t.row([1]).lambdas[1]
    assert lam2 == pytest.approx(p["a21"] * lam1 / p["a11"] - p["a20"], abs=1e-9)


def test_closed_form_face_lookup():
    d = closed_form_face(fam.figure_model("fig3b"), 1)
    assert d is not None and sum(d.masses) == pytest.approx(1.0, abs=1e-8)


def test_custom_model_needs_faces():
    m = dataclasses.replace(PP, family="Custom")
    with pytest.raises(ModelError):
        invasion_table(m)
    t = invasion_table(m, MethodConfig(faces=((1,), (1, 2))))
    assert [sorted(r.subspace.members) for r in t.rows] == [[], [1], [1, 2]]


def test_verdict_json(tmp_path, fig_verdicts):
    v = fig_verdicts["fig3b"]
    v.to_json(tmp_path / "v.json")
    doc = json.loads((tmp_path / "v.json").read_text())
    assert doc["outcome"] == "ExtinctionTo"
    assert [1] in [a["subspace"] for a in doc["attractors"]]
    assert doc["fingerprint"] == fam.figure_model("fig3b").fingerprint()
    assert len(doc["table"]["rows"]) == 4
