"""Built-in model families.

Parameters use flat names: ``a{i}_{k}`` is the intercept of species ``i``
in environment ``k`` (likewise ``b``, ``c``, ``d``), ``q12``/``q21`` are
the two-state switching rates. Food chains use ``a{i}0_{k}`` for
intercepts and ``a{i}{j}`` for the constant interaction coefficients.
"""
from __future__ import annotations

from typing import Mapping

from .model import EnvironmentField, GaugeFunction, ModelError, ModelSpec, SwitchLaw
from .polynomial import Poly

# required parameter names per family (two environments)
REQUIRED = {
    "Single1D": ("a1_1", "a1_2", "b1_2"),
    "LV2Comp": tuple(f"{s}{i}_{k}" for s in "abc" for i in (1, 2) for k in (1, 2)),
    "PredPrey": tuple(f"{s}{i}_{k}" for s in "abc" for i in (1, 2) for k in (1, 2)),
    "Expl2D": ("a1_1", "a2_1") + tuple(f"{s}{i}_2" for s in "abc" for i in (1, 2)),
    "LV3Comp": tuple(f"{s}{i}_{k}" for s in "abcd" for i in (1, 2, 3) for k in (1, 2)),
}
POSITIVE = {
    "PredPrey": REQUIRED["PredPrey"],
    "LV3Comp": REQUIRED["LV3Comp"],
}
FAMILY_ALIASES = {
    "single1d": "Single1D", "lv2comp": "LV2Comp", "predprey": "PredPrey",
    "expl2d": "Expl2D", "lv3comp": "LV3Comp", "foodchain": "FoodChain", "custom": "Custom",
}


def _get(p: Mapping[str, float], key: str) -> float:
    try:
        return float(p[key])
    except KeyError:
        raise ModelError(f"missing parameter {key!r}") from None


def _switch(p: Mapping[str, float]) -> SwitchLaw:
    q12, q21 = _get(p, "q12"), _get(p, "q21")
    if q12 < 0 or q21 < 0:
        raise ModelError("switching rates must be nonnegative")
    return SwitchLaw.two_state(q12, q21)


def _check(family: str, p: Mapping[str, float]) -> None:
    for key in REQUIRED.get(family, ()):
        _get(p, key)
    for key in POSITIVE.get(family, ()):
        if not p[key] > 0:
            raise ModelError(f"{family} requires {key} > 0")


def _freeze(p: Mapping[str, float]) -> tuple[tuple[str, float], ...]:
    return tuple(sorted((k, float(v)) for k, v in p.items()))


def single_1d(a1_1: float, a1_2: float, b1_2: float, q12: float, q21: float,
              alpha: float | None = None, beta: float | None = None) -> ModelSpec:
    """One species: linear growth ``a1_1`` in environment 1, logistic in environment 2."""
    p = dict(a1_1=a1_1, a1_2=a1_2, b1_2=b1_2, q12=q12, q21=q21)
    # gauge defaults (alpha 1, beta 1/2) are applied by the builder
    p.update({k: v for k, v in (("alpha", alpha), ("beta", beta)) if v is not None})
    return from_params("Single1D", p)


def lv2_comp(**p) -> ModelSpec:
    return from_params("LV2Comp", p)


def pred_prey(**p) -> ModelSpec:
    return from_params("PredPrey", p)


def expl_2d(**p) -> ModelSpec:
    return from_params("Expl2D", p)


def lv3_comp(**p) -> ModelSpec:
    return from_params("LV3Comp", p)


def food_chain(n: int, **p) -> ModelSpec:
    return from_params("FoodChain", dict(p, n=n))


def from_params(family: str, p: Mapping[str, float]) -> ModelSpec:
    family = FAMILY_ALIASES.get(family.lower(), family)
    p = {k: float(v) for k, v in p.items()}
    if family == "FoodChain":
        return _food_chain(p)
    if family not in REQUIRED:
        raise ModelError(f"unknown built-in family {family!r}")
    _check(family, p)
    builder = {
        "Single1D": _single_1d,
        "LV2Comp": _lv2,
        "PredPrey": _pp,
        "Expl2D": _expl,
        "LV3Comp": _lv3,
    }[family]
    fields, gauge = builder(p)
    return ModelSpec(len(fields[0].fitness), 2, fields, _switch(p), gauge, family, _freeze(p))


def _single_1d(p):
    alpha, beta = p.get("alpha", 1.0), p.get("beta", 0.5)
    if not (alpha > 0 and 0 < beta < 1):
        raise ModelError("Single1D gauge needs alpha > 0 and 0 < beta < 1")
    if p["a1_1"] <= 0 or p["b1_2"] <= 0 or p["a1_2"] == 0:
        raise ModelError("Single1D requires a1_1 > 0, b1_2 > 0 and a1_2 != 0")
    f1 = EnvironmentField((Poly.linear(p["a1_1"], [0.0]),))
    f2 = EnvironmentField((Poly.linear(p["a1_2"], [-p["b1_2"]]),))
    return (f1, f2), GaugeFunction("sqrt", (alpha, alpha * beta), (1.0,))


def _lv2(p):
    fields = []
    for k in (1, 2):
        fields.append(EnvironmentField((
            Poly.linear(p[f"a1_{k}"], [-p[f"b1_{k}"], -p[f"c1_{k}"]]),
            Poly.linear(p[f"a2_{k}"], [-p[f"c2_{k}"], -p[f"b2_{k}"]]),
        )))
    alpha = (p.get("alpha_1", 1.0), p.get("alpha_2", 1.0))
    return tuple(fields), GaugeFunction("linear", alpha, (1.0, 1.0))


def _pp(p):
    fields = []
    for k in (1, 2):
        fields.append(EnvironmentField((
            Poly.linear(p[f"a1_{k}"], [-p[f"b1_{k}"], -p[f"c1_{k}"]]),
            Poly.linear(-p[f"a2_{k}"], [p[f"c2_{k}"], -p[f"b2_{k}"]]),
        )))
    # predator weight cancels the cross terms of sum_i w_i x_i f_i
    w2 = min(p["c1_1"] / p["c2_1"], p["c1_2"] / p["c2_2"])
    alpha = (p.get("alpha_1", 1.0), p.get("alpha_2", 1.0))
    return tuple(fields), GaugeFunction("linear", alpha, (1.0, w2))


def _expl(p):
    f1 = EnvironmentField((Poly.linear(p["a1_1"], [0.0, 0.0]),
                           Poly.linear(p["a2_1"], [0.0, 0.0])))
    f2 = EnvironmentField((
        Poly.linear(p["a1_2"], [-p["b1_2"], -p["c1_2"]]),
        Poly.linear(p["a2_2"], [-p["c2_2"], -p["b2_2"]]),
    ))
    alpha, beta = p.get("alpha", 1.0), p.get("beta", 0.5)
    return (f1, f2), GaugeFunction("sqrt", (alpha, alpha * beta), (1.0, 1.0))


def _lv3(p):
    fields = []
    for k in (1, 2):
        a = [p[f"a{i}_{k}"] for i in (1, 2, 3)]
        b = [p[f"b{i}_{k}"] for i in (1, 2, 3)]
        c = [p[f"c{i}_{k}"] for i in (1, 2, 3)]
        d = [p[f"d{i}_{k}"] for i in (1, 2, 3)]
        fields.append(EnvironmentField((
            Poly.linear(a[0], [-b[0], -c[0], -d[0]]),
            Poly.linear(a[1], [-d[1], -b[1], -c[1]]),
            Poly.linear(a[2], [-c[2], -d[2], -b[2]]),
        )))
    alpha = (p.get("alpha_1", 1.0), p.get("alpha_2", 1.0))
    return tuple(fields), GaugeFunction("linear", alpha, (1.0, 1.0, 1.0))


def _food_chain(p):
    n = int(p.get("n", 0))
    if n < 2 or n > 9:
        raise ModelError("FoodChain needs 2 <= n <= 9")
    n0 = 1
    while f"a10_{n0 + 1}" in p:
        n0 += 1
    keys = set(p) - {"n", "alpha"}
    if n0 == 1 and "a10_1" not in p:
        raise ModelError("missing parameter 'a10_1'")

    def coef(i, j):
        key = f"a{i}{j}"
        keys.discard(key)
        return p.get(key, 0.0)

    fields = []
    for k in range(1, n0 + 1):
        comps = []
        for i in range(1, n + 1):
            slopes = [0.0] * n
            if i == 1:
                intercept = _get(p, f"a10_{k}")
            else:
                key = f"a{i}0_{k}" if f"a{i}0_{k}" in p else f"a{i}0"
                intercept = -_get(p, key)
            slopes[i - 1] = -coef(i, i)
            if i > 1:
                slopes[i - 2] = coef(i, i - 1)
            if i < n:
                slopes[i] = -coef(i, i + 1)
            comps.append(Poly.linear(intercept, slopes))
        fields.append(EnvironmentField(tuple(comps)))
    for i in range(1, n + 1):
        for k in range(1, n0 + 1):
            keys.discard(f"a{i}0_{k}")
        keys.discard(f"a{i}0")
    qkeys = {k for k in keys if k.startswith("q")}
    keys -= qkeys
    if keys:
        raise ModelError(f"unknown FoodChain parameters {sorted(keys)}")
    if n0 == 2:
        switch = _switch(p)
    else:
        q = [[p.get(f"q{i}{j}", 0.0) if i != j else 0.0 for j in range(1, n0 + 1)]
             for i in range(1, n0 + 1)]
        switch = SwitchLaw.constant(q)
    # weights cancelling the predation cross terms
    w = [1.0]
    for i in range(2, n + 1):
        up, down = p.get(f"a{i - 1}{i}", 0.0), p.get(f"a{i}{i - 1}", 0.0)
        w.append(w[-1] * (up / down if up > 0 and down > 0 else 1.0))
    gauge = GaugeFunction("linear", (p.get("alpha", 1.0),) * n0, tuple(w))
    return ModelSpec(n, n0, tuple(fields), switch, gauge, "FoodChain", _freeze(p))


# reference configurations from the figures

FIG1 = dict(a1_1=0.5, a1_2=1.0, b1_2=0.05, q12=2.0, q21=2.0)
FIG2A = dict(a1_1=0.5, a1_2=-0.505, b1_2=0.05, q12=2.0, q21=2.0)
FIG2B = dict(a1_1=0.5, a1_2=0.45, b1_2=0.05, q12=2.0, q21=2.0)
FIG3A = dict(a1_1=1.0, a2_1=0.5, a1_2=1.0, b1_2=0.75, c1_2=0.05,
             a2_2=4.0, b2_2=0.25, c2_2=0.025, q12=2.0, q21=2.0)
FIG3B = dict(a1_1=0.95, a2_1=1.0, a1_2=80.0 / 9.0, b1_2=8.0, c1_2=7.5,
             a2_2=10.0, b2_2=8.0, c2_2=10.0, q12=2.0, q21=2.0)


def figure_model(name: str) -> ModelSpec:
    name = name.lower()
    if name == "fig1":
        return single_1d(**FIG1)
    if name == "fig2a":
        return single_1d(**FIG2A)
    if name == "fig2b":
        return single_1d(**FIG2B)
    if name == "fig3a":
        return expl_2d(**FIG3A)
    if name == "fig3b":
        return expl_2d(**FIG3B)
    raise ModelError(f"unknown figure {name!r}")
