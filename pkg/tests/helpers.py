"""Shared model configurations for the tests."""
from pdmpkit import families as fam

LV2 = fam.lv2_comp(a1_1=2.0, a1_2=1.5, b1_1=1.0, b1_2=1.2, c1_1=0.4, c1_2=0.5,
                   a2_1=1.8, a2_2=2.2, b2_1=1.1, b2_2=0.9, c2_1=0.5, c2_2=0.3, q12=1.0, q21=2.0)
PP = fam.pred_prey(a1_1=1.0, a1_2=2.0, b1_1=1.0, b1_2=1.0, c1_1=1.0, c1_2=1.0,
                   a2_1=0.5, a2_2=0.5, b2_1=0.1, b2_2=0.1, c2_1=1.0, c2_2=1.0, q12=1.0, q21=1.0)
LV3 = fam.lv3_comp(**{f"{s}{i}_{k}": {"a": 2.0, "b": 1.0, "c": 0.3, "d": 0.4}[s]
                      * (1 + 0.2 * (k - 1) * (s == "a"))
                      for s in "abcd" for i in (1, 2, 3) for k in (1, 2)}, q12=1.0, q21=2.0)
CHAIN = fam.food_chain(3, a10_1=1.5, a10_2=0.5, a11=2.0, a12=1.0, a21=1.0, a20=0.25,
                       a22=0.5, a23=0.5, a32=0.5, a30=0.1, a33=0.5, q12=1.0, q21=1.0)


def all_family_models():
    return [fam.single_1d(**fam.FIG1), LV2, PP, fam.expl_2d(**fam.FIG3A), LV3, CHAIN]
