"""Lie brackets of the environment drifts and the spanning (bracket) condition.

Brackets follow ``[V, W](x) = DW(x) V(x) - DV(x) W(x)``. Drift fields of
polynomial models are bracketed exactly; arbitrary callables go through
central differences.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

import numpy as np
from scipy.linalg import qr

from .model import ModelSpec
from .polynomial import PolyField

Field = Union[int, PolyField, Callable[[np.ndarray], np.ndarray]]


def _as_field(model: ModelSpec | None, v: Field):
    if isinstance(v, (int, np.integer)):
        if model is None:
            raise ValueError("environment index given without a model")
        model._check_env(int(v))
        return model.fields[int(v) - 1].drift_field()
    return v


def fd_jacobian(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian with step ``1e-6 (1 + |x|)``."""
    x = np.asarray(x, dtype=float)
    h = 1e-6 * (1.0 + np.linalg.norm(x))
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(func(x + e)) - np.asarray(func(x - e))) / (2 * h))
    return np.column_stack(cols) if cols else np.zeros((0, 0))


def lie_bracket(model: ModelSpec | None, v: Field, w: Field, x, method: str = "auto") -> np.ndarray:
    """``[V, W](x)``; ``v`` and ``w`` are environment indices, polynomial fields or callables."""
    x = np.asarray(x, dtype=float)
    V, W = _as_field(model, v), _as_field(model, w)
    if method == "auto":
        method = "analytic" if isinstance(V, PolyField) and isinstance(W, PolyField) else "fd"
    if method == "analytic":
        return V.bracket(W)(x)
    if method != "fd":
        raise ValueError(f"unknown bracket method {method!r}")
    dv, dw = fd_jacobian(V, x), fd_jacobian(W, x)
    return dw @ np.asarray(V(x)) - dv @ np.asarray(W(x))


@dataclass
class BracketBasis:
    point: np.ndarray
    vectors: np.ndarray
    names: list[str]
    depth: int
    rank: int
    tol: float
    det: dict[str, float] = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.rank == self.point.size

    def to_dict(self) -> dict:
        return {
            "point": self.point.tolist(),
            "depth": self.depth,
            "rank": self.rank,
            "holds": self.holds,
            "tolerance": self.tol,
            "vectors": {n: v.tolist() for n, v in zip(self.names, self.vectors)},
            "det": self.det,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def numerical_rank(vectors: np.ndarray, rel_tol: float = 1e-9) -> tuple[int, float]:
    """Rank from pivoted QR, counting ``|R_ii| > rel_tol * max column norm``."""
    if vectors.size == 0:
        return 0, 0.0
    a = np.asarray(vectors, dtype=float).T
    scale = float(np.linalg.norm(a, axis=0).max())
    if scale == 0:
        return 0, 0.0
    _, r, _ = qr(a, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    tol = rel_tol * scale
    return int(np.sum(d > tol)), tol


def bracket_span_rank(model: ModelSpec, x, depth: int = 3, rel_tol: float = 1e-9) -> BracketBasis:
    """Rank of ``{G^i - G^j}`` and its iterated brackets with the drifts at ``x``.

    Level 0 holds the pairwise differences; level ``m`` adds ``[G^i, V]`` for
    every ``V`` new at level ``m - 1``. Stops early once the span is full.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    x = np.asarray(x, dtype=float)
    n = model.n
    drifts = [fld.drift_field() for fld in model.fields]
    level = []
    for i in range(model.n0):
        for j in range(i + 1, model.n0):
            level.append((f"G{i + 1}-G{j + 1}", drifts[i] - drifts[j]))
    names = [nm for nm, _ in level]
    vecs = [f(x) for _, f in level]
    used = 0
    rank, tol = numerical_rank(np.array(vecs).reshape(-1, n))
    for m in range(1, depth + 1):
        if rank == n:
            break
        nxt = []
        for nm, f in level:
            for i in range(model.n0):
                b = drifts[i].bracket(f)
                if b.is_zero():
                    continue
                nxt.append((f"[G{i + 1},{nm}]", b))
        if not nxt:
            break
        level = nxt
        used = m
        names += [nm for nm, _ in level]
        vecs += [f(x) for _, f in level]
        rank, tol = numerical_rank(np.array(vecs).reshape(-1, n))
    arr = np.array(vecs).reshape(-1, n)
    return BracketBasis(x, arr, names, used, rank, tol)


# --------------------------------------------------------------------------
# closed-form determinants for the two-species families


def _p(params: Mapping[str, float], key: str) -> float:
    return float(params[key])


def pp_detM(params: Mapping[str, float], x) -> float:
    """``det[V(1)-V(2), [V(1), V(1)-V(2)]] = D x1^2 x2 + E x1 x2^2`` for predator-prey."""
    x1, x2 = map(float, x)
    a1 = [_p(params, f"a1_{k}") for k in (1, 2)]
    b1 = [_p(params, f"b1_{k}") for k in (1, 2)]
    c1 = [_p(params, f"c1_{k}") for k in (1, 2)]
    a2 = [_p(params, f"a2_{k}") for k in (1, 2)]
    b2 = [_p(params, f"b2_{k}") for k in (1, 2)]
    c2 = [_p(params, f"c2_{k}") for k in (1, 2)]
    A1 = [a1[k] - b1[k] * x1 - c1[k] * x2 for k in (0, 1)]
    A2 = [-a2[k] - b2[k] * x2 + c2[k] * x1 for k in (0, 1)]
    D = (-c2[1] * ((A1[0] - A1[1] / 2) ** 2 + (b1[0] / c2[1]) * (A2[1] - A2[0]) * A1[1] - (A1[1] / 2) ** 2)
         - c2[0] * ((A1[1] - A1[0] / 2) ** 2 + (b1[1] / c2[0]) * (A2[0] - A2[1]) * A1[0] - (A1[0] / 2) ** 2))
    E = (-c1[1] * ((A2[0] - A2[1] / 2) ** 2 + (b2[0] / c1[1]) * (A1[0] - A1[1]) * A2[1] - (A2[1] / 2) ** 2)
         - c1[0] * ((A2[1] - A2[0] / 2) ** 2 + (b2[1] / c1[0]) * (A1[1] - A1[0]) * A2[0] - (A2[0] / 2) ** 2))
    return D * x1**2 * x2 + E * x1 * x2**2


def expl2d_coefficients(params: Mapping[str, float]) -> tuple[float, float, float]:
    """``(A1, A2, B)`` of the explosive two-species determinant."""
    a11, a21 = _p(params, "a1_1"), _p(params, "a2_1")
    a12, a22 = _p(params, "a1_2"), _p(params, "a2_2")
    b1, b2 = _p(params, "b1_2"), _p(params, "b2_2")
    c1, c2 = _p(params, "c1_2"), _p(params, "c2_2")
    A1 = (a11 - a12) * a21 * b2 - a21 * c1 * (a21 - a22)
    A2 = (a11 - a12) * a11 * c2 - a11 * b1 * (a21 - a22)
    B = (a21 - a11) * b1 * b2 + (a11 - a21) * c1 * c2
    return A1, A2, B


def expl2d_detM(params: Mapping[str, float], x) -> float:
    """``B x1^2 x2^2 + A1 x1 x2^2 + A2 x1^2 x2``."""
    x1, x2 = map(float, x)
    A1, A2, B = expl2d_coefficients(params)
    return B * x1**2 * x2**2 + A1 * x1 * x2**2 + A2 * x1**2 * x2


def direct_detM(model: ModelSpec, x) -> float:
    """Determinant of ``[G1 - G2, [G1, G1 - G2]]`` formed from the model's own fields."""
    if model.n != 2 or model.n0 != 2:
        raise ValueError("direct determinant needs two species and two environments")
    x = np.asarray(x, dtype=float)
    g1, g2 = (fld.drift_field() for fld in model.fields)
    diff = g1 - g2
    return float(np.linalg.det(np.column_stack([diff(x), g1.bracket(diff)(x)])))
