"""Sparse multivariate polynomials with exact differentiation.

Fitness functions, drift fields and their Lie brackets are all polynomial
for the model families handled here, so every Jacobian and bracket can be
formed exactly instead of by finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

Monomial = tuple[int, ...]


def _canon(terms: Mapping[Monomial, float]) -> tuple[tuple[Monomial, float], ...]:
    return tuple(sorted((m, float(c)) for m, c in terms.items() if c != 0.0))


@dataclass(frozen=True)
class Poly:
    """Polynomial in ``nvars`` variables, stored as sorted (exponents, coef) pairs."""

    nvars: int
    terms: tuple[tuple[Monomial, float], ...] = ()

    @classmethod
    def from_dict(cls, nvars: int, terms: Mapping[Monomial, float]) -> "Poly":
        acc: dict[Monomial, float] = {}
        for m, c in terms.items():
            m = tuple(int(e) for e in m)
            if len(m) != nvars or any(e < 0 for e in m):
                raise ValueError(f"bad monomial {m} for {nvars} variables")
            acc[m] = acc.get(m, 0.0) + float(c)
        return cls(nvars, _canon(acc))

    @classmethod
    def constant(cls, nvars: int, c: float) -> "Poly":
        return cls.from_dict(nvars, {(0,) * nvars: c})

    @classmethod
    def linear(cls, intercept: float, slopes: Iterable[float]) -> "Poly":
        """``intercept + sum_j slopes[j] * x_j``."""
        slopes = list(slopes)
        n = len(slopes)
        d = {(0,) * n: intercept}
        for j, s in enumerate(slopes):
            e = [0] * n
            e[j] = 1
            d[tuple(e)] = s
        return cls.from_dict(n, d)

    @classmethod
    def variable(cls, nvars: int, j: int) -> "Poly":
        e = [0] * nvars
        e[j] = 1
        return cls.from_dict(nvars, {tuple(e): 1.0})

    def as_dict(self) -> dict[Monomial, float]:
        return dict(self.terms)

    @property
    def degree(self) -> int:
        return max((sum(m) for m, _ in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, mono: Monomial) -> float:
        return self.as_dict().get(tuple(mono), 0.0)

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        total = 0.0
        for m, c in self.terms:
            v = c
            for xj, e in zip(x, m):
                if e:
                    v *= xj**e
            total += v
        return total

    def evaluate_many(self, xs) -> np.ndarray:
        """Values at every row of ``xs`` (shape ``(N, nvars)``)."""
        xs = np.asarray(xs, dtype=float)
        out = np.zeros(xs.shape[0])
        for m, c in self.terms:
            v = np.full(xs.shape[0], c)
            for j, e in enumerate(m):
                if e:
                    v = v * xs[:, j] ** e
            out += v
        return out

    def __add__(self, other: "Poly") -> "Poly":
        d = self.as_dict()
        for m, c in other.terms:
            d[m] = d.get(m, 0.0) + c
        return Poly(self.nvars, _canon(d))

    def __neg__(self) -> "Poly":
        return Poly(self.nvars, tuple((m, -c) for m, c in self.terms))

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            return Poly(self.nvars, _canon({m: c * float(other) for m, c in self.terms}))
        d: dict[Monomial, float] = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                m = tuple(a + b for a, b in zip(m1, m2))
                d[m] = d.get(m, 0.0) + c1 * c2
        return Poly(self.nvars, _canon(d))

    __rmul__ = __mul__

    def diff(self, j: int) -> "Poly":
        d: dict[Monomial, float] = {}
        for m, c in self.terms:
            if m[j]:
                mm = list(m)
                mm[j] -= 1
                d[tuple(mm)] = d.get(tuple(mm), 0.0) + c * m[j]
        return Poly(self.nvars, _canon(d))

    def set_zero(self, zero_vars: Iterable[int]) -> "Poly":
        """Substitute ``x_j = 0`` for every ``j`` in ``zero_vars``."""
        z = set(zero_vars)
        return Poly(self.nvars, tuple((m, c) for m, c in self.terms
                                      if not any(m[j] for j in z)))

    def select(self, keep: Iterable[int]) -> "Poly":
        """Drop every variable not in ``keep`` (which must not appear)."""
        keep = list(keep)
        dropped = [j for j in range(self.nvars) if j not in keep]
        for m, _ in self.terms:
            if any(m[j] for j in dropped):
                raise ValueError("polynomial depends on a dropped variable")
        return Poly.from_dict(len(keep), {tuple(m[j] for j in keep): c for m, c in self.terms})

    def embed(self, nvars: int, positions: Iterable[int]) -> "Poly":
        """Re-express in ``nvars`` variables; variable ``i`` becomes ``positions[i]``."""
        pos = list(positions)
        d = {}
        for m, c in self.terms:
            e = [0] * nvars
            for i, p in enumerate(pos):
                e[p] = m[i]
            d[tuple(e)] = c
        return Poly.from_dict(nvars, d)


class PolyField:
    """Polynomial vector field ``V(x) = (V_1(x), ..., V_n(x))``."""

    def __init__(self, comps: Iterable[Poly]):
        self.comps = tuple(comps)
        self.n = len(self.comps)

    def __call__(self, x) -> np.ndarray:
        return np.array([p(x) for p in self.comps])

    def __sub__(self, other: "PolyField") -> "PolyField":
        return PolyField(a - b for a, b in zip(self.comps, other.comps))

    def __add__(self, other: "PolyField") -> "PolyField":
        return PolyField(a + b for a, b in zip(self.comps, other.comps))

    def jacobian_polys(self) -> list[list[Poly]]:
        return [[p.diff(j) for j in range(self.n)] for p in self.comps]

    def jacobian(self, x) -> np.ndarray:
        return np.array([[q(x) for q in row] for row in self.jacobian_polys()])

    def bracket(self, other: "PolyField") -> "PolyField":
        """``[self, other] = D(other) self - D(self) other``, formed symbolically."""
        dw = other.jacobian_polys()
        dv = self.jacobian_polys()
        comps = []
        for i in range(self.n):
            acc = Poly(self.comps[0].nvars)
            for j in range(self.n):
                acc = acc + dw[i][j] * self.comps[j] - dv[i][j] * other.comps[j]
            comps.append(acc)
        return PolyField(comps)

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.comps)


def parse_monomial(text: str, nvars: int) -> Monomial:
    """Parse ``"1"``, ``"x1"``, ``"x1^2*x3"`` into an exponent tuple (1-based names)."""
    e = [0] * nvars
    text = text.replace(" ", "")
    if text in ("1", ""):
        return tuple(e)
    for factor in text.split("*"):
        if not factor.startswith("x"):
            raise ValueError(f"bad monomial factor {factor!r}")
        base, _, power = factor[1:].partition("^")
        j = int(base) - 1
        if not 0 <= j < nvars:
            raise ValueError(f"variable x{base} out of range 1..{nvars}")
        e[j] += int(power) if power else 1
    return tuple(e)


def format_monomial(m: Monomial) -> str:
    parts = [f"x{j + 1}" + (f"^{e}" if e > 1 else "") for j, e in enumerate(m) if e]
    return "*".join(parts) if parts else "1"
