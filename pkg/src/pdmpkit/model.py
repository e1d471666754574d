"""Kolmogorov PDMP models: fitness tables, switching laws, gauge functions.

Environment and species labels are 1-based in every public signature
(``k in 1..n0``, species ``i in 1..n``), matching the usual notation for
these systems. Arrays are indexed from 0 internally.
"""
from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.sparse.csgraph import connected_components

from .polynomial import Poly, PolyField

FAMILIES = ("LV2Comp", "PredPrey", "Single1D", "Expl2D", "LV3Comp", "FoodChain", "Custom")

MAX_CUSTOM_DEGREE = 3


class ModelError(ValueError):
    """Raised for malformed models or invalid evaluation requests."""


class RateBoundError(RuntimeError):
    """A state-dependent switching rate exceeded its declared bound."""


# --------------------------------------------------------------------------
# environment fields


@dataclass(frozen=True)
class EnvironmentField:
    """Fitness polynomials ``f_i(., k)`` for one environment."""

    fitness: tuple[Poly, ...]

    @property
    def n(self) -> int:
        return len(self.fitness)

    def f(self, x) -> np.ndarray:
        return np.array([p(x) for p in self.fitness])

    def drift(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x * self.f(x)

    def drift_field(self) -> PolyField:
        """``G^k`` with ``G^k_i = x_i f_i(x, k)`` as an exact polynomial field."""
        return PolyField(Poly.variable(self.n, i) * p for i, p in enumerate(self.fitness))


# --------------------------------------------------------------------------
# switching


RateEntry = Union[float, Poly, Callable[[np.ndarray], float]]


@dataclass(frozen=True)
class SwitchLaw:
    """Generator ``Q(x)`` of the environment process.

    ``kind="constant"`` stores the full matrix. ``kind="state"`` stores the
    off-diagonal entries as constants, polynomials or callables of ``x``;
    ``rate_bound`` must dominate every row's total exit rate.
    """

    kind: str
    n0: int
    matrix: tuple[tuple[float, ...], ...] | None = None
    entries: tuple[tuple[tuple[int, int], RateEntry], ...] = ()
    rate_bound: float | None = None
    rate_floor: float | None = None

    @classmethod
    def constant(cls, q) -> "SwitchLaw":
        q = np.array(q, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ModelError("switch matrix must be square")
        off = q - np.diag(np.diag(q))
        if (off < 0).any():
            raise ModelError("negative off-diagonal switching rate")
        q = off - np.diag(off.sum(axis=1))
        pos = off[off > 0]
        floor = float(pos.min()) if pos.size else 0.0
        bound = float(off.sum(axis=1).max()) if q.size else 0.0
        return cls("constant", q.shape[0], tuple(map(tuple, q)), (), bound, floor)

    @classmethod
    def two_state(cls, q12: float, q21: float) -> "SwitchLaw":
        return cls.constant([[0.0, q12], [q21, 0.0]])

    @classmethod
    def state_dependent(cls, n0: int, entries: Mapping[tuple[int, int], RateEntry],
                        rate_bound: float, rate_floor: float | None = None) -> "SwitchLaw":
        """``entries`` maps 1-based ``(i, j)``, ``i != j``, to a rate."""
        if rate_bound is None or not rate_bound > 0:
            raise ModelError("state-dependent switching needs a positive rate_bound")
        items = []
        for (i, j), v in sorted(entries.items(), key=lambda kv: kv[0]):
            if i == j or not (1 <= i <= n0 and 1 <= j <= n0):
                raise ModelError(f"bad switch entry index {(i, j)}")
            if isinstance(v, (int, float)):
                if v < 0:
                    raise ModelError(f"negative switching rate q{i}{j}")
                v = float(v)
            items.append(((i, j), v))
        return cls("state", n0, None, tuple(items), float(rate_bound), rate_floor)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def rates(self, x) -> np.ndarray:
        """Generator matrix at ``x``: off-diagonals >= 0, rows summing to zero."""
        if self.is_constant:
            return np.array(self.matrix, dtype=float).reshape(self.n0, self.n0)
        q = np.zeros((self.n0, self.n0))
        x = np.asarray(x, dtype=float)
        for (i, j), v in self.entries:
            r = float(v(x)) if callable(v) else float(v)
            if not r >= 0:
                raise ModelError(f"switching rate q{i}{j}(x) = {r} is negative at x = {x}")
            q[i - 1, j - 1] = r
        q[np.diag_indices(self.n0)] = -q.sum(axis=1)
        return q

    def describe(self) -> str:
        if self.is_constant:
            return f"constant{self.matrix}"
        parts = []
        for (i, j), v in self.entries:
            if isinstance(v, Poly):
                parts.append(f"{i}{j}:{v.terms}")
            elif callable(v):
                parts.append(f"{i}{j}:{getattr(v, '__qualname__', repr(v))}")
            else:
                parts.append(f"{i}{j}:{v}")
        return f"state[{';'.join(parts)}|{self.rate_bound}|{self.rate_floor}]"

    def restrict(self, keep: Sequence[int], n: int) -> "SwitchLaw":
        if self.is_constant:
            return self
        zero = [j for j in range(n) if j not in keep]

        def wrap(v):
            if isinstance(v, Poly):
                return v.set_zero(zero).select(keep)
            if callable(v):
                def g(y, _v=v):
                    full = np.zeros(n)
                    full[list(keep)] = y
                    return _v(full)
                g.__qualname__ = f"restricted({getattr(v, '__qualname__', 'rate')},{tuple(keep)})"
                return g
            return v

        return SwitchLaw("state", self.n0, None,
                         tuple((ij, wrap(v)) for ij, v in self.entries),
                         self.rate_bound, self.rate_floor)


# --------------------------------------------------------------------------
# gauge


@dataclass(frozen=True)
class GaugeFunction:
    """``F(x, k) = env_weights[k] * (1 + sum_i species_weights[i] * x_i**power)``.

    ``power`` is 1 for the linear gauges and 1/2 for the square-root gauges
    used by the explosive models; the growth check then uses
    ``F >= c (1 + |x|)**power``.
    """

    kind: str
    env_weights: tuple[float, ...]
    species_weights: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("linear", "sqrt"):
            raise ModelError(f"unknown gauge kind {self.kind!r}")
        if min(self.env_weights, default=1.0) <= 0 or min(self.species_weights, default=1.0) <= 0:
            raise ModelError("gauge weights must be positive")

    @property
    def power(self) -> float:
        return 1.0 if self.kind == "linear" else 0.5

    def value(self, x, k: int) -> float:
        x = np.asarray(x, dtype=float)
        w = np.asarray(self.species_weights)
        return self.env_weights[k - 1] * (1.0 + float(np.sum(w * x**self.power)))

    def grad(self, x, k: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        w = np.asarray(self.species_weights)
        a = self.env_weights[k - 1]
        if self.kind == "linear":
            return a * w
        with np.errstate(divide="ignore"):
            g = a * w * 0.5 / np.sqrt(x)
        return g

    @property
    def ratio_bound(self) -> float:
        """``M_F = max_{k,l} F(x,k)/F(x,l)``; exact for this product form."""
        return max(self.env_weights) / min(self.env_weights)

    def restrict(self, keep: Sequence[int]) -> "GaugeFunction":
        return GaugeFunction(self.kind, self.env_weights,
                             tuple(self.species_weights[j] for j in keep))


# --------------------------------------------------------------------------
# subspaces


@dataclass(frozen=True)
class SubspaceIndex:
    """Set ``I`` of species (1-based labels) kept positive; ``I^c`` is held at zero."""

    members: frozenset[int]
    n: int

    def __init__(self, members: Iterable[int], n: int):
        m = frozenset(int(i) for i in members)
        if any(not 1 <= i <= n for i in m):
            raise ModelError(f"subspace {sorted(m)} not within species 1..{n}")
        object.__setattr__(self, "members", m)
        object.__setattr__(self, "n", n)

    @property
    def complement(self) -> frozenset[int]:
        return frozenset(range(1, self.n + 1)) - self.members

    def sorted(self) -> list[int]:
        return sorted(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.sorted())

    def __repr__(self) -> str:
        return "{" + ",".join(map(str, self.sorted())) + "}"


# --------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class ModelSpec:
    n: int
    n0: int
    fields: tuple[EnvironmentField, ...]
    switch: SwitchLaw
    gauge: GaugeFunction | None = None
    family: str = "Custom"
    params: tuple[tuple[str, float], ...] = ()
    labels: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n < 0 or self.n0 < 1:
            raise ModelError("need n >= 0 species and n0 >= 1 environments")
        if len(self.fields) != self.n0:
            raise ModelError(f"expected {self.n0} environment fields, got {len(self.fields)}")
        for k, fld in enumerate(self.fields, 1):
            if fld.n != self.n:
                raise ModelError(f"environment {k} defines {fld.n} fitness functions, need {self.n}")
            for p in fld.fitness:
                if p.nvars != self.n:
                    raise ModelError("fitness polynomial has wrong number of variables")
        if self.switch.n0 != self.n0:
            raise ModelError("switch law size does not match n0")
        if self.family not in FAMILIES:
            raise ModelError(f"unknown family {self.family!r}")
        if self.family == "Custom":
            for fld in self.fields:
                for p in fld.fitness:
                    if p.degree > MAX_CUSTOM_DEGREE:
                        raise ModelError(f"custom fitness degree {p.degree} exceeds {MAX_CUSTOM_DEGREE}")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(1, self.n + 1)))
        if self.gauge is not None and (len(self.gauge.env_weights) != self.n0
                                       or len(self.gauge.species_weights) != self.n):
            raise ModelError("gauge weights do not match model dimensions")

    @property
    def param_dict(self) -> dict[str, float]:
        return dict(self.params)

    def fitness(self, x, k: int) -> np.ndarray:
        self._check_env(k)
        return self.fields[k - 1].f(x)

    def fitness_many(self, xs, ks) -> np.ndarray:
        """Fitness at many states: ``xs`` is ``(N, n)``, ``ks`` holds 1-based environments."""
        xs = np.asarray(xs, dtype=float)
        ks = np.asarray(ks)
        out = np.zeros((xs.shape[0], self.n))
        for k, fld in enumerate(self.fields, 1):
            sel = ks == k
            if sel.any():
                sub = xs[sel]
                out[sel] = np.column_stack([p.evaluate_many(sub) for p in fld.fitness]) \
                    if self.n else np.zeros((sub.shape[0], 0))
        return out

    def _check_env(self, k: int) -> None:
        if not 1 <= k <= self.n0:
            raise ModelError(f"environment {k} out of range 1..{self.n0}")

    def fingerprint(self) -> str:
        parts = [f"n={self.n}", f"n0={self.n0}", f"family={self.family}",
                 f"labels={self.labels}", f"switch={self.switch.describe()}",
                 f"gauge={self.gauge}"]
        for fld in self.fields:
            parts.append(repr(tuple(p.terms for p in fld.fitness)))
        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]

    def is_linear(self) -> bool:
        """Every fitness is affine in ``x``."""
        return all(p.degree <= 1 for fld in self.fields for p in fld.fitness)

    def linear_parts(self) -> tuple[np.ndarray, np.ndarray]:
        """For affine fitness ``f_i(x,k) = r[k,i] + sum_j M[k,i,j] x_j`` return ``(r, M)``."""
        if not self.is_linear():
            raise ModelError("fitness is not affine in x")
        r = np.zeros((self.n0, self.n))
        m = np.zeros((self.n0, self.n, self.n))
        zero = (0,) * self.n
        for k, fld in enumerate(self.fields):
            for i, p in enumerate(fld.fitness):
                for mono, c in p.terms:
                    if mono == zero:
                        r[k, i] = c
                    else:
                        m[k, i, mono.index(1)] = c
        return r, m


def drift(model: ModelSpec, x, k: int) -> np.ndarray:
    """``(x_1 f_1(x,k), ..., x_n f_n(x,k))``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise ModelError(f"state must have shape ({model.n},)")
    if (x < 0).any():
        raise ModelError("state has a negative component")
    return x * model.fitness(x, k)


def rate_matrix(model: ModelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if (x < 0).any():
        raise ModelError("state has a negative component")
    return model.switch.rates(x)


def generator_applied(model: ModelSpec, func, grad, x, k: int) -> float:
    """``L G(x,k)`` for ``G`` given by value ``func(x, l)`` and x-gradient ``grad(x, k)``."""
    x = np.asarray(x, dtype=float)
    g = grad(x, k)
    flow = x * model.fitness(x, k)
    mask = x > 0
    total = float(np.dot(flow[mask], g[mask]))
    q = model.switch.rates(x)[k - 1]
    return total + sum(q[l] * func(x, l + 1) for l in range(model.n0))


def is_irreducible(q: np.ndarray) -> bool:
    adj = (q - np.diag(np.diag(q))) > 0
    ncomp, _ = connected_components(adj, directed=True, connection="strong")
    return ncomp == 1


def restrict(model: ModelSpec, subspace: SubspaceIndex | Iterable[int]) -> ModelSpec:
    """The model on the face where only the species in ``subspace`` are present.

    Species are named by their labels in the original model, so restricting
    an already restricted model with labels outside it simply drops them.
    """
    members = subspace.members if isinstance(subspace, SubspaceIndex) else frozenset(subspace)
    keep = [j for j, lab in enumerate(model.labels) if lab in members]
    if len(keep) == model.n:
        return model
    zero = [j for j in range(model.n) if j not in keep]
    fields = tuple(
        EnvironmentField(tuple(fld.fitness[i].set_zero(zero).select(keep) for i in keep))
        for fld in model.fields
    )
    gauge = model.gauge.restrict(keep) if model.gauge is not None else None
    return ModelSpec(len(keep), model.n0, fields, model.switch.restrict(keep, model.n),
                     gauge, "Custom", model.params,
                     tuple(model.labels[j] for j in keep))


def embed_state(model: ModelSpec, sub: ModelSpec, y) -> np.ndarray:
    """Lift a state of the restricted model ``sub`` into ``model`` coordinates."""
    x = np.zeros(model.n)
    idx = {lab: j for j, lab in enumerate(model.labels)}
    for j, lab in enumerate(sub.labels):
        x[idx[lab]] = y[j]
    return x


# --------------------------------------------------------------------------
# assumption checks


@dataclass
class ValidationReport:
    row_sum_residual: float
    irreducible: bool
    gauge_present: bool
    growth_constant: float | None = None
    growth_ok: bool | None = None
    ratio_bound: float | None = None
    ratio_ok: bool | None = None
    shells: list[float] = field(default_factory=list)
    dissipation: list[float] = field(default_factory=list)
    dissipation_verdict: str = "unknown"
    delta0_margin: float | None = None
    rate_bound_ok: bool | None = None
    messages: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        checks = [self.row_sum_residual <= 1e-12, self.irreducible]
        if self.gauge_present:
            checks += [bool(self.growth_ok), bool(self.ratio_ok), self.dissipation_verdict == "pass"]
        if self.rate_bound_ok is not None:
            checks.append(self.rate_bound_ok)
        return all(checks)


def _probe_points(n: int, rng: np.random.Generator, radius: float, count: int) -> np.ndarray:
    if n == 0:
        return np.zeros((1, 0))
    pts = [np.zeros(n)]
    for j in range(n):
        e = np.zeros(n)
        e[j] = radius
        pts.append(e)
    dirs = np.abs(rng.standard_normal((count, n)))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * rng.random(count) ** (1.0 / n)
    pts.extend(dirs * radii[:, None])
    return np.array(pts)


def _shell_points(n: int, rng: np.random.Generator, radius: float, count: int) -> np.ndarray:
    if n == 1:
        return np.array([[radius]])
    pts = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = radius
        pts.append(e)
    pts.append(np.full(n, radius / math.sqrt(n)))
    dirs = np.abs(rng.standard_normal((count, n)))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts.extend(radius * dirs)
    return np.array(pts)


def log_gauge_drift(model: ModelSpec, x, k: int) -> float:
    """``L ln F(x, k)``: flow term on ``ln F`` plus ``sum_l q_kl ln F(x,l)``."""
    gauge = model.gauge
    if gauge is None:
        raise ModelError("model has no gauge function")
    x = np.asarray(x, dtype=float)
    fk = gauge.value(x, k)
    g = gauge.grad(x, k)
    flow = x * model.fitness(x, k)
    mask = x > 0
    total = float(np.dot(flow[mask], g[mask])) / fk
    q = model.switch.rates(x)[k - 1]
    for l in range(model.n0):
        if l != k - 1 and q[l]:
            total += q[l] * math.log(gauge.value(x, l + 1) / fk)
    return total


def validate(model: ModelSpec, shell_radius: float = 1000.0, probes: int = 200,
             seed: int = 0) -> ValidationReport:
    """Probe-based check of the standing assumptions.

    A "pass" means that no counterexample was found on the probe set; the
    checks are numerical, never symbolic.
    """
    rng = np.random.default_rng(seed)
    pts = _probe_points(model.n, rng, shell_radius, probes)
    shells = [shell_radius * m for m in (1, 2, 4, 8)]
    shell_pts = [_shell_points(model.n, rng, r, max(8, probes // 8)) for r in shells]

    resid = 0.0
    irreducible = True
    observed_rate = 0.0
    for x in np.vstack([pts] + shell_pts):
        q = model.switch.rates(x)
        resid = max(resid, float(np.abs(q.sum(axis=1)).max()))
        irreducible &= is_irreducible(q) if model.n0 > 1 else True
        observed_rate = max(observed_rate, float((-np.diag(q)).max()))

    report = ValidationReport(resid, bool(irreducible), model.gauge is not None)
    if not irreducible:
        report.messages.append("Q(x) is reducible at some probe point")
    if not model.switch.is_constant:
        report.rate_bound_ok = observed_rate <= model.switch.rate_bound * (1 + 1e-12)
        if not report.rate_bound_ok:
            report.messages.append(f"observed exit rate {observed_rate} exceeds rate_bound")

    gauge = model.gauge
    if gauge is None:
        warnings.warn("no gauge function: growth, ratio and dissipation checks skipped")
        report.messages.append("gauge absent")
        return report

    allpts = np.vstack([pts] + shell_pts)
    cmin = math.inf
    rmax = 0.0
    for x in allpts:
        vals = [gauge.value(x, k) for k in range(1, model.n0 + 1)]
        base = (1.0 + float(np.linalg.norm(x))) ** gauge.power
        cmin = min(cmin, min(vals) / base)
        rmax = max(rmax, max(vals) / min(vals))
    report.growth_constant = cmin
    report.growth_ok = cmin > 0
    report.ratio_bound = rmax
    report.ratio_ok = rmax <= gauge.ratio_bound * (1 + 1e-12)

    worst = []
    margins = []
    for sp in shell_pts:
        w = -math.inf
        m = math.inf
        for x in sp:
            for k in range(1, model.n0 + 1):
                lf = generator_applied(model, gauge.value, gauge.grad, x, k) / gauge.value(x, k)
                fmax = float(np.abs(model.fitness(x, k)).max()) if model.n else 0.0
                w = max(w, lf)
                if fmax > 0:
                    m = min(m, -lf / fmax)
        worst.append(w)
        margins.append(m)
    report.shells = shells
    report.dissipation = worst
    if worst[-1] < 0 and worst[-2] < 0:
        report.dissipation_verdict = "pass"
        report.delta0_margin = max(0.0, min(margins[-2:]))
    elif worst[-1] >= 0 and worst[-2] >= 0:
        report.dissipation_verdict = "fail"
        report.messages.append("L F / F not negative on the outer shells")
    else:
        report.dissipation_verdict = "unknown"
    return report
