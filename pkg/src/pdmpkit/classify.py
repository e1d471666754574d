"""Invasion-rate tables, min-max persistence weights and long-run verdicts.

Faces of the orthant are visited from the origin upwards. A face ``I`` is
taken to carry an ergodic measure on its interior when its own boundary
measures are uniformly invadable from inside ``I`` (a positive min-max
margin over the columns in ``I``); each face is assumed to carry at most one
such measure. Every existing boundary measure then gets the cheapest exact
representation available and all of its invasion rates.
"""
from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .analytic import (BoundaryMeasureRep, NoInteriorMeasure, NonIntegrable, boundary_lambda,
                       constant_interactions, density_1d_logistic, density_logistic_pair,
                       density_lv_boundary, interior_means, monte_carlo_rep, stationary_switch)
from .geometry import bracket_span_rank
from .model import ModelError, ModelSpec, SubspaceIndex, restrict
from .simulate import SimConfig

GRID = 200


@dataclass(frozen=True)
class MethodConfig:
    """How boundary measures are represented and how signs are decided."""

    mc_t_max: float = 2e4
    mc_seed: int = 12345
    mc_burn_fraction: float = 0.1
    sign_se: float = 3.0
    prefer: str = "auto"  # or "MonteCarlo" to skip closed forms
    faces: tuple[tuple[int, ...], ...] | None = None
    bracket_depth: int = 3
    bracket_points: int = 5


@dataclass
class TableRow:
    subspace: SubspaceIndex
    exists: bool
    method: str | None
    lambdas: np.ndarray
    se: np.ndarray
    rep: BoundaryMeasureRep | None = None
    note: str = ""

    @property
    def interior(self) -> bool:
        return len(self.subspace) == self.subspace.n

    def sign(self, j: int, nse: float) -> int:
        """+1, -1 or 0 (unresolved) for species ``j`` (1-based)."""
        v, s = self.lambdas[j - 1], self.se[j - 1]
        band = nse * s if np.isfinite(s) else 0.0
        if v - band > 0:
            return 1
        if v + band < 0:
            return -1
        return 0


@dataclass
class InvasionTable:
    model_fingerprint: str
    n: int
    rows: list[TableRow]

    def existing(self, boundary_only: bool = True) -> list[TableRow]:
        return [r for r in self.rows if r.exists and not (boundary_only and r.interior)]

    def row(self, members) -> TableRow:
        key = frozenset(members)
        for r in self.rows:
            if r.subspace.members == key:
                return r
        raise KeyError(sorted(key))

    def matrix(self) -> np.ndarray:
        rows = self.existing()
        return np.array([r.lambdas for r in rows]).reshape(len(rows), self.n)

    def unresolved(self, nse: float) -> list[tuple[str, int]]:
        out = []
        for r in self.existing():
            for j in r.subspace.complement:
                if r.method == "MonteCarlo" and r.sign(j, nse) == 0:
                    out.append((repr(r.subspace), j))
        return out

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.model_fingerprint,
            "rows": [{
                "subspace": sorted(r.subspace.members),
                "exists": r.exists,
                "method": r.method,
                "lambda": [None if not np.isfinite(v) else float(v) for v in r.lambdas],
                "se": [None if not np.isfinite(v) else float(v) for v in r.se],
                "note": r.note,
            } for r in self.rows],
        }


# --------------------------------------------------------------------------
# min-max weights


def _simplex_grid(n: int, m: int) -> np.ndarray:
    """Interior points of the simplex with coordinates in ``{1/m, ..., (m-n+1)/m}``."""
    pts = []
    for cut in itertools.combinations(range(1, m), n - 1):
        parts = np.diff((0,) + cut + (m,))
        pts.append(parts)
    return np.array(pts, dtype=float) / m


def minmax_weights(rows, grid: int = GRID) -> tuple[np.ndarray, float] | None:
    """Positive ``p`` on the simplex maximizing ``min_rows p . lambda``.

    Small dimensions use a grid of step ``1/grid`` followed by a finer grid
    around the best cell; larger ones solve the equivalent linear program.
    Returns ``(p, rho)`` when ``rho > 0``.
    """
    if isinstance(rows, InvasionTable):
        rows = rows.matrix()
    lam = np.atleast_2d(np.asarray(rows, dtype=float))
    n = lam.shape[1]
    if lam.shape[0] == 0:
        p = np.full(n, 1.0 / n)
        return p, math.inf
    if n == 1:
        rho = float(lam.min())
        return (np.ones(1), rho) if rho > 0 else None
    if n <= 3:
        pts = _simplex_grid(n, grid)
        vals = (pts @ lam.T).min(axis=1)
        best = int(np.argmax(vals))
        p, rho = pts[best], float(vals[best])
        # refine on a finer grid inside the neighbouring cells
        fine = 20
        offsets = np.array(list(itertools.product(range(-fine, fine + 1), repeat=n - 1)), dtype=float)
        offsets /= grid * fine
        cand = np.column_stack([p[:-1] + offsets, 1.0 - (p[:-1] + offsets).sum(axis=1)])
        cand = cand[(cand > 0).all(axis=1)]
        if cand.size:
            cv = (cand @ lam.T).min(axis=1)
            j = int(np.argmax(cv))
            if cv[j] > rho:
                p, rho = cand[j], float(cv[j])
    else:
        eps = 1e-6
        c = np.zeros(n + 1)
        c[-1] = -1.0
        a_ub = np.column_stack([-lam, np.ones(lam.shape[0])])
        res = linprog(c, A_ub=a_ub, b_ub=np.zeros(lam.shape[0]),
                      A_eq=np.concatenate([np.ones(n), [0.0]])[None, :], b_eq=[1.0],
                      bounds=[(eps, 1.0)] * n + [(None, None)], method="highs")
        if not res.success:
            return None
        p, rho = res.x[:n], float(res.x[-1])
    return (p, rho) if rho > 0 else None


# --------------------------------------------------------------------------
# representations


def _affine_1d(face: ModelSpec):
    """``(a_k, b_k)`` when the single fitness is ``a_k - b_k x`` in every environment."""
    if face.n != 1 or not face.is_linear():
        return None
    r, m = face.linear_parts()
    return [(float(r[k, 0]), float(-m[k, 0, 0])) for k in range(face.n0)]


def _closed_form_1d(model: ModelSpec, face: ModelSpec):
    coef = _affine_1d(face)
    if coef is None or face.n0 != 2 or not model.switch.is_constant:
        return None
    q = model.switch.rates(np.zeros(model.n))
    q12, q21 = q[0, 1], q[1, 0]
    (a1, b1), (a2, b2) = coef
    if b1 > 0 and b2 > 0 and a1 > 0 and a2 > 0:
        return density_lv_boundary(a1, a2, b1, b2, q12, q21)
    if b1 == 0 and b2 > 0 and a1 > 0:
        return density_1d_logistic(a1, a2, b2, q12, q21)
    if b2 == 0 and b1 > 0 and a2 > 0:
        # same shape with the environments relabelled
        d = density_1d_logistic(a2, a1, b1, q21, q12)
        return _swap_envs(d)
    return density_logistic_pair(a1, b1, a2, b2, q12, q21)


def closed_form_face(model: ModelSpec, species: int):
    """Closed-form stationary law on the axis of ``species`` (1-based), if one applies."""
    sub = SubspaceIndex({species}, model.n)
    return _closed_form_1d(model, restrict(model, sub))


def _swap_envs(d):
    from copy import copy
    e = copy(d)
    e._coef = (d._coef[1], d._coef[0])
    e._rates = (d._rates[1], d._rates[0])
    e.masses = (d.masses[1], d.masses[0])
    e._integrator = type(d._integrator)(e._coef, e._rates, e.support, e.log_h)
    e.params = dict(d.params, relabelled=1.0)
    return e


def _represent(model: ModelSpec, sub: SubspaceIndex, cfg: MethodConfig, seed_offset: int):
    """Best available representation of the interior measure of ``sub``."""
    face = restrict(model, sub)
    nu = stationary_switch(model.switch.rates(np.zeros(model.n))) if model.switch.is_constant else None
    if len(sub) == 0:
        if nu is None:
            raise ModelError("origin measure needs a constant switching generator")
        return BoundaryMeasureRep(sub, "PointMass", point=np.zeros(0), weights=nu), ""
    if cfg.prefer != "MonteCarlo":
        if len(sub) == 1:
            try:
                d = _closed_form_1d(model, face)
            except NoInteriorMeasure as exc:
                return None, str(exc)
            if d is not None:
                if d.kind == "PointMass":
                    return BoundaryMeasureRep(sub, "PointMass", point=np.array([d.point]),
                                              weights=np.asarray(d.weights)), "equal equilibria"
                return BoundaryMeasureRep(sub, "Density", density=d), d.kind
        if constant_interactions(model) and model.switch.is_constant:
            try:
                m = interior_means(model, sub)
                return BoundaryMeasureRep(sub, "Means", means=m), ""
            except NoInteriorMeasure as exc:
                return None, str(exc)
            except ModelError:
                pass
    mc = SimConfig(t_max=cfg.mc_t_max, seed=cfg.mc_seed, replicate=seed_offset, record_dt=0.1)
    rep = monte_carlo_rep(model, sub, mc, burn_in=cfg.mc_burn_fraction * cfg.mc_t_max)
    return rep, ""


def _faces(model: ModelSpec, cfg: MethodConfig) -> list[SubspaceIndex]:
    n = model.n
    if cfg.faces is not None:
        faces = {frozenset(f) for f in cfg.faces} | {frozenset()}
    elif model.family == "Custom":
        raise ModelError("custom models must declare their face lattice (MethodConfig.faces)")
    else:
        faces = {frozenset(c) for r in range(n + 1) for c in itertools.combinations(range(1, n + 1), r)}
    return [SubspaceIndex(f, n) for f in sorted(faces, key=lambda f: (len(f), sorted(f)))]


def invasion_table(model: ModelSpec, cfg: MethodConfig | None = None) -> InvasionTable:
    """Bottom-up enumeration of face measures with all their invasion rates."""
    cfg = cfg or MethodConfig()
    n = model.n
    rows: list[TableRow] = []
    for idx, sub in enumerate(_faces(model, cfg)):
        members = sub.members
        inner = [r for r in rows if r.exists and r.subspace.members < members]
        exists = True
        note = ""
        if members:
            cols = sorted(members)
            lam = np.array([[r.lambdas[j - 1] for j in cols] for r in inner]).reshape(len(inner), len(cols))
            exists = minmax_weights(lam) is not None if len(inner) else True
            if not exists:
                note = "boundary of the face is not uniformly invadable"
        rep = None
        method = None
        lam_row = np.full(n, np.nan)
        se_row = np.full(n, np.nan)
        if exists:
            try:
                rep, extra = _represent(model, sub, cfg, idx)
            except NonIntegrable as exc:
                rep, extra = None, str(exc)
            if rep is None:
                exists = False
                note = extra or "no representation"
            else:
                note = extra
                method = rep.kind
                for j in range(1, n + 1):
                    try:
                        v = boundary_lambda(model, sub, rep, j)
                    except NonIntegrable as exc:
                        warnings.warn(f"invasion rate of species {j} on {sub!r}: {exc}")
                        continue
                    lam_row[j - 1], se_row[j - 1] = v.value, v.se
        rows.append(TableRow(sub, exists, method, lam_row, se_row, rep, note))
    return InvasionTable(model.fingerprint(), n, rows)


# --------------------------------------------------------------------------
# verdicts


@dataclass
class Attractor:
    subspace: SubspaceIndex
    probability: str
    exterior: dict[int, float]
    local_attraction: bool = True
    qualifiers: list[str] = field(default_factory=list)


@dataclass
class Verdict:
    outcome: str
    table: InvasionTable
    weights: np.ndarray | None = None
    rho: float | None = None
    attractors: list[Attractor] = field(default_factory=list)
    unique_measure: bool | None = None
    bracket_point: np.ndarray | None = None
    assumption_26: bool | None = None
    unresolved: list[tuple[str, int]] = field(default_factory=list)
    qualifiers: list[str] = field(default_factory=list)

    @property
    def extinction_sets(self) -> list[frozenset[int]]:
        return [a.subspace.members for a in self.attractors]

    def describe(self) -> str:
        if self.outcome == "ExtinctionTo":
            parts = [f"{a.subspace!r}:{a.probability}" for a in self.attractors]
            return f"ExtinctionTo({', '.join(parts)})"
        return self.outcome

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.table.model_fingerprint,
            "verdict": self.describe(),
            "outcome": self.outcome,
            "weights": None if self.weights is None else self.weights.tolist(),
            "rho": self.rho,
            "unique_measure": self.unique_measure,
            "bracket_point": None if self.bracket_point is None else self.bracket_point.tolist(),
            "assumption_26": self.assumption_26,
            "attractors": [{
                "subspace": sorted(a.subspace.members),
                "probability": a.probability,
                "exterior": {str(k): v for k, v in a.exterior.items()},
                "local_attraction": a.local_attraction,
                "qualifiers": a.qualifiers,
            } for a in self.attractors],
            "unresolved": [list(u) for u in self.unresolved],
            "qualifiers": self.qualifiers,
            "table": self.table.to_dict(),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def _bracket_certificate(model: ModelSpec, cfg: MethodConfig):
    if model.n0 < 2:
        return False, None
    rng = np.random.default_rng(cfg.mc_seed)
    pts = [np.ones(model.n)] + [rng.uniform(0.1, 10.0, model.n) for _ in range(cfg.bracket_points - 1)]
    for x in pts:
        if bracket_span_rank(model, x, cfg.bracket_depth).holds:
            return True, x
    return False, None


def _accessibility(model: ModelSpec, members: frozenset[int]) -> str:
    p = model.param_dict
    if model.family == "Single1D" and not members and p.get("a1_2", 1.0) < 0:
        return "origin accessible: environment 2 drives x to 0"
    if model.family == "PredPrey" and members == {1}:
        for k in (1, 2):
            if p[f"a1_{k}"] / p[f"b1_{k}"] <= p[f"a2_{k}"] / p[f"c2_{k}"]:
                return f"prey axis accessible: environment {k} isocline condition holds"
    return "assuming accessibility"


def classify(model: ModelSpec, cfg: MethodConfig | None = None,
             table: InvasionTable | None = None) -> Verdict:
    """Persistence or extinction verdict from the invasion-rate table."""
    cfg = cfg or MethodConfig()
    table = table or invasion_table(model, cfg)
    nse = cfg.sign_se
    unresolved = table.unresolved(nse)
    boundary = table.existing()

    found = minmax_weights(table)
    if found is not None and not unresolved:
        p, rho = found
        unique, point = _bracket_certificate(model, cfg)
        quals = ["unique invariant measure if the certified point is accessible"] if unique else []
        return Verdict("PersistAll", table, p, rho, unique_measure=unique, bracket_point=point,
                       qualifiers=quals)

    # faces whose interior measure pushes every absent species out
    attract, rest, pending = [], [], []
    for r in boundary:
        signs = [r.sign(j, nse) for j in sorted(r.subspace.complement)]
        if all(s < 0 for s in signs):
            attract.append(r)
        elif any(s == 0 for s in signs) and not any(s > 0 for s in signs):
            pending.append(r)
        else:
            rest.append(r)
    if pending:
        return Verdict("Inconclusive", table, unresolved=unresolved,
                       qualifiers=["invasion-rate signs unresolved within the error band"])
    if not attract:
        return Verdict("Inconclusive", table, unresolved=unresolved,
                       qualifiers=["no boundary measure is a transversal attractor"])
    lam_rest = np.array([r.lambdas for r in rest]).reshape(len(rest), model.n)
    a26 = minmax_weights(lam_rest) is not None if len(rest) else True
    if not a26:
        return Verdict("Inconclusive", table, assumption_26=False, unresolved=unresolved,
                       qualifiers=["non-attracting boundary measures are not uniformly repelling"])
    label = "one" if len(attract) == 1 else "positive"
    atts = []
    for r in attract:
        ext = {j: float(r.lambdas[j - 1]) for j in sorted(r.subspace.complement)}
        atts.append(Attractor(r.subspace, label, ext, True, [_accessibility(model, r.subspace.members)]))
    return Verdict("ExtinctionTo", table, attractors=atts, assumption_26=True, unresolved=unresolved)
