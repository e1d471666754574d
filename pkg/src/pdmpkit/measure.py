"""Path estimators: occupation histograms, time averages and growth-rate slopes.

A trajectory is read as a polygon through its knots: the recorded samples
plus every jump, which enters twice (once closing the old environment and
once opening the new one). Between knots the state is interpolated linearly,
so bin-crossing errors are bounded by the sampling interval.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .model import GaugeFunction, ModelError, ModelSpec, log_gauge_drift
from .simulate import Trajectory

DEFAULT_BURN_FRACTION = 0.1
DEFAULT_BATCHES = 20


def default_burn_in(traj: Trajectory) -> float:
    return DEFAULT_BURN_FRACTION * traj.t_max


# --------------------------------------------------------------------------
# knots


@dataclass(frozen=True)
class Knots:
    t: np.ndarray
    logx: np.ndarray
    k: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return np.exp(self.logx)

    def piece_mask(self) -> np.ndarray:
        """Consecutive knots in the same environment with positive length."""
        return (self.k[1:] == self.k[:-1]) & (self.t[1:] > self.t[:-1])


def knots(traj: Trajectory, cuts: Sequence[float] = ()) -> Knots:
    """Samples and jumps merged in time order, with extra knots at ``cuts``."""
    nj = traj.jump_t.size
    t = np.concatenate([traj.t, traj.jump_t, traj.jump_t])
    y = np.concatenate([traj.logx, traj.jump_logx, traj.jump_logx]).reshape(-1, traj.n)
    k = np.concatenate([traj.k, traj.jump_from, traj.jump_to]).astype(np.int64)
    # at equal times: old environment, then samples, then new environment
    rank = np.concatenate([np.ones(traj.t.size), np.zeros(nj), np.full(nj, 2.0)])
    order = np.lexsort((rank, t))
    t, y, k = t[order], y[order], k[order]
    cuts = np.asarray([c for c in cuts if t[0] < c < t[-1]], dtype=float)
    if cuts.size:
        idx = np.searchsorted(t, cuts, side="left")
        keep = t[idx] != cuts
        cuts, idx = cuts[keep], idx[keep]
        w = ((cuts - t[idx - 1]) / (t[idx] - t[idx - 1]))[:, None]
        with np.errstate(invalid="ignore"):
            yc = y[idx - 1] + w * (y[idx] - y[idx - 1])
        yc = np.where(np.isneginf(y[idx - 1]), -np.inf, yc)
        t = np.insert(t, idx, cuts)
        y = np.insert(y, idx, yc, axis=0)
        k = np.insert(k, idx, k[idx - 1])
    return Knots(t, y, k)


def _window(traj: Trajectory, burn_in: float | None, t_end: float | None = None):
    b = default_burn_in(traj) if burn_in is None else float(burn_in)
    e = traj.t_max if t_end is None else float(t_end)
    if not 0 <= b < e:
        raise ValueError(f"burn-in {b} must lie in [0, {e})")
    return b, e


# --------------------------------------------------------------------------
# occupation histogram


@dataclass(frozen=True)
class HistogramGrid:
    edges: tuple[np.ndarray, ...]

    @classmethod
    def uniform(cls, lo: Sequence[float], hi: Sequence[float], bins: Sequence[int]) -> "HistogramGrid":
        return cls(tuple(np.linspace(a, b, m + 1) for a, b, m in zip(lo, hi, bins)))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(e.size - 1 for e in self.edges)

    @property
    def n(self) -> int:
        return len(self.edges)


@njit(cache=True)
def _bin_of(edges, nb, d, v):
    if v < edges[d, 0] or v >= edges[d, nb[d]]:
        return -1
    lo, hi = 0, nb[d]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if edges[d, mid] <= v:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True)
def _histogram_kernel(ta, tb, xa, xb, kk, edges, nb, strides, mass, deficit):
    npieces, n = xa.shape
    buf = np.empty(int(nb.sum()) + 2)
    mid = np.empty(n)
    for p in range(npieces):
        dt = tb[p] - ta[p]
        if dt <= 0.0:
            continue
        m = 0
        buf[m] = 0.0
        m += 1
        buf[m] = 1.0
        m += 1
        for d in range(n):
            lo, hi = xa[p, d], xb[p, d]
            if lo == hi:
                continue
            a, b = min(lo, hi), max(lo, hi)
            for e in range(nb[d] + 1):
                ed = edges[d, e]
                if a < ed < b:
                    if m >= buf.size:
                        break
                    buf[m] = (ed - lo) / (hi - lo)
                    m += 1
        s = np.sort(buf[:m])
        for j in range(m - 1):
            ds = s[j + 1] - s[j]
            if ds <= 0.0:
                continue
            sm = 0.5 * (s[j] + s[j + 1])
            flat = 0
            inside = True
            for d in range(n):
                mid[d] = xa[p, d] + sm * (xb[p, d] - xa[p, d])
                b = _bin_of(edges, nb, d, mid[d])
                if b < 0:
                    inside = False
                    break
                flat += b * strides[d]
            if inside:
                mass[kk[p], flat] += dt * ds
            else:
                deficit[kk[p]] += dt * ds


@dataclass
class EmpiricalMeasure:
    """Time spent per (bin, environment) over ``[t_start, t_end]``.

    ``time_mass`` has shape ``(n0, *grid.shape)``; ``deficit_time`` is the
    time spent outside the grid, per environment. Normalized views divide by
    the window length.
    """

    grid: HistogramGrid
    time_mass: np.ndarray
    deficit_time: np.ndarray
    total_time: float
    t_start: float
    t_end: float
    windows: list[tuple[float, float]] = field(default_factory=list)

    @property
    def mass(self) -> np.ndarray:
        return self.time_mass / self.total_time

    @property
    def deficit(self) -> np.ndarray:
        return self.deficit_time / self.total_time

    @property
    def env_marginal(self) -> np.ndarray:
        axes = tuple(range(1, self.time_mass.ndim))
        return (self.time_mass.sum(axis=axes) + self.deficit_time) / self.total_time

    @property
    def combined(self) -> np.ndarray:
        """Mass per bin with environments summed."""
        return self.mass.sum(axis=0)

    @property
    def burn_in(self) -> float:
        return self.t_start

    def merge(self, other: "EmpiricalMeasure") -> "EmpiricalMeasure":
        if len(self.grid.edges) != len(other.grid.edges) or not all(
                np.array_equal(a, b) for a, b in zip(self.grid.edges, other.grid.edges)):
            raise ValueError("cannot merge histograms on different grids")
        if self.time_mass.shape != other.time_mass.shape:
            raise ValueError("cannot merge histograms with different environment counts")
        wins = sorted(self.windows + other.windows)
        return EmpiricalMeasure(self.grid, self.time_mass + other.time_mass,
                                self.deficit_time + other.deficit_time,
                                self.total_time + other.total_time,
                                min(self.t_start, other.t_start), max(self.t_end, other.t_end), wins)

    def rows(self):
        n0 = self.time_mass.shape[0]
        mass = self.mass
        for k in range(n0):
            for idx in np.ndindex(*self.grid.shape):
                lo = [self.grid.edges[d][i] for d, i in enumerate(idx)]
                hi = [self.grid.edges[d][i + 1] for d, i in enumerate(idx)]
                yield k + 1, lo, hi, float(mass[(k,) + idx])

    def to_csv(self, path) -> None:
        n = self.grid.n
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["env"] + [f"bin_lo_{d}" for d in range(1, n + 1)]
                       + [f"bin_hi_{d}" for d in range(1, n + 1)] + ["mass"])
            for k, lo, hi, m in self.rows():
                w.writerow([k] + [repr(v) for v in lo] + [repr(v) for v in hi] + [repr(m)])


def occupation_histogram(traj: Trajectory, grid: HistogramGrid | Sequence[np.ndarray],
                         burn_in: float | None = None, t_end: float | None = None,
                         n0: int | None = None) -> EmpiricalMeasure:
    """Time-weighted histogram of ``(X(t), r(t))`` over ``[burn_in, t_end]``."""
    if not isinstance(grid, HistogramGrid):
        grid = HistogramGrid(tuple(np.asarray(e, dtype=float) for e in grid))
    if grid.n != traj.n:
        raise ValueError(f"grid has {grid.n} dimensions, trajectory has {traj.n}")
    for e in grid.edges:
        if e.size < 2 or np.any(np.diff(e) <= 0):
            raise ValueError("bin edges must be strictly increasing")
    b, e = _window(traj, burn_in, t_end)
    kn = knots(traj, (b, e))
    sel = kn.piece_mask() & (kn.t[:-1] >= b) & (kn.t[1:] <= e)
    x = kn.x
    n0 = int(max(kn.k.max(), n0 or 1))
    shape = grid.shape
    width = max(s + 1 for s in shape)
    edges = np.full((grid.n, width), np.inf)
    for d, ed in enumerate(grid.edges):
        edges[d, :ed.size] = ed
    nb = np.array(shape, dtype=np.int64)
    strides = np.array([int(np.prod(shape[d + 1:])) for d in range(grid.n)], dtype=np.int64)
    mass = np.zeros((n0, int(np.prod(shape))))
    deficit = np.zeros(n0)
    i = np.flatnonzero(sel)
    _histogram_kernel(kn.t[i], kn.t[i + 1], x[i], x[i + 1], kn.k[i] - 1,
                      edges, nb, strides, mass, deficit)
    return EmpiricalMeasure(grid, mass.reshape((n0,) + shape), deficit, e - b, b, e, [(b, e)])


# --------------------------------------------------------------------------
# time averages


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float
    window: tuple[float, float]


def _piece_integrals(kn: Knots, gvals: np.ndarray, b: float, e: float,
                     dvals: np.ndarray | None = None):
    sel = kn.piece_mask() & (kn.t[:-1] >= b) & (kn.t[1:] <= e)
    i = np.flatnonzero(sel)
    dt = kn.t[i + 1] - kn.t[i]
    integ = 0.5 * (gvals[i] + gvals[i + 1]) * dt
    if dvals is not None:
        # Euler-Maclaurin end correction: error O(dt^4) instead of O(dt^2)
        integ -= dt * dt / 12.0 * (dvals[i + 1] - dvals[i])
    return kn.t[i], integ


def _batched(kn: Knots, gvals: np.ndarray, b: float, e: float, batches: int,
             dvals: np.ndarray | None = None) -> Estimate:
    t0, integ = _piece_integrals(kn, gvals, b, e, dvals)
    value = float(integ.sum() / (e - b))
    if batches < 2:
        return Estimate(value, math.nan, (b, e))
    width = (e - b) / batches
    which = np.minimum(((t0 - b) / width).astype(np.int64), batches - 1)
    means = np.bincount(which, weights=integ, minlength=batches) / width
    return Estimate(value, float(means.std(ddof=1) / math.sqrt(batches)), (b, e))


def _evaluate(g, kn: Knots, vectorized: bool) -> np.ndarray:
    x = kn.x
    if vectorized:
        return np.asarray(g(x, kn.k), dtype=float).reshape(-1)
    return np.array([g(xi, int(ki)) for xi, ki in zip(x, kn.k)], dtype=float)


def time_average(traj: Trajectory, g: Callable, burn_in: float | None = None,
                 t_end: float | None = None, vectorized: bool = False,
                 batches: int = DEFAULT_BATCHES, return_se: bool = False,
                 dg: Callable | None = None):
    """Trapezoidal time average of ``g(x, k)`` over ``[burn_in, t_end]``.

    With ``vectorized=True`` ``g`` receives all knots at once, ``x`` of shape
    ``(N, n)`` and ``k`` of shape ``(N,)``. The standard error comes from
    batch means over equal time slices. ``dg``, same signature as ``g``, is
    the rate of change of ``g`` along the flow; when given, each piece gets
    the endpoint-corrected trapezoid rule, which removes the leading
    ``record_dt**2`` bias.
    """
    b, e = _window(traj, burn_in, t_end)
    cuts = [b + (e - b) * j / batches for j in range(batches + 1)]
    kn = knots(traj, cuts)
    dvals = None if dg is None else _evaluate(dg, kn, vectorized)
    est = _batched(kn, _evaluate(g, kn, vectorized), b, e, batches, dvals)
    return est if return_se else est.value


def fitness_rate_many(model: ModelSpec, xs, ks) -> np.ndarray:
    """``d/dt f_i(x(t), k)`` along the flow, ``sum_l d_l f_i x_l f_l``, at many states."""
    xs = np.asarray(xs, dtype=float)
    ks = np.asarray(ks)
    f = model.fitness_many(xs, ks)
    flow = xs * f
    out = np.zeros_like(f)
    for k, fld in enumerate(model.fields, 1):
        sel = ks == k
        if not sel.any():
            continue
        sub, fsub = xs[sel], flow[sel]
        for i, p in enumerate(fld.fitness):
            acc = np.zeros(sub.shape[0])
            for l in range(model.n):
                dp = p.diff(l)
                if not dp.is_zero():
                    acc += dp.evaluate_many(sub) * fsub[:, l]
            out[sel, i] = acc
    return out


def fitness_average(traj: Trajectory, model: ModelSpec, i: int, burn_in: float | None = None,
                    t_end: float | None = None, batches: int = DEFAULT_BATCHES) -> Estimate:
    """Time average of ``f_i`` (1-based ``i``) with a batch-means standard error."""
    if not 1 <= i <= model.n:
        raise ModelError(f"species {i} out of range")
    return time_average(traj, lambda x, k: model.fitness_many(x, k)[:, i - 1], burn_in, t_end,
                        vectorized=True, batches=batches, return_se=True,
                        dg=lambda x, k: fitness_rate_many(model, x, k)[:, i - 1])


# --------------------------------------------------------------------------
# growth-rate slopes


@dataclass(frozen=True)
class SlopeEstimate:
    value: float
    se: float
    window: tuple[float, float]
    cross_value: float | None = None
    cross_se: float | None = None
    below_floor: bool = False


def _ols_slope(t: np.ndarray, y: np.ndarray) -> float:
    tc = t - t.mean()
    return float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))


def lyapunov_slope(traj: Trajectory, i: int, model: ModelSpec | None = None,
                   window: tuple[float, float] | None = None, batches: int = 10,
                   log_floor: float = 1e-12) -> SlopeEstimate:
    """Least-squares slope of ``ln x_i(t)`` (1-based ``i``) over ``window``.

    The window defaults to the second half of the horizon. The standard error
    is the spread of per-batch slopes. When ``model`` is given, the time
    average of ``f_i`` over the same window is reported as a cross-estimate.
    """
    if not 1 <= i <= traj.n:
        raise ModelError(f"species {i} out of range")
    y_all = traj.logx[:, i - 1]
    if not np.isfinite(y_all[0]):
        raise ModelError(f"species {i} starts at zero")
    b, e = window if window is not None else (0.5 * traj.t_max, traj.t_max)
    sel = (traj.t >= b) & (traj.t <= e)
    t, y = traj.t[sel], y_all[sel]
    if t.size < 3:
        raise ValueError("slope window holds fewer than three samples")
    value = _ols_slope(t, y)
    edges = np.linspace(b, e, batches + 1)
    slopes = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (t >= lo) & (t <= hi)
        if m.sum() >= 3:
            slopes.append(_ols_slope(t[m], y[m]))
    se = float(np.std(slopes, ddof=1) / math.sqrt(len(slopes))) if len(slopes) > 1 else math.nan
    below = bool(np.any(y < math.log(log_floor)))
    cross = cross_se = None
    if model is not None:
        est = fitness_average(traj, model, i, burn_in=b, t_end=e, batches=batches)
        cross, cross_se = est.value, est.se
    return SlopeEstimate(value, se, (float(b), float(e)), cross, cross_se, below)


# --------------------------------------------------------------------------
# gauge drift identity


def _log_gauge_drift_many(model: ModelSpec, gauge: GaugeFunction, x: np.ndarray,
                          ks: np.ndarray) -> np.ndarray:
    q = model.switch.rates(np.zeros(model.n))
    w = np.asarray(gauge.species_weights)
    alpha = np.asarray(gauge.env_weights)
    f = model.fitness_many(x, ks)
    s = (x ** gauge.power) @ w
    if gauge.kind == "linear":
        flow = (x * f) @ w
    else:
        flow = 0.5 * (np.sqrt(x) * f) @ w
    out = flow / (1.0 + s)
    for k in range(1, model.n0 + 1):
        sel = ks == k
        for l in range(model.n0):
            if l != k - 1 and q[k - 1, l]:
                out[sel] += q[k - 1, l] * math.log(alpha[l] / alpha[k - 1])
    return out


def lnF_drift_average(traj: Trajectory, model: ModelSpec, gauge: GaugeFunction | None = None,
                      burn_in: float | None = None, t_end: float | None = None,
                      return_se: bool = False):
    """Time average of ``L ln F`` along the path; zero in the ergodic limit."""
    gauge = gauge or model.gauge
    if gauge is None:
        raise ModelError("lnF drift average needs a gauge function")
    if gauge is not model.gauge:
        from dataclasses import replace
        model = replace(model, gauge=gauge)
    if model.switch.is_constant:
        g = lambda x, k: _log_gauge_drift_many(model, gauge, x, k)  # noqa: E731
        return time_average(traj, g, burn_in, t_end, vectorized=True, return_se=return_se)
    warnings.warn("state-dependent switching: evaluating the gauge drift point by point")
    return time_average(traj, lambda x, k: log_gauge_drift(model, x, k), burn_in, t_end,
                        return_se=return_se)
