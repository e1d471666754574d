"""Event-driven simulation of switched Kolmogorov systems.

Within an environment the ODE is integrated with an adaptive Dormand-Prince
5(4) scheme in log coordinates; environment changes are drawn exactly
(exponential holding times for constant generators, thinning against the
declared ``rate_bound`` otherwise).

Random numbers: replicate ``r`` of seed ``s`` reads uniforms from
``Generator(Philox(SeedSequence(s, spawn_key=(r,))))`` in blocks of 4096.
A constant-generator jump consumes one uniform for the holding time and,
when more than one target is possible, one for the target. A thinning step
consumes one uniform per candidate time, one for acceptance and one for the
target under the same rule.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterator

import numpy as np

from . import _kernels
from .model import ModelError, ModelSpec, RateBoundError

BLOCK = 4096


class IntegratorError(RuntimeError):
    """The ODE step size collapsed or the state became non-finite."""


@dataclass(frozen=True)
class SimConfig:
    t_max: float
    rtol: float = 1e-8
    atol: float = 1e-10
    h_max: float = math.inf
    seed: int = 0
    record_dt: float = 0.1
    log_floor: float = 1e-12
    replicate: int = 0
    max_steps: int = 10**8

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not self.record_dt > 0:
            raise ValueError("record_dt must be positive")
        if not self.h_max > 0:
            raise ValueError("h_max must be positive")


@dataclass(frozen=True)
class JumpEvent:
    time: float
    env_from: int
    env_to: int
    x: np.ndarray


@dataclass
class Trajectory:
    """Sampled path plus the exact jump log.

    ``logx`` holds ``ln x`` (``-inf`` for species that started at zero).
    Samples sit at ``0, record_dt, 2 record_dt, ...`` and at ``t_max``.
    Environments are 1-based.
    """

    t: np.ndarray
    logx: np.ndarray
    k: np.ndarray
    jump_t: np.ndarray
    jump_from: np.ndarray
    jump_to: np.ndarray
    jump_logx: np.ndarray
    seed: int
    replicate: int
    fingerprint: str
    t_max: float
    record_dt: float
    n_steps: int = 0
    labels: tuple[int, ...] = ()

    @property
    def x(self) -> np.ndarray:
        return np.exp(self.logx)

    @property
    def n(self) -> int:
        return self.logx.shape[1]

    @property
    def x0(self) -> np.ndarray:
        return np.exp(self.logx[0])

    @property
    def final_x(self) -> np.ndarray:
        return np.exp(self.logx[-1])

    @property
    def jumps(self) -> list[JumpEvent]:
        return [JumpEvent(float(t), int(a), int(b), np.exp(y))
                for t, a, b, y in zip(self.jump_t, self.jump_from, self.jump_to, self.jump_logx)]

    def samples(self) -> Iterator[tuple[float, np.ndarray, int]]:
        for t, y, k in zip(self.t, self.logx, self.k):
            yield float(t), np.exp(y), int(k)


# --------------------------------------------------------------------------
# packing polynomial fitness into arrays for the compiled kernel

_PACK_CACHE: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _pack(model: ModelSpec):
    key = model.fingerprint()
    hit = _PACK_CACHE.get(key)
    if hit is not None:
        return hit
    n, n0 = model.n, model.n0
    width = max([len(p.terms) for fld in model.fields for p in fld.fitness] + [1])
    coef = np.zeros((n0, n, width))
    expo = np.zeros((n0, n, width, n), dtype=np.int64)
    nterms = np.zeros((n0, n), dtype=np.int64)
    for k, fld in enumerate(model.fields):
        for i, p in enumerate(fld.fitness):
            nterms[k, i] = len(p.terms)
            for m, (mono, c) in enumerate(p.terms):
                coef[k, i, m] = c
                expo[k, i, m, :] = mono
    _PACK_CACHE[key] = (coef, expo, nterms)
    return coef, expo, nterms


def _check_state(model: ModelSpec, x0) -> np.ndarray:
    x0 = np.array(x0, dtype=float).reshape(-1)
    if x0.shape != (model.n,):
        raise ModelError(f"initial state must have {model.n} components")
    if (x0 < 0).any() or not np.isfinite(x0).all():
        raise ModelError("initial state must be finite and nonnegative")
    return x0


def _to_log(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(x)


def _status_error(status: int, t: float, y: np.ndarray, k: int, h: float) -> IntegratorError:
    what = {
        _kernels.UNDERFLOW: "step size underflow",
        _kernels.NONFINITE: "non-finite state",
        _kernels.MAXSTEPS: "step budget exhausted",
    }.get(status, f"status {status}")
    return IntegratorError(f"{what} at t={t:.6g} in environment {k}, "
                           f"x={np.exp(y)}, last h={h:.3g}")


def flow_segment(model: ModelSpec, x0, k: int, tau: float, cfg: SimConfig | None = None) -> np.ndarray:
    """State after following environment ``k`` for time ``tau`` from ``x0``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    model._check_env(k)
    cfg = cfg or SimConfig(t_max=max(tau, 1.0))
    x0 = _check_state(model, x0)
    y = _to_log(x0)
    if tau == 0:
        return x0.copy()
    coef, expo, nterms = _pack(model)
    active = x0 > 0
    empty_t = np.empty(0)
    empty_y = np.empty((0, model.n))
    empty_k = np.empty(0, dtype=np.int64)
    h0 = min(cfg.h_max, 0.01, tau)
    t, h, _, _, _, status = _kernels.advance(
        y, 0.0, float(tau), k - 1, h0, 1, math.inf, empty_t, empty_y, empty_k, 0,
        coef, expo, nterms, active, cfg.rtol, cfg.atol, cfg.log_floor, cfg.h_max, cfg.max_steps)
    if status != _kernels.OK:
        raise _status_error(status, t, y, k, h)
    return np.exp(y)


class UniformStream:
    """Uniforms on (0, 1) read from a Philox stream in fixed-size blocks."""

    def __init__(self, seed: int, replicate: int = 0):
        ss = np.random.SeedSequence(seed, spawn_key=(replicate,))
        self._gen = np.random.Generator(np.random.Philox(ss))
        self._buf = np.empty(0)
        self._pos = 0

    def random(self) -> float:
        if self._pos >= self._buf.size:
            self._buf = self._gen.random(BLOCK)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        # (0, 1): keeps -log(u) finite
        return u if u > 0.0 else 5e-324


def rng_for(seed: int, replicate: int = 0) -> UniformStream:
    return UniformStream(seed, replicate)


def _pick(row: np.ndarray, k0: int, rng) -> int:
    """0-based target drawn with probability proportional to ``row`` off the diagonal."""
    w = row.copy()
    w[k0] = 0.0
    targets = np.flatnonzero(w > 0)
    if targets.size == 1:
        return int(targets[0])
    c = np.cumsum(w[targets])
    u = rng.random() * c[-1]
    return int(targets[min(np.searchsorted(c, u, side="right"), targets.size - 1)])


@dataclass
class JumpDraw:
    dt: float
    new_env: int | None
    x: np.ndarray | None = None
    candidates: int = 0


def sample_jump(model: ModelSpec, x, k: int, rng,
                flow: Callable[[np.ndarray, float], np.ndarray] | None = None,
                horizon: float = math.inf) -> JumpDraw:
    """Draw the time to the next environment change and its target.

    ``flow(x, tau)`` moves the state along environment ``k``; it is required
    for state-dependent laws (thinning integrates to every candidate time)
    and optional for constant ones. When no jump happens before ``horizon``
    the result has ``new_env=None`` and ``dt=horizon``.
    """
    model._check_env(k)
    law = model.switch
    x = np.asarray(x, dtype=float)
    if law.is_constant:
        q = law.rates(x)
        rate = -q[k - 1, k - 1]
        dt = -math.log(rng.random()) / rate if rate > 0 else math.inf
        if dt >= horizon:
            xe = flow(x, horizon) if flow is not None and math.isfinite(horizon) else None
            return JumpDraw(horizon, None, xe, 1)
        xe = flow(x, dt) if flow is not None else None
        return JumpDraw(dt, _pick(q[k - 1], k - 1, rng) + 1, xe, 1)

    if flow is None:
        flow = lambda y, tau: flow_segment(model, y, k, tau)  # noqa: E731
    bound = law.rate_bound
    elapsed = 0.0
    cands = 0
    while True:
        gap = -math.log(rng.random()) / bound
        cands += 1
        if elapsed + gap >= horizon:
            x = flow(x, horizon - elapsed)
            return JumpDraw(horizon, None, x, cands)
        x = flow(x, gap)
        elapsed += gap
        q = law.rates(x)
        total = -q[k - 1, k - 1]
        if total > bound * (1 + 1e-12):
            raise RateBoundError(f"exit rate {total:.6g} from environment {k} at x={x} "
                                 f"exceeds rate_bound {bound:.6g}")
        if rng.random() * bound < total:
            return JumpDraw(elapsed, _pick(q[k - 1], k - 1, rng) + 1, x, cands)


class _PathRecorder:
    """Owns the integrator state and record buffers for one trajectory."""

    def __init__(self, model: ModelSpec, x0: np.ndarray, k0: int, cfg: SimConfig):
        self.model = model
        self.cfg = cfg
        self.coef, self.expo, self.nterms = _pack(model)
        self.active = x0 > 0
        self.y = _to_log(x0)
        self.t = 0.0
        self.k = k0
        self.h = min(cfg.h_max, 0.01)
        cap = int(math.floor(cfg.t_max / cfg.record_dt)) + 3
        self.out_t = np.empty(cap)
        self.out_y = np.empty((cap, model.n))
        self.out_k = np.empty(cap, dtype=np.int64)
        self.out_t[0] = 0.0
        self.out_y[0] = self.y
        self.out_k[0] = k0 - 1
        self.nrec = 1
        self.rec_i = 1
        self.steps = 0

    def flow(self, x, tau: float) -> np.ndarray:
        # x is implied by the recorder state; the argument keeps the flow signature
        cfg = self.cfg
        t_end = min(self.t + tau, cfg.t_max)
        t, h, nrec, rec_i, steps, status = _kernels.advance(
            self.y, self.t, t_end, self.k - 1, self.h, self.rec_i, cfg.record_dt,
            self.out_t, self.out_y, self.out_k, self.nrec,
            self.coef, self.expo, self.nterms, self.active,
            cfg.rtol, cfg.atol, cfg.log_floor, cfg.h_max, cfg.max_steps)
        self.steps += steps
        if status != _kernels.OK:
            raise _status_error(status, t, self.y, self.k, h)
        self.t, self.h, self.nrec, self.rec_i = t_end, h, nrec, rec_i
        return np.exp(self.y)

    def finish(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        t_max = self.cfg.t_max
        last = self.out_t[self.nrec - 1]
        if t_max - last > 1e-9 * max(1.0, t_max):
            self.out_t[self.nrec] = t_max
            self.out_y[self.nrec] = self.y
            self.out_k[self.nrec] = self.k - 1
            self.nrec += 1
        m = self.nrec
        return self.out_t[:m].copy(), self.out_y[:m].copy(), self.out_k[:m] + 1


def simulate(model: ModelSpec, x0, k0: int, cfg: SimConfig) -> Trajectory:
    """One path on ``[0, cfg.t_max]`` started at ``(x0, k0)``."""
    x0 = _check_state(model, x0)
    model._check_env(k0)
    rng = UniformStream(cfg.seed, cfg.replicate)
    rec = _PathRecorder(model, x0, k0, cfg)
    jt, jf, jto, jy = [], [], [], []
    x = x0
    while rec.t < cfg.t_max:
        draw = sample_jump(model, x, rec.k, rng, flow=rec.flow, horizon=cfg.t_max - rec.t)
        x = draw.x
        if draw.new_env is None:
            break
        jt.append(rec.t)
        jf.append(rec.k)
        jto.append(draw.new_env)
        jy.append(rec.y.copy())
        rec.k = draw.new_env
    t, logx, k = rec.finish()
    return Trajectory(
        t=t, logx=logx, k=k,
        jump_t=np.array(jt, dtype=float),
        jump_from=np.array(jf, dtype=np.int64),
        jump_to=np.array(jto, dtype=np.int64),
        jump_logx=np.array(jy, dtype=float).reshape(len(jy), model.n),
        seed=cfg.seed, replicate=cfg.replicate, fingerprint=model.fingerprint(),
        t_max=cfg.t_max, record_dt=cfg.record_dt, n_steps=rec.steps, labels=model.labels,
    )


def _run_one(args) -> Trajectory:
    model, x0, k0, cfg = args
    return simulate(model, x0, k0, cfg)


def simulate_ensemble(model: ModelSpec, x0, k0: int, cfg: SimConfig, replicates: int,
                      workers: int = 1) -> list[Trajectory]:
    """Independent paths; replicate ``r`` reads the stream keyed by ``(cfg.seed, r)``."""
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    jobs = [(model, x0, k0, replace(cfg, replicate=r)) for r in range(replicates)]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))
