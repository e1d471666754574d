"""Closed-form objects: switch stationary laws, boundary densities, means and invasion rates.

One-dimensional two-environment logistic pairs ``dx/dt = x (a_k - b_k x)``
have an explicit stationary density. With ``v_k(x) = x (a_k - b_k x)`` the
zero-flux balance ``v_1 h_1 + v_2 h_2 = 0`` gives ``h_k = C u / |v_k|`` where

    ln u = -(q12/a1 + q21/a2) ln x + sum_{k: b_k != 0} (q_k / a_k) ln|a_k - b_k x|

(``q_1 = q12``, ``q_2 = q21``), supported on the interval where ``v_1`` and
``v_2`` have opposite signs. The three named kinds (linear/logistic with
positive or negative logistic intercept, and two logistic environments) are
instances of this formula; quadrature of ``h_k`` is the source of truth for
the normalizing constant, with Beta-function identities kept as cross-checks.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import betaln

from .model import ModelError, ModelSpec, SubspaceIndex, embed_state, is_irreducible, restrict


class NoInteriorMeasure(ModelError):
    """The requested face carries no invariant probability measure."""


class NonIntegrable(ArithmeticError):
    """A density integral failed to converge."""


# --------------------------------------------------------------------------
# switching chain


def stationary_switch(q) -> np.ndarray:
    """Stationary law ``nu`` of a constant generator: ``nu Q = 0``, ``sum nu = 1``."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ModelError("generator must be a square matrix")
    n0 = q.shape[0]
    off = q - np.diag(np.diag(q))
    if (off < 0).any():
        raise ModelError("negative off-diagonal rate")
    scale = max(1.0, float(np.abs(q).max()))
    if np.abs(q.sum(axis=1)).max() > 1e-12 * scale:
        raise ModelError("generator rows must sum to zero")
    if n0 == 1:
        return np.ones(1)
    if not is_irreducible(q):
        raise ModelError("generator is reducible: stationary law not unique")
    if n0 == 2:
        q12, q21 = q[0, 1], q[1, 0]
        return np.array([q21, q12]) / (q12 + q21)
    a = q.T.copy()
    a[-1, :] = 1.0
    rhs = np.zeros(n0)
    rhs[-1] = 1.0
    nu = np.linalg.solve(a, rhs)
    nu = np.clip(nu, 0.0, None)
    return nu / nu.sum()


def _model_nu(model: ModelSpec) -> np.ndarray:
    if not model.switch.is_constant:
        raise ModelError("closed forms need a constant switching generator")
    return stationary_switch(model.switch.rates(np.zeros(model.n)))


# --------------------------------------------------------------------------
# densities


@dataclass
class ClosedFormDensity:
    """Stationary density ``(h_1, h_2)`` of a one-dimensional logistic pair.

    ``kind`` is one of ``CaseI`` (linear growth in environment 1, logistic
    with positive intercept in environment 2), ``CaseII`` (same with a
    negative intercept), ``LVLogisticPair`` (logistic in both) or
    ``PointMass`` (both environments share the equilibrium ``point``).
    ``C1`` is the constant in front of the displayed forms, see ``describe``;
    ``log_C1`` keeps it when it overflows a float.
    """

    kind: str
    params: dict[str, float]
    support: tuple[float, float]
    exponents: dict[str, float]
    C1: float
    masses: tuple[float, float]
    point: float | None = None
    weights: tuple[float, float] | None = None
    _logc: float = 0.0
    log_C1: float = 0.0
    _coef: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 0.0), (0.0, 0.0))
    _rates: tuple[float, float] = (0.0, 0.0)
    tail_bound: float = 0.0
    forms: dict[str, str] = field(default_factory=dict)

    # evaluation -------------------------------------------------------
    def _log_u(self, x: np.ndarray) -> np.ndarray:
        (a1, b1), (a2, b2) = self._coef
        q12, q21 = self._rates
        out = -(q12 / a1 + q21 / a2) * np.log(x)
        for (a, b), q in zip(self._coef, self._rates):
            if b != 0.0:
                # |a - b x| = b |a/b - x|: differences to the root are exact near it
                out = out + (q / a) * (math.log(b) + np.log(np.abs(a / b - x)))
        return out

    def log_h(self, x, k: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        a, b = self._coef[k - 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            lin = math.log(b) + np.log(np.abs(a / b - x)) if b != 0.0 else math.log(abs(a))
            val = self._logc + self._log_u(x) - np.log(x) - lin
        lo, hi = self.support
        inside = (x > lo) & (x < hi)
        return np.where(inside, val, -np.inf)

    def h(self, x, k: int):
        if self.kind == "PointMass":
            raise ModelError("a point mass has no density")
        out = np.exp(self.log_h(x, k))
        return float(out) if np.ndim(out) == 0 else out

    def h1(self, x):
        return self.h(x, 1)

    def h2(self, x):
        return self.h(x, 2)

    @property
    def total(self) -> float:
        return self.masses[0] + self.masses[1]

    # export -----------------------------------------------------------
    def grid(self, count: int = 400) -> np.ndarray:
        """Abscissae clustered at the support endpoints."""
        lo, hi = self.support
        if self.kind == "PointMass":
            return np.array([self.point])
        if math.isinf(hi):
            top = self.tail_scale
            if lo > 0:
                return lo + np.geomspace(lo * 1e-6, top - lo, count - 2)
            return np.geomspace(top * 1e-12, top, count - 2)
        u = (1 - np.cos(np.linspace(0, np.pi, count))) / 2
        return lo + (hi - lo) * u[1:-1]

    @property
    def tail_scale(self) -> float:
        return self.params.get("_x_tail", 1.0)

    def to_csv(self, path, count: int = 400) -> None:
        xs = self.grid(count)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "h1", "h2"])
            if self.kind == "PointMass":
                w.writerow([repr(self.point), "inf", "inf"])
                return
            for x, a, b in zip(xs, self.h(xs, 1), self.h(xs, 2)):
                w.writerow([repr(float(x)), repr(float(a)), repr(float(b))])

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "params": {k: v for k, v in self.params.items() if not k.startswith("_")},
            "support": [self.support[0], None if math.isinf(self.support[1]) else self.support[1]],
            "exponents": self.exponents,
            "C1": self.C1,
            "log_C1": self.log_C1,
            "masses": list(self.masses),
            "forms": self.forms,
            "point": self.point,
            "weights": list(self.weights) if self.weights else None,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.describe(), fh, indent=2)


def _support(coef, ) -> tuple[float, float]:
    """Interval of ``(0, inf)`` where the two drifts have opposite signs."""
    roots = sorted({a / b for a, b in coef if b != 0.0 and a / b > 0})
    cuts = [0.0] + roots + [math.inf]
    found = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        x = (lo + hi) / 2 if math.isfinite(hi) else (lo + 1.0) * 2
        s = [a - b * x for a, b in coef]
        if s[0] * s[1] < 0:
            found.append((lo, hi))
    if not found:
        raise NoInteriorMeasure("drifts never oppose each other: no stationary density")
    # adjacent pieces merge across a root where neither drift vanishes twice
    lo, hi = found[0]
    for a, b in found[1:]:
        if a == hi:
            hi = b
    return lo, hi


def _endpoint_exponent(coef, rates, point: float, k: int) -> float:
    """Algebraic exponent of ``h_k`` at a finite support endpoint."""
    (a1, _), (a2, _) = coef
    q12, q21 = rates
    if point == 0.0:
        return -(q12 / a1 + q21 / a2) - 1.0
    exp = 0.0
    for j, ((a, b), q) in enumerate(zip(coef, rates), 1):
        if b != 0.0 and abs(a / b - point) <= 1e-14 * max(1.0, point):
            exp = q / a - (1.0 if j == k else 0.0)
    return exp


def _tail_exponent(coef, rates, k: int) -> float:
    """``s`` with ``h_k(x) ~ x**s`` as ``x -> inf``."""
    (a1, _), (a2, _) = coef
    q12, q21 = rates
    s = -(q12 / a1 + q21 / a2)
    for (a, b), q in zip(coef, rates):
        if b != 0.0:
            s += q / a
    a, b = coef[k - 1]
    return s - (2.0 if b != 0.0 else 1.0)


def _quad_alg(f, lo, hi, alpha, beta):
    """``int_lo^hi f(x) (x-lo)**alpha (hi-x)**beta dx`` with ``f`` smooth.

    A round-off complaint at the tight tolerance is retried loosely and
    accepted when the error estimate stays below ``1e-9`` relative.
    """
    kw = dict(limit=1000, epsabs=0.0)
    if alpha != 0.0 or beta != 0.0:
        kw.update(weight="alg", wvar=(alpha, beta))
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            return integrate.quad(f, lo, hi, epsrel=1e-12, **kw)[0]
        except integrate.IntegrationWarning:
            pass
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, lo, hi, epsrel=1e-10, **kw)
    if np.isfinite(val) and err <= 1e-9 * abs(val):
        return val
    raise NonIntegrable(f"quadrature on [{lo:.6g}, {hi:.6g}] did not converge "
                        f"(value {val:.6g}, error estimate {err:.3g})")


class _Integrator:
    """Piecewise quadrature of ``g(x, k) h_k(x)`` respecting endpoint singularities."""

    def __init__(self, coef, rates, support, log_h):
        self.coef, self.rates, self.support, self.log_h = coef, rates, support, log_h
        lo, hi = support
        self.lo, self.hi = lo, hi
        if math.isinf(hi):
            self.mid = 2.0 * lo if lo > 0 else 1.0
        else:
            self.mid = 0.5 * (lo + hi)

    def _piece(self, func, k, a, b, alpha, beta):
        # only exponents in (-1, 1) are rough enough to need the weighted rule
        alpha = alpha if alpha < 1.0 else 0.0
        beta = beta if beta < 1.0 else 0.0
        nudge = (b - a) * 1e-12

        def smooth(x):
            # the weighted rule samples the endpoints, where the remainder is
            # only defined as a limit
            x = min(max(x, a + nudge), b - nudge)
            lh = self.log_h(x, k)
            if not np.isfinite(lh):
                return 0.0
            w = 0.0
            if alpha:
                w += alpha * math.log(x - a)
            if beta:
                w += beta * math.log(b - x)
            return func(x) * math.exp(lh - w)
        return _quad_alg(smooth, a, b, alpha, beta)

    def _decay(self, k, r):
        # power of the integrand tail, snapped to the density's exact tail power
        # plus an integer when the observed ratio is consistent with that
        s = math.log2(r) - 1.0
        base = _tail_exponent(self.coef, self.rates, k)
        m = round(s - base)
        return base + m if abs(s - base - m) < 0.05 else s

    def _tail(self, func, k, a, s):
        # int_a^inf via y = x**(s+1): the integrand becomes bounded at y = 0
        sig = s + 1.0
        top = a ** sig

        # the integrand tends to a constant as y -> 0; hold it there once x would overflow
        y_min = math.exp(690.0 * sig)

        def f(y):
            lx = math.log(max(y, y_min)) / sig
            x = math.exp(lx)
            y = max(y, y_min)
            lh = self.log_h(x, k)
            if not np.isfinite(lh):
                return 0.0
            return func(x) * math.exp(lh + lx - math.log(-sig * y))
        return _quad_alg(f, 0.0, top, 0.0, 0.0)

    def integral(self, func, k: int, tail_rel: float = 1e-10) -> float:
        lo, hi, mid = self.lo, self.hi, self.mid
        a_lo = _endpoint_exponent(self.coef, self.rates, lo, k)
        if a_lo <= -1.0:
            raise NonIntegrable(f"density of environment {k} is not integrable at x={lo}")
        if math.isfinite(hi):
            a_hi = _endpoint_exponent(self.coef, self.rates, hi, k)
            if a_hi <= -1.0:
                raise NonIntegrable(f"density of environment {k} is not integrable at x={hi}")
            return (self._piece(func, k, lo, mid, a_lo, 0.0)
                    + self._piece(func, k, mid, hi, 0.0, a_hi))
        total = self._piece(func, k, lo, mid, a_lo, 0.0)
        # doubling pieces; once successive pieces shrink by a settled ratio r
        # the power-law remainder is the geometric sum part r / (1 - r)
        a, last, r_prev = mid, None, None
        while 2.0 * a < 1e300:
            b = 2.0 * a
            part = self._piece(func, k, a, b, 0.0, 0.0)
            total += part
            if abs(part) <= tail_rel * 1e-2 * abs(total) and a > 4 * mid:
                return total
            if last is not None and last != 0.0:
                r = part / last
                if a > 1e6 * mid and r >= 0.999:
                    raise NonIntegrable("integrand tail does not decay")
                if (r_prev is not None and 0.0 < r < 0.999 and a > 64 * mid
                        and abs(r - r_prev) <= 1e-3 * r):
                    return total + self._tail(func, k, b, self._decay(k, r))
                r_prev = r
            last, a = part, b
        raise NonIntegrable("integrand tail does not decay")


def density_logistic_pair(a1: float, b1: float, a2: float, b2: float, q12: float, q21: float,
                          kind: str | None = None) -> ClosedFormDensity:
    """Stationary density of ``dx/dt = x (a_k - b_k x)`` switched at rates ``q12``, ``q21``."""
    if not (q12 > 0 and q21 > 0):
        raise ModelError("switching rates must be positive")
    if a1 == 0 or a2 == 0:
        raise ModelError("intercepts must be nonzero")
    if b1 < 0 or b2 < 0:
        raise ModelError("self-limitation coefficients must be nonnegative")
    coef = ((float(a1), float(b1)), (float(a2), float(b2)))
    rates = (float(q12), float(q21))
    support = _support(coef)
    lo, hi = support
    if lo == 0.0 and _endpoint_exponent(coef, rates, 0.0, 1) <= -1.0:
        raise NoInteriorMeasure("no interior invariant measure: growth rate at the origin is not positive")
    if math.isinf(hi) and max(_tail_exponent(coef, rates, 1), _tail_exponent(coef, rates, 2)) >= -1.0:
        raise NoInteriorMeasure("no interior invariant measure: density is not integrable at infinity")

    d = ClosedFormDensity(kind or "LVLogisticPair", dict(a1=a1, b1=b1, a2=a2, b2=b2, q12=q12, q21=q21),
                          support, {}, 1.0, (0.0, 0.0), _coef=coef, _rates=rates)
    # shift the log scale so the largest probed value is O(1)
    if math.isinf(hi):
        probe = (lo if lo > 0 else 1e-6) * np.logspace(0.001, 6, 400)
    else:
        probe = lo + (hi - lo) * np.linspace(0.001, 0.999, 400)
    with np.errstate(all="ignore"):
        lv = np.concatenate([d.log_h(probe, 1), d.log_h(probe, 2)])
    d._logc = -float(np.max(lv[np.isfinite(lv)]))
    integ = _Integrator(coef, rates, support, d.log_h)
    m1 = integ.integral(lambda x: 1.0, 1)
    m2 = integ.integral(lambda x: 1.0, 2)
    tot = m1 + m2
    d._logc -= math.log(tot)
    d.masses = (m1 / tot, m2 / tot)
    d._integrator = integ
    if math.isinf(hi):
        s = max(_tail_exponent(coef, rates, 1), _tail_exponent(coef, rates, 2))
        d.exponents["tail"] = s
        # x_max with analytic tail bound h(X) X / (|s| - 1) below 1e-10
        xs = (lo if lo > 0 else 1.0) * np.logspace(0, 12, 600)
        hx = d.h(xs, 1) + d.h(xs, 2)
        bound = hx * xs / (-s - 1.0)
        big = np.flatnonzero(~(bound < 1e-10))
        i = min(big[-1] + 1, xs.size - 1) if big.size else 0
        d.params["_x_tail"] = float(xs[i])
        d.tail_bound = float(bound[i])
    else:
        d.params["_x_tail"] = hi
    return d


def density_1d_logistic(a1_1: float, a1_2: float, b1_2: float, q12: float, q21: float) -> ClosedFormDensity:
    """Linear growth ``a1_1`` in environment 1, logistic ``a1_2 - b1_2 x`` in environment 2."""
    if not (a1_1 > 0 and b1_2 > 0 and q12 > 0 and q21 > 0):
        raise ModelError("need a1_1, b1_2, q12, q21 > 0")
    if a1_2 == 0:
        raise ModelError("a1_2 must be nonzero")
    if a1_2 < 0 and not a1_1 * q21 - abs(a1_2) * q12 > 0:
        raise NoInteriorMeasure("no interior invariant measure: a1_1 q21 - |a1_2| q12 <= 0")
    kind = "CaseI" if a1_2 > 0 else "CaseII"
    d = density_logistic_pair(a1_1, 0.0, a1_2, b1_2, q12, q21, kind=kind)
    d.params = dict(a1_1=a1_1, a1_2=a1_2, b1_2=b1_2, q12=q12, q21=q21, _x_tail=d.params["_x_tail"])
    # C1 multiplies the displayed forms; internally h_1 = C u / (a1_1 x)
    d.log_C1 = d._logc - math.log(a1_1)
    d.C1 = _exp_or_inf(d.log_C1)
    if kind == "CaseI":
        gamma = 1 + q12 / a1_1 + q21 / a1_2
        d.exponents.update(gamma=gamma, factor=q21 / a1_2)
        d.forms = {"h1": "C1 (b x - a2)^(q21/a2) / x^gamma",
                   "h2": "C1 a1 (b x - a2)^(q21/a2 - 1) / x^gamma"}
    else:
        A = abs(a1_2)
        tau = 1 - (q21 / A - q12 / a1_1)
        d.exponents.update(tau=tau, factor=-q21 / A)
        d.forms = {"h1": "C1 x^(-tau) (b x + |a2|)^(-q21/|a2|)",
                   "h2": "C1 a1 x^(-tau) (b x + |a2|)^(-1 - q21/|a2|)"}
    return d


def density_lv_boundary(a1_1: float, a1_2: float, b1_1: float, b1_2: float,
                        q12: float, q21: float) -> ClosedFormDensity:
    """Logistic growth ``a1_k - b1_k x`` in both environments.

    The displayed forms are ``h1 = C (1/b1_1) |p1-x|^(g1-1) |x-p2|^g2 / x^(1+g1+g2)``
    and ``h2 = C (1/b1_2) |p1-x|^g1 |x-p2|^(g2-1) / x^(1+g1+g2)`` with
    ``p_k = a1_k/b1_k``, ``g1 = q12/a1_1``, ``g2 = q21/a1_2``. Equal
    equilibria give a point mass weighted by the switching law.
    """
    vals = dict(a1_1=a1_1, a1_2=a1_2, b1_1=b1_1, b1_2=b1_2, q12=q12, q21=q21)
    if any(not v > 0 for v in vals.values()):
        raise ModelError("all parameters must be positive")
    p1, p2 = a1_1 / b1_1, a1_2 / b1_2
    g1, g2 = q12 / a1_1, q21 / a1_2
    if math.isclose(p1, p2, rel_tol=1e-14, abs_tol=0.0):
        nu = (q21 / (q12 + q21), q12 / (q12 + q21))
        return ClosedFormDensity("PointMass", vals, (p1, p1), {"gamma1": g1, "gamma2": g2},
                                 1.0, nu, point=p1, weights=nu)
    d = density_logistic_pair(a1_1, b1_1, a1_2, b1_2, q12, q21, kind="LVLogisticPair")
    d.params = dict(vals, p1=p1, p2=p2, _x_tail=d.params["_x_tail"])
    d.exponents.update(gamma1=g1, gamma2=g2)
    # h1 = C' u / (x b1 |p1 - x|), u carrying b1^g1 b2^g2
    d.log_C1 = d._logc + g1 * math.log(b1_1) + g2 * math.log(b1_2)
    d.C1 = _exp_or_inf(d.log_C1)
    d.forms = {"h1": "C (1/b1_1) |p1-x|^(g1-1) |x-p2|^g2 / x^(1+g1+g2)",
               "h2": "C (1/b1_2) |p1-x|^g1 |x-p2|^(g2-1) / x^(1+g1+g2)"}
    return d


def _exp_or_inf(v: float) -> float:
    return math.exp(v) if v < 709.0 else math.inf


def beta_masses(d: ClosedFormDensity) -> tuple[float, float]:
    """Environment masses from Beta-function identities (CaseI / CaseII only)."""
    p = d.params
    a1, q12, q21 = p["a1_1"], p["q12"], p["q21"]
    b = p["b1_2"]
    lc = d.log_C1
    if d.kind == "CaseI":
        a2 = p["a1_2"]
        s = q21 / a2
        gamma = d.exponents["gamma"]
        pt = a2 / b
        log1 = lc + (1 - gamma) * math.log(pt) + s * math.log(a2) + betaln(q12 / a1, s + 1)
        log2 = (lc + math.log(a1) + (1 - gamma) * math.log(pt) + (s - 1) * math.log(a2)
                + betaln(q12 / a1 + 1, s))
        return math.exp(log1), math.exp(log2)
    if d.kind == "CaseII":
        A = abs(p["a1_2"])
        s = q21 / A
        kappa = s - q12 / a1
        log1 = lc + kappa * math.log(A / b) - s * math.log(A) + betaln(kappa, q12 / a1)
        log2 = (lc + math.log(a1 / A) + kappa * math.log(A / b) - s * math.log(A)
                + betaln(kappa, q12 / a1 + 1))
        return math.exp(log1), math.exp(log2)
    raise ModelError(f"no Beta identity for kind {d.kind}")


def integrate_density(d: ClosedFormDensity, g: Callable[[float, int], float]) -> float:
    """``int g(x,1) h_1(x) dx + int g(x,2) h_2(x) dx``.

    Finite endpoints carry their algebraic singularity as a quadrature weight;
    infinite supports are integrated over doubling pieces until the remaining
    contribution falls below ``1e-12`` relative, and a non-decaying tail
    raises ``NonIntegrable``.
    """
    if d.kind == "PointMass":
        return d.weights[0] * g(d.point, 1) + d.weights[1] * g(d.point, 2)
    integ = d._integrator
    return integ.integral(lambda x: g(x, 1), 1) + integ.integral(lambda x: g(x, 2), 2)


# --------------------------------------------------------------------------
# interior means under constant interactions


def solve_means(A, lam0) -> np.ndarray:
    """Solve ``A m = lam0`` and require a positive solution."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lam0 = np.asarray(lam0, dtype=float).reshape(-1)
    if A.shape != (lam0.size, lam0.size):
        raise ModelError("interaction matrix and rate vector do not match")
    if lam0.size == 0:
        return np.zeros(0)
    if np.linalg.cond(A) > 1e12:
        raise ModelError("interaction submatrix is singular")
    m = np.linalg.solve(A, lam0)
    if (m <= 0).any():
        raise NoInteriorMeasure(f"subsystem mean infeasible: m = {m}")
    return m


def constant_interactions(model: ModelSpec, tol: float = 0.0) -> bool:
    if not model.is_linear():
        return False
    _, mat = model.linear_parts()
    return bool(np.all(np.abs(mat - mat[0]) <= tol))


def interior_means(model: ModelSpec, subspace: SubspaceIndex) -> np.ndarray:
    """``E_mu[x_I]`` for the interior measure on face ``I``.

    With ``f_i(x,k) = r_i(k) + sum_j M_ij x_j`` and ``M`` shared by every
    environment, zero invasion rates of the resident species give
    ``(-M_II) m = sum_k nu_k r_I(k)``. Competitive families have
    ``-M_II`` equal to the positive interaction table; food chains carry
    ``+a_{i,i-1}`` below the diagonal, so their rows mix signs.
    """
    if not constant_interactions(model):
        raise ModelError("interior means need affine fitness with environment-independent interactions")
    nu = _model_nu(model)
    r, mat = model.linear_parts()
    idx = [model.labels.index(i) for i in subspace]
    rbar = nu @ r
    return solve_means(-mat[0][np.ix_(idx, idx)], rbar[idx])


# --------------------------------------------------------------------------
# invasion rates


@dataclass
class BoundaryMeasureRep:
    """An ergodic measure on the face ``I`` and how it is represented.

    ``kind`` is ``PointMass`` (``point`` in face coordinates, ``weights``
    over environments), ``Density`` (a one-dimensional ``density``),
    ``Means`` (``means`` of the resident species) or ``MonteCarlo``
    (a ``trajectory`` of the restricted model ``submodel``).
    """

    subspace: SubspaceIndex
    kind: str
    point: np.ndarray | None = None
    weights: np.ndarray | None = None
    density: ClosedFormDensity | None = None
    means: np.ndarray | None = None
    trajectory: object | None = None
    submodel: ModelSpec | None = None
    burn_in: float | None = None

    def __post_init__(self):
        d = len(self.subspace)
        if self.kind == "PointMass":
            if self.point is None or np.asarray(self.point).size != d:
                raise ModelError("point mass location must have one entry per resident species")
        elif self.kind == "Density":
            if d != 1 or self.density is None:
                raise ModelError("density representations are one-dimensional")
        elif self.kind == "Means":
            if self.means is None or np.asarray(self.means).size != d:
                raise ModelError("means vector must have one entry per resident species")
        elif self.kind == "MonteCarlo":
            if self.trajectory is None or self.submodel is None or self.submodel.n != d:
                raise ModelError("Monte Carlo representation needs a trajectory of the face model")
        else:
            raise ModelError(f"unknown representation {self.kind!r}")


@dataclass(frozen=True)
class LambdaValue:
    value: float
    se: float
    method: str


def boundary_lambda(model: ModelSpec, subspace: SubspaceIndex, rep: BoundaryMeasureRep, j: int,
                    mc_cfg=None) -> LambdaValue:
    """Invasion rate ``lambda_j(mu)`` of species ``j`` against the measure ``rep`` on ``I``.

    A resident ``j`` is allowed and gives the internal rate, which vanishes
    for an ergodic measure of the face.
    """
    if rep.subspace.members != subspace.members:
        raise ModelError("representation lives on a different face")
    if not 1 <= j <= model.n:
        raise ModelError(f"species {j} out of range")
    jj = model.labels.index(j)
    face = restrict(model, subspace)

    if rep.kind == "PointMass":
        x = embed_state(model, face, np.asarray(rep.point, dtype=float))
        w = np.asarray(rep.weights if rep.weights is not None else _model_nu(model), dtype=float)
        val = sum(w[k] * model.fitness(x, k + 1)[jj] for k in range(model.n0))
        return LambdaValue(float(val), 0.0, "PointMass")

    if rep.kind == "Density":
        i = next(iter(subspace))
        ii = model.labels.index(i)

        def g(x, k):
            y = np.zeros(model.n)
            y[ii] = x
            return model.fitness(y, k)[jj]
        return LambdaValue(integrate_density(rep.density, g), 0.0, "Density")

    if rep.kind == "Means":
        if not constant_interactions(model):
            warnings.warn("interactions switch with the environment: falling back to Monte Carlo")
            if mc_cfg is None:
                raise ModelError("Monte Carlo fallback needs a simulation config")
            rep = monte_carlo_rep(model, subspace, mc_cfg)
            return boundary_lambda(model, subspace, rep, j)
        nu = _model_nu(model)
        r, mat = model.linear_parts()
        idx = [model.labels.index(i) for i in subspace]
        val = float(nu @ r[:, jj] + mat[0][jj, idx] @ np.asarray(rep.means, dtype=float))
        return LambdaValue(val, 0.0, "Means")

    from .measure import fitness_rate_many, time_average
    sub = rep.submodel
    pos = [model.labels.index(lab) for lab in sub.labels]

    def full(xs):
        out = np.zeros((xs.shape[0], model.n))
        out[:, pos] = xs
        return out

    def g(xs, ks):
        return model.fitness_many(full(xs), ks)[:, jj]

    def dg(xs, ks):
        # absent species sit at zero, so only the face flow contributes
        return fitness_rate_many(model, full(xs), ks)[:, jj]
    est = time_average(rep.trajectory, g, rep.burn_in, vectorized=True, return_se=True, dg=dg)
    return LambdaValue(est.value, est.se, "MonteCarlo")


def monte_carlo_rep(model: ModelSpec, subspace: SubspaceIndex, cfg, x0=None, k0: int = 1,
                    burn_in: float | None = None) -> BoundaryMeasureRep:
    """Simulate the face model and wrap the path as a measure representation."""
    from .simulate import simulate
    face = restrict(model, subspace)
    if x0 is None:
        x0 = np.ones(face.n)
    traj = simulate(face, x0, k0, cfg)
    return BoundaryMeasureRep(subspace, "MonteCarlo", trajectory=traj, submodel=face, burn_in=burn_in)
