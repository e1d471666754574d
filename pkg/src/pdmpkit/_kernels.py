"""Compiled inner loops: polynomial fitness evaluation and Dormand-Prince stepping.

The state is carried as ``y = ln x``. Species that start at zero carry
``y = -inf`` and are frozen (their derivative is zero and they are left out
of the error norm), so faces of the orthant stay exactly invariant.
"""
import math

import numpy as np
from numba import njit

OK, UNDERFLOW, NONFINITE, MAXSTEPS = 0, 1, 2, 3

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                          22 / 525, -1 / 40)


@njit(cache=True)
def fitness(x, k, coef, expo, nterms, out):
    n = out.shape[0]
    for i in range(n):
        s = 0.0
        for m in range(nterms[k, i]):
            v = coef[k, i, m]
            for j in range(n):
                e = expo[k, i, m, j]
                for _ in range(e):
                    v *= x[j]
            s += v
        out[i] = s


@njit(cache=True)
def _rhs(y, k, coef, expo, nterms, active, xbuf, out):
    n = y.shape[0]
    for i in range(n):
        xbuf[i] = math.exp(y[i]) if active[i] else 0.0
    fitness(xbuf, k, coef, expo, nterms, out)
    for i in range(n):
        if not active[i]:
            out[i] = 0.0


@njit(cache=True)
def advance(y, t, t_end, k, h, rec_i, record_dt, out_t, out_y, out_k, nrec,
            coef, expo, nterms, active, rtol, atol, log_floor, h_max, max_steps):
    """Integrate ``dy_i/dt = f_i(exp(y), k)`` from ``t`` to ``t_end`` in place.

    Grid samples at ``rec_i * record_dt`` falling in ``(t, t_end]`` are
    written to ``out_*`` starting at ``nrec``. Returns
    ``(t, h, nrec, rec_i, steps, status)``.
    """
    n = y.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    ytmp = np.empty(n)
    ynew = np.empty(n)
    xbuf = np.empty(n)
    steps = 0
    _rhs(y, k, coef, expo, nterms, active, xbuf, k1)
    while t < t_end:
        t_rec = rec_i * record_dt
        target = t_end
        hit_rec = False
        if t_rec <= t_end and t_rec > t:
            target = t_rec
            hit_rec = True
        elif t_rec <= t:
            # grid point already passed (exact coincidence): record now
            if nrec < out_t.shape[0]:
                out_t[nrec] = t
                for i in range(n):
                    out_y[nrec, i] = y[i]
                out_k[nrec] = k
                nrec += 1
            rec_i += 1
            continue
        if h > h_max:
            h = h_max
        hs = h
        last = False
        if t + hs >= target:
            hs = target - t
            last = True
        if hs <= 1e-14 * max(1.0, abs(t)) and not (last and hs > 0):
            return t, h, nrec, rec_i, steps, UNDERFLOW
        for i in range(n):
            ytmp[i] = y[i] + hs * A21 * k1[i]
        _rhs(ytmp, k, coef, expo, nterms, active, xbuf, k2)
        for i in range(n):
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i])
        _rhs(ytmp, k, coef, expo, nterms, active, xbuf, k3)
        for i in range(n):
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        _rhs(ytmp, k, coef, expo, nterms, active, xbuf, k4)
        for i in range(n):
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        _rhs(ytmp, k, coef, expo, nterms, active, xbuf, k5)
        for i in range(n):
            ytmp[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                  + A64 * k4[i] + A65 * k5[i])
        _rhs(ytmp, k, coef, expo, nterms, active, xbuf, k6)
        for i in range(n):
            ynew[i] = y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i]
                                  + B5 * k5[i] + B6 * k6[i])
        _rhs(ynew, k, coef, expo, nterms, active, xbuf, k7)
        err = 0.0
        nact = 0
        finite = True
        for i in range(n):
            if not active[i]:
                continue
            nact += 1
            if not math.isfinite(ynew[i]):
                finite = False
                break
            e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                     + E6 * k6[i] + E7 * k7[i])
            # x-space tolerance above the floor, pure relative below it
            xs = math.exp(max(y[i], ynew[i]))
            sc = rtol
            if xs >= log_floor:
                sc += atol / xs
            err += (e / sc) ** 2
        steps += 1
        if steps > max_steps:
            return t, h, nrec, rec_i, steps, MAXSTEPS
        if not finite:
            h = hs * 0.25
            if h <= 1e-14 * max(1.0, abs(t)):
                return t, h, nrec, rec_i, steps, NONFINITE
            continue
        if nact > 0:
            err = math.sqrt(err / nact)
        if err <= 1.0:
            if last:
                t = target
            else:
                t = t + hs
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]
            if hit_rec and last:
                if nrec < out_t.shape[0]:
                    out_t[nrec] = t
                    for i in range(n):
                        out_y[nrec, i] = y[i]
                    out_k[nrec] = k
                    nrec += 1
                rec_i += 1
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            if not last:
                h = hs * fac
            # a step shortened to land on a target keeps the untested proposal
        else:
            h = hs * max(0.2, 0.9 * err ** -0.2)
    return t, h, nrec, rec_i, steps, OK
