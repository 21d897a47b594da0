"""Pure numpy implementation of the steering-radius kernel.

Mirrors ``_kernel.pyx`` step for step (same Newton iterations, same t-search,
same simplex moves) so either backend yields the same radii up to rounding.
It is roughly two orders of magnitude slower and exists for platforms where
the extension could not be built.
"""

import math

import numpy as np

_BITS = np.array([[(i >> k) & 1 for k in range(3)] for i in range(8)])
_LAM = 1.0 - 2.0 * _BITS
# subset order: {}, {1}, {2}, {3}, {12}, {13}, {23}, {123}
WALSH = np.column_stack([
    np.ones(8), _LAM[:, 0], _LAM[:, 1], _LAM[:, 2],
    _LAM[:, 0] * _LAM[:, 1], _LAM[:, 0] * _LAM[:, 2], _LAM[:, 1] * _LAM[:, 2],
    _LAM[:, 0] * _LAM[:, 1] * _LAM[:, 2],
])
_FREE = WALSH[:, 4:]
_FREE_MASKS = (0b011, 0b101, 0b110, 0b111)
_MASK_TO_INDEX = {0b000: 0, 0b001: 1, 0b010: 2, 0b100: 3, 0b011: 4, 0b101: 5, 0b110: 6, 0b111: 7}
XOR_SUBSET = np.array([[_MASK_TO_INDEX[a ^ b] for b in _FREE_MASKS] for a in _FREE_MASKS])

GFEAS = 1e-20
_EYE3 = np.eye(3)


def _project(x, t):
    """Residual, curvature ``I - dP/dx``, half squared distance and its t-derivative."""
    s = x[0]
    vn = math.sqrt(x[1] * x[1] + x[2] * x[2] + x[3] * x[3])
    if vn <= t * s:
        return np.zeros(4), np.zeros((4, 4)), 0.0, 0.0
    if t * vn <= -s:
        return x.copy(), np.eye(4), 0.5 * (s * s + vn * vn), 0.0
    tt1 = 1.0 + t * t
    c = (s + t * vn) / tt1
    vh = x[1:] / vn
    r = np.empty(4)
    r[0] = s - c
    r[1:] = x[1:] - c * t * vh
    w = np.concatenate(([1.0], t * vh))
    h = np.eye(4) - np.outer(w, w) / tt1
    h[1:, 1:] -= c * t / vn * (_EYE3 - np.outer(vh, vh))
    e = vn - t * s
    return r, h, 0.5 * e * e / tt1, -e * c / tt1


def _evaluate(W, t):
    X = WALSH @ W * 0.125
    R = np.empty((8, 4))
    H = np.empty((8, 4, 4))
    g = dg = 0.0
    for i in range(8):
        R[i], H[i], hd, dd = _project(X[i], t)
        g += hd
        dg += dd
    return g, dg, R, H


def _value(W, t):
    X = WALSH @ W * 0.125
    s = X[:, 0]
    vn = np.sqrt(np.sum(X[:, 1:] ** 2, axis=1))
    e = vn - t * s
    polar = t * vn <= -s
    mid = (vn > t * s) & ~polar
    return float(np.sum(0.5 * e[mid] ** 2 / (1.0 + t * t)) + np.sum(0.5 * (s[polar] ** 2 + vn[polar] ** 2)))


def _inner(W, t, maxit):
    """Minimize g over the free rows W[4:8] in place; return (g, dg, iterations)."""
    g, dg, R, H = _evaluate(W, t)
    used = 0
    for it in range(maxit):
        used = it
        if g <= GFEAS:
            return g, dg, used
        G = (_FREE.T @ R * 0.125).ravel()
        gnorm2 = float(G @ G)
        if gnorm2 < 1e-32:
            break
        mu = 1e-12 + 1e-3 * math.sqrt(gnorm2)
        Hh = np.tensordot(WALSH.T, H, axes=1) / 64.0
        A = Hh[XOR_SUBSET].transpose(0, 2, 1, 3).reshape(16, 16)
        A = A + mu * np.eye(16)
        try:
            L = np.linalg.cholesky(A)
            d = -np.linalg.solve(L.T, np.linalg.solve(L, G))
        except np.linalg.LinAlgError:
            d = -64.0 * G
        slope = float(d @ G)
        if -slope <= 1e-15 * g:
            break
        step = 1.0
        for _ in range(40):
            Wn = W.copy()
            Wn[4:] += step * d.reshape(4, 4)
            gnew = _value(Wn, t)
            if gnew <= g + 1e-4 * step * slope:
                break
            step *= 0.5
        if gnew >= g:
            break
        W[4:] = Wn[4:]
        g, dg, R, H = _evaluate(W, t)
        used = it + 1
    return g, dg, used


def _lower_bound(W):
    lb = 0.0
    for k in range(1, 4):
        for sgn in (1.0, -1.0):
            x = 0.5 * (W[0] + sgn * W[k])
            vn = math.sqrt(float(x[1:] @ x[1:]))
            if x[0] > 1e-15 and vn / x[0] > lb:
                lb = vn / x[0]
    return lb


def _radius(W, tol, tmax, max_iter, hint):
    """Return (radius, lower, iterations, status); W[4:] receives the feasible model."""
    used = 0
    status = 0
    hi_checked = False
    have_lo = False
    lb = min(_lower_bound(W), tmax)
    lo, hi = lb, tmax
    glo = dglo = 0.0
    Wlo = W.copy()
    if lb < hint < tmax:
        g, dg, n = _inner(Wlo, hint, 200)
        used += n
        if g <= GFEAS:
            hi = hint
            hi_checked = True
            W[4:] = Wlo[4:]
            Wlo = W.copy()
            cand = hint - 0.9 * tol
            if cand > lb:
                g, dg, n = _inner(Wlo, cand, 200)
                used += n
                if g <= GFEAS:
                    hi = cand
                    W[4:] = Wlo[4:]
                else:
                    lo, glo, dglo, have_lo = cand, g, dg, True
        else:
            lo, glo, dglo, have_lo = hint, g, dg, True
    if not have_lo and hi - lo > tol:
        Wlo = W.copy()
        glo, dglo, n = _inner(Wlo, lo, 200)
        used += n
        if glo <= GFEAS:
            hi = lo
            hi_checked = True
            W[4:] = Wlo[4:]
        else:
            have_lo = True
    while hi - lo > tol:
        if used >= max_iter:
            status = 1
            break
        cand = 0.5 * (lo + hi)
        if have_lo and dglo < 0.0:
            newton = lo + 2.0 * glo / -dglo
            if hi_checked and newton >= hi - tol:
                # the estimate sits at the feasible end: probe just below it
                cand = hi - 0.9 * tol
                if cand <= lo:
                    cand = 0.5 * (lo + hi)
            elif lo < newton + 0.25 * tol < hi:
                cand = newton + 0.25 * tol
        Wt = Wlo.copy()
        g, dg, n = _inner(Wt, cand, 200)
        used += n
        if g <= GFEAS:
            hi = cand
            hi_checked = True
            W[4:] = Wt[4:]
        else:
            lo, glo, dglo = cand, g, dg
            Wlo = Wt
    if not hi_checked:
        Wt = Wlo.copy()
        g, _, n = _inner(Wt, hi, 200)
        used += n
        if g <= GFEAS:
            W[4:] = Wt[4:]
        else:
            status = 2
    return hi, lo, used, status


def _stack(F, Z):
    return np.vstack([np.asarray(F, dtype=float), np.asarray(Z, dtype=float)])


def free_residual(F, Z, t):
    """Return ``(g, dg/dt)`` at the given coefficients without optimizing."""
    g, dg, _, _ = _evaluate(_stack(F, Z), t)
    return g, dg


def solve_free(F, Z, t, maxit=100):
    """Minimize the cone residual over free coefficients at fixed ``t`` (Z updated in place)."""
    W = _stack(F, Z)
    g, dg, its = _inner(W, t, maxit)
    Z[...] = W[4:]
    return g, dg, its


def min_radius(F, Z, tol=1e-4, tmax=4.0, max_iter=2000, hint=-1.0):
    """Smallest cone aperture admitting an exact LHS model; see the compiled twin."""
    W = _stack(F, Z)
    out = _radius(W, tol, tmax, max_iter, hint)
    Z[...] = W[4:]
    return out


class _Objective:
    def __init__(self, F0, M, tol, tmax, max_iter):
        self.F0 = np.asarray(F0, dtype=float)
        self.M = np.asarray(M, dtype=float)
        self.W = np.zeros((8, 4))
        self.tol = tol
        self.tmax = tmax
        self.max_iter = max_iter
        self.evals = 0
        self.iters = 0
        self.worst_status = 0
        self.last = -1.0

    def __call__(self, ang):
        th, ph = ang[0::2], ang[1::2]
        n = np.column_stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
        self.W[0] = self.F0
        self.W[1:4] = n @ self.M.T
        r, _, used, status = _radius(self.W, self.tol, self.tmax, self.max_iter, self.last)
        if status != 0:
            # restart from a neutral model before giving up on this triple
            self.W[4:] = 0.0
            r, _, used, status = _radius(self.W, self.tol, self.tmax, self.max_iter, -1.0)
        self.last = r
        self.evals += 1
        self.iters += used
        self.worst_status = max(self.worst_status, status)
        return r


def _nelder_mead(ob, x0, step, xtol, ftol, max_evals):
    start = ob.evals
    sim = [np.array(x0, dtype=float)]
    for i in range(6):
        x = np.array(x0, dtype=float)
        x[i] += step
        sim.append(x)
    fv = [-ob(x) for x in sim]
    while True:
        # stable sort keeps first-found order on ties
        order = sorted(range(7), key=lambda k: fv[k])
        sim = [sim[k] for k in order]
        fv = [fv[k] for k in order]
        spread = max(float(np.max(np.abs(sim[i] - sim[0]))) for i in range(1, 7))
        fspread = max(abs(fv[i] - fv[0]) for i in range(1, 7))
        if (spread <= xtol and fspread <= ftol) or ob.evals - start >= max_evals:
            break
        xc = sum(sim[:6]) / 6.0
        xr = 2.0 * xc - sim[6]
        fr = -ob(xr)
        if fr < fv[0]:
            xe = 3.0 * xc - 2.0 * sim[6]
            fe = -ob(xe)
            if fe < fr:
                sim[6], fv[6] = xe, fe
            else:
                sim[6], fv[6] = xr, fr
            continue
        if fr < fv[5]:
            sim[6], fv[6] = xr, fr
            continue
        if fr < fv[6]:
            xk = 1.5 * xc - 0.5 * sim[6]
            fk = -ob(xk)
            accept = fk <= fr
        else:
            xk = 0.5 * xc + 0.5 * sim[6]
            fk = -ob(xk)
            accept = fk < fv[6]
        if accept:
            sim[6], fv[6] = xk, fk
        else:
            for i in range(1, 7):
                sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
                fv[i] = -ob(sim[i])
    return -fv[0], sim[0]


def direction_search(F0, M, starts, tol=1e-4, outer_tol=1e-4, angle_tol=1e-3,
                     step=0.25, max_evals=600, tmax=4.0, max_iter=2000):
    """Maximize the fixed-direction radius over measurement triples; see the compiled twin."""
    ob = _Objective(F0, M, tol, tmax, max_iter)
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    per_start = np.zeros(len(starts))
    best = -1.0
    angles = np.zeros(6)
    for s, x0 in enumerate(starts):
        val, xb = _nelder_mead(ob, x0, step, angle_tol, outer_tol, max_evals)
        per_start[s] = val
        if val > best:
            best = val
            angles = xb.copy()
    return best, angles, per_start, ob.evals, ob.iters, ob.worst_status
