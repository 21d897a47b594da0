# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled core of the three-setting steering radius.

Hidden states are stored as 4-vectors ``(s, vx, vy, vz)`` meaning the
unnormalized operator ``(s I + v.sigma) / 2``.  The eight deterministic
strategies are indexed by ``i`` with ``lambda_k = 1 - 2 * bit_k(i)``.  Every
LHS model reproducing an assemblage shares the same four low-order Walsh
coefficients (``F``); the four high-order ones (``Z``) are free.

The radius for fixed measurement directions is the smallest ``t`` for which
some ``Z`` puts every hidden state inside ``K_t = {|v| <= t s}``.  For fixed
``t`` that is decided by driving ``g = 1/2 sum_i dist(x_i, K_t)^2`` to zero
with a semismooth Newton method; ``t`` itself is located by a safeguarded
Newton iteration on ``sqrt(2 g*(t))``.
"""

from libc.math cimport sqrt, fabs, sin, cos
import numpy as np

cdef double WALSH[8][8]
cdef int _i, _j, _k
for _i in range(8):
    for _j in range(8):
        # subset order: {}, {1}, {2}, {3}, {12}, {13}, {23}, {123}
        WALSH[_i][_j] = 1.0
    for _k in range(3):
        if (_i >> _k) & 1:
            WALSH[_i][1 + _k] = -1.0
    WALSH[_i][4] = WALSH[_i][1] * WALSH[_i][2]
    WALSH[_i][5] = WALSH[_i][1] * WALSH[_i][3]
    WALSH[_i][6] = WALSH[_i][2] * WALSH[_i][3]
    WALSH[_i][7] = WALSH[_i][1] * WALSH[_i][2] * WALSH[_i][3]

cdef double GFEAS = 1e-20

# index of the character chi_{S_a} * chi_{S_b} for free subsets a, b
cdef int XOR_SUBSET[4][4]
_FREE_MASKS = (0b011, 0b101, 0b110, 0b111)
_MASK_TO_INDEX = {0b000: 0, 0b001: 1, 0b010: 2, 0b100: 3, 0b011: 4, 0b101: 5, 0b110: 6, 0b111: 7}
for _i in range(4):
    for _j in range(4):
        XOR_SUBSET[_i][_j] = _MASK_TO_INDEX[_FREE_MASKS[_i] ^ _FREE_MASKS[_j]]

cdef struct Eval:
    double g
    double dg


cdef inline void _project(double* x, double t, double* r, double* h,
                          double* half_d2, double* ddt) noexcept nogil:
    """Residual ``x - P(x)`` and ``I - dP/dx`` for the cone ``K_t``."""
    cdef double s = x[0]
    cdef double vn = sqrt(x[1] * x[1] + x[2] * x[2] + x[3] * x[3])
    cdef int p, q
    cdef double tt1, c, e, w[4], vh[3]
    for p in range(16):
        h[p] = 0.0
    if vn <= t * s:
        for p in range(4):
            r[p] = 0.0
        half_d2[0] = 0.0
        ddt[0] = 0.0
        return
    if t * vn <= -s:
        for p in range(4):
            r[p] = x[p]
            h[5 * p] = 1.0
        half_d2[0] = 0.5 * (s * s + vn * vn)
        ddt[0] = 0.0
        return
    tt1 = 1.0 + t * t
    c = (s + t * vn) / tt1
    vh[0] = x[1] / vn
    vh[1] = x[2] / vn
    vh[2] = x[3] / vn
    r[0] = s - c
    for p in range(3):
        r[1 + p] = x[1 + p] - c * t * vh[p]
    w[0] = 1.0
    for p in range(3):
        w[1 + p] = t * vh[p]
    for p in range(4):
        for q in range(4):
            h[4 * p + q] = -w[p] * w[q] / tt1
        h[5 * p] += 1.0
    for p in range(3):
        for q in range(3):
            h[4 * (1 + p) + 1 + q] -= c * t / vn * ((1.0 if p == q else 0.0) - vh[p] * vh[q])
    e = vn - t * s
    half_d2[0] = 0.5 * e * e / tt1
    ddt[0] = -e * c / tt1


cdef Eval _evaluate(double* W, double t, double* R, double* H) noexcept nogil:
    """Fill residuals R (8x4) and curvatures H (8x16); return g and dg/dt."""
    cdef double x[4]
    cdef double hd, dd
    cdef Eval out
    cdef int i, p, S
    out.g = 0.0
    out.dg = 0.0
    for i in range(8):
        for p in range(4):
            x[p] = 0.0
            for S in range(8):
                x[p] += WALSH[i][S] * W[4 * S + p]
            x[p] *= 0.125
        _project(x, t, &R[4 * i], &H[16 * i], &hd, &dd)
        out.g += hd
        out.dg += dd
    return out


cdef double _value(double* W, double t) noexcept nogil:
    cdef double x[4]
    cdef double s, vn, tt1, e, g = 0.0
    cdef int i, p, S
    for i in range(8):
        for p in range(4):
            x[p] = 0.0
            for S in range(8):
                x[p] += WALSH[i][S] * W[4 * S + p]
            x[p] *= 0.125
        s = x[0]
        vn = sqrt(x[1] * x[1] + x[2] * x[2] + x[3] * x[3])
        if vn <= t * s:
            continue
        if t * vn <= -s:
            g += 0.5 * (s * s + vn * vn)
            continue
        tt1 = 1.0 + t * t
        e = vn - t * s
        g += 0.5 * e * e / tt1
    return g


cdef int _cholesky_solve(double* A, double* b, int n) noexcept nogil:
    """In-place Cholesky of A (n x n) and solve A y = b into b."""
    cdef int i, j, k
    cdef double acc
    for j in range(n):
        acc = A[j * n + j]
        for k in range(j):
            acc -= A[j * n + k] * A[j * n + k]
        if acc <= 0.0:
            return -1
        A[j * n + j] = sqrt(acc)
        for i in range(j + 1, n):
            acc = A[i * n + j]
            for k in range(j):
                acc -= A[i * n + k] * A[j * n + k]
            A[i * n + j] = acc / A[j * n + j]
    for i in range(n):
        acc = b[i]
        for k in range(i):
            acc -= A[i * n + k] * b[k]
        b[i] = acc / A[i * n + i]
    for i in range(n - 1, -1, -1):
        acc = b[i]
        for k in range(i + 1, n):
            acc -= A[k * n + i] * b[k]
        b[i] = acc / A[i * n + i]
    return 0


cdef int _inner(double* W, double t, int maxit, Eval* res) noexcept nogil:
    """Minimize g over the free coefficients W[16:32]; return iterations used."""
    cdef double R[32]
    cdef double H[128]
    cdef double G[16]
    cdef double A[256]
    cdef double d[16]
    cdef double Wn[32]
    cdef double Hh[128]
    cdef double gnorm2, mu, slope, step, gnew, cab
    cdef int it, i, a, b, p, q, ls, S, used = 0
    cdef Eval ev = _evaluate(W, t, R, H)
    for it in range(maxit):
        used = it
        if ev.g <= GFEAS:
            res[0] = ev
            return used
        gnorm2 = 0.0
        for a in range(4):
            for p in range(4):
                G[4 * a + p] = 0.0
                for i in range(8):
                    G[4 * a + p] += WALSH[i][4 + a] * R[4 * i + p]
                G[4 * a + p] *= 0.125
                gnorm2 += G[4 * a + p] * G[4 * a + p]
        if gnorm2 < 1e-32:
            break
        mu = 1e-12 + 1e-3 * sqrt(gnorm2)
        # block (a, b) only depends on the character of the symmetric
        # difference of the two free subsets
        for S in range(8):
            for p in range(16):
                cab = 0.0
                for i in range(8):
                    cab += WALSH[i][S] * H[16 * i + p]
                Hh[16 * S + p] = cab / 64.0
        for a in range(4):
            for b in range(4):
                S = XOR_SUBSET[a][b]
                for p in range(4):
                    for q in range(4):
                        A[(4 * a + p) * 16 + 4 * b + q] = Hh[16 * S + 4 * p + q]
        for a in range(16):
            A[a * 16 + a] += mu
            d[a] = -G[a]
        if _cholesky_solve(A, d, 16) != 0:
            for a in range(16):
                d[a] = -64.0 * G[a]
        slope = 0.0
        for a in range(16):
            slope += d[a] * G[a]
        if -slope <= 1e-15 * ev.g:
            break
        step = 1.0
        for ls in range(40):
            for a in range(32):
                Wn[a] = W[a]
            for a in range(16):
                Wn[16 + a] += step * d[a]
            gnew = _value(Wn, t)
            if gnew <= ev.g + 1e-4 * step * slope:
                break
            step *= 0.5
        if gnew >= ev.g:
            break
        for a in range(16):
            W[16 + a] = Wn[16 + a]
        ev = _evaluate(W, t, R, H)
        used = it + 1
    res[0] = ev
    return used


def free_residual(double[:, ::1] F not None, double[:, ::1] Z not None, double t):
    """Return ``(g, dg/dt)`` at the given coefficients without optimizing."""
    cdef double W[32]
    cdef double R[32]
    cdef double H[128]
    cdef int S, p
    for S in range(4):
        for p in range(4):
            W[4 * S + p] = F[S, p]
            W[16 + 4 * S + p] = Z[S, p]
    cdef Eval ev = _evaluate(W, t, R, H)
    return ev.g, ev.dg


def solve_free(double[:, ::1] F not None, double[:, ::1] Z not None, double t, int maxit=100):
    """Minimize the cone residual over free coefficients at fixed ``t``.

    ``Z`` is updated in place.  Returns ``(g, dg/dt, iterations)``.
    """
    cdef double W[32]
    cdef Eval ev
    cdef int S, p, its
    for S in range(4):
        for p in range(4):
            W[4 * S + p] = F[S, p]
            W[16 + 4 * S + p] = Z[S, p]
    with nogil:
        its = _inner(W, t, maxit, &ev)
    for S in range(4):
        for p in range(4):
            Z[S, p] = W[16 + 4 * S + p]
    return ev.g, ev.dg, its


cdef double _lower_bound(double* W) noexcept nogil:
    """Largest Bloch norm among the conditional states (radius lower bound)."""
    cdef double lb = 0.0, s, vn, sgn
    cdef int k, p
    for k in range(1, 4):
        for p in range(2):
            sgn = 1.0 - 2.0 * p
            s = 0.5 * (W[0] + sgn * W[4 * k])
            vn = sqrt((0.5 * (W[1] + sgn * W[4 * k + 1])) ** 2
                      + (0.5 * (W[2] + sgn * W[4 * k + 2])) ** 2
                      + (0.5 * (W[3] + sgn * W[4 * k + 3])) ** 2)
            if s > 1e-15 and vn / s > lb:
                lb = vn / s
    return lb


cdef double _radius(double* W, double tol, double tmax, int max_iter, double hint,
                    double* lower, int* used_out, int* status_out) noexcept nogil:
    """Core of :func:`min_radius`; W[16:32] is overwritten with the feasible model.

    A positive ``hint`` (typically the radius of a nearby triple, with W
    holding its model) is tried first; otherwise the search starts from the
    largest conditional-state Bloch norm, which is a lower bound.
    """
    cdef double Wlo[32]
    cdef double Wt[32]
    cdef double lo, hi, cand, newton, lb
    cdef Eval ev, evlo
    cdef int S, used = 0, status = 0, hi_checked = 0, have_lo = 0
    lb = _lower_bound(W)
    if lb > tmax:
        lb = tmax
    lo = lb
    hi = tmax
    for S in range(32):
        Wlo[S] = W[S]
    if hint > lb and hint < tmax:
        used += _inner(Wlo, hint, 200, &ev)
        if ev.g <= GFEAS:
            hi = hint
            hi_checked = 1
            for S in range(16, 32):
                W[S] = Wlo[S]
            for S in range(32):
                Wlo[S] = W[S]
            cand = hint - 0.9 * tol
            if cand > lb:
                used += _inner(Wlo, cand, 200, &ev)
                if ev.g <= GFEAS:
                    hi = cand
                    for S in range(16, 32):
                        W[S] = Wlo[S]
                else:
                    lo = cand
                    evlo = ev
                    have_lo = 1
        else:
            lo = hint
            evlo = ev
            have_lo = 1
    if not have_lo and hi - lo > tol:
        for S in range(32):
            Wlo[S] = W[S]
        used += _inner(Wlo, lo, 200, &evlo)
        if evlo.g <= GFEAS:
            hi = lo
            hi_checked = 1
            for S in range(16, 32):
                W[S] = Wlo[S]
        else:
            have_lo = 1
    while hi - lo > tol:
        if used >= max_iter:
            status = 1
            break
        cand = 0.5 * (lo + hi)
        if have_lo and evlo.dg < 0.0:
            newton = lo + 2.0 * evlo.g / (-evlo.dg)
            if hi_checked and newton >= hi - tol:
                # the estimate sits at the feasible end: probe just below it
                cand = hi - 0.9 * tol
                if cand <= lo:
                    cand = 0.5 * (lo + hi)
            elif newton + 0.25 * tol > lo and newton + 0.25 * tol < hi:
                cand = newton + 0.25 * tol
        for S in range(32):
            Wt[S] = Wlo[S]
        used += _inner(Wt, cand, 200, &ev)
        if ev.g <= GFEAS:
            hi = cand
            hi_checked = 1
            for S in range(16, 32):
                W[S] = Wt[S]
        else:
            lo = cand
            evlo = ev
            for S in range(32):
                Wlo[S] = Wt[S]
    if not hi_checked:
        for S in range(32):
            Wt[S] = Wlo[S]
        used += _inner(Wt, hi, 200, &ev)
        if ev.g <= GFEAS:
            for S in range(16, 32):
                W[S] = Wt[S]
        else:
            status = 2
    lower[0] = lo
    used_out[0] = used
    status_out[0] = status
    return hi


def min_radius(double[:, ::1] F not None, double[:, ::1] Z not None,
               double tol=1e-4, double tmax=4.0, int max_iter=2000, double hint=-1.0):
    """Smallest cone aperture admitting an exact LHS model.

    ``F`` holds the fixed Walsh coefficients, ``Z`` the starting free ones
    (overwritten with the free coefficients of the feasible model found).
    Returns ``(radius, lower, iterations, status)`` where status 0 is
    success, 1 means the iteration budget ran out (radius is the best
    feasible bracket end) and 2 means ``tmax`` itself is infeasible.
    """
    cdef double W[32]
    cdef double lo, hi
    cdef int S, p, used, status
    for S in range(4):
        for p in range(4):
            W[4 * S + p] = F[S, p]
            W[16 + 4 * S + p] = Z[S, p]
    with nogil:
        hi = _radius(W, tol, tmax, max_iter, hint, &lo, &used, &status)
    for S in range(4):
        for p in range(4):
            Z[S, p] = W[16 + 4 * S + p]
    return hi, lo, used, status


cdef struct Objective:
    double F0[4]
    double M[12]
    double W[32]
    double tol
    double tmax
    int max_iter
    int evals
    int iters
    int worst_status
    double last


cdef double _objective(Objective* ob, double* ang) noexcept nogil:
    """Radius for the direction triple encoded by six spherical angles."""
    cdef double n[3]
    cdef double st, lo
    cdef int k, p, used, status
    cdef double r
    for p in range(4):
        ob.W[p] = ob.F0[p]
    for k in range(3):
        st = sin(ang[2 * k])
        n[0] = st * cos(ang[2 * k + 1])
        n[1] = st * sin(ang[2 * k + 1])
        n[2] = cos(ang[2 * k])
        for p in range(4):
            ob.W[4 * (k + 1) + p] = ob.M[3 * p] * n[0] + ob.M[3 * p + 1] * n[1] + ob.M[3 * p + 2] * n[2]
    r = _radius(ob.W, ob.tol, ob.tmax, ob.max_iter, ob.last, &lo, &used, &status)
    if status != 0:
        # restart from a neutral model before giving up on this triple
        for p in range(16, 32):
            ob.W[p] = 0.0
        r = _radius(ob.W, ob.tol, ob.tmax, ob.max_iter, -1.0, &lo, &used, &status)
    ob.last = r
    ob.evals += 1
    ob.iters += used
    if status > ob.worst_status:
        ob.worst_status = status
    return r


cdef double _nelder_mead(Objective* ob, double* x0, double step, double xtol,
                         double ftol, int max_evals, double* xbest) noexcept nogil:
    """Maximize the radius over angles from one start; returns the best value."""
    cdef double sim[7][6]
    cdef double fv[7]
    cdef double xc[6]
    cdef double xr[6]
    cdef double xe[6]
    cdef double xk[6]
    cdef double fr, fe, fk, tmp, spread, fspread
    cdef int i, j, k, start = ob.evals, order[7], shrink
    for j in range(6):
        sim[0][j] = x0[j]
    fv[0] = -_objective(ob, sim[0])
    for i in range(1, 7):
        for j in range(6):
            sim[i][j] = x0[j]
        sim[i][i - 1] += step
        fv[i] = -_objective(ob, sim[i])
    while True:
        # insertion sort (ascending, first-found wins ties)
        for i in range(1, 7):
            for k in range(i, 0, -1):
                if fv[k] < fv[k - 1]:
                    tmp = fv[k]; fv[k] = fv[k - 1]; fv[k - 1] = tmp
                    for j in range(6):
                        tmp = sim[k][j]; sim[k][j] = sim[k - 1][j]; sim[k - 1][j] = tmp
                else:
                    break
        spread = 0.0
        fspread = 0.0
        for i in range(1, 7):
            if fabs(fv[i] - fv[0]) > fspread:
                fspread = fabs(fv[i] - fv[0])
            for j in range(6):
                if fabs(sim[i][j] - sim[0][j]) > spread:
                    spread = fabs(sim[i][j] - sim[0][j])
        if (spread <= xtol and fspread <= ftol) or ob.evals - start >= max_evals:
            break
        for j in range(6):
            xc[j] = 0.0
            for i in range(6):
                xc[j] += sim[i][j]
            xc[j] /= 6.0
        for j in range(6):
            xr[j] = 2.0 * xc[j] - sim[6][j]
        fr = -_objective(ob, xr)
        shrink = 0
        if fr < fv[0]:
            for j in range(6):
                xe[j] = 3.0 * xc[j] - 2.0 * sim[6][j]
            fe = -_objective(ob, xe)
            if fe < fr:
                for j in range(6):
                    sim[6][j] = xe[j]
                fv[6] = fe
            else:
                for j in range(6):
                    sim[6][j] = xr[j]
                fv[6] = fr
        elif fr < fv[5]:
            for j in range(6):
                sim[6][j] = xr[j]
            fv[6] = fr
        else:
            if fr < fv[6]:
                for j in range(6):
                    xk[j] = 1.5 * xc[j] - 0.5 * sim[6][j]
                fk = -_objective(ob, xk)
                if fk <= fr:
                    for j in range(6):
                        sim[6][j] = xk[j]
                    fv[6] = fk
                else:
                    shrink = 1
            else:
                for j in range(6):
                    xk[j] = 0.5 * xc[j] + 0.5 * sim[6][j]
                fk = -_objective(ob, xk)
                if fk < fv[6]:
                    for j in range(6):
                        sim[6][j] = xk[j]
                    fv[6] = fk
                else:
                    shrink = 1
            if shrink:
                for i in range(1, 7):
                    for j in range(6):
                        sim[i][j] = sim[0][j] + 0.5 * (sim[i][j] - sim[0][j])
                    fv[i] = -_objective(ob, sim[i])
    for j in range(6):
        xbest[j] = sim[0][j]
    return -fv[0]


def direction_search(double[::1] F0 not None, double[:, ::1] M not None,
                     double[:, ::1] starts not None, double tol=1e-4,
                     double outer_tol=1e-4, double angle_tol=1e-3,
                     double step=0.25, int max_evals=600, double tmax=4.0,
                     int max_iter=2000):
    """Maximize the fixed-direction radius over measurement triples.

    The assemblage coefficients are affine in the directions:
    ``F[0] = F0`` and ``F[k] = M @ n_k``.  Each row of ``starts`` is a
    six-angle start ``(theta1, phi1, theta2, phi2, theta3, phi3)``.
    Returns ``(best, best_angles, per_start_best, evals, iterations, status)``.
    """
    cdef Objective ob
    cdef int nstart = starts.shape[0], s, j, p
    cdef double x0[6]
    cdef double xb[6]
    cdef double val, best = -1.0
    angles = np.zeros(6)
    per_start = np.zeros(nstart)
    cdef double[::1] angles_v = angles
    cdef double[::1] per_v = per_start
    for p in range(4):
        ob.F0[p] = F0[p]
        for j in range(3):
            ob.M[3 * p + j] = M[p, j]
    for p in range(32):
        ob.W[p] = 0.0
    ob.tol = tol
    ob.tmax = tmax
    ob.max_iter = max_iter
    ob.evals = 0
    ob.iters = 0
    ob.worst_status = 0
    ob.last = -1.0
    with nogil:
        for s in range(nstart):
            for j in range(6):
                x0[j] = starts[s, j]
            val = _nelder_mead(&ob, x0, step, angle_tol, outer_tol, max_evals, xb)
            per_v[s] = val
            if val > best:
                best = val
                for j in range(6):
                    angles_v[j] = xb[j]
    return best, angles, per_start, ob.evals, ob.iters, ob.worst_status
