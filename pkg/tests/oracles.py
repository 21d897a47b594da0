"""Independent brute-force reference for the fixed-direction radius.

Nothing here touches the package's solver: the LHS mismatch is written
directly with 2x2 matrices, weights are a softmax and each hidden Bloch
vector is squashed into the open ball of radius ``t``.  Multi-start L-BFGS
minimizes the mismatch and a bisection on ``t`` finds where it vanishes.
"""

import numpy as np
from scipy.optimize import minimize

SIG = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)
I2 = np.eye(2, dtype=complex)
OUTCOME = np.array([[(i >> k) & 1 for k in range(3)] for i in range(8)])
# MEMBER[k, a, i] = 1 when strategy i answers a to setting k
MEMBER = np.array([[[1.0 if OUTCOME[i, k] == a else 0.0 for i in range(8)] for a in range(2)] for k in range(3)])


def conditional_states(rho, dirs):
    """``p_{a|k} rho_{a|k}`` (3, 2, 2, 2) for A measuring along ``dirs``, B steered."""
    r4 = rho.reshape(2, 2, 2, 2)
    out = np.zeros((3, 2, 2, 2), dtype=complex)
    for k, n in enumerate(dirs):
        for a, sgn in enumerate((1, -1)):
            P = 0.5 * (I2 + sgn * np.einsum("j,jab->ab", n, SIG))
            out[k, a] = np.einsum("ij,jbic->bc", P, r4)
    return out


def _unpack(u, t):
    logits, w = u[:8], u[8:].reshape(8, 3)
    e = np.exp(logits - logits.max())
    p = e / e.sum()
    nw = np.sqrt(np.sum(w * w, axis=1) + 1e-300)
    scale = t * np.tanh(nw) / nw
    r = scale[:, None] * w
    return p, r, w, nw, scale


def cost_and_grad(u, t, sig):
    p, r, w, nw, scale = _unpack(u, t)
    rho_i = 0.5 * (I2[None] + np.einsum("ij,jab->iab", r, SIG))
    probs = np.einsum("kaii->ka", sig).real
    model = np.einsum("kai,i,ibc->kabc", MEMBER, p, rho_i)
    M = model - sig
    dprob = np.einsum("kai,i->ka", MEMBER, p) - probs
    cost = float(np.sum(np.abs(M) ** 2) + np.sum(dprob ** 2))
    # d cost / d p_i and d cost / d r_i
    tr_m_rho = np.einsum("kabc,ibc->kai", M.conj(), rho_i).real
    g_p = 2 * np.einsum("kai,kai->i", MEMBER, tr_m_rho) + 2 * np.einsum("kai,ka->i", MEMBER, dprob)
    tr_m_sig = np.einsum("kabc,jbc->kaj", M.conj(), SIG).real
    g_r = np.einsum("kai,kaj->ij", MEMBER, tr_m_sig) * p[:, None]
    g_logits = p * (g_p - p @ g_p)
    # r = t tanh(|w|) w / |w|
    what = w / nw[:, None]
    dscale = t * (1 - np.tanh(nw) ** 2) / nw - scale / nw
    g_w = scale[:, None] * g_r + (dscale * np.sum(g_r * w, axis=1))[:, None] * what
    return cost, np.concatenate([g_logits, g_w.ravel()])


def min_cost(sig, t, rng, starts=6, warm=None):
    best = (np.inf, None)
    seeds = [] if warm is None else [warm]
    seeds += [rng.normal(scale=1.0, size=32) for _ in range(starts)]
    for u0 in seeds:
        res = minimize(cost_and_grad, u0, args=(t, sig), jac=True, method="L-BFGS-B",
                       options={"maxiter": 3000, "gtol": 1e-13, "ftol": 1e-16})
        if res.fun < best[0]:
            best = (res.fun, res.x)
        if best[0] < 1e-12:
            break
    return best


def oracle_radius(rho, dirs, tol=2e-4, threshold=1e-9, seed=0):
    """Smallest ball radius at which the brute-force mismatch drops below ``threshold``."""
    rng = np.random.default_rng(seed)
    sig = conditional_states(rho, dirs)
    lo = 0.0
    for k in range(3):
        for a in range(2):
            tr = np.trace(sig[k, a]).real
            if tr > 1e-12:
                bl = np.array([np.trace(sig[k, a] @ s).real for s in SIG]) / tr
                lo = max(lo, float(np.linalg.norm(bl)) - 1e-9)
    hi = 2.0
    val, warm = min_cost(sig, hi, rng)
    if val > threshold:
        raise RuntimeError("oracle bracket failed")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        # rescale the feasible model found at ``hi`` as an extra start
        val, u = min_cost(sig, mid, rng, warm=warm)
        if val <= threshold:
            hi, warm = mid, u
        else:
            lo = mid
    return hi


def corner_model_radius(eta):
    """Werner state with x, y, z settings: hidden Bloch vectors eta * (+-1, +-1, +-1)."""
    return np.sqrt(3.0) * eta
