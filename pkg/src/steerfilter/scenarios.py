"""Filter-design scenarios: configuration discovery, reversal, distillation and amplification."""

from dataclasses import dataclass
import itertools
import math

import numpy as np
from scipy.optimize import minimize

from steerfilter import kernel
from steerfilter.filters import FilterEnsemble, apply_all
from steerfilter.hidden import BRANCHES
from steerfilter.qcore import swap_sides, validate_state
from steerfilter.steering import (
    AMBIGUOUS, SolverConfig, _affine, configuration, steering_radius,
)

ONE_WAY_AB = "one-way-A→B"
ONE_WAY_BA = "one-way-B→A"
TWO_WAY = "two-way"
UNSTEERABLE = "two-way-unsteerable"
ALL_CONFIGS = (TWO_WAY, ONE_WAY_AB, ONE_WAY_BA, UNSTEERABLE)


def mub_radii(rho, tol=1e-4):
    """Radii for the x, y, z triple in both directions (a cheap lower bound on the steering radii)."""
    out = []
    for state in (rho, swap_sides(rho)):
        F0, M = _affine(state)
        F = np.ascontiguousarray(np.vstack([F0, M.T]))
        out.append(kernel.min_radius(F, np.zeros((4, 4)), tol)[0])
    return tuple(out)


def _margins(r_ab, r_ba, base_ab, base_ba):
    """Signed distance of a radius pair into each configuration region.

    The two-way slot asks for distillation: both radii above 1 and above the input's.
    """
    return {
        TWO_WAY: min(r_ab - max(1.0, base_ab), r_ba - max(1.0, base_ba)),
        ONE_WAY_AB: min(r_ab - 1.0, 1.0 - r_ba),
        ONE_WAY_BA: min(1.0 - r_ab, r_ba - 1.0),
        UNSTEERABLE: min(1.0 - r_ab, 1.0 - r_ba),
    }


def assignment_score(radii, base, min_prob, probs):
    """Best worst-case margin over assignments of the four branches to the four configurations."""
    if min(probs) < min_prob:
        return -math.inf, None
    margins = [_margins(ra, rb, *base) for ra, rb in radii]
    best = (-math.inf, None)
    for perm in itertools.permutations(ALL_CONFIGS):
        val = min(margins[b][perm[b]] for b in range(4))
        if val > best[0]:
            best = (val, perm)
    return best


def _screen(rho, ens):
    outs = apply_all(rho, ens)
    probs = [o.probability for o in outs]
    radii = [mub_radii(o.state) if not o.degenerate else (0.0, 0.0) for o in outs]
    return probs, radii


def _clip(x):
    return FilterEnsemble(*(float(min(1.0, max(0.01, v))) for v in x))


@dataclass
class BranchReport:
    branch: tuple
    probability: float
    r_ab: float
    r_ba: float
    configuration: str

    def to_json(self):
        return {"branch": list(self.branch), "probability": self.probability,
                "r_ab": self.r_ab, "r_ba": self.r_ba, "configuration": self.configuration}


def evaluate_branches(rho, ens, cfg=SolverConfig()):
    """Full steering radii and configuration of every branch."""
    out = []
    for (i, j), o in zip(BRANCHES, apply_all(rho, ens)):
        if o.degenerate:
            out.append(BranchReport((i, j), o.probability, math.nan, math.nan, "degenerate"))
            continue
        r_ab = steering_radius(o.state, "A→B", cfg)[0]
        r_ba = steering_radius(o.state, "B→A", cfg)[0]
        out.append(BranchReport((i, j), o.probability, r_ab, r_ba,
                                configuration(r_ab, r_ba, 2 * cfg.bisection_tol)))
    return out


def _search(rho, score_fn, n_random, n_refine, seed):
    """Random screening then simplex refinement of the four amplitudes."""
    rng = np.random.default_rng(seed)
    best = (-math.inf, None)
    for _ in range(n_random):
        x = rng.uniform(0.01, 1.0, size=4)
        val = score_fn(_clip(x))
        if val > best[0]:
            best = (val, x)
    res = minimize(lambda x: -score_fn(_clip(x)), best[1], method="Nelder-Mead",
                   options={"maxiter": n_refine, "xatol": 1e-6, "fatol": 1e-9, "initial_simplex": None})
    if -res.fun > best[0]:
        best = (-res.fun, res.x)
    return best[0], _clip(best[1])


@dataclass
class DesignResult:
    ensemble: FilterEnsemble
    screening_score: float
    input_radii: tuple
    branches: list
    found: bool

    def to_json(self):
        return {
            "found": self.found,
            "ensemble": self.ensemble.to_json(),
            "screening_score": self.screening_score,
            "input": {"r_ab": self.input_radii[0], "r_ba": self.input_radii[1]},
            "branches": [b.to_json() for b in self.branches],
        }


def find_filters(rho, cfg=SolverConfig(), n_random=2000, n_refine=200, seed=0, min_prob=1e-3):
    """Ensemble whose four branches show the four steering configurations, one each.

    The two-way branch must also beat the input state's radii in both directions.
    """
    rho = validate_state(rho, (4,))
    base = (steering_radius(rho, "A→B", cfg)[0], steering_radius(rho, "B→A", cfg)[0])

    def score(ens):
        probs, radii = _screen(rho, ens)
        return assignment_score(radii, base, min_prob, probs)[0]

    val, ens = _search(rho, score, n_random, n_refine, seed)
    branches = evaluate_branches(rho, ens, cfg)
    radii = [(b.r_ab, b.r_ba) for b in branches]
    final, _ = assignment_score(radii, base, min_prob, [b.probability for b in branches])
    found = final > 2 * cfg.bisection_tol and {b.configuration for b in branches} == set(ALL_CONFIGS)
    return DesignResult(ens, val, base, branches, found)


def _targeted(rho, cfg, margin_fn, n_random, n_refine, seed, min_prob):
    rho = validate_state(rho, (4,))
    base = (steering_radius(rho, "A→B", cfg)[0], steering_radius(rho, "B→A", cfg)[0])

    def score(ens):
        probs, radii = _screen(rho, ens)
        return max((margin_fn(ra, rb, base) for p, (ra, rb) in zip(probs, radii) if p >= min_prob),
                   default=-math.inf)

    val, ens = _search(rho, score, n_random, n_refine, seed)
    branches = evaluate_branches(rho, ens, cfg)
    final = max((margin_fn(b.r_ab, b.r_ba, base) for b in branches if b.probability >= min_prob),
                default=-math.inf)
    return DesignResult(ens, val, base, branches, final > 2 * cfg.bisection_tol)


def reverse(rho, cfg=SolverConfig(), n_random=2000, n_refine=200, seed=0, min_prob=1e-3):
    """Ensemble with a branch steerable only from B to A."""
    return _targeted(rho, cfg, lambda ra, rb, base: min(1.0 - ra, rb - 1.0),
                     n_random, n_refine, seed, min_prob)


def distill(rho, cfg=SolverConfig(), n_random=2000, n_refine=200, seed=0, min_prob=1e-3):
    """Ensemble with a branch whose radii both exceed 1 and the input's."""
    return _targeted(rho, cfg, lambda ra, rb, base: min(ra - max(1.0, base[0]), rb - max(1.0, base[1])),
                     n_random, n_refine, seed, min_prob)


def amplify(rho, ens, cfg=SolverConfig()):
    """Per-branch radius changes relative to the input state."""
    rho = validate_state(rho, (4,))
    r_ab = steering_radius(rho, "A→B", cfg)[0]
    r_ba = steering_radius(rho, "B→A", cfg)[0]
    rows = []
    for b in evaluate_branches(rho, ens, cfg):
        d = b.to_json()
        d["delta_ab"] = b.r_ab - r_ab
        d["delta_ba"] = b.r_ba - r_ba
        d["amplified"] = bool(d["delta_ab"] > 0 and d["delta_ba"] < 0)
        rows.append(d)
    return {
        "input": {"r_ab": r_ab, "r_ba": r_ba,
                  "configuration": configuration(r_ab, r_ba, 2 * cfg.bisection_tol)},
        "ensemble": ens.to_json(),
        "branches": rows,
        "amplified_branches": [r["branch"] for r in rows if r["amplified"]],
    }


__all__ = ["ALL_CONFIGS", "AMBIGUOUS", "amplify", "assignment_score", "distill",
           "evaluate_branches", "find_filters", "mub_radii", "reverse"]
