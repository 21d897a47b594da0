"""Three-setting steering radius: assemblages, LHS models and the radius solver.

An LHS model assigns eight hidden states ``p_i rho_i`` to the deterministic
strategies ``lambda_i`` (outcome ``a_k`` of setting ``k`` is fixed by bit ``k``
of ``i``).  The radius of a set of measurement directions is the smallest
bound ``t`` on the Bloch norms ``|r_i| / t_i`` for which an exact model
exists; the steering radius maximizes it over direction triples.  A radius
above 1 certifies steering with three projective settings.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.spatial.transform import Rotation

from steerfilter import kernel
from steerfilter.qcore import (
    PAULI, I2, StateParams, bloch, bloch_to_op, swap_sides, validate_state,
)

ZERO_PROB = 1e-12
CONFIGURATIONS = ("two-way", "one-way-A→B", "one-way-B→A", "two-way-unsteerable")
AMBIGUOUS = "boundary-ambiguous"

# strategy i answers outcome bit_k(i) to setting k
STRATEGY_OUTCOMES = np.array([[(i >> k) & 1 for k in range(3)] for i in range(8)])
_LAM = 1.0 - 2.0 * STRATEGY_OUTCOMES
WALSH = np.column_stack([
    np.ones(8), _LAM[:, 0], _LAM[:, 1], _LAM[:, 2],
    _LAM[:, 0] * _LAM[:, 1], _LAM[:, 0] * _LAM[:, 2], _LAM[:, 1] * _LAM[:, 2],
    _LAM[:, 0] * _LAM[:, 1] * _LAM[:, 2],
])
# weights of the reduced-state and setting coefficients in lhs_cost
_COST_WEIGHTS = np.array([0.75, 0.25, 0.25, 0.25])


class SolverError(RuntimeError):
    """The radius solver could not certify a result."""


@dataclass(frozen=True)
class SolverConfig:
    err: float = 1.2e-5
    bisection_tol: float = 1e-4
    outer_seeds: int = 32
    outer_tol: float = 1e-4
    max_iters: int = 2000
    t_max: float = 4.0
    angle_tol: float = 1e-3
    max_evals_per_start: int = 600
    seed: int = 0

    def __post_init__(self):
        if not self.err > 0:
            raise ValueError("err must be positive")
        if not (self.bisection_tol > 0 and self.outer_tol > 0 and self.angle_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.outer_seeds < 0 or self.max_iters < 1:
            raise ValueError("outer_seeds must be >= 0 and max_iters >= 1")


@dataclass(frozen=True)
class MeasurementTriple:
    n1: tuple
    n2: tuple
    n3: tuple

    def __post_init__(self):
        for n in self.vectors():
            if abs(np.linalg.norm(n) - 1.0) > 1e-10:
                raise ValueError(f"measurement direction {n} is not a unit vector")

    def vectors(self):
        return np.array([self.n1, self.n2, self.n3], dtype=float)

    @classmethod
    def from_array(cls, n):
        n = np.asarray(n, dtype=float)
        n = n / np.linalg.norm(n, axis=1, keepdims=True)
        return cls(*(tuple(map(float, v)) for v in n))

    @classmethod
    def from_angles(cls, ang):
        th, ph = np.asarray(ang[0::2]), np.asarray(ang[1::2])
        return cls.from_array(np.column_stack(
            [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]))

    def rotated(self, R):
        return MeasurementTriple.from_array(self.vectors() @ np.asarray(R).T)


MUB = MeasurementTriple((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


@dataclass
class Assemblage:
    """Conditional states of the steered side.

    ``probs[k, a]`` is the probability of outcome ``a`` (0 for the +1
    eigenvalue) of setting ``k``; ``states[k, a]`` the normalized 2x2
    conditional state, zero when the outcome is flagged impossible.
    """

    probs: np.ndarray
    states: np.ndarray
    zero_prob: np.ndarray = field(default=None)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        self.states = np.asarray(self.states, dtype=complex)
        if self.probs.shape != (3, 2) or self.states.shape != (3, 2, 2, 2):
            raise ValueError("assemblage needs 3 settings x 2 outcomes")
        if self.zero_prob is None:
            self.zero_prob = self.probs < ZERO_PROB
        if np.max(np.abs(self.probs.sum(axis=1) - 1.0)) > 1e-10:
            raise ValueError("outcome probabilities of a setting must sum to 1")
        red = self.subnormalized().sum(axis=1)
        if np.max(np.abs(red - red[0])) > 1e-8:
            raise ValueError("assemblage violates no-signalling: reduced states differ")

    def subnormalized(self):
        """``p_{a|k} rho_{a|k}`` as ``(trace, bloch)`` 4-vectors, shape (3, 2, 4)."""
        out = np.zeros((3, 2, 4))
        for k in range(3):
            for a in range(2):
                sig = self.probs[k, a] * self.states[k, a]
                out[k, a] = [np.trace(sig @ P).real for P in PAULI]
        return out

    def walsh(self):
        """Fixed Walsh coefficients: reduced state and outcome differences per setting."""
        x = self.subnormalized()
        F = np.zeros((4, 4))
        F[0] = x.sum(axis=1).mean(axis=0)
        F[1:] = x[:, 0] - x[:, 1]
        return F


@dataclass
class LHSModel:
    """Eight hidden states ``p_i (t_i I + r_i . sigma) / 2`` for the eight strategies."""

    p: np.ndarray
    t: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        if self.p.shape != (8,) or self.t.shape != (8,) or self.r.shape != (8, 3):
            raise ValueError("an LHS model has exactly eight components")

    def hidden(self):
        """Unnormalized hidden states as ``(trace, bloch)`` rows, shape (8, 4)."""
        return self.p[:, None] * np.column_stack([self.t, self.r])

    def max_norm_ratio(self):
        used = self.p > 0
        if not np.any(used):
            return 0.0
        return float(np.max(np.linalg.norm(self.r[used], axis=1) / self.t[used]))

    @classmethod
    def from_hidden(cls, y, marginals=None):
        """Model with the given hidden operators; weights follow ``marginals`` when possible."""
        y = np.asarray(y, dtype=float)
        s = y[:, 0]
        if marginals is not None:
            p = np.prod(np.where(STRATEGY_OUTCOMES == 0, marginals[None, :, 0], marginals[None, :, 1]), axis=1)
            if np.all((p > 0) | (np.abs(y).max(axis=1) == 0)):
                safe = np.where(p > 0, p, 1.0)
                return cls(p, s / safe, y[:, 1:] / safe[:, None])
        total = s.sum()
        p = s / total if total > 0 else np.full(8, 1 / 8)
        safe = np.where(p > 0, p, 1.0)
        t = np.where(p > 0, s / safe, 1.0)
        return cls(p, t, np.where(p[:, None] > 0, y[:, 1:] / safe[:, None], 0.0))


def _affine(rho):
    """``F0`` and ``M`` with ``F[k] = M @ n_k`` for A measuring and B steered."""
    F0 = np.array([1.0] + [np.trace(rho @ np.kron(I2, P)).real for P in PAULI[1:]])
    M = np.array([[np.trace(rho @ np.kron(PAULI[j + 1], P)).real for j in range(3)] for P in PAULI])
    return F0, np.ascontiguousarray(M)


def _oriented(rho, measuring_side):
    rho = validate_state(rho, (4,))
    if measuring_side == "A":
        return rho
    if measuring_side == "B":
        return swap_sides(rho)
    raise ValueError(f"measuring_side must be 'A' or 'B', got {measuring_side!r}")


def assemblage(rho, dirs=MUB, measuring_side="A"):
    """Conditional states of the unmeasured side after projective measurements along ``dirs``."""
    rho = _oriented(rho, measuring_side).reshape(2, 2, 2, 2)
    probs = np.zeros((3, 2))
    states = np.zeros((3, 2, 2, 2), dtype=complex)
    for k, n in enumerate(dirs.vectors()):
        for a, sign in enumerate((1.0, -1.0)):
            proj = bloch_to_op(1.0, sign * n)
            sig = np.einsum("ij,jbia->ba", proj, rho)
            p = float(np.trace(sig).real)
            probs[k, a] = max(p, 0.0)
            if p >= ZERO_PROB:
                states[k, a] = sig / p
    return Assemblage(probs, states)


def lhs_cost(asm, m):
    """Squared mismatch between the model's predictions and the assemblage.

    Matrix residuals enter as squared Frobenius norms, probability residuals squared.
    """
    y = m.hidden()
    target = asm.subnormalized()
    cost = 0.0
    for k in range(3):
        for a in range(2):
            mask = STRATEGY_OUTCOMES[:, k] == a
            d = y[mask].sum(axis=0) - target[k, a]
            cost += 0.5 * float(d @ d)
            cost += float(m.p[mask].sum() - asm.probs[k, a]) ** 2
    return cost


def _project_cone(y, t):
    """Row-wise Euclidean projection onto ``{|v| <= t s}``."""
    s = y[:, 0]
    v = y[:, 1:]
    vn = np.linalg.norm(v, axis=1)
    out = y.copy()
    polar = t * vn <= -s
    mid = (vn > t * s) & ~polar
    out[polar] = 0.0
    c = (s[mid] + t * vn[mid]) / (1.0 + t * t)
    out[mid, 0] = c
    out[mid, 1:] = (c * t / vn[mid])[:, None] * v[mid]
    return out


def _weighted_gap(y, F):
    W = WALSH[:, :4].T @ y
    D = W - F
    return D, float(np.sum(_COST_WEIGHTS[:, None] * D * D))


def _fista(F, t, y0, max_iters, stall_limit=25):
    """Accelerated projected gradient on the cone-constrained weighted least squares.

    Stops after ``stall_limit`` consecutive steps without a relative decrease
    above machine precision.
    """
    step = 1.0 / 12.0  # inverse Lipschitz constant: 2 * max weight * ||Walsh||^2
    y = _project_cone(y0, t)
    z = y.copy()
    theta = 1.0
    _, fy = _weighted_gap(y, F)
    stall = 0
    it = 0
    while it < max_iters and fy > 0.0 and stall < stall_limit:
        it += 1
        D, _ = _weighted_gap(z, F)
        grad = 2.0 * WALSH[:, :4] @ (_COST_WEIGHTS[:, None] * D)
        y_new = _project_cone(z - step * grad, t)
        _, f_new = _weighted_gap(y_new, F)
        if f_new > fy:
            # adaptive restart
            z = y.copy()
            theta = 1.0
            stall += 1
            continue
        stall = stall + 1 if fy - f_new <= 1e-15 * fy else 0
        theta_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        z = y_new + ((theta - 1.0) / theta_new) * (y_new - y)
        y, fy, theta = y_new, f_new, theta_new
    return y, fy, it, it < max_iters


@dataclass
class FeasibilityResult:
    error: float
    model: LHSModel
    iterations: int
    converged: bool


def _hidden_from_walsh(F, Z):
    return WALSH @ np.vstack([F, Z]) / 8.0


def feasibility_error_detail(asm, radius_bound, cfg=SolverConfig(), starts=None):
    """Least LHS mismatch with every hidden Bloch ratio bounded by ``radius_bound``."""
    if radius_bound < 0:
        raise ValueError("radius_bound must be non-negative")
    F = asm.walsh()
    rng = np.random.default_rng(cfg.seed)
    if starts is None:
        starts = []
    # exact solve first: an exactly feasible model settles the question
    Z = np.zeros((4, 4))
    g, _, _ = kernel.solve_free(F, Z, float(radius_bound), 200)
    starts = [_hidden_from_walsh(F, Z), _hidden_from_walsh(F, np.zeros((4, 4)))] + list(starts)
    starts += [_hidden_from_walsh(F, rng.normal(scale=0.3, size=(4, 4))) for _ in range(2)]
    best = None
    total = 0
    converged = True
    for y0 in starts:
        y, val, its, ok = _fista(F, radius_bound, y0, cfg.max_iters * 5)
        total += its
        converged = converged and ok
        if best is None or val < best[1]:
            best = (y, val)
        if val <= 1e-30:
            break
    model = LHSModel.from_hidden(best[0], asm.probs)
    return FeasibilityResult(lhs_cost(asm, model), model, total, converged)


def feasibility_error(asm, radius_bound, cfg=SolverConfig()):
    return feasibility_error_detail(asm, radius_bound, cfg).error


@dataclass
class RadiusResult:
    radius: float
    lower: float
    iterations: int
    status: int
    model: LHSModel
    feasibility_error: float


def radius_fixed_dirs_detail(asm, cfg=SolverConfig()):
    F = np.ascontiguousarray(asm.walsh())
    Z = np.zeros((4, 4))
    hi, lo, used, status = kernel.min_radius(F, Z, cfg.bisection_tol, cfg.t_max, cfg.max_iters)
    if status == 2:
        raise SolverError(f"no LHS model even at radius bound {cfg.t_max}")
    model = LHSModel.from_hidden(_hidden_from_walsh(F, Z), asm.probs)
    err = lhs_cost(asm, model)
    if err > cfg.err:
        raise SolverError(f"model at the reported radius misses the assemblage by {err:.3g}")
    return RadiusResult(float(hi), float(lo), int(used), int(status), model, err)


def radius_fixed_dirs(asm, cfg=SolverConfig()):
    """Smallest Bloch-ratio bound admitting an LHS model, to ``cfg.bisection_tol``."""
    return radius_fixed_dirs_detail(asm, cfg).radius


def _triple_angles(n):
    n = np.asarray(n, dtype=float)
    th = np.arccos(np.clip(n[:, 2], -1.0, 1.0))
    ph = np.arctan2(n[:, 1], n[:, 0])
    return np.column_stack([th, ph]).ravel()


def seed_angles(n_random, rng):
    """MUB triple followed by ``n_random`` randomly rotated copies, as six-angle rows."""
    rows = [_triple_angles(MUB.vectors())]
    if n_random:
        for R in np.atleast_1d(Rotation.random(n_random, random_state=rng)):
            rows.append(_triple_angles(R.apply(MUB.vectors())))
    return np.ascontiguousarray(np.array(rows))


@dataclass
class RadiusSearch:
    radius: float
    directions: MeasurementTriple
    mub_radius: float
    evaluations: int
    iterations: int
    status: int


def steering_radius_detail(rho, direction="A→B", cfg=SolverConfig(), rng=None):
    if direction in ("A→B", "AB", "A->B"):
        side = "A"
    elif direction in ("B→A", "BA", "B->A"):
        side = "B"
    else:
        raise ValueError(f"direction must be 'A→B' or 'B→A', got {direction!r}")
    rho = _oriented(rho, side)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    starts = seed_angles(cfg.outer_seeds, rng)
    F0, M = _affine(rho)
    best, ang, per_start, evals, iters, status = kernel.direction_search(
        F0, M, starts, cfg.bisection_tol, cfg.outer_tol, cfg.angle_tol, 0.25,
        cfg.max_evals_per_start, cfg.t_max, cfg.max_iters)
    if status == 2:
        raise SolverError(f"direction search met a triple with no LHS model below {cfg.t_max}")
    return RadiusSearch(float(best), MeasurementTriple.from_angles(ang), float(per_start[0]),
                        int(evals), int(iters), int(status))


def steering_radius(rho, direction="A→B", cfg=SolverConfig(), rng=None):
    """Maximal fixed-direction radius over measurement triples; returns ``(radius, dirs)``."""
    res = steering_radius_detail(rho, direction, cfg, rng)
    return res.radius, res.directions


def analytic_predicates(p):
    if not isinstance(p, StateParams):
        p = StateParams(*p)
    s2 = math.sin(2 * p.theta) ** 2
    c2 = math.cos(2 * p.theta) ** 2
    lower = 1 / math.sqrt(3)
    upper = 1 / math.sqrt(1 + 2 * s2)
    ba_bound = (2 * p.eta - 1) / ((2 - p.eta) * p.eta ** 3) if p.eta > 0 else -math.inf
    return {
        "ab_steerable_3set": p.eta > lower,
        "oneway_window": lower < p.eta <= upper,
        "ba_unsteerable_infset": c2 >= ba_bound,
    }


def configuration(r_ab, r_ba, margin):
    if abs(r_ab - 1.0) <= margin or abs(r_ba - 1.0) <= margin:
        return AMBIGUOUS
    if r_ab > 1 and r_ba > 1:
        return "two-way"
    if r_ab > 1:
        return "one-way-A→B"
    if r_ba > 1:
        return "one-way-B→A"
    return "two-way-unsteerable"


@dataclass
class SteeringReport:
    r_ab: float
    r_ba: float
    dirs_ab: MeasurementTriple
    dirs_ba: MeasurementTriple
    configuration: str
    diagnostics: dict

    def to_json(self):
        return {
            "r_ab": self.r_ab,
            "r_ba": self.r_ba,
            "configuration": self.configuration,
            "directions": {
                "A→B": self.dirs_ab.vectors().tolist(),
                "B→A": self.dirs_ba.vectors().tolist(),
            },
            "diagnostics": self.diagnostics,
        }


def _side_diagnostics(rho, search, side, cfg):
    fixed = radius_fixed_dirs_detail(assemblage(rho, search.directions, side), cfg)
    return {
        "mub_radius": search.mub_radius,
        "evaluations": search.evaluations,
        "iterations": search.iterations,
        "status": search.status,
        "radius_at_best_directions": fixed.radius,
        "lower_bracket": fixed.lower,
        "feasibility_error": fixed.feasibility_error,
    }


def classify(rho, cfg=SolverConfig()):
    """Both steering radii and the resulting configuration label."""
    rho = validate_state(rho, (4,))
    ab = steering_radius_detail(rho, "A→B", cfg)
    ba = steering_radius_detail(rho, "B→A", cfg)
    margin = 2 * cfg.bisection_tol
    diag = {
        "margin": margin,
        "kernel": kernel.BACKEND,
        "A→B": _side_diagnostics(rho, ab, "A", cfg),
        "B→A": _side_diagnostics(rho, ba, "B", cfg),
    }
    return SteeringReport(ab.radius, ba.radius, ab.directions, ba.directions,
                          configuration(ab.radius, ba.radius, margin), diag)
