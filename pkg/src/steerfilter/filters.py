"""Local diagonal filter ensembles, branch-resolved filtering and the two-path preparation."""

from dataclasses import dataclass
import math

import numpy as np

from steerfilter.qcore import I2, StateParams, schmidt_state, validate_state

DEGENERATE_PROB = 1e-12


@dataclass(frozen=True)
class FilterEnsemble:
    """Pass amplitudes ``a1, a2`` (A side) and ``b1, b2`` (B side) of branch 1.

    Branch 2 uses the positive complements ``sqrt(1 - a**2)`` so that
    ``F1^dag F1 + F2^dag F2 = I`` holds on each side.
    """

    a1: float
    a2: float
    b1: float
    b2: float

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def side(self, which):
        """Kraus pair ``(F1, F2)`` of side 'A' or 'B'."""
        if which == "A":
            x, y = self.a1, self.a2
        elif which == "B":
            x, y = self.b1, self.b2
        else:
            raise ValueError(f"side must be 'A' or 'B', got {which!r}")
        f1 = np.diag([x, y]).astype(complex)
        f2 = np.diag([math.sqrt(1.0 - x * x), math.sqrt(1.0 - y * y)]).astype(complex)
        return f1, f2

    def kraus(self, i, j):
        """Two-qubit filter ``F_Ai (x) F_Bj`` for branch (i, j), i, j in {1, 2}."""
        if i not in (1, 2) or j not in (1, 2):
            raise ValueError(f"branch indices must be 1 or 2, got ({i}, {j})")
        return np.kron(self.side("A")[i - 1], self.side("B")[j - 1])

    def completeness_residual(self):
        res = 0.0
        for s in "AB":
            f1, f2 = self.side(s)
            res = max(res, float(np.max(np.abs(f1.conj().T @ f1 + f2.conj().T @ f2 - I2))))
        return res

    def to_json(self):
        return {"a1": self.a1, "a2": self.a2, "b1": self.b1, "b2": self.b2}

    @classmethod
    def from_json(cls, obj):
        if "alpha_deg" in obj:
            return ensemble_from_waveplates(np.radians(obj["alpha_deg"]))
        return cls(float(obj["a1"]), float(obj["a2"]), float(obj["b1"]), float(obj["b2"]))


def ensemble_from_diagonals(a1, a2, b1, b2):
    return FilterEnsemble(float(a1), float(a2), float(b1), float(b2))


def ensemble_from_waveplates(alpha):
    """Half-waveplate angles (radians, H1..H4) to filter amplitudes.

    ``F_A1 = diag(cos 2a2, sin 2a1)``, ``F_B1 = diag(cos 2a3, sin 2a4)``;
    the reflected branches carry the complementary sine/cosine.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (4,):
        raise ValueError("expected four waveplate angles")
    if np.any(alpha < 0.0) or np.any(alpha > math.pi / 2 + 1e-12):
        raise ValueError("waveplate angles must lie in [0, pi/2]")
    a1, a2, a3, a4 = alpha
    amps = [math.cos(2 * a2), math.sin(2 * a1), math.cos(2 * a3), math.sin(2 * a4)]
    # angles above pi/4 give negative amplitudes; only the magnitude is physical here
    return FilterEnsemble(*(min(1.0, abs(v)) for v in amps))


def waveplates_from_ensemble(f):
    """Inverse of :func:`ensemble_from_waveplates` on the branch [0, pi/4]."""
    return np.array([
        math.asin(f.a2) / 2,
        math.acos(f.a1) / 2,
        math.acos(f.b1) / 2,
        math.asin(f.b2) / 2,
    ])


def waveplates_to_json(alpha):
    return {"alpha_deg": [float(v) for v in np.degrees(alpha)]}


@dataclass(frozen=True)
class BranchOutcome:
    branch: tuple
    probability: float
    state: np.ndarray  # None when the branch is degenerate

    @property
    def degenerate(self):
        return self.state is None


def apply_branch(rho, f, i, j):
    """Filtered state ``F rho F^dag / p`` and its probability ``p`` for branch (i, j)."""
    rho = validate_state(rho, (4,))
    F = f.kraus(i, j)
    out = F @ rho @ F.conj().T
    p = float(np.trace(out).real)
    if p <= DEGENERATE_PROB:
        return BranchOutcome((i, j), max(p, 0.0), None)
    out = out / p
    return BranchOutcome((i, j), p, (out + out.conj().T) / 2)


def apply_all(rho, f):
    """All four branches in the order (1,1), (1,2), (2,1), (2,2)."""
    return [apply_branch(rho, f, i, j) for i in (1, 2) for j in (1, 2)]


def channel_image(rho, f):
    """Trace-preserving image ``sum_ij F_ij rho F_ij^dag``."""
    rho = np.asarray(rho, dtype=complex)
    return sum(f.kraus(i, j) @ rho @ f.kraus(i, j).conj().T for i in (1, 2) for j in (1, 2))


def _dephase(rho, qubit):
    z = np.diag([1.0, -1.0]).astype(complex)
    P = np.kron(z, I2) if qubit == "A" else np.kron(I2, z)
    return 0.5 * (rho + P @ rho @ P)


def _hwp(angle):
    c, s = math.cos(2 * angle), math.sin(2 * angle)
    return np.array([[c, s], [s, -c]], dtype=complex)


def path_two_state(theta):
    """Dephase both qubits, rotate A by a 22.5 degree half-waveplate, dephase again."""
    rho = schmidt_state(theta)
    rho = _dephase(_dephase(rho, "A"), "B")
    U = np.kron(_hwp(math.pi / 8), I2)
    rho = U @ rho @ U.conj().T
    return _dephase(_dephase(rho, "A"), "B")


def simulate_preparation(p):
    """Incoherent mixture of the two interferometer paths with weights ``eta`` and ``1 - eta``."""
    if not isinstance(p, StateParams):
        p = StateParams(*p)
    return p.eta * schmidt_state(p.theta) + (1.0 - p.eta) * path_two_state(p.theta)


__all__ = [
    "BranchOutcome", "FilterEnsemble", "apply_all", "apply_branch", "channel_image",
    "ensemble_from_diagonals", "ensemble_from_waveplates",
    "path_two_state", "simulate_preparation", "waveplates_from_ensemble", "waveplates_to_json",
]
