"""One- and two-qubit linear algebra, state constructors and figures of merit.

Conventions: ``|0> = H``, ``|1> = V`` and two-qubit operators are ordered
``A (x) B`` with the A index slowest.  Matrices are plain complex numpy
arrays; validation helpers enforce the density-matrix invariants.
"""

from dataclasses import dataclass
import math

import numpy as np

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (I2, SX, SY, SZ)

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_TOL = -1e-8


class StateError(ValueError):
    """Raised for matrices that violate the density-matrix invariants."""


@dataclass(frozen=True)
class StateParams:
    """Mixing angle ``theta`` (radians) and weight ``eta`` of the family state."""

    theta: float
    eta: float

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi / 2 + 1e-15):
            raise ValueError(f"theta must lie in [0, pi/2], got {self.theta}")
        if not (0.0 <= self.eta <= 1.0):
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")


def as_matrix(m, dims=(2, 4)):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in dims:
        raise ValueError(f"expected a square matrix of size {dims}, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def validate_state(rho, dims=(2, 4)):
    """Return ``rho`` as a complex array after checking Hermiticity, trace and positivity."""
    rho = as_matrix(rho, dims)
    if np.max(np.abs(rho - rho.conj().T)) > HERM_TOL:
        raise StateError("matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > TRACE_TOL:
        raise StateError(f"trace is {np.trace(rho).real:.12g}, expected 1")
    if np.linalg.eigvalsh(rho)[0] < EIG_TOL:
        raise StateError("matrix has a negative eigenvalue")
    return rho


def is_state(rho):
    try:
        validate_state(rho)
    except (StateError, ValueError):
        return False
    return True


def tensor(a, b):
    """Kronecker product of two one-qubit operators (A index slowest)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != (2, 2) or b.shape != (2, 2):
        raise ValueError(f"tensor expects two 2x2 operators, got {a.shape} and {b.shape}")
    return np.kron(a, b)


def partial_trace(rho, keep):
    """Reduced state of side ``keep`` ('A' or 'B') of a two-qubit operator."""
    rho = as_matrix(rho, (4,)).reshape(2, 2, 2, 2)
    if keep == "A":
        return np.einsum("ajbj->ab", rho)
    if keep == "B":
        return np.einsum("jajb->ab", rho)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def swap_sides(rho):
    """Exchange the roles of A and B."""
    return np.asarray(rho, dtype=complex).reshape(2, 2, 2, 2).transpose(1, 0, 3, 2).reshape(4, 4)


def schmidt_state(theta):
    """``cos(theta)|00> + sin(theta)|11>`` as a projector."""
    psi = np.array([math.cos(theta), 0.0, 0.0, math.sin(theta)], dtype=complex)
    return np.outer(psi, psi.conj())


def family_state(p):
    """``eta |Phi(theta)><Phi(theta)| + (1 - eta) I/2 (x) rho_B(theta)``."""
    if not isinstance(p, StateParams):
        p = StateParams(*p)
    rho_b = np.diag([math.cos(p.theta) ** 2, math.sin(p.theta) ** 2]).astype(complex)
    return p.eta * schmidt_state(p.theta) + (1.0 - p.eta) * np.kron(I2 / 2, rho_b)


def werner_state(eta):
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    return eta * schmidt_state(math.pi / 4) + (1.0 - eta) * np.eye(4, dtype=complex) / 4


def _factor(m, rel_tol=1e-14):
    """``A`` with ``m = A A^dag``; eigenvalues below ``rel_tol * max`` are clamped to zero."""
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    w = np.where(w > rel_tol * max(w[-1], 0.0), w, 0.0)
    return v * np.sqrt(w)


def concurrence(rho):
    """Wootters concurrence of a two-qubit state.

    The spin-flip eigenvalues are the singular values of ``A^T (sy x sy) A``
    for any factor ``rho = A A^dag``.
    """
    A = _factor(as_matrix(rho, (4,)))
    lam = np.linalg.svd(A.T @ np.kron(SY, SY) @ A, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def fidelity(rho, sigma):
    """Squared Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``.

    Computed as the squared trace norm of ``A^dag B`` for factors of the two
    states, which stays accurate for rank-deficient inputs.
    """
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    f = float(np.sum(np.linalg.svd(_factor(rho).conj().T @ _factor(sigma), compute_uv=False)) ** 2)
    return min(1.0, max(0.0, f))


def trace_distance(rho, sigma):
    w = np.linalg.eigvalsh(np.asarray(rho) - np.asarray(sigma))
    return float(0.5 * np.sum(np.abs(w)))


def bloch(rho):
    """Bloch vector of a Hermitian 2x2 operator (not divided by the trace)."""
    rho = as_matrix(rho, (2,))
    return np.array([np.trace(rho @ P).real for P in PAULI[1:]])


def bloch_to_op(trace, r):
    """``(trace I + r . sigma) / 2``; any trace and norm are allowed."""
    r = np.asarray(r, dtype=float)
    return 0.5 * (trace * I2 + r[0] * SX + r[1] * SY + r[2] * SZ)


def pauli_coefficients(rho):
    """Two-qubit correlation form: ``rho = sum_jk C[j, k] s_j (x) s_k / 4``."""
    rho = as_matrix(rho, (4,))
    return np.array([[np.trace(rho @ np.kron(P, Q)).real for Q in PAULI] for P in PAULI])


def encode_matrix(m):
    """Shared JSON encoding ``{"dims": [r, c], "re": [...], "im": [...]}`` (row-major)."""
    m = np.asarray(m, dtype=complex)
    return {"dims": list(m.shape), "re": m.real.ravel().tolist(), "im": m.imag.ravel().tolist()}


def decode_matrix(obj):
    try:
        r, c = obj["dims"]
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", [0.0] * (r * c)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix encoding: {exc}") from None
    if r not in (2, 4) or c not in (2, 4) or re.size != r * c or im.size != r * c:
        raise ValueError("matrix encoding has inconsistent dims")
    return (re + 1j * im).reshape(r, c)
