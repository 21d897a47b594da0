"""Synthetic photon-counting tomography of states and of one-sided filter processes."""

from dataclasses import dataclass
import csv
import itertools
import math

import numpy as np
from scipy.optimize import minimize

from steerfilter.filters import FilterEnsemble
from steerfilter.qcore import PAULI, fidelity

_S = 1 / math.sqrt(2)
KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([_S, -_S], dtype=complex),
    "R": np.array([_S, 1j * _S], dtype=complex),
    "L": np.array([_S, -1j * _S], dtype=complex),
}
MINIMAL = "HVDR"
PAULI_EIGEN = "HVDARL"
PROCESS_INPUTS = "HVDR"
STATE_PORT = "out"


def projector(label):
    """Projector onto a product of the single-qubit basis states named in ``label``."""
    ket = np.ones(1, dtype=complex)
    for ch in label:
        ket = np.kron(ket, KETS[ch])
    return np.outer(ket, ket.conj())


def state_settings(n_qubits=2, overcomplete=False):
    letters = PAULI_EIGEN if overcomplete else MINIMAL
    return ["".join(p) for p in itertools.product(letters, repeat=n_qubits)]


@dataclass
class CountsRecord:
    """Rows ``(prep, projector, port, count, N)``; ``N`` is the number of trials per setting."""

    rows: list

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["prep", "projector", "port", "count", "N"])
            w.writerows(self.rows)

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            r = csv.DictReader(fh)
            return cls([(row["prep"], row["projector"], row["port"], int(float(row["count"])), int(row["N"]))
                        for row in r])

    def ports(self):
        return sorted({row[2] for row in self.rows})


def _draw(mean, rng, noiseless):
    mean = max(float(mean), 0.0)
    if noiseless:
        return mean
    return int(rng.poisson(mean))


def simulate_counts(obj, settings=None, n_per_setting=10_000, rng=None, noiseless=False, side="A"):
    """Born-rule counts for a state or for one side of a filter ensemble.

    For a density matrix, ``settings`` lists projector labels.  For a
    :class:`FilterEnsemble`, settings are ``(prep, projector)`` pairs and each
    yields counts at both output ports ``<side>1`` and ``<side>2``.  Noiseless
    mode returns the exact (non-integer) means.
    """
    if n_per_setting < 1:
        raise ValueError("n_per_setting must be at least 1")
    if rng is None:
        rng = np.random.default_rng(0)
    rows = []
    if isinstance(obj, FilterEnsemble):
        kraus = obj.side(side)
        if settings is None:
            settings = [(p, m) for p in PROCESS_INPUTS for m in PAULI_EIGEN]
        for prep, proj in settings:
            rho = projector(prep)
            P = projector(proj)
            for b, F in enumerate(kraus, start=1):
                mean = n_per_setting * np.trace(P @ F @ rho @ F.conj().T).real
                rows.append((prep, proj, f"{side}{b}", _draw(mean, rng, noiseless), n_per_setting))
        return CountsRecord(rows)
    rho = np.asarray(obj, dtype=complex)
    n_qubits = int(round(math.log2(rho.shape[0])))
    if settings is None:
        settings = state_settings(n_qubits)
    for proj in settings:
        if len(proj) != n_qubits:
            raise ValueError(f"projector label {proj!r} does not match a {n_qubits}-qubit state")
        mean = n_per_setting * np.trace(projector(proj) @ rho).real
        rows.append(("-", proj, STATE_PORT, _draw(mean, rng, noiseless), n_per_setting))
    return CountsRecord(rows)


def _pauli_basis(n_qubits):
    if n_qubits == 1:
        return list(PAULI)
    return [np.kron(P, Q) for P in PAULI for Q in PAULI]


def _linear_inversion(freqs):
    """Least-squares operator from ``{projector label: frequency}``."""
    labels = list(freqs)
    n_qubits = len(labels[0])
    d = 2 ** n_qubits
    basis = _pauli_basis(n_qubits)
    A = np.array([[np.trace(projector(lab) @ B).real / d for B in basis] for lab in labels])
    if np.linalg.matrix_rank(A) < len(basis):
        raise ValueError("setting set is not informationally complete")
    coef, *_ = np.linalg.lstsq(A, np.array([freqs[lab] for lab in labels]), rcond=None)
    return sum(c * B for c, B in zip(coef, basis)) / d


def _simplex_projection(w):
    """Euclidean projection of a real vector onto the probability simplex."""
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(u) + 1)
    k = idx[u - css / idx > 0][-1]
    return np.maximum(w - css[k - 1] / k, 0.0)


def project_density(m):
    """Closest unit-trace positive matrix in Frobenius norm."""
    m = (m + m.conj().T) / 2
    w, v = np.linalg.eigh(m)
    w = _simplex_projection(w)
    return (v * w) @ v.conj().T


def reconstruct_state(c):
    """Linear inversion followed by projection onto density matrices."""
    freqs = {}
    for prep, proj, port, count, n in c.rows:
        if port != STATE_PORT:
            raise ValueError("state reconstruction needs single-port counts")
        freqs[proj] = count / n
    if len({len(k) for k in freqs}) != 1:
        raise ValueError("mixed projector widths in one record")
    return project_density(_linear_inversion(freqs))


def _summed_output_states(c):
    """Per input state, the (unnormalized) channel output from counts summed over ports."""
    per_prep = {}
    for prep, proj, port, count, n in c.rows:
        per_prep.setdefault(prep, {}).setdefault(proj, 0.0)
        per_prep[prep][proj] += count / n
    missing = set(PROCESS_INPUTS) - set(per_prep)
    if missing:
        raise ValueError(f"process tomography is missing input states {sorted(missing)}")
    return {prep: _linear_inversion(per_prep[prep]) for prep in PROCESS_INPUTS}


def _chi_design():
    """Matrix mapping vec(chi) to the stacked outputs of the four input states."""
    rows = []
    for prep in PROCESS_INPUTS:
        rho = projector(prep)
        rows.append(np.array([(PAULI[m] @ rho @ PAULI[n].conj().T).ravel()
                              for m in range(4) for n in range(4)]).T)
    return np.vstack(rows)


_TP_MAPS = np.array([(PAULI[n].conj().T @ PAULI[m]).ravel() for m in range(4) for n in range(4)]).T


def _affine_projection(chi):
    """Project onto Hermitian chi with ``sum chi_mn s_n s_m = I`` (Frobenius metric)."""
    chi = (chi + chi.conj().T) / 2
    x = chi.ravel()
    resid = _TP_MAPS @ x - np.eye(2).ravel()
    # TP_MAPS rows are orthogonal with squared norm 8 on Hermitian directions
    x = x - _TP_MAPS.conj().T @ np.linalg.solve(_TP_MAPS @ _TP_MAPS.conj().T, resid)
    out = x.reshape(4, 4)
    return (out + out.conj().T) / 2


def _psd_projection(chi):
    w, v = np.linalg.eigh((chi + chi.conj().T) / 2)
    return (v * np.clip(w, 0.0, None)) @ v.conj().T


def project_chi(chi, tol=1e-13, max_iters=5000):
    """Dykstra alternation between the PSD cone and the trace-preserving set."""
    x = np.asarray(chi, dtype=complex)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_iters):
        y = _affine_projection(x + p)
        p = x + p - y
        x_new = _psd_projection(y + q)
        q = y + q - x_new
        if np.max(np.abs(x_new - x)) < tol and np.max(np.abs(x_new - y)) < 1e-10:
            return x_new
        x = x_new
    return x


def process_tomography(c):
    """Process matrix in the Pauli basis from counts summed over both output ports."""
    outputs = _summed_output_states(c)
    b = np.concatenate([outputs[p].ravel() for p in PROCESS_INPUTS])
    vec, *_ = np.linalg.lstsq(_chi_design(), b, rcond=None)
    return project_chi(vec.reshape(4, 4))


def apply_chi(chi, rho):
    return sum(chi[m, n] * PAULI[m] @ rho @ PAULI[n].conj().T for m in range(4) for n in range(4))


def chi_of_kraus(kraus):
    """Process matrix of a Kraus set: ``chi = sum_k c_k c_k^dag`` with ``F_k = sum_m c_km s_m``."""
    chi = np.zeros((4, 4), dtype=complex)
    for F in kraus:
        c = np.array([np.trace(P @ F) / 2 for P in PAULI])
        chi += np.outer(c, c.conj())
    return chi


def tp_residual(chi):
    return float(np.max(np.abs(_TP_MAPS @ np.asarray(chi).ravel() - np.eye(2).ravel())))


def branch_fraction(c, prep, port):
    """``N_t(port) / N`` for one input state: counts in the H and V projectors of that port."""
    tot = 0.0
    n = None
    for p, proj, prt, count, N in c.rows:
        if p == prep and prt == port and proj in ("H", "V"):
            tot += count
            n = N
    if n is None:
        raise ValueError(f"no H/V counts for input {prep!r} at port {port!r}")
    return tot / n


def branch_fractions(c):
    """Port fractions averaged over the H and V inputs, i.e. ``Tr(F_i^dag F_i) / 2``."""
    ports = c.ports()
    if len(ports) != 2:
        raise ValueError("branch fractions need exactly two ports")
    f = [0.5 * (branch_fraction(c, "H", p) + branch_fraction(c, "V", p)) for p in ports]
    s = sum(f)
    return tuple(x / s for x in f)


def hv_transmission(c, port):
    """Transmission of ``port`` for H and V inputs, used to fix the diagonal gauge."""
    return branch_fraction(c, "H", port), branch_fraction(c, "V", port)


@dataclass
class KrausCoefficients:
    """Real Pauli expansions ``F_i = sum_m a_i[m] s_m`` of the two branch filters."""

    a1: np.ndarray
    a2: np.ndarray
    residual: float
    poor_fit: bool

    def kraus(self):
        return tuple(sum(a[m] * PAULI[m] for m in range(4)) for a in (self.a1, self.a2))

    def amplitudes(self):
        """Diagonal magnitudes ``(|F1_HH|, |F1_VV|, |F2_HH|, |F2_VV|)``."""
        F1, F2 = self.kraus()
        return tuple(float(abs(x)) for x in (F1[0, 0], F1[1, 1], F2[0, 0], F2[1, 1]))

    def to_json(self):
        return {"a1": self.a1.tolist(), "a2": self.a2.tolist(),
                "residual": self.residual, "poor_fit": self.poor_fit}


def _fit_objective(x, chi):
    a1, a2 = x[:4], x[4:]
    return float(np.sum((np.outer(a1, a1) + np.outer(a2, a2) - chi) ** 2))


def _fit_gradient(x, chi):
    a1, a2 = x[:4], x[4:]
    D = np.outer(a1, a1) + np.outer(a2, a2) - chi
    return np.concatenate([4 * D @ a1, 4 * D @ a2])


def _canonical_sign(a):
    # nonnegative leading diagonal entry F[0, 0] = a_I + a_Z
    lead = a[0] + a[3]
    if lead < 0 or (lead == 0 and a[0] < 0):
        return -a
    return a


def _transmission(a):
    F = sum(a[m] * PAULI[m] for m in range(4))
    return float(np.sum(np.abs(F[:, 0]) ** 2)), float(np.sum(np.abs(F[:, 1]) ** 2))


def fit_kraus(chi, branch_fractions, hv_transmission=None, poor_fit_threshold=1e-3, n_random=6, seed=0):
    """Least-squares Kraus pair with ``|a_i|^2`` fixed to the measured branch fractions.

    The objective is ``sum_mn (a1m a1n + a2m a2n - chi_mn)^2`` over real
    vectors.  Starts come from the leading eigenvectors of ``chi`` rotated to
    meet the constraints, plus random ones.  Diagonal channels leave a
    reflection ambiguity; ``hv_transmission`` (port-1 transmission for H and
    V inputs) picks the matching solution.
    """
    chi_r = np.real((np.asarray(chi) + np.asarray(chi).conj().T) / 2)
    f1, f2 = map(float, branch_fractions)
    w, v = np.linalg.eigh(chi_r)
    l1, l2 = max(w[-1], 0.0), max(w[-2], 0.0)
    u1, u2 = math.sqrt(l1) * v[:, -1], math.sqrt(l2) * v[:, -2]
    starts = []
    if l1 - l2 > 1e-15:
        c2 = min(1.0, max(0.0, (f1 - l2) / (l1 - l2)))
    else:
        c2 = 0.5
    phi0 = math.acos(math.sqrt(c2))
    for phi in (phi0, -phi0):
        a1 = math.cos(phi) * u1 + math.sin(phi) * u2
        a2 = -math.sin(phi) * u1 + math.cos(phi) * u2
        starts.append(np.concatenate([a1, a2]))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        x = rng.normal(size=8)
        x[:4] *= math.sqrt(f1) / np.linalg.norm(x[:4])
        x[4:] *= math.sqrt(f2) / np.linalg.norm(x[4:])
        starts.append(x)
    cons = [
        {"type": "eq", "fun": lambda x: x[:4] @ x[:4] - f1, "jac": lambda x: np.concatenate([2 * x[:4], np.zeros(4)])},
        {"type": "eq", "fun": lambda x: x[4:] @ x[4:] - f2, "jac": lambda x: np.concatenate([np.zeros(4), 2 * x[4:]])},
    ]
    sols = []
    for x0 in starts:
        res = minimize(_fit_objective, x0, args=(chi_r,), jac=_fit_gradient, method="SLSQP",
                       constraints=cons, options={"ftol": 1e-16, "maxiter": 500})
        x = res.x
        sols.append((_fit_objective(x, chi_r), _canonical_sign(x[:4]), _canonical_sign(x[4:])))
    best_val = min(s[0] for s in sols)
    good = [s for s in sols if s[0] <= best_val + 1e-10 + 1e-6 * best_val]
    if hv_transmission is not None:
        target = np.asarray(hv_transmission, dtype=float)
        good.sort(key=lambda s: (float(np.sum((np.array(_transmission(s[1])) - target) ** 2)), s[0]))
    else:
        good.sort(key=lambda s: s[0])
    val, a1, a2 = good[0]
    return KrausCoefficients(a1, a2, float(val), bool(val > poor_fit_threshold))


def process_fidelity(chi_a, chi_b):
    """Squared fidelity of the trace-normalized process matrices (Choi states)."""
    a = np.asarray(chi_a, dtype=complex)
    b = np.asarray(chi_b, dtype=complex)
    return fidelity(a / np.trace(a).real, b / np.trace(b).real)
