import numpy as np
import pytest

from steerfilter.filters import FilterEnsemble
from steerfilter.qcore import StateParams, family_state, fidelity, trace_distance
from steerfilter.tomography import (
    PROCESS_INPUTS, CountsRecord, apply_chi, branch_fraction, branch_fractions, chi_of_kraus,
    fit_kraus, hv_transmission, process_fidelity, process_tomography, projector, reconstruct_state,
    simulate_counts, state_settings, tp_residual,
)
from test_qcore import random_state

REFERENCE_ENSEMBLE = FilterEnsemble(0.70, 0.20, 0.12, 0.16)


def fit_side(c):
    chi = process_tomography(c)
    return chi, fit_kraus(chi, branch_fractions(c), hv_transmission(c, "A1"))


def test_counts_examples():
    c = simulate_counts(projector("H"), ["H"], 1000, noiseless=True)
    assert c.rows == [("-", "H", "out", 1000.0, 1000)]
    dephase = FilterEnsemble(1.0, 0.0, 1.0, 0.0)
    c = simulate_counts(dephase, [("D", "H")], 1000, noiseless=True)
    assert dict(((r[2], r[3]) for r in c.rows))["A1"] == pytest.approx(500.0)


def test_poisson_concentration():
    rng = np.random.default_rng(0)
    hits = sum(900 <= simulate_counts(projector("H"), ["H"], 1000, rng).rows[0][3] <= 1100 for _ in range(1000))
    assert hits >= 990


def test_counts_validation():
    with pytest.raises(ValueError):
        simulate_counts(projector("H"), ["H"], 0)
    with pytest.raises(ValueError):
        simulate_counts(np.eye(4) / 4, ["H"], 10)


def test_state_reconstruction_examples():
    rho = family_state(StateParams(0.452, 0.647))
    assert fidelity(reconstruct_state(simulate_counts(rho, noiseless=True)), rho) >= 0.999999
    est = reconstruct_state(simulate_counts(rho, n_per_setting=10_000, rng=np.random.default_rng(1)))
    assert fidelity(est, rho) >= 0.995
    # the minimal four-letter set is too poorly conditioned for this bound; use all 36 projectors
    est = reconstruct_state(simulate_counts(np.eye(4) / 4, state_settings(2, overcomplete=True),
                                            n_per_setting=10_000, rng=np.random.default_rng(2)))
    assert trace_distance(est, np.eye(4) / 4) <= 0.02


def test_overcomplete_settings():
    rho = random_state(np.random.default_rng(3))
    c = simulate_counts(rho, state_settings(2, overcomplete=True), noiseless=True)
    assert len(c.rows) == 36
    assert trace_distance(reconstruct_state(c), rho) <= 1e-9


def test_incomplete_settings_rejected():
    c = simulate_counts(np.eye(4) / 4, ["HH", "HV", "VH", "VV"], noiseless=True)
    with pytest.raises(ValueError):
        reconstruct_state(c)


def test_state_roundtrip_random():
    rng = np.random.default_rng(4)
    for _ in range(20):
        rho = random_state(rng, rank=int(rng.integers(1, 5)))
        assert trace_distance(reconstruct_state(simulate_counts(rho, noiseless=True)), rho) <= 1e-9


def test_fidelity_improves_with_counts():
    rho = family_state(StateParams(0.452, 0.647))
    rng = np.random.default_rng(5)
    stats = []
    for n in (1_000, 10_000, 100_000):
        f = [fidelity(reconstruct_state(simulate_counts(rho, n_per_setting=n, rng=rng)), rho) for _ in range(50)]
        stats.append((np.mean(f), np.std(f) / np.sqrt(50)))
    for (m1, s1), (m2, s2) in zip(stats, stats[1:]):
        assert m2 >= m1 - 2 * np.hypot(s1, s2)


def test_counts_csv_roundtrip(tmp_path):
    c = simulate_counts(REFERENCE_ENSEMBLE, n_per_setting=500, rng=np.random.default_rng(6))
    c.to_csv(tmp_path / "c.csv")
    assert CountsRecord.from_csv(tmp_path / "c.csv").rows == c.rows


def test_process_examples():
    ident = FilterEnsemble(1.0, 1.0, 1.0, 1.0)
    chi = process_tomography(simulate_counts(ident, noiseless=True))
    assert np.allclose(chi, np.diag([1, 0, 0, 0]), atol=1e-9)
    deph = FilterEnsemble(1.0, 0.0, 1.0, 0.0)
    chi = process_tomography(simulate_counts(deph, noiseless=True))
    assert np.allclose(chi, np.diag([0.5, 0, 0, 0.5]), atol=1e-9)
    c = simulate_counts(REFERENCE_ENSEMBLE, noiseless=True)
    chi = process_tomography(c)
    F1, F2 = REFERENCE_ENSEMBLE.side("A")
    for prep in PROCESS_INPUTS:
        rho = projector(prep)
        assert np.allclose(apply_chi(chi, rho), F1 @ rho @ F1.T + F2 @ rho @ F2.T, atol=1e-9)


def test_chi_invariants():
    rng = np.random.default_rng(7)
    c = simulate_counts(REFERENCE_ENSEMBLE, n_per_setting=10_000, rng=rng)
    chi = process_tomography(c)
    assert np.allclose(chi, chi.conj().T)
    assert np.linalg.eigvalsh(chi)[0] >= -1e-8
    assert tp_residual(chi) <= 1e-8


def test_fit_examples():
    k = fit_kraus(np.diag([0.5, 0, 0, 0.5]), (0.5, 0.5), (1.0, 0.0))
    F1, F2 = k.kraus()
    assert np.allclose(F1, np.diag([1, 0]), atol=1e-6) and np.allclose(F2, np.diag([0, 1]), atol=1e-6)
    k = fit_kraus(np.diag([1.0, 0, 0, 0]), (1.0, 0.0))
    F1, F2 = k.kraus()
    assert np.allclose(F1, np.eye(2), atol=1e-6) and np.allclose(F2, 0, atol=1e-6)
    assert not k.poor_fit
    chi, k = fit_side(simulate_counts(REFERENCE_ENSEMBLE, noiseless=True))
    assert k.amplitudes()[:2] == pytest.approx((0.70, 0.20), abs=1e-3)
    F1, F2 = k.kraus()
    assert process_fidelity(chi_of_kraus([F1, F2]), chi_of_kraus(REFERENCE_ENSEMBLE.side("A"))) >= 0.999


def test_fit_flags_poor_fit():
    # a rank-three process cannot come from two Kraus operators
    k = fit_kraus(np.diag([0.4, 0.3, 0.3, 0.0]), (0.5, 0.5))
    assert k.poor_fit


def test_chi_roundtrip_random_diagonal():
    rng = np.random.default_rng(8)
    for _ in range(20):
        a1, a2 = rng.uniform(0.01, 1.0, size=2)
        ens = FilterEnsemble(a1, a2, 0.5, 0.5)
        _, k = fit_side(simulate_counts(ens, noiseless=True))
        F1, F2 = ens.side("A")
        got = k.amplitudes()
        assert got == pytest.approx((a1, a2, F2[0, 0].real, F2[1, 1].real), abs=1e-3)


def test_branch_fraction_identity():
    rng = np.random.default_rng(9)
    for _ in range(10):
        ens = FilterEnsemble(*rng.uniform(0, 1, size=4))
        rho_a = random_state(rng, 2)
        F1, F2 = ens.side("A")
        c = simulate_counts(ens, noiseless=True)
        for prep in PROCESS_INPUTS:
            P = projector(prep)
            assert branch_fraction(c, prep, "A1") == pytest.approx(np.trace(F1 @ P @ F1.T).real, abs=1e-12)
            assert branch_fraction(c, prep, "A2") == pytest.approx(np.trace(F2 @ P @ F2.T).real, abs=1e-12)
        assert sum(branch_fractions(c)) == pytest.approx(1.0)
        assert np.trace(F1 @ rho_a @ F1.T + F2 @ rho_a @ F2.T).real == pytest.approx(1.0)


def test_poisson_process_fidelity():
    c = simulate_counts(REFERENCE_ENSEMBLE, n_per_setting=10_000, rng=np.random.default_rng(10))
    chi, k = fit_side(c)
    truth = chi_of_kraus(REFERENCE_ENSEMBLE.side("A"))
    assert process_fidelity(chi, truth) >= 0.95
    assert process_fidelity(chi_of_kraus(k.kraus()), truth) >= 0.95


def test_process_fidelity_examples():
    ident = np.diag([1.0, 0, 0, 0])
    deph = np.diag([0.5, 0, 0, 0.5])
    assert process_fidelity(deph, deph) == pytest.approx(1.0)
    assert process_fidelity(ident, deph) == pytest.approx(0.5)
    assert process_fidelity(2 * ident, ident) == pytest.approx(1.0)
