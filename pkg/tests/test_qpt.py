import numpy as np
import pytest

import oracle
from gst1q.channels import depolarizing, make_channel, rotation
from gst1q.gateset import default_gateset, spectral_distance
from gst1q.lgst import project_physical, run_lgst
from gst1q.mle import Objective, fit
from gst1q.pauli import state_vector
from gst1q.qpt import (qpt_circuits, qpt_design, qpt_linear_inversion, qpt_mle, qpt_ols,
                       qst_linear_inversion)
from gst1q.simulator import run_protocol
from gst1q.studies import true_gateset


def pauli_effects():
    # covectors <<j| of the normalized Pauli basis
    return np.eye(4)


def test_qst_pauli_design_recovers_state():
    rho = state_vector(oracle.KET0)
    assert np.allclose(qst_linear_inversion(pauli_effects() @ rho, pauli_effects()), rho)


def test_qst_unit_trace_convention():
    m = np.array([0.69, 0.1, -0.2, 0.3])
    out = qst_linear_inversion(m, pauli_effects(), enforce_unit_trace=True)
    assert np.allclose(out, [1 / np.sqrt(2), 0.1, -0.2, 0.3])


def test_qst_noisy_can_be_unphysical():
    rho = state_vector(oracle.KET0)
    m = pauli_effects() @ rho + np.array([0.0, 0.05, 0.0, 0.0])
    est = qst_linear_inversion(m, pauli_effects(), enforce_unit_trace=True)
    assert np.linalg.eigvalsh(oracle.I * est[0] / np.sqrt(2) + sum(
        est[k] * p / np.sqrt(2) for k, p in enumerate(oracle.PAULIS) if k)).min() < 0


def test_qst_singular_and_overcomplete():
    with pytest.raises(np.linalg.LinAlgError):
        qst_linear_inversion(np.zeros(4), np.zeros((4, 4)))
    a = np.vstack([np.eye(4), np.eye(4)])
    rho = state_vector(oracle.random_state(np.random.default_rng(0)))
    assert np.allclose(qst_linear_inversion(a @ rho, a), rho)


def test_qpt_circuit_count():
    assert len(qpt_circuits(4, 2)) == 16
    assert all(k == 2 for _, _, k in qpt_circuits(4, 2))


def test_qpt_design_matrix():
    t = default_gateset()
    design = qpt_design(t)
    s = design.matrix
    assert s.shape == (16, 16)
    r = t.gates[2]
    expected = [design.effects[i] @ r @ design.states[j] for i in range(4) for j in range(4)]
    assert np.allclose(s @ r.reshape(16), expected)


def test_qpt_linear_inversion_ideal():
    t = default_gateset()
    d = run_protocol(t)
    for k in range(1, 4):
        assert np.allclose(qpt_linear_inversion(d, k, t), t.gates[k], atol=1e-12)


def test_qpt_linear_inversion_biased_by_faulty_fiducials():
    t = default_gateset()
    truth = true_gateset("overrotation_y", 1e-2)
    est = qpt_linear_inversion(run_protocol(truth), 1, t)
    # X_pi/2 itself is perfect but its estimate is not
    assert spectral_distance(est, truth.gates[1]) > 1e-2


def test_qpt_ols_overcomplete():
    t = default_gateset()
    s = qpt_design(t).matrix
    r = t.gates[1]
    s2 = np.vstack([s, s])
    assert np.allclose(qpt_ols(s2 @ r.reshape(16), s2), qpt_ols(s @ r.reshape(16), s), atol=1e-12)
    with pytest.raises(np.linalg.LinAlgError):
        qpt_ols(np.zeros(16), np.zeros((16, 16)))


def test_qpt_mle_ideal():
    t = default_gateset()
    d = run_protocol(t)
    for k in range(1, 4):
        q = qpt_mle(d, k, t)
        # unitary gates sit on the rank-1 boundary, where PTM error ~ sqrt(objective)
        assert np.allclose(q.ptm, t.gates[k], atol=1e-5)
        assert 1 - (np.trace(np.linalg.solve(t.gates[k], q.ptm)) + 2) / 6 <= 1e-6
        assert q.report["tp_residual"] <= 1e-6


def test_qpt_mle_spreads_overrotation():
    t = default_gateset()
    truth = true_gateset("overrotation_y", 8.12e-4)
    d = run_protocol(truth)
    errs = [spectral_distance(qpt_mle(d, k, t).ptm, truth.gates[k]) for k in (1, 2, 3)]
    # X_pi/2 is perfect but gets a rotation error comparable to Y's
    assert errs[0] >= 0.5 * errs[1]
    assert all(e > 1e-2 for e in errs)


def test_qpt_mle_state_error():
    t = default_gateset()
    for err in (1e-3, 1e-2):
        truth = true_gateset("spam_depolarizing_rho", err)
        d = run_protocol(truth)
        q = qpt_mle(d, 1, t)
        e = 1 - (np.trace(np.linalg.solve(truth.gates[1], q.ptm)) + 2) / 6
        assert abs(e - err) <= 0.3 * err


def test_qpt_and_gst_agree_with_ideal_spam():
    # an extra noisy gate outside the fiducials; everything else is ideal
    t = default_gateset()
    noisy = make_channel(depolarizing(0.02)) @ make_channel(rotation("z", np.pi / 2 + 0.05))
    truth = t.replace(gates=list(t.gates) + [noisy], labels=t.labels + ("Zpi2",))
    target = t.replace(gates=list(t.gates) + [make_channel(rotation("z", np.pi / 2))], labels=truth.labels)
    d = run_protocol(truth)
    q = qpt_mle(d, 4, target).ptm
    assert np.allclose(q, noisy, atol=1e-6)
    gst = fit(d, project_physical(run_lgst(d, target).estimate)).estimate
    # GST's estimate is only defined up to gauge, so compare spectra
    ev = lambda g: np.sort_complex(np.linalg.eigvals(g))
    assert np.allclose(ev(gst.gates[4]), ev(q), atol=1e-6)


def test_qpt_mle_weighted():
    t = default_gateset()
    d = run_protocol(true_gateset("overrotation_with_sampling", 1e-2), shots=10_000, seed=1)
    q = qpt_mle(d, 2, t, Objective("weighted_ls"))
    assert q.report["converged"] and q.report["tp_residual"] <= 1e-6
    assert np.allclose(q.ptm[0], [1, 0, 0, 0], atol=1e-6)


def test_qpt_x_gate_shows_rotation():
    t = default_gateset()
    ideal_x = make_channel(rotation("x", np.pi / 2))
    truth = true_gateset("overrotation_y", 1e-2)
    q = qpt_mle(run_protocol(truth), 1, t).ptm
    assert spectral_distance(q, ideal_x) > 1e-2
