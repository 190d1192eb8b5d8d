"""Acceptance criteria 1-10, each printing one PASS/FAIL line."""
import time

import numpy as np
import pytest

import oracle
from gst1q.channels import (amplitude_damping, dephasing, depol_gate_error, depolarizing, make_channel,
                            make_kraus, overrotation_gate_error, rotation)
from gst1q.gateset import (circuit_probability, default_gateset, gauge_transform, spectral_distance,
                           standard_circuits, word_probability)
from gst1q.lgst import assemble_gram, gram_diagnostics, project_physical, run_lgst
from gst1q.mle import Objective, encode, evaluate_objective, fit, objective_gradient
from gst1q.pauli import chi_to_ptm, is_cptp, kraus_to_chi, kraus_to_ptm, ptm_to_chi, state_vector
from gst1q.qpt import qpt_circuits, qpt_mle
from gst1q.simulator import run_protocol
from gst1q.studies import StudyConfig, default_grid, run_point, true_gateset


@pytest.fixture
def report(capsys):
    def _report(n, name, ok, detail=""):
        with capsys.disabled():
            print(f"\ncriterion {n:2d} {'PASS' if ok else 'FAIL'}: {name}  {detail}")
        assert ok, f"criterion {n} failed: {detail}"
    return _report


def random_cptp_gateset(rng, strength=0.2):
    gs = default_gateset()
    gates = [np.eye(4)]
    for g in gs.gates[1:]:
        gates.append(((1 - strength) * np.eye(4) + strength * kraus_to_ptm(oracle.random_kraus(rng))) @ g)
    rho = (1 - strength) * oracle.KET0 + strength * oracle.random_state(rng)
    eff = (1 - strength) * oracle.KET1 + strength * oracle.random_state(rng)
    return gs.replace(rho=state_vector(rho), effect=state_vector(eff), gates=gates)


def well_conditioned_gauge(rng):
    q1, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    q2, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    return q1 @ np.diag(rng.uniform(0.5, 2.0, 4)) @ q2


# closed forms, with chi in the unnormalized Pauli basis
def chi_depol(p):
    return np.diag([1 - 3 * p / 4, p / 4, p / 4, p / 4]).astype(complex)


def chi_dephasing(p):
    return np.diag([1 - p / 2, 0, 0, p / 2]).astype(complex)


def chi_rot_z(t):
    return 0.5 * np.array([[1 + np.cos(t), 0, 0, 1j * np.sin(t)], [0, 0, 0, 0], [0, 0, 0, 0],
                           [-1j * np.sin(t), 0, 0, 1 - np.cos(t)]])


def chi_amp_damp(p):
    s = np.sqrt(1 - p)
    return 0.5 * np.array([[(1 + s) ** 2 / 2, 0, 0, p / 2], [0, p / 2, -1j * p / 2, 0],
                           [0, 1j * p / 2, p / 2, 0], [p / 2, 0, 0, (1 - s) ** 2 / 2]])


def ptm_depol(p):
    return np.diag([1, 1 - p, 1 - p, 1 - p])


def ptm_dephasing(p):
    return np.diag([1, 1 - p, 1 - p, 1])


def ptm_rot_z(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]])


def ptm_amp_damp(p):
    s = np.sqrt(1 - p)
    return np.array([[1, 0, 0, 0], [0, s, 0, 0], [0, 0, s, 0], [p, 0, 0, 1 - p]])


def test_criterion_01_channel_closed_forms(report):
    t0 = time.perf_counter()
    cases = [
        (depolarizing, chi_depol, ptm_depol, np.linspace(0.05, 1.25, 5)),
        (dephasing, chi_dephasing, ptm_dephasing, np.linspace(0.05, 0.95, 5)),
        (lambda t: rotation("z", t), chi_rot_z, ptm_rot_z, np.linspace(-2.5, 2.9, 5)),
        (amplitude_damping, chi_amp_damp, ptm_amp_damp, np.linspace(0.05, 0.95, 5)),
    ]
    worst = 0.0
    for ctor, chi_ref, ptm_ref, params in cases:
        for v in params:
            spec = ctor(v)
            chi = kraus_to_chi(make_kraus(spec))
            worst = max(worst, np.max(np.abs(chi - chi_ref(v))), np.max(np.abs(make_channel(spec) - ptm_ref(v))),
                        np.max(np.abs(chi_to_ptm(chi) - ptm_ref(v))))
    dt = time.perf_counter() - t0
    report(1, "channel closed forms", worst <= 1e-12 and dt < 1.0, f"max err {worst:.2e}, {dt:.3f} s")


def test_criterion_02_oracle_equivalence(report):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    kraus_gates = [oracle.random_kraus(rng) for _ in range(4)]
    ptm_gates = [kraus_to_ptm(k) for k in kraus_gates]
    rho, eff = oracle.random_state(rng), oracle.random_state(rng)
    gs = default_gateset().replace(rho=state_vector(rho), effect=state_vector(eff), gates=[np.eye(4)] + ptm_gates[1:])
    kraus_gates[0] = [np.eye(2)]
    worst = 0.0
    for _ in range(1000):
        word = tuple(int(w) for w in rng.integers(0, 4, size=rng.integers(0, 9)))
        # words apply their leftmost gate last
        ops = [kraus_gates[w] for w in reversed(word)]
        worst = max(worst, abs(word_probability(gs, word) - oracle.probability(eff, ops, rho)))
    dt = time.perf_counter() - t0
    report(2, "PTM vs Kraus oracle, 1000 circuits", worst <= 1e-12 and dt < 5.0, f"max err {worst:.2e}, {dt:.2f} s")


def test_criterion_03_gauge_invariance(report):
    rng = np.random.default_rng(3)
    gs = random_cptp_gateset(rng, 0.5)
    circuits = standard_circuits(gs.n_fiducials, gs.n_gates)
    p = np.array([circuit_probability(gs, *c) for c in circuits])
    worst = 0.0
    for _ in range(200):
        g2 = gauge_transform(gs, well_conditioned_gauge(rng))
        worst = max(worst, np.max(np.abs([circuit_probability(g2, *c) for c in circuits] - p)))
    report(3, "gauge invariance, 200 gauges x 84 circuits", len(circuits) == 84 and worst <= 1e-12,
           f"max err {worst:.2e}")


def test_criterion_04_lgst_closure(report):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        truth = random_cptp_gateset(rng)
        est = run_lgst(run_protocol(truth), truth, threshold=1e-3).estimate
        worst = max([worst, np.max(np.abs(est.rho - truth.rho)), np.max(np.abs(est.effect - truth.effect))]
                    + [np.max(np.abs(e - g)) for e, g in zip(est.gates, truth.gates)])
    report(4, "LGST closure, 20 random CPTP truths", worst <= 1e-8, f"max err {worst:.2e}")


def test_criterion_05_overrotation_study(report):
    grid = default_grid(7)
    eps4 = np.deg2rad(4)
    four_deg = overrotation_gate_error(eps4)
    gst_worst, qpt_ratio = 0.0, np.inf
    fit_times = []
    for m in grid:
        rows = {r["estimator"]: r for r in run_point(StudyConfig("overrotation_y", m, estimators=("gst_mle", "qpt_mle")))}
        gst, qpt = rows["gst_mle"], rows["qpt_mle"]
        fit_times.append(gst["wall_ms"] / 1e3)
        gst_worst = max(gst_worst, gst["estimation_error"])
        if gst["gate_error"] >= 1e-3:
            qpt_ratio = min(qpt_ratio, qpt["estimation_error"] / gst["gate_error"])
    ok = gst_worst <= 1e-5 and qpt_ratio >= 0.3
    truth = true_gateset("overrotation_y", four_deg)
    d = run_protocol(truth)
    t = default_gateset()
    dx = spectral_distance(qpt_mle(d, 1, t).ptm, truth.gates[1])
    dy = spectral_distance(qpt_mle(d, 2, t).ptm, truth.gates[2])
    ok = ok and dx >= 0.5 * dy and max(fit_times) < 240
    report(5, "over-rotation study", ok,
           f"GST max infid {gst_worst:.2e}, min QPT/gate err {qpt_ratio:.2f}, 4 deg X/Y {dx / dy:.2f}, "
           f"slowest GST fit {max(fit_times):.1f} s")


def test_criterion_06_calibration_constants(report):
    p = 0.0123
    e4 = overrotation_gate_error(np.deg2rad(4))
    n_gst = len(standard_circuits(4, 4))
    n_qpt = len(qpt_circuits(4, 2))
    ok = depol_gate_error(p) == 2 * p and 7.6e-4 <= e4 <= 9.4e-4 and n_gst == 84 and n_qpt == 16
    report(6, "calibration constants", ok, f"4 deg gate error {e4:.4e}, GST {n_gst}, QPT {n_qpt}/gate")


def test_criterion_07_spam_study(report):
    worst_rel, gst_worst = 0.0, 0.0
    for m in default_grid(5):
        rows = {r["estimator"]: r for r in run_point(StudyConfig("spam_depolarizing_rho", m,
                                                                 estimators=("gst_mle", "qpt_mle")))}
        truth = true_gateset("spam_depolarizing_rho", m)
        e_rho = float(truth.effect @ truth.rho)
        worst_rel = max(worst_rel, abs(rows["qpt_mle"]["estimation_error"] / e_rho - 1))
        gst_worst = max(gst_worst, rows["gst_mle"]["estimation_error"])
    report(7, "intrinsic SPAM study", worst_rel <= 0.3 and gst_worst <= 1e-5,
           f"QPT rel dev from <<E|rho>> {worst_rel:.3f}, GST max infid {gst_worst:.2e}")


def test_criterion_08_depolarizing_study(report):
    t = default_gateset()
    ok, worst_margin = True, np.inf
    for m in default_grid(5):
        truth = true_gateset("depolarizing_all", m)
        d = run_protocol(truth)
        gst = fit(d, project_physical(run_lgst(d, t).estimate)).estimate
        for k in range(1, 4):
            qpt = qpt_mle(d, k, t).ptm
            # row 0 is fixed by trace preservation; the depolarizing parameter sits in i >= 1
            for i in range(1, 4):
                if abs(truth.gates[k][i, i]) < 1e-9:
                    continue
                e_gst = abs(gst.gates[k][i, i] - truth.gates[k][i, i])
                e_qpt = abs(qpt[i, i] - truth.gates[k][i, i])
                worst_margin = min(worst_margin, e_qpt - e_gst)
                ok = ok and e_gst <= e_qpt
    report(8, "depolarizing study, PTM diagonals", ok, f"min (QPT - GST) diagonal error {worst_margin:.2e}")


def test_criterion_09_sampling_study(report):
    grid = default_grid(5)
    med = {}
    for m in grid:
        errs = {"gst_mle": [], "qpt_mle": []}
        g_err = None
        for seed in range(5):
            for r in run_point(StudyConfig("overrotation_with_sampling", m, seed=seed,
                                           estimators=("gst_mle", "qpt_mle"))):
                errs[r["estimator"]].append(r["estimation_error"])
                g_err = r["gate_error"]
        med[m] = (g_err, np.median(errs["gst_mle"]), np.median(errs["qpt_mle"]))
    low = [v for v in med.values() if v[0] < 3e-3]
    high = [v for v in med.values() if v[0] >= 3e-2]
    ok = (all(g <= 0.02 and q <= 0.02 for _, g, q in low) and bool(high)
          and all(q > 3 * g for _, g, q in high))
    detail = ", ".join(f"E={e:.0e}: GST {g:.2e} QPT {q:.2e}" for e, g, q in med.values())
    report(9, "sampling study medians", ok, detail)


def test_criterion_10_property_matrix(report):
    checks = {}
    rng = np.random.default_rng(10)
    rt = 0.0
    for _ in range(50):
        k = oracle.random_kraus(rng)
        r = kraus_to_ptm(k)
        rt = max(rt, np.max(np.abs(chi_to_ptm(ptm_to_chi(r)) - r)))
    checks["PTM/chi round trip"] = rt <= 1e-12
    checks["CPTP predicates"] = (bool(is_cptp(make_channel(amplitude_damping(0.3))))
                                 and not is_cptp(np.diag([1.0, 1.01, 1.0, 1.0])))
    degenerate = default_gateset().replace(fiducials=((), (), (), ()))
    checks["Gram diagnostics"] = (gram_diagnostics(assemble_gram(run_protocol(default_gateset())).g).invertible
                                  and not gram_diagnostics(assemble_gram(run_protocol(degenerate)).g).invertible)
    truth = true_gateset("overrotation_with_sampling", 1e-2)
    d = run_protocol(truth, shots=10_000, seed=0)
    res = fit(d, project_physical(run_lgst(d, default_gateset()).estimate), Objective("weighted_ls"))
    checks["monotone MLE descent"] = all(np.all(np.diff(h) <= 1e-15 * max(1.0, h[0])) for h in res.report["history"])
    t = default_gateset()
    obj = Objective("weighted_ls")
    x = encode(t, 0.05) + 0.01 * rng.normal(size=encode(t).size)
    g = objective_gradient(x, d, obj, t)
    h = 1e-6
    fd = np.array([(evaluate_objective(x + h * e, d, obj, t) - evaluate_objective(x - h * e, d, obj, t)) / (2 * h)
                   for e in np.eye(x.size)])
    rel = np.linalg.norm(g - fd) / np.linalg.norm(fd)
    checks["FD gradient"] = rel <= 1e-5
    failed = [k for k, v in checks.items() if not v]
    report(10, "property matrix (fixed seeds)", not failed,
           f"FD rel err {rel:.1e}" + (f", failed: {failed}" if failed else ""))
