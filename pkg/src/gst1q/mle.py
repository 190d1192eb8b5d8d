"""Maximum-likelihood gate set tomography with Cholesky-parameterized process matrices.

Every non-null gate is ``chi = T^dag T`` with ``T`` lower triangular (16
reals); ``rho`` and ``E`` are ``2 x 2`` matrices ``T^dag T`` (4 reals each).
Trace preservation, ``Tr rho = 1`` and ``E <= I`` are carried as explicit
constraints and handled by an augmented Lagrangian.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .gateset import GateSet, circuit_word, word_probability
from .optim import augmented_lagrangian
from .pauli import BASIS, PAULIS, _CHI_TO_PTM, ptm_to_chi, ptm_to_choi, to_matrix
from .simulator import Dataset

__all__ = [
    "Objective", "ParamLayout", "FitResult", "GATE_PARAMS", "SPAM_PARAMS",
    "gate_factor", "spam_factor", "factor_chi", "factor_spam",
    "chi_from_params", "ptm_from_params", "spam_from_params",
    "encode", "decode", "predict_probability", "predict_probabilities",
    "evaluate_objective", "binomial_log_likelihood", "objective_gradient",
    "constraint_residuals", "fit", "ptm_objective_eval", "chi_trace_probability",
]

GATE_PARAMS = 16
SPAM_PARAMS = 4

# (row, col, real-index, imag-index) of T, zero-based parameter indices
_T_LAYOUT = [(0, 0, 0, None), (1, 1, 1, None), (2, 2, 2, None), (3, 3, 3, None),
             (1, 0, 4, 5), (2, 1, 6, 7), (3, 2, 8, 9),
             (2, 0, 10, 11), (3, 1, 12, 13), (3, 0, 14, 15)]
_S_LAYOUT = [(0, 0, 0, None), (1, 1, 1, None), (1, 0, 2, 3)]


def _basis(layout, dim, n):
    out = np.zeros((n, dim, dim), dtype=complex)
    for r, c, re, im in layout:
        out[re, r, c] = 1.0
        if im is not None:
            out[im, r, c] = 1j
    return out


_T_BASIS = _basis(_T_LAYOUT, 4, GATE_PARAMS)
_S_BASIS = _basis(_S_LAYOUT, 2, SPAM_PARAMS)


def gate_factor(t) -> np.ndarray:
    """Lower-triangular ``T`` from 16 reals."""
    return np.einsum("s,sab->ab", np.asarray(t, dtype=float), _T_BASIS)


def spam_factor(t) -> np.ndarray:
    return np.einsum("s,sab->ab", np.asarray(t, dtype=float), _S_BASIS)


def chi_from_params(t) -> np.ndarray:
    tm = gate_factor(t)
    return tm.conj().T @ tm


def _chi_to_ptm_linear(chi: np.ndarray) -> np.ndarray:
    return (_CHI_TO_PTM @ chi.reshape(-1, 16).T).T.reshape(chi.shape[:-2] + (4, 4)).real


def ptm_from_params(t) -> np.ndarray:
    return _chi_to_ptm_linear(chi_from_params(t))


def _ptm_and_derivative(t):
    tm = gate_factor(t)
    chi = tm.conj().T @ tm
    dchi = np.einsum("sba,bc->sac", _T_BASIS.conj(), tm)
    dchi = dchi + dchi.conj().transpose(0, 2, 1)
    return _chi_to_ptm_linear(chi), _chi_to_ptm_linear(dchi)


def _hs(m: np.ndarray) -> np.ndarray:
    # HS components Tr{B_i M} of one or more 2x2 matrices
    return np.einsum("iab,...ba->...i", BASIS, m).real


def spam_from_params(t) -> np.ndarray:
    tm = spam_factor(t)
    return _hs(tm.conj().T @ tm)


def _spam_and_derivative(t):
    tm = spam_factor(t)
    dm = np.einsum("sba,bc->sac", _S_BASIS.conj(), tm)
    dm = dm + dm.conj().transpose(0, 2, 1)
    return _hs(tm.conj().T @ tm), _hs(dm)


def _lower_factor(m: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Lower-triangular ``T`` with real diagonal such that ``T^dag T = m`` (PSD ``m``).

    Cholesky of the index-reversed matrix, with zero pivots tolerated.
    """
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    rev = m[::-1, ::-1]
    low = np.zeros((n, n), dtype=complex)
    for j in range(n):
        d = rev[j, j].real - np.sum(np.abs(low[j, :j]) ** 2)
        if d <= tol:
            continue
        low[j, j] = np.sqrt(d)
        for i in range(j + 1, n):
            low[i, j] = (rev[i, j] - low[i, :j] @ low[j, :j].conj()) / low[j, j]
    # m = J L L^dag J, so T = J L^dag J
    return low.conj().T[::-1, ::-1]


def _params_from_lower(tm: np.ndarray, layout) -> np.ndarray:
    out = np.zeros(max(max(re, im or 0) for _, _, re, im in layout) + 1)
    for r, c, re, im in layout:
        out[re] = tm[r, c].real
        if im is not None:
            out[im] = tm[r, c].imag
    return out


def factor_chi(chi) -> np.ndarray:
    """16 parameters reproducing a PSD ``chi``."""
    return _params_from_lower(_lower_factor(chi), _T_LAYOUT)


def factor_spam(m) -> np.ndarray:
    return _params_from_lower(_lower_factor(m), _S_LAYOUT)


@dataclass(frozen=True)
class ParamLayout:
    """Slices of the flat parameter vector: non-null gates, then ``rho``, then ``E``."""

    n_gates: int

    @property
    def size(self) -> int:
        return GATE_PARAMS * (self.n_gates - 1) + 2 * SPAM_PARAMS

    def gate(self, k: int) -> slice:
        if not 1 <= k < self.n_gates:
            raise IndexError("only non-null gates are parameterized")
        start = GATE_PARAMS * (k - 1)
        return slice(start, start + GATE_PARAMS)

    @property
    def rho(self) -> slice:
        start = GATE_PARAMS * (self.n_gates - 1)
        return slice(start, start + SPAM_PARAMS)

    @property
    def effect(self) -> slice:
        start = GATE_PARAMS * (self.n_gates - 1) + SPAM_PARAMS
        return slice(start, start + SPAM_PARAMS)


def _psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.maximum(w, 0.0)) @ v.conj().T


def encode(gs: GateSet, eta: float = 0.0) -> np.ndarray:
    """Parameters for ``gs``, after mixing a fraction ``eta`` of full depolarization
    into every gate, ``rho`` and ``E`` (keeps the factors away from rank deficiency)."""
    lay = ParamLayout(gs.n_gates)
    x = np.zeros(lay.size)
    for k in range(1, gs.n_gates):
        chi = (1 - eta) * _psd(ptm_to_chi(gs.gates[k])) + eta * np.eye(4) / 4
        x[lay.gate(k)] = factor_chi(chi)
    x[lay.rho] = factor_spam((1 - eta) * _psd(to_matrix(gs.rho)) + eta * np.eye(2) / 2)
    x[lay.effect] = factor_spam((1 - eta) * _psd(to_matrix(gs.effect)) + eta * np.eye(2) / 2)
    return x


def decode(x, template: GateSet) -> GateSet:
    lay = ParamLayout(template.n_gates)
    x = np.asarray(x, dtype=float)
    if x.size != lay.size:
        raise ValueError(f"expected {lay.size} parameters, got {x.size}")
    gates = [np.eye(4)] + [ptm_from_params(x[lay.gate(k)]) for k in range(1, template.n_gates)]
    return template.replace(rho=spam_from_params(x[lay.rho]),
                            effect=spam_from_params(x[lay.effect]), gates=gates)


@dataclass(frozen=True)
class Objective:
    """``unweighted_ls``: ``sum (m - p)^2``.  ``weighted_ls``: ``sum (m - p)^2 / sigma^2``
    with ``sigma^2 = max(m (1 - m), 1 / (4 n)) / n``."""

    kind: str = "unweighted_ls"
    circuits: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("unweighted_ls", "weighted_ls"):
            raise ValueError(f"unknown objective kind {self.kind!r}")


def _weights(records, kind: str) -> np.ndarray:
    if kind == "unweighted_ls":
        return np.ones(len(records))
    out = []
    for r in records:
        if r.n == 0:
            raise ValueError("weighted objective needs finite-shot records")
        var = max(r.mean * (1 - r.mean), 1.0 / (4 * r.n)) / r.n
        out.append(1.0 / var)
    return np.array(out)


class _Model:
    """Predicted probabilities and their Jacobian for a fixed list of circuits."""

    def __init__(self, template: GateSet, d: Dataset, obj: Objective):
        if len(d) == 0:
            raise ValueError("dataset is empty")
        circuits = obj.circuits if obj.circuits is not None else [r.circuit for r in d.records]
        records = [d[c] for c in circuits]
        self.template = template
        self.layout = ParamLayout(template.n_gates)
        words = [circuit_word(template, c) for c in circuits]
        length = max(1, max(len(w) for w in words))
        self.words = np.array([list(w) + [0] * (length - len(w)) for w in words], dtype=int)
        self.m = np.array([r.mean for r in records])
        self.sqrt_w = np.sqrt(_weights(records, obj.kind))

    def _stack(self, x, derivative: bool):
        # index 0 is the exact identity so padded words need no special case
        lay = self.layout
        gates = np.zeros((lay.n_gates, 4, 4))
        gates[0] = np.eye(4)
        dgates = np.zeros((lay.n_gates, GATE_PARAMS, 4, 4)) if derivative else None
        for k in range(1, lay.n_gates):
            if derivative:
                gates[k], dgates[k] = _ptm_and_derivative(x[lay.gate(k)])
            else:
                gates[k] = ptm_from_params(x[lay.gate(k)])
        return gates, dgates

    def probabilities(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        gates, _ = self._stack(x, False)
        lay = self.layout
        v = np.broadcast_to(spam_from_params(x[lay.rho]), (len(self.m), 4))
        for pos in range(self.words.shape[1] - 1, -1, -1):
            v = np.einsum("nab,nb->na", gates[self.words[:, pos]], v)
        return v @ spam_from_params(x[lay.effect])

    def probabilities_and_jacobian(self, x):
        x = np.asarray(x, dtype=float)
        lay = self.layout
        gates, dgates = self._stack(x, True)
        rho, drho = _spam_and_derivative(x[lay.rho])
        eff, deff = _spam_and_derivative(x[lay.effect])
        n, length = self.words.shape
        # right[m] = R_{w_m} ... R_{w_L} rho and left[m] = E R_{w_1} ... R_{w_(m-1)}
        right = [None] * (length + 1)
        right[length] = np.broadcast_to(rho, (n, 4))
        for pos in range(length - 1, -1, -1):
            right[pos] = np.einsum("nab,nb->na", gates[self.words[:, pos]], right[pos + 1])
        left = [np.broadcast_to(eff, (n, 4))]
        for pos in range(length):
            left.append(np.einsum("na,nab->nb", left[-1], gates[self.words[:, pos]]))
        probs = right[0] @ eff
        dgate = np.zeros((n, lay.n_gates, GATE_PARAMS))
        rows = np.arange(n)
        for pos in range(length):
            w = self.words[:, pos]
            contrib = np.einsum("na,nsab,nb->ns", left[pos], dgates[w], right[pos + 1])
            np.add.at(dgate, (rows, w), contrib)
        jac = np.zeros((n, lay.size))
        jac[:, : GATE_PARAMS * (lay.n_gates - 1)] = dgate[:, 1:].reshape(n, -1)
        jac[:, lay.rho] = left[length] @ drho.T
        jac[:, lay.effect] = right[0] @ deff.T
        return probs, jac

    def residual(self, x) -> np.ndarray:
        return self.sqrt_w * (self.m - self.probabilities(x))

    def jacobian(self, x) -> np.ndarray:
        return -self.sqrt_w[:, None] * self.probabilities_and_jacobian(x)[1]


def predict_probability(x, circuit, template: GateSet) -> float:
    """``<<E^| F_i G_k F_j |rho^>>`` for the gate set encoded by ``x``."""
    i, j, k = circuit
    if not 0 <= i < template.n_fiducials or not -1 <= j < template.n_fiducials \
            or not -1 <= k < template.n_gates:
        raise IndexError(f"circuit {tuple(circuit)} out of range")
    return word_probability(decode(x, template), circuit_word(template, circuit))


def predict_probabilities(x, d: Dataset, template: GateSet, obj: Objective | None = None) -> np.ndarray:
    return _Model(template, d, obj or Objective()).probabilities(x)


def evaluate_objective(x, d: Dataset, obj: Objective, template: GateSet) -> float:
    r = _Model(template, d, obj).residual(np.asarray(x, dtype=float))
    return float(r @ r)


def objective_gradient(x, d: Dataset, obj: Objective, template: GateSet) -> np.ndarray:
    """Analytic gradient of :func:`evaluate_objective`."""
    model = _Model(template, d, obj)
    x = np.asarray(x, dtype=float)
    return 2.0 * model.jacobian(x).T @ model.residual(x)


def binomial_log_likelihood(gs: GateSet, d: Dataset, eps: float = 1e-12) -> float:
    """Exact ``sum s log p + (n - s) log(1 - p)`` (reporting only)."""
    total = 0.0
    for r in d.records:
        p = min(max(word_probability(gs, circuit_word(gs, r.circuit)), eps), 1 - eps)
        if r.n == 0:
            total += r.mean * np.log(p) + (1 - r.mean) * np.log(1 - p)
        else:
            total += r.successes * np.log(p) + (r.n - r.successes) * np.log(1 - p)
    return float(total)


def _eq_constraints(x, lay: ParamLayout) -> np.ndarray:
    out = []
    for k in range(1, lay.n_gates):
        out.append(ptm_from_params(x[lay.gate(k)])[0] - np.array([1.0, 0.0, 0.0, 0.0]))
    out.append([np.sqrt(2.0) * spam_from_params(x[lay.rho])[0] - 1.0])
    return np.concatenate(out)


def _eq_jacobian(x, lay: ParamLayout) -> np.ndarray:
    jac = np.zeros((4 * (lay.n_gates - 1) + 1, lay.size))
    for k in range(1, lay.n_gates):
        _, d = _ptm_and_derivative(x[lay.gate(k)])
        jac[4 * (k - 1):4 * k, lay.gate(k)] = d[:, 0, :].T
    _, drho = _spam_and_derivative(x[lay.rho])
    jac[-1, lay.rho] = np.sqrt(2.0) * drho[:, 0]
    return jac


def _effect_top(x, lay: ParamLayout):
    tm = spam_factor(x[lay.effect])
    w, v = np.linalg.eigh(tm.conj().T @ tm)
    return w[-1], v[:, -1]


def _ineq_constraints(x, lay: ParamLayout) -> np.ndarray:
    return np.array([_effect_top(x, lay)[0] - 1.0])


def _ineq_jacobian(x, lay: ParamLayout) -> np.ndarray:
    _, v = _effect_top(x, lay)
    tm = spam_factor(x[lay.effect])
    dm = np.einsum("sba,bc->sac", _S_BASIS.conj(), tm)
    dm = dm + dm.conj().transpose(0, 2, 1)
    jac = np.zeros((1, lay.size))
    jac[0, lay.effect] = np.einsum("a,sab,b->s", v.conj(), dm, v).real
    return jac


def constraint_residuals(x, n_gates: int) -> dict:
    """TP-row residuals per gate, ``Tr rho - 1`` and ``max(0, lambda_max(E) - 1)``."""
    lay = ParamLayout(n_gates)
    x = np.asarray(x, dtype=float)
    eq = _eq_constraints(x, lay)
    return {
        "tp_rows": [float(np.max(np.abs(eq[4 * (k - 1):4 * k]))) for k in range(1, n_gates)],
        "rho_trace": float(abs(eq[-1])),
        "effect_excess": float(max(0.0, _ineq_constraints(x, lay)[0])),
    }


@dataclass
class FitResult:
    estimate: GateSet
    params: np.ndarray
    report: dict = field(default_factory=dict)


def fit(d: Dataset, start: GateSet, obj: Objective | None = None, ftol: float | None = None,
        con_tol: float = 1e-7, eta: float = 1e-3, max_outer: int = 30,
        max_iter: int = 5000) -> FitResult:
    """Constrained least-squares fit of the full gate set, starting from a physical ``start``.

    ``ftol`` is the objective tolerance, 1e-12 for the unweighted objective
    and 1e-6 for the weighted one by default.  The unweighted objective of
    noiseless data goes to zero, so there it is absolute: inner solves stop
    once the objective is below ``ftol`` or steps change it by less than
    ``1e-3 ftol``.  The weighted objective settles near the number of
    records, so there it bounds the relative change per step.
    The returned estimate never has a larger objective than ``start``.
    """
    obj = obj or Objective()
    if ftol is None:
        ftol = 1e-12 if obj.kind == "unweighted_ls" else 1e-6
    t0 = time.perf_counter()
    model = _Model(start, d, obj)
    lay = model.layout
    x_start = encode(start)
    start_obj = float(np.sum(model.residual(x_start) ** 2))
    report = {"start_objective": start_obj, "objective_kind": obj.kind}
    if start_obj <= 1e-24:
        report.update(final_objective=start_obj, iterations=0, outer_iterations=0,
                      converged=True, message="start already fits the data",
                      history=[[start_obj]])
        return _finish(start, x_start, report, t0, lay)

    x0 = encode(start, eta)
    res = augmented_lagrangian(
        model.residual, model.jacobian, x0,
        eq=lambda x: _eq_constraints(x, lay), eq_jacobian=lambda x: _eq_jacobian(x, lay),
        ineq=lambda x: _ineq_constraints(x, lay), ineq_jacobian=lambda x: _ineq_jacobian(x, lay),
        mu0=1e3 * float(np.mean(model.sqrt_w ** 2)), con_tol=con_tol, **_tolerances(obj, ftol),
        max_outer=max_outer, max_iter=max_iter)
    report.update(final_objective=res.objective, iterations=res.iterations,
                  outer_iterations=res.outer_iterations, converged=res.converged,
                  message=res.message, history=res.history)
    if not res.objective <= start_obj:
        report.update(final_objective=start_obj, converged=False,
                      message=f"fit did not improve on the start ({res.message}); returning start")
        return _finish(start, x_start, report, t0, lay)
    return _finish(decode(res.x, start), res.x, report, t0, lay)


def _tolerances(obj: Objective, ftol: float) -> dict:
    if obj.kind == "unweighted_ls":
        return {"ftol": 1e-12, "atol": ftol, "fatol": 1e-3 * ftol}
    return {"ftol": ftol, "atol": 0.0, "fatol": 0.0}


def _finish(estimate: GateSet, x, report: dict, t0: float, lay: ParamLayout) -> FitResult:
    report["constraint_residuals"] = constraint_residuals(x, lay.n_gates)
    report["estimate"] = estimate.to_json()
    report["wall_time_s"] = time.perf_counter() - t0
    return FitResult(estimate, np.asarray(x, dtype=float), report)


def ptm_objective_eval(gs: GateSet, d: Dataset, obj: Objective | None = None) -> dict:
    """Objective computed directly from PTM products, plus the smallest
    Choi-matrix eigenvalue of each gate."""
    obj = obj or Objective()
    circuits = obj.circuits if obj.circuits is not None else [r.circuit for r in d.records]
    if not circuits:
        raise ValueError("dataset is empty")
    records = [d[c] for c in circuits]
    w = _weights(records, obj.kind)
    p = np.array([word_probability(gs, circuit_word(gs, c)) for c in circuits])
    m = np.array([r.mean for r in records])
    return {
        "value": float(np.sum(w * (m - p) ** 2)),
        "cj_min_eigenvalues": [float(np.linalg.eigvalsh(ptm_to_choi(g)).min()) for g in gs.gates],
    }


def chi_trace_probability(chis, rho_matrix, effect_matrix, word) -> float:
    """``Tr{E G_{w_1}(... G_{w_L}(rho))}`` expanded through ``sum chi_jk P_j (.) P_k``,
    without going through PTMs."""
    state = np.asarray(rho_matrix, dtype=complex)
    for g in reversed(word):
        state = np.einsum("jk,jab,bc,kcd->ad", chis[g], PAULIS, state, PAULIS)
    return float(np.trace(np.asarray(effect_matrix) @ state).real)
