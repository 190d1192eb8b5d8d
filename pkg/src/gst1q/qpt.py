"""State and process tomography that take the SPAM operations to be ideal.

This is the baseline GST is compared against: the design is built from the
*target* fiducials, so any error in the real fiducials, ``rho`` or ``E`` is
absorbed into the gate estimate.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .gateset import GateSet, fiducial_ptm
from .mle import GATE_PARAMS, Objective, _ptm_and_derivative, _psd, _tolerances, _weights, factor_chi
from .optim import augmented_lagrangian
from .pauli import ptm_to_chi
from .simulator import Dataset

__all__ = [
    "QptDesign", "qpt_design", "qst_linear_inversion", "qpt_ols",
    "qpt_linear_inversion", "qpt_mle", "QptFit", "qpt_circuits",
]


@dataclass(frozen=True, eq=False)
class QptDesign:
    """Assumed effects ``effects[i] = <<mu| S_i`` and input states ``states[j] = S_j |tau>>``.

    ``matrix`` maps the row-major PTM vector to the probabilities of the
    ``(i, j)`` experiments in row-major order.
    """

    effects: np.ndarray
    states: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.kron(self.effects, self.states)


def qpt_design(target: GateSet) -> QptDesign:
    effects = np.array([target.effect @ fiducial_ptm(target, i) for i in range(target.n_fiducials)])
    states = np.array([fiducial_ptm(target, j) @ target.rho for j in range(target.n_fiducials)])
    return QptDesign(effects, states)


def qpt_circuits(n_fiducials: int, k: int) -> list[tuple[int, int, int]]:
    """The 16 ``(i, j, k)`` experiments used to characterize gate ``k``."""
    return [(i, j, k) for i in range(n_fiducials) for j in range(n_fiducials)]


def qst_linear_inversion(measurements, effects, enforce_unit_trace: bool = False) -> np.ndarray:
    """``|rho^>> = A^-1 |m>>`` where the rows of ``A`` are the effect covectors.

    With ``enforce_unit_trace`` the identity component is set to ``1/sqrt(2)``.
    """
    a = np.asarray(effects, dtype=float)
    m = np.asarray(measurements, dtype=float)
    if a.shape[0] == a.shape[1]:
        if abs(np.linalg.det(a)) < 1e-12:
            raise np.linalg.LinAlgError("effect matrix is singular")
        rho = np.linalg.solve(a, m)
    else:
        if np.linalg.matrix_rank(a) < a.shape[1]:
            raise np.linalg.LinAlgError("effects are not informationally complete")
        rho = np.linalg.lstsq(a, m, rcond=None)[0]
    if enforce_unit_trace:
        rho[0] = 1.0 / np.sqrt(2.0)
    return rho


def qpt_ols(measurements, design_matrix) -> np.ndarray:
    """Ordinary least squares ``(S^T S)^-1 S^T m`` reshaped to a 4x4 PTM."""
    s = np.asarray(design_matrix, dtype=float)
    if np.linalg.matrix_rank(s) < s.shape[1]:
        raise np.linalg.LinAlgError("QPT design matrix is rank deficient")
    return np.linalg.lstsq(s, np.asarray(measurements, dtype=float), rcond=None)[0].reshape(4, 4)


def _slice(d: Dataset, k: int, n_fiducials: int):
    return [d[c] for c in qpt_circuits(n_fiducials, k)]


def qpt_linear_inversion(d: Dataset, k: int, target: GateSet, design: QptDesign | None = None) -> np.ndarray:
    design = design or qpt_design(target)
    records = _slice(d, k, len(design.effects))
    return qpt_ols([r.mean for r in records], design.matrix)


@dataclass
class QptFit:
    ptm: np.ndarray
    report: dict


def qpt_mle(d: Dataset, k: int, target: GateSet, obj: Objective | None = None,
            design: QptDesign | None = None, ftol: float | None = None,
            eta: float = 1e-3, con_tol: float = 1e-7, max_iter: int = 5000) -> QptFit:
    """Trace-preserving, CP (Cholesky) single-gate fit starting from the target gate."""
    obj = obj or Objective()
    if ftol is None:
        ftol = 1e-12 if obj.kind == "unweighted_ls" else 1e-6
    t0 = time.perf_counter()
    design = design or qpt_design(target)
    records = _slice(d, k, len(design.effects))
    m = np.array([r.mean for r in records])
    sw = np.sqrt(_weights(records, obj.kind))
    s = design.matrix

    def residual(t):
        r, _ = _ptm_and_derivative(t)
        return sw * (m - s @ r.reshape(16))

    def jacobian(t):
        _, dr = _ptm_and_derivative(t)
        return -sw[:, None] * (s @ dr.reshape(GATE_PARAMS, 16).T)

    def tp(t):
        r, _ = _ptm_and_derivative(t)
        return r[0] - np.array([1.0, 0.0, 0.0, 0.0])

    def tp_jac(t):
        _, dr = _ptm_and_derivative(t)
        return dr[:, 0, :].T

    chi = (1 - eta) * _psd(ptm_to_chi(target.gates[k])) + eta * np.eye(4) / 4
    res = augmented_lagrangian(residual, jacobian, factor_chi(chi), eq=tp, eq_jacobian=tp_jac,
                               mu0=1e3 * float(np.mean(sw ** 2)), con_tol=con_tol,
                               max_iter=max_iter, **_tolerances(obj, ftol))
    ptm, _ = _ptm_and_derivative(res.x)
    report = {"gate": k, "final_objective": res.objective, "iterations": res.iterations,
              "converged": res.converged, "message": res.message,
              "tp_residual": float(np.max(np.abs(tp(res.x)))), "history": res.history,
              "wall_time_s": time.perf_counter() - t0}
    return QptFit(ptm, report)
