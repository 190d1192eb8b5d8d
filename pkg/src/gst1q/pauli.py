"""Single-qubit Pauli algebra and channel representations.

Conventions used throughout the package:

* Hilbert-Schmidt vectors and Pauli transfer matrices (PTMs) are expressed in
  the *normalized* Pauli basis ``(I, X, Y, Z) / sqrt(2)``.
* Process (chi) matrices are expressed against the *unnormalized* Paulis, so
  that ``Lambda(rho) = sum_jk chi[j, k] P_j rho P_k``.
* ``compose(a, b)`` is the PTM of ``a`` applied after ``b`` (``a @ b``).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "I2", "X", "Y", "Z", "PAULIS", "BASIS",
    "state_vector", "effect_vector", "to_matrix",
    "kraus_to_chi", "chi_to_ptm", "ptm_to_chi", "kraus_to_ptm", "chi_to_kraus",
    "ptm_to_choi", "is_cptp", "CPTPDiagnosis", "is_tp", "is_unital",
    "is_physical_state", "is_physical_effect",
    "apply_channel", "compose", "expectation",
    "matrix_to_json", "matrix_from_json",
]

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)

#: Unnormalized Paulis, the basis of chi matrices.
PAULIS = np.array([I2, X, Y, Z])
#: Normalized Paulis, Tr{P_i P_j} = delta_ij.  Basis of HS vectors and PTMs.
BASIS = PAULIS / np.sqrt(2)

HERMITIAN_TOL = 1e-9

# _OMEGA[i, j, k, l] = Tr{P_i P_k P_j P_l} / 2 so that R = sum_kl chi_kl _OMEGA[..., k, l]
_OMEGA = 0.5 * np.einsum("iab,kbc,jcd,lda->ijkl", PAULIS, PAULIS, PAULIS, PAULIS)
_CHI_TO_PTM = _OMEGA.reshape(16, 16)
_PTM_TO_CHI = np.linalg.inv(_CHI_TO_PTM)


def state_vector(rho) -> np.ndarray:
    """HS vector ``|rho>>`` with components ``Tr{P_k rho}`` (normalized P_k)."""
    rho = np.asarray(rho, dtype=complex)
    return np.real(np.einsum("kab,ba->k", BASIS, rho))


def effect_vector(effect) -> np.ndarray:
    """HS covector ``<<E|``; for Hermitian E it has the same components as a state."""
    return state_vector(effect)


def to_matrix(vec) -> np.ndarray:
    """Reconstruct the 2x2 operator ``sum_k v_k P_k`` from an HS vector."""
    return np.einsum("k,kab->ab", np.asarray(vec, dtype=float), BASIS)


def _check_hermitian(m: np.ndarray, name: str, tol: float) -> None:
    if np.max(np.abs(m - m.conj().T)) > tol:
        raise ValueError(f"{name} is not Hermitian")


def kraus_to_chi(kraus: Sequence) -> np.ndarray:
    """Process matrix ``chi_jk = sum_i a_ij a_ik^*`` where ``K_i = sum_j a_ij P_j``."""
    ops = np.asarray(kraus, dtype=complex).reshape(-1, 2, 2)
    a = 0.5 * np.einsum("jab,iba->ij", PAULIS, ops)
    return a.T @ a.conj()


def chi_to_ptm(chi, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """PTM ``R_ij = (1/2) sum_kl chi_kl Tr{P_i P_k P_j P_l}``."""
    chi = np.asarray(chi, dtype=complex)
    _check_hermitian(chi, "chi", tol)
    chi = 0.5 * (chi + chi.conj().T)
    r = (_CHI_TO_PTM @ chi.reshape(16)).reshape(4, 4)
    assert np.max(np.abs(r.imag)) < 1e-12
    return r.real.copy()


def ptm_to_chi(ptm) -> np.ndarray:
    """Invert :func:`chi_to_ptm` by solving the 16x16 linear system."""
    r = np.asarray(ptm, dtype=float).reshape(16)
    chi = (_PTM_TO_CHI @ r).reshape(4, 4)
    return 0.5 * (chi + chi.conj().T)


def kraus_to_ptm(kraus: Sequence) -> np.ndarray:
    return chi_to_ptm(kraus_to_chi(kraus))


def chi_to_kraus(chi, tol: float = 1e-12) -> list[np.ndarray]:
    """Kraus operators from the eigendecomposition of a PSD chi matrix.

    Eigenvalues below ``tol`` are dropped; negative ones beyond ``tol`` raise.
    """
    chi = np.asarray(chi, dtype=complex)
    w, v = np.linalg.eigh(0.5 * (chi + chi.conj().T))
    if w.min() < -tol:
        raise ValueError("chi is not positive semidefinite")
    return [np.sqrt(lam) * np.einsum("j,jab->ab", v[:, n], PAULIS)
            for n, lam in enumerate(w) if lam > tol]


def ptm_to_choi(ptm) -> np.ndarray:
    """Choi-Jamiolkowski matrix ``(1/4) sum_ij R_ij P_j^T (x) P_i``; trace 1 for TP maps."""
    r = np.asarray(ptm, dtype=float)
    choi = np.einsum("ij,jab,icd->acbd", r, PAULIS.transpose(0, 2, 1), PAULIS).reshape(4, 4)
    choi = choi / 4
    return 0.5 * (choi + choi.conj().T)


@dataclass(frozen=True)
class CPTPDiagnosis:
    cp_ok: bool
    tp_ok: bool
    min_choi_eigenvalue: float
    tp_row_residual: float

    def __bool__(self) -> bool:
        return self.cp_ok and self.tp_ok


def is_cptp(ptm, tol: float = HERMITIAN_TOL) -> CPTPDiagnosis:
    """Report complete positivity (Choi spectrum) and trace preservation (first PTM row)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    r = np.asarray(ptm, dtype=float)
    min_eig = float(np.linalg.eigvalsh(ptm_to_choi(r)).min())
    tp_res = float(np.max(np.abs(r[0] - np.eye(4)[0])))
    return CPTPDiagnosis(min_eig >= -tol, tp_res <= tol, min_eig, tp_res)


def is_tp(ptm, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(np.asarray(ptm)[0] - np.eye(4)[0])) <= tol)


def is_unital(ptm, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(np.asarray(ptm)[:, 0] - np.eye(4)[:, 0])) <= tol)


def is_physical_state(vec, tol: float = HERMITIAN_TOL) -> bool:
    v = np.asarray(vec, dtype=float)
    if abs(v[0] - 1 / np.sqrt(2)) > tol:
        return False
    return bool(np.linalg.eigvalsh(to_matrix(v)).min() >= -tol)


def is_physical_effect(vec, tol: float = HERMITIAN_TOL) -> bool:
    w = np.linalg.eigvalsh(to_matrix(vec))
    return bool(w.min() >= -tol and w.max() <= 1 + tol)


def apply_channel(ptm, state) -> np.ndarray:
    """``|Lambda(rho)>> = R |rho>>``."""
    return np.asarray(ptm, dtype=float) @ np.asarray(state, dtype=float)


def compose(a, b) -> np.ndarray:
    """PTM of ``a`` after ``b``."""
    return np.asarray(a, dtype=float) @ np.asarray(b, dtype=float)


def expectation(effect, ptm, state) -> float:
    """``<<E| R |rho>>``."""
    return float(np.asarray(effect) @ np.asarray(ptm) @ np.asarray(state))


def matrix_to_json(m) -> list:
    """Row-major nested lists; complex entries become ``[re, im]`` pairs."""
    m = np.asarray(m)
    if np.iscomplexobj(m):
        return np.stack([m.real, m.imag], axis=-1).tolist()
    return m.tolist()


def matrix_from_json(data, complex_values: bool = False) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if complex_values:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr
