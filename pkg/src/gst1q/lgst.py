"""Linear-inversion gate set tomography.

Pipeline: :func:`assemble_gram` -> :func:`gram_diagnostics` ->
:func:`linear_inversion` -> :func:`gauge_optimize` -> (optionally)
:func:`project_physical`.  :func:`run_lgst` chains the first four.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gateset import GateSet, gauge_transform, spam_matrices
from .optim import levenberg_marquardt
from .pauli import chi_to_ptm, is_cptp, is_physical_effect, is_physical_state, ptm_to_chi, state_vector, to_matrix
from .simulator import Dataset

__all__ = [
    "GramData", "GramDiagnostics", "GramError", "GaugeResult", "LGSTResult",
    "assemble_gram", "gram_diagnostics", "linear_inversion", "target_gauge_matrix",
    "gauge_objective", "gauge_optimize", "project_physical", "run_lgst",
    "GRAM_THRESHOLD",
]

GRAM_THRESHOLD = 0.1


class GramError(ValueError):
    """The measured Gram matrix is too close to singular to invert."""


@dataclass(frozen=True, eq=False)
class GramData:
    g: np.ndarray
    gtilde: tuple
    rho_tilde: np.ndarray
    e_tilde: np.ndarray


def _pooled(records) -> float:
    shots = sum(r.n for r in records)
    if shots == 0:
        return float(np.mean([r.mean for r in records]))
    return sum(r.successes for r in records) / shots


def assemble_gram(d: Dataset, n_fiducials: int = 4, n_gates: int | None = None) -> GramData:
    """Arrange record means into ``g``, ``G~_k`` and ``rho~`` (indexed ``[i][j]``).

    ``<<E|F_i G_0 F_j|rho>>`` and ``<<E|F_i F_j|rho>>`` measure the same
    quantity; both records are pooled into ``g``, and ``G~_0`` is set to ``g``.
    """
    if len(d) == 0:
        raise ValueError("dataset is empty")
    if n_gates is None:
        n_gates = max(r.k for r in d.records) + 1
    missing = d.missing(n_fiducials, n_gates)
    if missing:
        raise ValueError(f"dataset is missing records {missing[:5]}{'...' if len(missing) > 5 else ''}")
    nf = n_fiducials
    g = np.array([[_pooled([d[(i, j, 0)], d[(i, j, -1)]]) for j in range(nf)] for i in range(nf)])
    gtilde = [g] + [np.array([[d[(i, j, k)].mean for j in range(nf)] for i in range(nf)])
                    for k in range(1, n_gates)]
    rho_tilde = np.array([d[(i, -1, -1)].mean for i in range(nf)])
    return GramData(g, tuple(gtilde), rho_tilde, rho_tilde.copy())


@dataclass(frozen=True)
class GramDiagnostics:
    eigenvalues: np.ndarray
    min_abs_eigenvalue: float
    invertible: bool
    threshold: float

    def to_json(self) -> dict:
        return {"eigenvalues": [[float(e.real), float(e.imag)] for e in self.eigenvalues],
                "min_abs_eigenvalue": self.min_abs_eigenvalue,
                "invertible": self.invertible, "threshold": self.threshold}


def gram_diagnostics(g, threshold: float = GRAM_THRESHOLD) -> GramDiagnostics:
    """Eigenvalues of ``g``; invertible means no eigenvalue below ``threshold`` in magnitude."""
    eig = np.linalg.eigvals(np.asarray(g, dtype=float))
    eig = eig[np.argsort(-np.abs(eig))]
    m = float(np.min(np.abs(eig)))
    return GramDiagnostics(eig, m, m >= threshold, threshold)


def linear_inversion(gd: GramData, template: GateSet | None = None) -> GateSet:
    """``rho^ = g^-1 rho~``, ``E^ = E~``, ``G^_k = g^-1 G~_k``; the null gate is exact."""
    try:
        ginv = np.linalg.inv(gd.g)
    except np.linalg.LinAlgError:
        raise GramError("Gram matrix is singular") from None
    if not np.all(np.isfinite(ginv)):
        raise GramError("Gram matrix is singular")
    gates = [np.eye(4)] + [ginv @ gt for gt in gd.gtilde[1:]]
    kwargs = {}
    if template is not None:
        kwargs = dict(labels=template.labels, fiducials=template.fiducials)
    else:
        kwargs = dict(fiducials=tuple(() for _ in range(len(gd.rho_tilde))))
    return GateSet(ginv @ gd.rho_tilde, gd.e_tilde, gates, **kwargs)


def target_gauge_matrix(target: GateSet) -> np.ndarray:
    """``B0[i, j] = <<i|S_j|tau>>``, the state-side SPAM matrix of the target."""
    return spam_matrices(target)[1]


def _targets(target: GateSet) -> np.ndarray:
    return np.array(list(target.gates[1:]) + [np.outer(target.rho, target.effect)])


def _estimates(gs: GateSet) -> np.ndarray:
    return np.array(list(gs.gates[1:]) + [np.outer(gs.rho, gs.effect)])


def _gauge_residual(b: np.ndarray, est: np.ndarray, tgt: np.ndarray) -> np.ndarray:
    binv = np.linalg.inv(b)
    return (est - binv @ tgt @ b).ravel()


def _gauge_jacobian(b: np.ndarray, tgt: np.ndarray) -> np.ndarray:
    binv = np.linalg.inv(b)
    m = binv @ tgt @ b
    c = binv @ tgt
    eye = np.eye(4)
    # d(est - B^-1 T B)/dB_ab = B^-1[:, a] (x) M[b, :] - C[:, a] (x) e_b
    jac = (np.einsum("ia,nbj->nijab", binv, m)
           - np.einsum("nia,bj->nijab", c, eye))
    return jac.reshape(-1, 16)


def gauge_objective(raw: GateSet, target: GateSet, b) -> float:
    """``sum_k ||G^_k - B^-1 T_k B||_F^2`` over all gates plus the ``|rho>><<E|`` pseudo-gate."""
    r = _gauge_residual(np.asarray(b, dtype=float), _estimates(raw), _targets(target))
    return float(r @ r)


@dataclass
class GaugeResult:
    b_star: np.ndarray
    estimate: GateSet
    objective: float
    start_objective: float
    history: list = field(default_factory=list)
    converged: bool = True
    message: str = ""


def gauge_optimize(raw: GateSet, target: GateSet, start=None, ftol: float = 1e-15,
                   max_iter: int = 2000) -> GaugeResult:
    """Find ``B*`` over all of GL(4, R) and return ``B* G^ B*^-1``, ``B* rho^``, ``E^ B*^-1``."""
    if raw.n_gates != target.n_gates:
        raise ValueError("raw estimate and target have different numbers of gates")
    est, tgt = _estimates(raw), _targets(target)
    b0 = target_gauge_matrix(target) if start is None else np.asarray(start, dtype=float)
    start_obj = gauge_objective(raw, target, b0)

    def residual(x):
        b = x.reshape(4, 4)
        if abs(np.linalg.det(b)) < 1e-14:
            return np.full(est.size, np.inf)
        return _gauge_residual(b, est, tgt)

    res = levenberg_marquardt(residual, lambda x: _gauge_jacobian(x.reshape(4, 4), tgt),
                              b0.ravel(), ftol=ftol, max_iter=max_iter)
    b_star = res.x.reshape(4, 4)
    # the objective is blind to B -> cB, which rescales rho by 1/c and E by c;
    # fix c so the estimated state has unit trace
    scale = np.sqrt(2.0) * float((b_star @ raw.rho)[0])
    if abs(scale) > 1e-12:
        b_star = b_star / scale
    # the final transform is B* G^ B*^-1, i.e. a gauge_transform by B*^-1
    estimate = gauge_transform(raw, np.linalg.inv(b_star))
    return GaugeResult(b_star, estimate, res.cost, start_obj, res.history, res.converged, res.message)


def _project_simplex(w: np.ndarray, total: float = 1.0) -> np.ndarray:
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - total
    k = np.nonzero(u - css / np.arange(1, len(u) + 1) > 0)[0][-1]
    return np.maximum(w - css[k] / (k + 1), 0.0)


def _project_psd_ptm(r: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(ptm_to_chi(r))
    return chi_to_ptm((v * np.maximum(w, 0.0)) @ v.conj().T)


def _project_tp_ptm(r: np.ndarray) -> np.ndarray:
    out = r.copy()
    out[0] = (1.0, 0.0, 0.0, 0.0)
    return out


def nearest_cptp(ptm, tol: float = 1e-13, max_iter: int = 5000) -> np.ndarray:
    """Frobenius-nearest CPTP map, by Dykstra alternation between the PSD cone
    (chi eigenvalue truncation) and the trace-preserving affine set.

    A final mix with the fully depolarizing channel removes any leftover
    negativity without breaking trace preservation.
    """
    x = np.asarray(ptm, dtype=float)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_iter):
        y = _project_psd_ptm(x + p)
        p = x + p - y
        x_new = _project_tp_ptm(y + q)
        q = y + q - x_new
        if np.max(np.abs(x_new - x)) < tol:
            x = x_new
            break
        x = x_new
    lam = float(np.linalg.eigvalsh(ptm_to_chi(x)).min())
    if lam < 0:
        t = -lam / (0.25 - lam)
        x = (1 - t) * x + t * np.diag([1.0, 0.0, 0.0, 0.0])
    return x


def _nearest_state(vec) -> np.ndarray:
    w, v = np.linalg.eigh(to_matrix(vec))
    return state_vector((v * _project_simplex(w)) @ v.conj().T)


def _nearest_effect(vec) -> np.ndarray:
    w, v = np.linalg.eigh(to_matrix(vec))
    return state_vector((v * np.clip(w, 0.0, 1.0)) @ v.conj().T)


def project_physical(gs: GateSet, tol: float = 1e-12) -> GateSet:
    """Closest physical gate set, gate by gate and for rho and E separately.

    A gate set that is already physical within ``tol`` is returned unchanged.
    """
    if (all(is_cptp(g, tol) for g in gs.gates) and is_physical_state(gs.rho, tol)
            and is_physical_effect(gs.effect, tol)):
        return gs
    gates = [np.eye(4)] + [g if is_cptp(g, tol) else nearest_cptp(g) for g in gs.gates[1:]]
    rho = gs.rho if is_physical_state(gs.rho, tol) else _nearest_state(gs.rho)
    effect = gs.effect if is_physical_effect(gs.effect, tol) else _nearest_effect(gs.effect)
    return gs.replace(rho=rho, effect=effect, gates=gates)


@dataclass
class LGSTResult:
    gram: GramData
    diagnostics: GramDiagnostics
    raw: GateSet
    gauge: GaugeResult

    @property
    def estimate(self) -> GateSet:
        return self.gauge.estimate

    def report(self, target: GateSet) -> dict:
        from .gateset import spectral_distance
        return {
            "gram": self.diagnostics.to_json(),
            "gauge_objective_start": self.gauge.start_objective,
            "gauge_objective_final": self.gauge.objective,
            "gauge_objective_trace": list(self.gauge.history),
            "gauge_converged": self.gauge.converged,
            "distance_to_target": {
                lab: spectral_distance(g, t)
                for lab, g, t in zip(target.labels, self.estimate.gates, target.gates)
            },
        }


def run_lgst(d: Dataset, target: GateSet, threshold: float = GRAM_THRESHOLD) -> LGSTResult:
    """Assemble, check the Gram matrix, invert and gauge-optimize toward ``target``."""
    gd = assemble_gram(d, target.n_fiducials, target.n_gates)
    diag = gram_diagnostics(gd.g, threshold)
    if not diag.invertible:
        raise GramError(
            f"Gram matrix smallest |eigenvalue| {diag.min_abs_eigenvalue:.3g} is below {threshold}; "
            "adjust the fiducials so they are more linearly independent")
    raw = linear_inversion(gd, target)
    return LGSTResult(gd, diag, raw, gauge_optimize(raw, target))
