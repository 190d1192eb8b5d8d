"""Levenberg-Marquardt for small dense least-squares problems.

The objective is the plain sum of squared residuals ``||r(x)||^2``.  Only
accepted steps are recorded in ``history``, so it is non-increasing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["LMResult", "ALResult", "levenberg_marquardt", "augmented_lagrangian"]


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    iterations: int
    nfev: int
    converged: bool
    message: str
    history: list = field(default_factory=list)


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0,
    ftol: float = 1e-12,
    xtol: float = 1e-15,
    gtol: float = 1e-15,
    atol: float = 0.0,
    max_iter: int = 1000,
    damping: float = 1e-3,
    fatol: float = 0.0,
) -> LMResult:
    """Stops when two consecutive accepted steps each lower the cost by at most
    ``ftol`` relative or ``fatol`` absolute, when the cost drops below ``atol``,
    or when the gradient or step become negligible."""
    x = np.array(x0, dtype=float)
    r = residual(x)
    cost = float(r @ r)
    history = [cost]
    nfev = 1
    jac = jacobian(x)
    a = jac.T @ jac
    g = jac.T @ r
    # Marquardt scaling: mu is dimensionless and multiplies the running
    # maximum of diag(J^T J), floored relative to its largest entry
    scale = np.diag(a).copy()
    mu = damping
    nu = 2.0
    message = "maximum iterations reached"
    converged = False
    it = 0
    small_steps = 0
    for it in range(1, max_iter + 1):
        if cost <= atol:
            converged, message = True, "objective below absolute tolerance"
            break
        if np.max(np.abs(g)) <= gtol:
            converged, message = True, "gradient below tolerance"
            break
        scale = np.maximum(scale, np.diag(a))
        diag = np.maximum(scale, 1e-8 * max(float(np.max(scale)), 1e-300))
        try:
            step = np.linalg.solve(a + mu * np.diag(diag), -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(a + mu * np.diag(diag), -g, rcond=None)[0]
        if np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol):
            converged, message = True, "step below tolerance"
            break
        x_new = x + step
        r_new = residual(x_new)
        nfev += 1
        cost_new = float(r_new @ r_new)
        predicted = -2.0 * float(step @ g) - float(step @ a @ step)
        gain = (cost - cost_new) / predicted if predicted > 0 else -1.0
        if np.isfinite(cost_new) and cost_new < cost and gain > 0:
            reduction = cost - cost_new
            x, r, cost = x_new, r_new, cost_new
            history.append(cost)
            jac = jacobian(x)
            a = jac.T @ jac
            g = jac.T @ r
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * gain - 1.0) ** 3)
            nu = 2.0
            if reduction <= ftol * (cost + reduction) or reduction <= fatol:
                small_steps += 1
                if small_steps >= 2:
                    converged, message = True, "objective change below tolerance"
                    break
            else:
                small_steps = 0
        else:
            mu *= nu
            nu *= 2.0
            if mu > 1e30 or not np.isfinite(mu):
                converged, message = True, "no further decrease possible"
                break
    return LMResult(x, cost, it, nfev, converged, message, history)


@dataclass
class ALResult:
    x: np.ndarray
    objective: float
    violation: float
    outer_iterations: int
    iterations: int
    converged: bool
    message: str
    history: list = field(default_factory=list)


def _no_constraints(x):
    return np.zeros(0)


def augmented_lagrangian(
    data_residual: Callable[[np.ndarray], np.ndarray],
    data_jacobian: Callable[[np.ndarray], np.ndarray],
    x0,
    eq: Callable | None = None,
    eq_jacobian: Callable | None = None,
    ineq: Callable | None = None,
    ineq_jacobian: Callable | None = None,
    mu0: float = 1e3,
    con_tol: float = 1e-9,
    ftol: float = 1e-12,
    atol: float = 0.0,
    max_outer: int = 30,
    max_iter: int = 1000,
    fatol: float = 0.0,
) -> ALResult:
    """Minimize ``||data_residual(x)||^2`` subject to ``eq(x) = 0`` and ``ineq(x) <= 0``.

    Each outer iteration runs :func:`levenberg_marquardt` on the data
    residuals stacked with the shifted penalty residuals
    ``sqrt(mu) (c + y / mu)``, then updates the multipliers ``y``.
    ``history`` holds one non-increasing cost trace per inner solve.
    """
    eq = eq or _no_constraints
    ineq = ineq or _no_constraints
    x = np.array(x0, dtype=float)
    n = x.size
    y_eq = np.zeros(eq(x).size)
    y_in = np.zeros(ineq(x).size)
    mu = mu0
    history = []
    total_iter = 0
    prev_viol = np.inf
    prev_obj = None
    message, converged = "maximum outer iterations reached", False

    def violation(z):
        ce, ci = eq(z), ineq(z)
        v = np.max(np.abs(ce)) if ce.size else 0.0
        if ci.size:
            v = max(v, float(np.max(np.maximum(ci, 0.0))))
        return float(v)

    outer = 0
    for outer in range(1, max_outer + 1):
        smu = np.sqrt(mu)

        def residual(z):
            parts = [data_residual(z)]
            if y_eq.size:
                parts.append(smu * (eq(z) + y_eq / mu))
            if y_in.size:
                parts.append(smu * np.maximum(ineq(z) + y_in / mu, 0.0))
            return np.concatenate(parts)

        def jacobian(z):
            parts = [data_jacobian(z)]
            if y_eq.size:
                parts.append(smu * eq_jacobian(z))
            if y_in.size:
                active = (ineq(z) + y_in / mu > 0).astype(float)
                parts.append(smu * active[:, None] * ineq_jacobian(z).reshape(y_in.size, n))
            return np.vstack(parts)

        res = levenberg_marquardt(residual, jacobian, x, ftol=ftol, atol=atol, max_iter=max_iter,
                                  fatol=fatol)
        x = res.x
        total_iter += res.iterations
        history.append(res.history)
        r = data_residual(x)
        obj = float(r @ r)
        viol = violation(x)
        if y_eq.size:
            y_eq = y_eq + mu * eq(x)
        if y_in.size:
            y_in = np.maximum(y_in + mu * ineq(x), 0.0)
        settled = prev_obj is not None and abs(obj - prev_obj) <= max(1e-6 * prev_obj, atol, fatol, 1e-30)
        if viol <= con_tol and (settled or (not y_eq.size and not y_in.size)):
            message, converged = "constraints satisfied and objective settled", True
            break
        if viol > 0.25 * prev_viol:
            mu *= 10.0
        prev_viol = viol
        prev_obj = obj
    r = data_residual(x)
    return ALResult(x, float(r @ r), violation(x), outer, total_iter, converged, message, history)
