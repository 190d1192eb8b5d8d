"""Estimation-error studies: error model, simulated data, estimators, metrics."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .channels import depolarizing, overrotation_angle_for_gate_error, rotation
from .gateset import GateSet, default_gateset, estimation_error, gate_error
from .lgst import gauge_optimize, project_physical, run_lgst
from .mle import Objective, fit
from .qpt import qpt_mle
from .simulator import ErrorModel, build_true_gateset, run_protocol

__all__ = [
    "ERROR_KINDS", "ESTIMATORS", "SAMPLING_SPAM", "SAMPLING_SHOTS",
    "StudyConfig", "default_grid", "error_model", "true_gateset",
    "estimate", "evaluate", "run_point", "CSV_COLUMNS",
]

ERROR_KINDS = ("overrotation_y", "depolarizing_all", "spam_depolarizing_rho", "overrotation_with_sampling")
ESTIMATORS = ("lgst", "gst_mle", "qpt_mle")
SAMPLING_SPAM = 0.01
SAMPLING_SHOTS = 10_000
CSV_COLUMNS = ("error_kind", "magnitude", "gate_error", "estimator", "metric",
               "estimation_error", "objective_final", "seed", "wall_ms")


def default_grid(n: int = 13, lo: float = 1e-5, hi: float = 1e-1) -> list[float]:
    return [float(v) for v in np.logspace(np.log10(lo), np.log10(hi), n)]


def _rho_depolarizing(state_error: float):
    # rho = |0><0| and E = |1><1|: depolarizing by lam gives <<E|rho>> = lam / 2
    return [depolarizing(2.0 * state_error)]


def error_model(kind: str, magnitude: float, target: GateSet | None = None,
                spam: float = SAMPLING_SPAM) -> ErrorModel:
    """Error model for one study point.

    ``magnitude`` is the gate error (infidelity) for the gate-error kinds and
    ``<<E|rho>>`` for ``spam_depolarizing_rho``.
    """
    if kind not in ERROR_KINDS:
        raise ValueError(f"unknown error kind {kind!r}; expected one of {ERROR_KINDS}")
    if magnitude < 0:
        raise ValueError("magnitude must be nonnegative")
    target = target or default_gateset()
    if kind in ("overrotation_y", "overrotation_with_sampling"):
        eps = overrotation_angle_for_gate_error(magnitude)
        gates = {target.index("Ypi2"): [rotation("y", eps)]}
        rho = _rho_depolarizing(spam) if kind == "overrotation_with_sampling" else []
        return ErrorModel(gates, rho=rho)
    if kind == "depolarizing_all":
        if magnitude > 2.0 / 3.0:
            raise ValueError("depolarizing gate error outside the CP range")
        return ErrorModel({"*": [depolarizing(2.0 * magnitude)]})
    if magnitude > 0.5:
        raise ValueError("state error must be at most 1/2")
    return ErrorModel(rho=_rho_depolarizing(magnitude))


def true_gateset(kind: str, magnitude: float, target: GateSet | None = None) -> GateSet:
    target = target or default_gateset()
    return build_true_gateset(target, error_model(kind, magnitude, target))


def default_metric(kind: str) -> str:
    return "spectral" if kind == "depolarizing_all" else "infidelity"


@dataclass
class StudyConfig:
    kind: str
    magnitude: float
    seed: int = 0
    shots: object = None
    estimators: tuple = ESTIMATORS
    eval_gauge: str = "target"
    metric: str | None = None
    target: GateSet = field(default_factory=default_gateset)

    def __post_init__(self):
        if self.kind not in ERROR_KINDS:
            raise ValueError(f"unknown error kind {self.kind!r}")
        for e in self.estimators:
            if e not in ESTIMATORS:
                raise ValueError(f"unknown estimator {e!r}")
        if self.eval_gauge not in ("target", "truth"):
            raise ValueError("eval_gauge must be 'target' or 'truth'")
        if self.kind == "overrotation_with_sampling" and self.shots is None:
            self.shots = SAMPLING_SHOTS
        if self.metric is None:
            self.metric = default_metric(self.kind)


def estimate(method: str, d, target: GateSet, obj: Objective | None = None) -> tuple[GateSet, float, dict]:
    """Run one estimator; returns ``(gate set, final objective, report)``.

    QPT estimates every non-null gate separately and keeps the target SPAM.
    """
    if obj is None:
        obj = Objective("unweighted_ls" if d.infinite_shots else "weighted_ls")
    if method == "lgst":
        res = run_lgst(d, target)
        return res.estimate, res.gauge.objective, res.report(target)
    if method == "gst_mle":
        res = run_lgst(d, target)
        start = project_physical(res.estimate)
        f = fit(d, start, obj)
        return f.estimate, f.report["final_objective"], f.report
    if method == "qpt_mle":
        gates, total, reports = [np.eye(4)], 0.0, []
        for k in range(1, target.n_gates):
            q = qpt_mle(d, k, target, obj)
            gates.append(q.ptm)
            total += q.report["final_objective"]
            reports.append(q.report)
        return target.replace(gates=gates), total, {"gates": reports, "final_objective": total}
    raise ValueError(f"unknown estimator {method!r}")


def evaluate(est: GateSet, truth: GateSet, metric: str, eval_gauge: str = "target") -> tuple[float, list[float]]:
    """Largest per-gate estimation error over the non-null gates, and the per-gate list.

    ``eval_gauge="truth"`` first gauge-optimizes the estimate toward the true
    gate set (identity start).
    """
    if eval_gauge == "truth":
        est = gauge_optimize(est, truth, start=np.eye(4)).estimate
    errs = [estimation_error(e, t, metric)[0] for e, t in zip(est.gates[1:], truth.gates[1:])]
    return float(max(errs, key=abs)), errs


def run_point(cfg: StudyConfig) -> list[dict]:
    """One CSV row per estimator for a single (kind, magnitude, seed) point.

    Failures are recorded in the row (``estimation_error`` NaN plus an
    ``error`` field) instead of raised.
    """
    truth = true_gateset(cfg.kind, cfg.magnitude, cfg.target)
    d = run_protocol(truth, shots=cfg.shots, seed=cfg.seed)
    g_err = max(gate_error(a, i) for a, i in zip(truth.gates[1:], cfg.target.gates[1:]))
    rows = []
    for method in cfg.estimators:
        t0 = time.perf_counter()
        row = {"error_kind": cfg.kind, "magnitude": cfg.magnitude, "gate_error": g_err,
               "estimator": method, "seed": cfg.seed}
        metric = "spectral" if method == "lgst" else cfg.metric
        try:
            est, objective, _ = estimate(method, d, cfg.target)
            value, per_gate = evaluate(est, truth, metric, cfg.eval_gauge)
            row.update(metric=metric, estimation_error=value, objective_final=objective,
                       estimate=est, per_gate=per_gate)
        except Exception as exc:  # recorded per row; the sweep continues
            row.update(metric=metric, estimation_error=float("nan"), objective_final=float("nan"),
                       error=f"{type(exc).__name__}: {exc}")
        row["wall_ms"] = (time.perf_counter() - t0) * 1e3
        row["truth"] = truth
        rows.append(row)
    return rows
