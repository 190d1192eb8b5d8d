"""Command-line front end: ``gst1q simulate | estimate | sweep``.

Exit codes: 0 success, 2 configuration error, 3 Gram-matrix failure, 4 fit failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .gateset import GateSet, default_gateset, estimation_error, example1_gateset, spectral_distance
from .lgst import GRAM_THRESHOLD, GramError, assemble_gram, gauge_optimize, gram_diagnostics
from .mle import Objective
from .report import format_gateset, format_table, ptm_svg
from .simulator import Dataset, DatasetFormatError, ErrorModel, build_true_gateset, run_protocol
from .studies import (CSV_COLUMNS, ERROR_KINDS, ESTIMATORS, StudyConfig, default_grid,
                      error_model, estimate, run_point)

EXIT_OK, EXIT_CONFIG, EXIT_GRAM, EXIT_FIT = 0, 2, 3, 4
NAMED_GATESETS = {"default": default_gateset, "example1": example1_gateset}


class ConfigError(ValueError):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def resolve_gateset(spec) -> GateSet:
    """A named gate set, an inline gate-set object, or a path to a gate-set JSON file."""
    if spec is None:
        return default_gateset()
    if isinstance(spec, dict):
        return GateSet.from_json(spec)
    if spec in NAMED_GATESETS:
        return NAMED_GATESETS[spec]()
    try:
        return GateSet.load(spec)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"unknown gate set {spec!r}") from exc


def _shots(value):
    if value is None:
        return None
    if isinstance(value, str):
        if value.lower() in ("inf", "infinite"):
            return None
        try:
            value = int(value)
        except ValueError:
            raise ConfigError(f"invalid shots {value!r}") from None
    if isinstance(value, float) and math.isinf(value):
        return None
    if int(value) <= 0:
        raise ConfigError("shots must be positive or 'inf'")
    return int(value)


def build_simulation(cfg: dict) -> tuple[GateSet, GateSet]:
    """``(ideal, truth)`` from a simulate config."""
    try:
        ideal = resolve_gateset(cfg.get("gateset", "default"))
        if "fiducials" in cfg:
            ideal = ideal.replace(fiducials=cfg["fiducials"])
        if "errors" in cfg:
            err = ErrorModel.from_json(cfg["errors"])
        elif "error_kind" in cfg:
            err = error_model(cfg["error_kind"], float(cfg.get("magnitude", 0.0)), ideal)
        else:
            err = ErrorModel()
        return ideal, build_true_gateset(ideal, err)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _gram_message(diag) -> str:
    eig = ", ".join(f"{abs(e):.4g}" for e in diag.eigenvalues)
    return f"Gram |eigenvalues|: {eig} (threshold {diag.threshold})"


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.shots is not None:
        cfg["shots"] = args.shots
    ideal, truth = build_simulation(cfg)
    shots = _shots(cfg.get("shots"))
    seed = int(cfg.get("seed", 0))
    cfg.setdefault("gateset", "default")
    cfg["shots"] = "inf" if shots is None else shots
    cfg["seed"] = seed
    d = run_protocol(truth, shots=shots, seed=seed, config=cfg)
    out = Path(args.out)
    d.save(out)
    print(f"wrote {len(d)} records to {out}")
    diag = gram_diagnostics(assemble_gram(d, ideal.n_fiducials, ideal.n_gates).g,
                            cfg.get("gram_threshold", GRAM_THRESHOLD))
    print(_gram_message(diag))
    if not diag.invertible:
        print(f"error: Gram matrix is not invertible (smallest |eigenvalue| {diag.min_abs_eigenvalue:.3g}); "
              "adjust the fiducials", file=sys.stderr)
        return EXIT_GRAM
    return EXIT_OK


def _distances(est: GateSet, ref: GateSet) -> list[tuple[str, float, float]]:
    out = []
    for label, e, r in zip(est.labels, est.gates, ref.gates):
        infid = estimation_error(e, r, "infidelity")[0]
        out.append((label, infid, spectral_distance(e, r)))
    return out


def cmd_estimate(args) -> int:
    try:
        d = Dataset.load(args.dataset)
    except (OSError, DatasetFormatError) as exc:
        raise ConfigError(str(exc)) from exc
    target_spec = args.target or (d.config or {}).get("gateset", "default")
    target = resolve_gateset(target_spec)
    if d.config and "fiducials" in d.config and args.target is None:
        target = target.replace(fiducials=d.config["fiducials"])
    obj = None
    if args.objective:
        obj = Objective(args.objective)
    try:
        est, objective, rep = estimate(args.method, d, target, obj)
    except GramError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GRAM

    print(f"method: {args.method}   final objective: {objective:.6g}")
    print(format_gateset(est))
    print("\nvs target:")
    print(format_table(("gate", "infidelity", "spectral"), _distances(est, target)))
    result = {"method": args.method, "objective_final": objective, "estimate": est.to_json(),
              "vs_target": {lab: {"infidelity": i, "spectral": s} for lab, i, s in _distances(est, target)},
              "report": _jsonable(rep)}
    columns = [("estimate", est)]
    if d.truth is not None:
        # compare in the gauge closest to the truth, not the target's
        in_truth_gauge = gauge_optimize(est, d.truth, start=np.eye(4)).estimate
        print("\nvs truth (estimate gauge-optimized to truth):")
        print(format_table(("gate", "infidelity", "spectral"), _distances(in_truth_gauge, d.truth)))
        result["vs_truth"] = {lab: {"infidelity": i, "spectral": s}
                              for lab, i, s in _distances(in_truth_gauge, d.truth)}
        columns = [("truth", d.truth)] + columns
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=1))
    if args.svg:
        Path(args.svg).write_text(ptm_svg(columns))
    failed = args.method != "lgst" and not _converged(args.method, rep)
    if failed:
        print("error: fit did not converge", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def _converged(method: str, rep: dict) -> bool:
    if method == "qpt_mle":
        return all(g["converged"] for g in rep["gates"])
    return bool(rep.get("converged", False))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def sweep_points(cfg: dict) -> list[StudyConfig]:
    """Expand a sweep config into study points ordered by (grid index, seed)."""
    kind = cfg.get("error_kind")
    if kind not in ERROR_KINDS:
        raise ConfigError(f"error_kind must be one of {ERROR_KINDS}")
    grid = cfg.get("grid")
    if grid is None:
        grid = default_grid()
    elif isinstance(grid, dict):
        grid = default_grid(int(grid.get("n", 13)), float(grid.get("lo", 1e-5)), float(grid.get("hi", 1e-1)))
    grid = [float(g) for g in grid]
    if not grid:
        raise ConfigError("grid must be nonempty")
    sampling = kind == "overrotation_with_sampling" or cfg.get("shots") not in (None, "inf")
    seeds = cfg.get("seeds", 5 if sampling else 1)
    if isinstance(seeds, int):
        base = int(cfg.get("seed", 0))
        seeds = list(range(base, base + seeds))
    estimators = tuple(cfg.get("estimators", ESTIMATORS))
    shots = _shots(cfg.get("shots"))
    target = resolve_gateset(cfg.get("gateset", "default"))
    points = []
    try:
        for m in grid:
            error_model(kind, m, target)
            for s in seeds:
                points.append(StudyConfig(kind, m, int(s), shots, estimators,
                                          cfg.get("eval_gauge", "target"), cfg.get("metric"), target))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return points


def _row_name(row: dict, index: int) -> str:
    return f"{row['error_kind']}_{index:03d}_s{row['seed']}_{row['estimator']}.json"


def write_sweep_csv(rows: list[dict], stream, omit_timing: bool = False, timestamp: str | None = None) -> None:
    stamp = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    stream.write(f"# generated {stamp}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        vals = []
        for col in CSV_COLUMNS:
            v = row.get(col, "")
            if col == "wall_ms":
                v = "" if omit_timing else f"{v:.1f}"
            elif isinstance(v, float):
                v = repr(v)
            vals.append(v)
        w.writerow(vals)


def run_sweep(points: list[StudyConfig], workers: int = 1) -> list[list[dict]]:
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_point, points))
    return [run_point(p) for p in points]


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
        if isinstance(cfg.get("seeds"), list):
            cfg["seeds"] = len(cfg["seeds"])
    if args.shots is not None:
        cfg["shots"] = args.shots
    if args.method:
        cfg["estimators"] = [m.strip() for m in args.method.split(",")]
    for m in cfg.get("estimators", ()):
        if m not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {m!r}")
    points = sweep_points(cfg)
    results = run_sweep(points, args.workers or int(cfg.get("workers", 1)))
    rows = [row for point_rows in results for row in point_rows]
    gs_dir = args.gateset_dir or cfg.get("gateset_dir")
    if gs_dir:
        gs_dir = Path(gs_dir)
        gs_dir.mkdir(parents=True, exist_ok=True)
        grid = list(dict.fromkeys(q.magnitude for q in points))
        for p, point_rows in zip(points, results):
            grid_index = grid.index(p.magnitude)
            for row in point_rows:
                if "estimate" not in row:
                    continue
                payload = {"estimate": row["estimate"].to_json(), "truth": row["truth"].to_json(),
                           "metric": row["metric"], "eval_gauge": p.eval_gauge,
                           "estimation_error": row["estimation_error"]}
                (gs_dir / _row_name(row, grid_index)).write_text(json.dumps(payload, indent=1))
    buf = io.StringIO()
    write_sweep_csv(rows, buf, omit_timing=args.omit_timing)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    failures = [r for r in rows if "error" in r]
    for r in failures:
        print(f"row failed ({r['estimator']}, magnitude {r['magnitude']:.3g}, seed {r['seed']}): {r['error']}",
              file=sys.stderr)
    return EXIT_FIT if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gst1q", description="Single-qubit gate set tomography toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate the GST experiment and write a dataset")
    p.add_argument("--config", help="simulation config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--shots", help="shots per circuit, or 'inf'")
    p.add_argument("--out", required=True, help="dataset JSON path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate a gate set from a dataset")
    p.add_argument("dataset")
    p.add_argument("--method", choices=ESTIMATORS, default="gst_mle")
    p.add_argument("--target", help="target gate set: name, or gate-set JSON path")
    p.add_argument("--objective", choices=("unweighted_ls", "weighted_ls"))
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--svg", help="write PTM grid SVG here")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="estimation error vs gate error study, written as CSV")
    p.add_argument("--config", required=True, help="sweep config JSON")
    p.add_argument("--seed", type=int, help="first seed")
    p.add_argument("--shots", help="shots per circuit, or 'inf'")
    p.add_argument("--method", help="comma-separated estimators")
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--gateset-dir", help="write one estimate/truth JSON per row here")
    p.add_argument("--omit-timing", action="store_true", help="leave wall_ms empty for reproducible output")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
