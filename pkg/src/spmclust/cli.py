"""Command-line front end.

Subcommands: ``simulate`` (draw a planted dataset), ``cluster`` (fit one
engine), ``tune-tau`` (permutation-gap threshold selection), ``select-k``
(BWDM cluster-count selection), ``evaluate`` (external metrics between two
label files), and ``bench`` (replication study from a JSON spec).

Successful runs exit 0. Errors print a machine-readable JSON object to
stderr and exit 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .core import DataMatrix, Partition, RngSpec, SpmclustError, standardize_columns
from .datagen import sample
from .engines import ENGINES, EngineConfig, SPARSE_ENGINES, fit_engine
from .metrics import METRIC_FUNCTIONS, score_all
from .tuning import default_tau_grid, select_k, select_tau


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spmclust",
        description="Robust sparse clustering with spatial medians",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="draw a planted simulation dataset")
    sim.add_argument("--spec", help="JSON file with a design document")
    sim.add_argument("--n0", type=int, default=100, help="observations per cluster")
    sim.add_argument("--p", type=int, default=200, help="number of features")
    sim.add_argument("--k", type=int, default=3, help="number of clusters")
    sim.add_argument("--s-p", type=int, default=None, help="informative coordinates (default p/20)")
    sim.add_argument("--delta", type=float, default=3.0, help="mean shift")
    sim.add_argument("--family", default="gaussian", choices=("gaussian", "student-t", "scale-mixture"))
    sim.add_argument("--df", type=float, default=3.0, help="degrees of freedom for student-t")
    sim.add_argument("--rho", type=float, default=0.9, help="AR(1) correlation")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--sidecar", help="JSON sidecar path (default: <out>.meta.json)")

    def add_data_args(p):
        p.add_argument("--input", required=True, help="input CSV path")
        p.add_argument("--no-header", action="store_true", help="CSV has no header row")
        p.add_argument("--label-column", help="column holding true labels")
        p.add_argument("--standardize", choices=("median-mad", "zscore"), help="standardize columns first")

    def add_engine_args(p, engines=ENGINES):
        p.add_argument("--engine", default="sparse-sm", choices=engines)
        p.add_argument("--k", type=int, required=True, help="number of clusters")
        p.add_argument("--restarts", type=int, default=20)
        p.add_argument("--max-iter", type=int, default=100)
        p.add_argument("--ridge", type=float, default=0.1, help="ridge for the sign covariance")
        p.add_argument("--init", default="random-assignment", choices=("random-assignment", "max-min-seeding"))
        p.add_argument("--seed", type=int, default=0)

    clu = sub.add_parser("cluster", help="fit a clustering engine")
    add_data_args(clu)
    add_engine_args(clu)
    clu.add_argument("--tau", help="threshold for sparse engines, or 'auto' to gap-tune")
    clu.add_argument("--permutations", type=int, default=10, help="gap permutation replicates")
    clu.add_argument("--grid-size", type=int, default=12, help="gap grid size for --tau auto")
    clu.add_argument("--out", help="write labels CSV here (default stdout summary only)")

    tune = sub.add_parser("tune-tau", help="select the exclusion threshold by permutation gap")
    add_data_args(tune)
    add_engine_args(tune, engines=SPARSE_ENGINES)
    tune.add_argument("--tau-grid", help="comma-separated thresholds (default: auto grid)")
    tune.add_argument("--grid-size", type=int, default=12)
    tune.add_argument("--permutations", type=int, default=10)
    tune.add_argument("--out", help="write the gap report JSON here")

    sel = sub.add_parser("select-k", help="select the cluster count by BWDM")
    add_data_args(sel)
    sel.add_argument("--engine", default="sparse-sm", choices=SPARSE_ENGINES)
    sel.add_argument("--k-grid", required=True, help="comma-separated candidate counts")
    sel.add_argument("--tau-grid", help="comma-separated thresholds (default: auto per K)")
    sel.add_argument("--grid-size", type=int, default=12)
    sel.add_argument("--permutations", type=int, default=10)
    sel.add_argument("--restarts", type=int, default=20)
    sel.add_argument("--max-iter", type=int, default=100)
    sel.add_argument("--ridge", type=float, default=0.1)
    sel.add_argument("--init", default="random-assignment", choices=("random-assignment", "max-min-seeding"))
    sel.add_argument("--seed", type=int, default=0)
    sel.add_argument("--out", help="write the selection report JSON here")

    ev = sub.add_parser("evaluate", help="score predicted labels against true labels")
    ev.add_argument("--pred", required=True, help="CSV with one label per line")
    ev.add_argument("--truth", required=True, help="CSV with one label per line")
    ev.add_argument("--metrics", default=",".join(METRIC_FUNCTIONS), help="comma-separated metric names")

    be = sub.add_parser("bench", help="replication study from a JSON spec")
    be.add_argument("--spec", required=True, help="experiment spec JSON file")
    be.add_argument("--out", help="report base path (overrides spec output)")
    be.add_argument("--workers", type=int, help=f"worker processes (default ${bench_mod.WORKERS_ENV} or 1)")

    return parser


def _load_matrix(args) -> tuple[DataMatrix, Partition | None]:
    X, truth = bench_mod.ingest_csv(
        args.input, has_header=not args.no_header, label_column=args.label_column
    )
    if args.standardize:
        X = standardize_columns(X, args.standardize)
    return X, truth


def _engine_config(args) -> EngineConfig:
    return EngineConfig(
        engine=args.engine,
        restarts=args.restarts,
        max_iter=args.max_iter,
        init=args.init,
        ridge=args.ridge,
    )


def _parse_grid(raw: str) -> np.ndarray:
    return np.array([float(v) for v in raw.split(",") if v.strip() != ""])


def _emit(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, default=_jsonable)
    if path:
        Path(path).write_text(text + "\n")
    print(text)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def cmd_simulate(args) -> int:
    if args.spec:
        design = bench_mod.design_from_dict(json.loads(Path(args.spec).read_text()))
    else:
        design = bench_mod.design_from_dict(
            {
                "n0": args.n0,
                "p": args.p,
                "n_clusters": args.k,
                **({"s_p": args.s_p} if args.s_p is not None else {}),
                "delta": args.delta,
                "family": args.family,
                "df": args.df,
                "covariance": {"kind": "ar1", "rho": args.rho},
            }
        )
    sim = sample(design, RngSpec(args.seed))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([f"x{j + 1}" for j in range(sim.X.p)])
        for row in sim.X.values:
            writer.writerow([repr(float(v)) for v in row])
    sidecar = Path(args.sidecar) if args.sidecar else out.with_suffix(out.suffix + ".meta.json")
    sidecar.write_text(
        json.dumps(
            {
                "labels": sim.truth.assignments.tolist(),
                "informative_columns": (sim.informative + 1).tolist(),
                "n_clusters": sim.truth.n_clusters,
                "seed": args.seed,
                "design": _design_dict(design),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    print(json.dumps({"written": str(out), "sidecar": str(sidecar), "n": sim.X.n, "p": sim.X.p}))
    return 0


def _design_dict(design) -> dict:
    raw = asdict(design)
    if raw.get("contamination") is None:
        raw.pop("contamination", None)
    return raw


def cmd_cluster(args) -> int:
    X, truth = _load_matrix(args)
    config = _engine_config(args)
    rng = RngSpec(args.seed)
    tau = None
    gap_payload = None
    if args.engine in SPARSE_ENGINES:
        if args.tau is None:
            raise SpmclustError("sparse engines need --tau (a number or 'auto')")
        if args.tau == "auto":
            grid = default_tau_grid(X, args.k, config, rng.child(0), size=args.grid_size)
            report = select_tau(X, args.k, grid, args.permutations, config, rng.child(1))
            tau = report.selected_tau
            gap_payload = {"selected_tau": tau, "gap": report.gap, "tau_grid": report.tau_grid}
        else:
            tau = float(args.tau)
    fit = fit_engine(X, args.k, config, rng.child(2), tau=tau)
    payload = {
        "engine": args.engine,
        "n_clusters": args.k,
        "converged": fit.diagnostics.converged,
        "iterations": fit.diagnostics.iterations_used,
        "objective": fit.objective,
        "cluster_sizes": fit.partition.sizes(),
    }
    if fit.sparse is not None:
        payload["tau"] = fit.sparse.tau
        payload["active_columns"] = (fit.sparse.active + 1)
        payload["active_size"] = int(fit.sparse.active.size)
    if gap_payload:
        payload["gap_report"] = gap_payload
    if truth is not None:
        payload["scores"] = score_all(fit.partition, truth)
    if args.out:
        with open(args.out, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["label"])
            for label in fit.partition.assignments:
                writer.writerow([label])
        payload["labels_written"] = args.out
    _emit(payload, None)
    return 0


def cmd_tune_tau(args) -> int:
    X, _ = _load_matrix(args)
    config = _engine_config(args)
    rng = RngSpec(args.seed)
    if args.tau_grid:
        grid = _parse_grid(args.tau_grid)
    else:
        grid = default_tau_grid(X, args.k, config, rng.child(0), size=args.grid_size)
    report = select_tau(X, args.k, grid, args.permutations, config, rng.child(1))
    _emit(
        {
            "tau_grid": report.tau_grid,
            "observed": report.observed,
            "reference": report.reference,
            "gap": report.gap,
            "selected_tau": report.selected_tau,
            "degenerate": report.degenerate,
        },
        args.out,
    )
    return 0


def cmd_select_k(args) -> int:
    X, _ = _load_matrix(args)
    config = EngineConfig(
        engine=args.engine,
        restarts=args.restarts,
        max_iter=args.max_iter,
        init=args.init,
        ridge=args.ridge,
    )
    k_grid = np.array([int(v) for v in args.k_grid.split(",") if v.strip() != ""])
    tau_grid = _parse_grid(args.tau_grid) if args.tau_grid else None
    report = select_k(
        X,
        k_grid,
        args.permutations,
        config,
        RngSpec(args.seed),
        tau_grid=tau_grid,
        grid_size=args.grid_size,
    )
    _emit(
        {
            "k_grid": report.k_grid,
            "tau_per_k": report.tau_per_k,
            "abdm": report.abdm,
            "awdm": report.awdm,
            "bwdm": report.bwdm,
            "selected_k": report.selected_k,
        },
        args.out,
    )
    return 0


def _read_labels(path: str) -> Partition:
    with open(path, newline="") as handle:
        rows = [r for r in csv.reader(handle) if r]
    values = [r[0].strip() for r in rows]
    if values and not _is_int(values[0]):
        values = values[1:]  # header line
    seen: dict[str, int] = {}
    codes = []
    for v in values:
        if v not in seen:
            seen[v] = len(seen) + 1
        codes.append(seen[v])
    return Partition(np.array(codes), len(seen))


def _is_int(text: str) -> bool:
    try:
        int(text)
        return True
    except ValueError:
        return False


def cmd_evaluate(args) -> int:
    pred = _read_labels(args.pred)
    truth = _read_labels(args.truth)
    names = [n.strip() for n in args.metrics.split(",") if n.strip()]
    unknown = set(names) - set(METRIC_FUNCTIONS)
    if unknown:
        raise SpmclustError(f"unknown metrics: {sorted(unknown)}")
    _emit(score_all(pred, truth, names), None)
    return 0


def cmd_bench(args) -> int:
    spec = bench_mod.spec_from_dict(json.loads(Path(args.spec).read_text()))
    if spec.task != "bench":
        raise SpmclustError(f"spec file declares task {spec.task!r}; only 'bench' runs from a spec")
    report = bench_mod.run_bench(spec, workers=args.workers)
    out_base = args.out or spec.output
    payload = {
        "rows": [
            {
                "sweep": row.sweep_value,
                "method": row.method,
                "replications": row.replications,
                **{f"{k}_mean": v for k, v in row.means.items()},
                **{f"{k}_sd": v for k, v in row.sds.items()},
            }
            for row in report.rows
        ],
        "runtime_seconds": {m: {"mean": v[0], "sd": v[1]} for m, v in report.runtime.items()},
    }
    if out_base:
        paths = bench_mod.write_report(report, spec, out_base)
        payload["written"] = {k: str(v) for k, v in paths.items()}
    _emit(payload, None)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "cluster": cmd_cluster,
    "tune-tau": cmd_tune_tau,
    "select-k": cmd_select_k,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SpmclustError as err:
        detail = {k: v for k, v in vars(err).items() if not k.startswith("_")}
        print(
            json.dumps({"error": type(err).__name__, "message": str(err), "detail": detail}),
            file=sys.stderr,
        )
        return 2
    except (OSError, ValueError, json.JSONDecodeError) as err:
        print(
            json.dumps({"error": type(err).__name__, "message": str(err), "detail": {}}),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
