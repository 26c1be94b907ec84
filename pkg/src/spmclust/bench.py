"""Dataset ingestion, experiment specs, and replication benchmarks.

A benchmark runs R replications of (draw data, fit every configured method,
score against the planted or provided truth), then reports per-method means
and standard deviations of the external metrics. Replications are
embarrassingly parallel; every replication derives its own random streams
from the experiment seed, so results do not depend on worker scheduling and
re-running a spec reproduces the report exactly.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    DataMatrix,
    Partition,
    RngSpec,
    SpmclustError,
    standardize_columns,
    validate_matrix,
)
from .datagen import ContaminationSpec, CovarianceSpec, SimDesign, sample
from .engines import SPARSE_ENGINES, EngineConfig, FitResult, fit_engine
from .metrics import METRIC_FUNCTIONS, score_all
from .tuning import default_tau_grid, select_tau

WORKERS_ENV = "SPMCLUST_WORKERS"


class RaggedRows(SpmclustError):
    """Raised when a CSV row has the wrong number of fields (1-based line)."""

    def __init__(self, line: int):
        self.line = line
        super().__init__(f"ragged row at line {line}")


class NonNumericCell(SpmclustError):
    """Raised when a CSV cell cannot be parsed as a number (1-based)."""

    def __init__(self, line: int, col: int):
        self.line = line
        self.col = col
        super().__init__(f"non-numeric cell at line {line}, column {col}")


class UnknownLabelColumn(SpmclustError):
    """Raised when the requested label column does not exist."""


def ingest_csv(
    path: str | Path,
    has_header: bool = True,
    label_column: str | int | None = None,
) -> tuple[DataMatrix, Partition | None]:
    """Read a rectangular numeric CSV, optionally peeling off a label column.

    ``label_column`` is a column name when the file has a header, otherwise a
    1-based column index. Labels are factorized in order of first appearance
    into 1..K. All error diagnostics use 1-based line and column numbers.
    """
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    rows = [r for r in rows if r]  # ignore blank lines at the end
    if not rows:
        raise SpmclustError(f"{path}: empty file")
    header: list[str] | None = None
    start_line = 1
    if has_header:
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        start_line = 2
        if not rows:
            raise SpmclustError(f"{path}: no data rows")
    width = len(rows[0])
    for offset, row in enumerate(rows):
        if len(row) != width:
            raise RaggedRows(start_line + offset)

    label_idx: int | None = None
    if label_column is not None:
        if header is not None and not (
            isinstance(label_column, str) and label_column.isdigit()
        ):
            name = str(label_column)
            if name not in header:
                raise UnknownLabelColumn(f"no column named {name!r}")
            label_idx = header.index(name)
        else:
            idx = int(label_column)
            if not 1 <= idx <= width:
                raise UnknownLabelColumn(f"column index {idx} out of range 1..{width}")
            label_idx = idx - 1

    data_cols = [j for j in range(width) if j != label_idx]
    values = np.empty((len(rows), len(data_cols)))
    for i, row in enumerate(rows):
        for jj, j in enumerate(data_cols):
            try:
                values[i, jj] = float(row[j])
            except ValueError:
                raise NonNumericCell(start_line + i, j + 1) from None

    labels = None
    if label_idx is not None:
        seen: dict[str, int] = {}
        codes = np.empty(len(rows), dtype=int)
        for i, row in enumerate(rows):
            key = row[label_idx].strip()
            if key not in seen:
                seen[key] = len(seen) + 1
            codes[i] = seen[key]
        labels = Partition(codes, len(seen))
    return validate_matrix(values), labels


# ---------------------------------------------------------------------------
# experiment specification


@dataclass(frozen=True)
class MethodSpec:
    """One method column of a benchmark report.

    Sparse engines without a fixed ``tau`` tune it per replication with the
    permutation gap; ``tune_restarts`` caps the restarts spent inside those
    tuning fits (the final fit always uses the experiment-level restarts).
    """

    name: str
    engine: str
    tau: float | None = None
    gap_permutations: int = 10
    gap_grid_size: int = 12
    tune_restarts: int | None = None

    @property
    def tunes_tau(self) -> bool:
        return self.engine in SPARSE_ENGINES and self.tau is None


@dataclass(frozen=True)
class SweepSpec:
    """Vary one design parameter across a grid (for figure data)."""

    param: str
    values: tuple = ()

    def __post_init__(self):
        if self.param not in ("p", "epsilon", "delta"):
            raise ValueError(f"unknown sweep parameter: {self.param!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")


TASKS = ("simulate", "cluster", "tune-tau", "select-k", "evaluate", "bench")


@dataclass(frozen=True)
class ExperimentSpec:
    """Full description of a benchmark run (see docs/config-schema.md).

    The ``task`` names which pipeline the document drives; replication
    studies (``bench``) are the one run from a spec file, the others are
    CLI subcommands taking the same parameters as flags.
    """

    design: SimDesign | None = None
    input_path: str | None = None
    label_column: str | int | None = None
    n_clusters: int = 3
    methods: tuple[MethodSpec, ...] = ()
    replications: int = 1
    seed: int = 0
    restarts: int = 20
    max_iter: int = 100
    ridge: float = 0.1
    init: str = "random-assignment"
    standardize: str | None = None
    metrics: tuple[str, ...] = tuple(METRIC_FUNCTIONS)
    sweep: SweepSpec | None = None
    output: str | None = None
    task: str = "bench"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task: {self.task!r}")
        if self.design is None and self.input_path is None:
            raise ValueError("spec needs either a design or an input path")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.methods:
            raise ValueError("spec needs at least one method")
        unknown = set(self.metrics) - set(METRIC_FUNCTIONS)
        if unknown:
            raise ValueError(f"unknown metrics: {sorted(unknown)}")


def design_from_dict(raw: dict) -> SimDesign:
    cov_raw = dict(raw.get("covariance", {}))
    if "scale_blocks" in cov_raw:
        cov_raw["scale_blocks"] = tuple(cov_raw["scale_blocks"])
    cov = CovarianceSpec(**cov_raw)
    contamination = None
    if raw.get("contamination"):
        contamination = ContaminationSpec(**raw["contamination"])
    keys = ("n0", "p", "n_clusters", "s_p", "delta", "family", "df", "mix_prob", "mix_factor")
    kwargs = {k: raw[k] for k in keys if k in raw}
    return SimDesign(covariance=cov, contamination=contamination, **kwargs)


def spec_from_dict(raw: dict) -> ExperimentSpec:
    """Build an ExperimentSpec from a parsed JSON document."""
    design = design_from_dict(raw["design"]) if raw.get("design") else None
    methods = tuple(MethodSpec(**m) for m in raw.get("methods", ()))
    sweep = None
    if raw.get("sweep"):
        sweep = SweepSpec(raw["sweep"]["param"], tuple(raw["sweep"]["values"]))
    keys = (
        "label_column",
        "n_clusters",
        "replications",
        "seed",
        "restarts",
        "max_iter",
        "ridge",
        "init",
        "standardize",
        "output",
        "task",
    )
    kwargs = {k: raw[k] for k in keys if k in raw}
    if "metrics" in raw:
        kwargs["metrics"] = tuple(raw["metrics"])
    return ExperimentSpec(
        design=design,
        input_path=raw.get("input"),
        methods=methods,
        sweep=sweep,
        **kwargs,
    )


# ---------------------------------------------------------------------------
# running


@dataclass(frozen=True)
class BenchRow:
    sweep_value: float | None
    method: str
    replications: int
    means: dict[str, float]
    sds: dict[str, float]


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[BenchRow, ...]
    runtime: dict[str, tuple[float, float]] = field(default_factory=dict, compare=False)
    records: tuple[dict, ...] = field(default_factory=tuple, compare=False)


def _sweep_designs(spec: ExperimentSpec):
    """(sweep value, design) pairs; a single (None, design) without a sweep."""
    if spec.sweep is None:
        return [(None, spec.design)]
    out = []
    for value in spec.sweep.values:
        design = spec.design
        if spec.sweep.param == "p":
            design = SimDesign(
                n0=design.n0,
                p=int(value),
                n_clusters=design.n_clusters,
                s_p=max(1, int(value) // 20),
                delta=design.delta,
                family=design.family,
                df=design.df,
                mix_prob=design.mix_prob,
                mix_factor=design.mix_factor,
                covariance=design.covariance,
                contamination=design.contamination,
            )
        elif spec.sweep.param == "delta":
            design = _replace_design(design, delta=float(value))
        else:  # epsilon: requires a contamination spec to vary
            if design.contamination is None:
                raise ValueError("epsilon sweep needs a contamination spec")
            cont = ContaminationSpec(
                kind=design.contamination.kind,
                epsilon=float(value),
                sigma=design.contamination.sigma,
                epsilon_noise=design.contamination.epsilon_noise,
                sd=design.contamination.sd,
            )
            design = _replace_design(design, contamination=cont)
        out.append((float(value), design))
    return out


def _replace_design(design: SimDesign, **changes) -> SimDesign:
    kwargs = dict(
        n0=design.n0,
        p=design.p,
        n_clusters=design.n_clusters,
        s_p=design.s_p,
        delta=design.delta,
        family=design.family,
        df=design.df,
        mix_prob=design.mix_prob,
        mix_factor=design.mix_factor,
        covariance=design.covariance,
        contamination=design.contamination,
    )
    kwargs.update(changes)
    return SimDesign(**kwargs)


def run_method(
    X: DataMatrix,
    n_clusters: int,
    method: MethodSpec,
    spec: ExperimentSpec,
    rng: RngSpec,
) -> tuple[FitResult, float | None]:
    """Fit one method, tuning the threshold first when required."""
    config = EngineConfig(
        engine=method.engine,
        restarts=spec.restarts,
        max_iter=spec.max_iter,
        init=spec.init,
        ridge=spec.ridge,
    )
    tau = method.tau
    if method.engine in SPARSE_ENGINES and tau is None:
        tune_config = config.with_restarts(method.tune_restarts or spec.restarts)
        grid = default_tau_grid(
            X, n_clusters, tune_config, rng.child(0), size=method.gap_grid_size
        )
        report = select_tau(
            X, n_clusters, grid, method.gap_permutations, tune_config, rng.child(1)
        )
        tau = report.selected_tau
    fit = fit_engine(
        X,
        n_clusters,
        config,
        rng.child(2),
        tau=tau if method.engine in SPARSE_ENGINES else None,
    )
    return fit, tau


def _replication(spec: ExperimentSpec, sweep_idx: int, rep: int) -> list[dict]:
    """All method records for one replication (one unit of parallel work)."""
    root = RngSpec(spec.seed)
    sweeps = _sweep_designs(spec)
    sweep_value, design = sweeps[sweep_idx]
    if design is not None:
        sim = sample(design, root.child(0).child(rep))
        X, truth = sim.X, sim.truth
    else:
        X, truth = ingest_csv(spec.input_path, label_column=spec.label_column)
    if spec.standardize:
        X = standardize_columns(X, spec.standardize)
    records = []
    for m_idx, method in enumerate(spec.methods):
        rng = root.child(1).child(rep).child(m_idx)
        started = time.perf_counter()
        fit, tau = run_method(X, spec.n_clusters, method, spec, rng)
        elapsed = time.perf_counter() - started
        record = {
            "sweep": sweep_value,
            "replication": rep,
            "method": method.name,
            "runtime_seconds": elapsed,
            "selected_tau": tau,
            "active_size": int(fit.sparse.active.size) if fit.sparse else None,
            "converged": fit.diagnostics.converged,
        }
        if truth is not None:
            record.update(score_all(fit.partition, truth, spec.metrics))
        records.append(record)
    return records


def _replication_star(args):
    return _replication(*args)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        return max(1, int(raw))
    return 1


def run_bench(spec: ExperimentSpec, workers: int | None = None) -> BenchReport:
    """Run the full replication study and aggregate mean (sd) per method.

    ``workers`` defaults to the SPMCLUST_WORKERS environment variable (else
    serial). Aggregation is ordered by (sweep, replication, method) index, so
    the report does not depend on the worker pool's scheduling.
    """
    if workers is None:
        workers = worker_count()
    sweeps = _sweep_designs(spec)
    tasks = [
        (spec, s, r) for s in range(len(sweeps)) for r in range(spec.replications)
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_replication_star, tasks))
    else:
        chunks = [_replication(*t) for t in tasks]
    records = [rec for chunk in chunks for rec in chunk]

    rows = []
    runtime: dict[str, tuple[float, float]] = {}
    for sweep_value, _ in sweeps:
        for method in spec.methods:
            group = [
                r
                for r in records
                if r["method"] == method.name and r["sweep"] == sweep_value
            ]
            means, sds = {}, {}
            for name in spec.metrics:
                vals = np.array([g[name] for g in group if name in g], dtype=float)
                if vals.size:
                    means[name] = float(vals.mean())
                    sds[name] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            rows.append(
                BenchRow(
                    sweep_value=sweep_value,
                    method=method.name,
                    replications=len(group),
                    means=means,
                    sds=sds,
                )
            )
    for method in spec.methods:
        times = np.array(
            [r["runtime_seconds"] for r in records if r["method"] == method.name]
        )
        runtime[method.name] = (
            float(times.mean()),
            float(times.std(ddof=1)) if times.size > 1 else 0.0,
        )
    return BenchReport(tuple(rows), runtime, tuple(records))


# ---------------------------------------------------------------------------
# report I/O


def write_report(report: BenchReport, spec: ExperimentSpec, out_base: str | Path) -> dict[str, Path]:
    """Write <base>.csv (aggregate table), <base>.jsonl (per-replication
    records, with a header line carrying the spec and a timestamp), and, when
    the spec sweeps a parameter, <base>_tidy.csv for plotting."""
    out_base = Path(out_base)
    out_base.parent.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out_base.with_suffix(".csv"), "jsonl": out_base.with_suffix(".jsonl")}

    with open(paths["csv"], "w", newline="") as handle:
        writer = csv.writer(handle)
        header = ["sweep", "method", "replications"]
        for name in spec.metrics:
            header += [f"{name}_mean", f"{name}_sd"]
        writer.writerow(header)
        for row in report.rows:
            out = ["" if row.sweep_value is None else repr(row.sweep_value), row.method, row.replications]
            for name in spec.metrics:
                if name in row.means:
                    out += [repr(row.means[name]), repr(row.sds[name])]
                else:
                    out += ["", ""]
            writer.writerow(out)

    with open(paths["jsonl"], "w") as handle:
        header_rec = {
            "kind": "bench-header",
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "seed": spec.seed,
            "replications": spec.replications,
            "methods": [m.name for m in spec.methods],
        }
        handle.write(json.dumps(header_rec, sort_keys=True) + "\n")
        for rec in report.records:
            handle.write(json.dumps(rec, sort_keys=True) + "\n")

    if spec.sweep is not None:
        paths["tidy"] = out_base.parent / (out_base.name + "_tidy.csv")
        with open(paths["tidy"], "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["param", "value", "method", "metric", "mean", "sd"])
            for row in report.rows:
                for name in spec.metrics:
                    if name in row.means:
                        writer.writerow(
                            [
                                spec.sweep.param,
                                repr(row.sweep_value),
                                row.method,
                                name,
                                repr(row.means[name]),
                                repr(row.sds[name]),
                            ]
                        )
    return paths


def read_report_csv(path: str | Path) -> BenchReport:
    """Parse a report CSV back into a BenchReport (inverse of write_report)."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        metric_names = [h[: -len("_mean")] for h in header if h.endswith("_mean")]
        rows = []
        for raw in reader:
            sweep_value = None if raw[0] == "" else float(raw[0])
            means, sds = {}, {}
            for i, name in enumerate(metric_names):
                mean_raw = raw[3 + 2 * i]
                sd_raw = raw[4 + 2 * i]
                if mean_raw != "":
                    means[name] = float(mean_raw)
                    sds[name] = float(sd_raw)
            rows.append(
                BenchRow(
                    sweep_value=sweep_value,
                    method=raw[1],
                    replications=int(raw[2]),
                    means=means,
                    sds=sds,
                )
            )
    return BenchReport(tuple(rows))
