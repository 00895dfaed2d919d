"""Experiment sweep over problem sizes, methods and seeds.

For every (n, seed) the sweep draws a field and measurements, embeds and
assembles the kernel system, solves it exactly once for the reference, and
then runs each selected method against that reference. A failing cell is
recorded with status "failed" and the sweep carries on.
"""

import json
import logging
import threading
import time
import zlib
from collections.abc import Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .cartography import (
    MeasurementSet,
    RadioMap,
    discrepancy_map,
    evaluate,
    generate_field,
    gprt_fit_predict,
    map_errors,
    mid_row_slice,
    reconstruct_map,
    sample_measurements,
    truth_map,
    tune_gprt,
)
from .config import get_config
from .errors import EmptyRowsError, OutputError, UserError
from .kernel import AttentionKernelSystem, EmbeddingMatrix, build_system, embed_positions
from .linalg import condition_number_spd, precond_condition_number
from .models import ExperimentConfig, GprtConfig, Method, ResultRow, SolverConfig
from .precond import learn_preconditioner
from .solvers import (
    SolveReport,
    Termination,
    diagonal_apply,
    gd_grid_search,
    gd_solve,
    jacobi_preconditioner,
    pcg_solve,
    reference_solve,
)

logger = logging.getLogger(__name__)

NUMERICAL_COLUMNS = [
    "n", "method", "seed", "obj_gap", "residual", "pred_disc", "solver_time_s",
    "precond_time_s", "kappa_raw", "kappa_precond", "iters_to_target",
]
RECONSTRUCTION_COLUMNS = ["n", "method", "seed", "rmse", "nmse"]
HISTORY_COLUMNS = ["iteration", "residual", "obj_gap"]
SUMMARY_METRICS = [
    "obj_gap", "residual", "pred_disc", "rmse", "nmse", "kappa_raw", "kappa_precond",
    "kappa_jacobi", "iters_to_target", "iterations", "solver_time_s", "precond_time_s",
]
GPRT_TUNING_SIZE = 200
SLICE_LABELS = ("truth", "reference", "gprt", "laker")

MapKey = tuple[int, int, str]


def derive_seed(*keys: int) -> int:
    """Independent 64-bit stream seed for a tuple of integer keys."""
    state = np.random.SeedSequence(list(keys)).generate_state(1, np.uint64)
    return int(state[0])


def method_key(method: str) -> int:
    return zlib.crc32(method.encode("utf-8"))


@dataclass(frozen=True, eq=False)
class Problem:
    """Everything shared by the method cells of one (n, seed)."""

    n: int
    seed: int
    measurements: MeasurementSet
    embeddings: EmbeddingMatrix
    system: AttentionKernelSystem
    alpha_ref: np.ndarray
    ref_obj: float
    ref_fit: np.ndarray
    ref_time_s: float
    truth: RadioMap
    kappa_raw: float


def jacobi_condition_number(system: AttentionKernelSystem) -> float:
    """kappa of D^{1/2} (lambda I + G) D^{1/2} with D the inverse diagonal."""
    d = jacobi_preconditioner(system)
    return precond_condition_number(np.diag(d), system.dense())


def build_problem(config: ExperimentConfig, n: int, seed: int) -> Problem:
    """Draw the field and measurements for (n, seed) and solve the reference."""
    model = generate_field(config.field, derive_seed(seed))
    measurements = sample_measurements(model, n, config.noise_std, derive_seed(seed, n))
    embeddings = embed_positions(measurements.positions, config.embedding)
    system = build_system(embeddings, config.lambda_)

    start = time.perf_counter()
    alpha_ref = reference_solve(system, measurements.values)
    ref_time = time.perf_counter() - start
    ref_fit = system.apply_kernel(alpha_ref)
    residual = ref_fit - measurements.values
    ref_obj = float(residual @ residual + system.lam * (alpha_ref @ ref_fit))

    return Problem(
        n=n,
        seed=seed,
        measurements=measurements,
        embeddings=embeddings,
        system=system,
        alpha_ref=alpha_ref,
        ref_obj=ref_obj,
        ref_fit=ref_fit,
        ref_time_s=ref_time,
        truth=truth_map(model, config.grid),
        kappa_raw=condition_number_spd(system.dense()),
    )


def _history(report: SolveReport, ref_obj: float) -> tuple[list[float], list[float]]:
    return list(report.residual_history), report.obj_gap_history(ref_obj)


def _solve_cell(
    config: ExperimentConfig,
    problem: Problem,
    method: Method,
    gprt_cfg: GprtConfig,
    maps: dict[MapKey, RadioMap] | None,
) -> ResultRow:
    n, seed = problem.n, problem.seed
    y = problem.measurements.values
    system = problem.system
    solver_cfg = config.solver_config()
    row = ResultRow(n=n, method=method, seed=seed, kappa_raw=problem.kappa_raw)

    if method == "gprt":
        start = time.perf_counter()
        gp_map = gprt_fit_predict(problem.measurements.positions, y, config.grid, gprt_cfg)
        row.solver_time_s = time.perf_counter() - start
        row.rmse, row.nmse = map_errors(gp_map, problem.truth)
        if maps is not None:
            maps[(n, seed, method)] = gp_map
        return row

    precond_time: float | None = None
    kappa_precond: float | None = None
    if method == "reference":
        alpha = problem.alpha_ref
        report = SolveReport(
            iterations=0,
            termination=Termination.RESIDUAL_TOL,
            wall_time_s=problem.ref_time_s,
        )
    elif method == "laker":
        cccp_cfg = config.cccp.model_copy(
            update={"gamma": config.gamma, "seed": derive_seed(seed, n, method_key(method))}
        )
        start = time.perf_counter()
        precond, _ = learn_preconditioner(system, cccp_cfg)
        precond_time = time.perf_counter() - start
        alpha, report = pcg_solve(
            system, y, precond.apply, solver_cfg, problem.ref_obj, problem.ref_fit
        )
        kappa_precond = precond_condition_number(precond.matrix, system.dense())
    elif method == "jacobi":
        d = jacobi_preconditioner(system)
        alpha, report = pcg_solve(
            system, y, diagonal_apply(d), solver_cfg, problem.ref_obj, problem.ref_fit
        )
        kappa_precond = precond_condition_number(np.diag(d), system.dense())
    elif method == "gd":
        eta = gd_grid_search(system, y, config.gd_grid)
        gd_cfg = SolverConfig(
            eta=eta, gd_budget=config.gd_budget, target_tol=config.target_tol
        )
        alpha, report = gd_solve(system, y, gd_cfg, problem.ref_obj)
    else:
        raise UserError(f"Unknown method {method!r}")

    hat = reconstruct_map(problem.embeddings, alpha, config.grid, config.embedding)
    if maps is not None:
        maps[(n, seed, method)] = hat
    metrics = evaluate(
        system,
        alpha,
        problem.alpha_ref,
        y,
        hat,
        problem.truth,
        report,
        kappa_raw=problem.kappa_raw,
        kappa_precond=kappa_precond,
        kappa_jacobi=kappa_precond if method == "jacobi" else None,
        precond_time_s=precond_time,
    )
    row = ResultRow(n=n, method=method, seed=seed, **asdict(metrics))
    if report.iterations > 0:
        row.residual_history, row.obj_gap_history = _history(report, problem.ref_obj)
    return row


def _failed_row(n: int, method: Method, seed: int, error: Exception) -> ResultRow:
    return ResultRow(n=n, method=method, seed=seed, status="failed", error=str(error))


def _run_group(
    config: ExperimentConfig,
    n: int,
    seed: int,
    gprt_cfg: GprtConfig,
    maps: dict[MapKey, RadioMap] | None,
    lock: threading.Lock,
) -> list[ResultRow]:
    try:
        problem = build_problem(config, n, seed)
    except (UserError, np.linalg.LinAlgError, ValueError) as e:
        logger.warning("Sweep cell n=%d seed=%d failed during setup: %s", n, seed, e)
        return [_failed_row(n, m, seed, e) for m in config.methods]

    local_maps: dict[MapKey, RadioMap] | None = {} if maps is not None else None
    if local_maps is not None:
        local_maps[(n, seed, "truth")] = problem.truth

    rows = []
    for method in config.methods:
        try:
            rows.append(_solve_cell(config, problem, method, gprt_cfg, local_maps))
        except (UserError, np.linalg.LinAlgError, ValueError) as e:
            logger.warning("Sweep cell n=%d method=%s seed=%d failed: %s", n, method, seed, e)
            rows.append(_failed_row(n, method, seed, e))
        logger.info("Finished cell n=%d method=%s seed=%d", n, method, seed)

    if maps is not None and local_maps is not None:
        with lock:
            maps.update(local_maps)
    return rows


def resolve_gprt_config(config: ExperimentConfig) -> GprtConfig:
    """GPRT settings for the sweep, tuned once at n = 200 when requested."""
    if not config.gprt_autotune or "gprt" not in config.methods:
        return config.gprt
    seed = config.seeds[0]
    model = generate_field(config.field, derive_seed(seed))
    measurements = sample_measurements(
        model, GPRT_TUNING_SIZE, config.noise_std, derive_seed(seed, GPRT_TUNING_SIZE)
    )
    return tune_gprt(
        measurements.positions,
        measurements.values,
        config.grid,
        truth_map(model, config.grid),
        rq_alpha=config.gprt.rq_alpha,
    )


def run_experiment(
    config: ExperimentConfig,
    maps: dict[MapKey, RadioMap] | None = None,
    threads: int | None = None,
) -> list[ResultRow]:
    """Run every (n, method, seed) cell of the sweep.

    Args:
        config: Sweep definition
        maps: When given, receives every reconstructed map keyed by
            (n, seed, method), plus the ground truth under "truth"
        threads: Concurrent (n, seed) groups; defaults to LAKER_THREADS

    Returns:
        Rows ordered by n, then method (config order), then seed
    """
    workers = threads if threads is not None else get_config().threads
    gprt_cfg = resolve_gprt_config(config)
    lock = threading.Lock()
    groups = [(n, seed) for n in config.sizes for seed in config.seeds]
    logger.info(
        "Running %d sizes x %d seeds x %d methods on %d thread(s)",
        len(config.sizes), len(config.seeds), len(config.methods), workers,
    )

    if workers == 1:
        results = [_run_group(config, n, s, gprt_cfg, maps, lock) for n, s in groups]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_group, config, n, s, gprt_cfg, maps, lock) for n, s in groups
            ]
            results = [f.result() for f in futures]

    order = {m: i for i, m in enumerate(config.methods)}
    rows = [row for group in results for row in group]
    rows.sort(key=lambda r: (r.n, order[r.method], r.seed))
    return rows


def rows_frame(rows: Iterable[ResultRow]) -> pd.DataFrame:
    df = pd.DataFrame([row.model_dump() for row in rows])
    for column in SUMMARY_METRICS:
        df[column] = pd.to_numeric(df[column])
    for column in ("iters_to_target", "iterations"):
        df[column] = df[column].astype("Int64")
    return df


def _write_csv(df: pd.DataFrame, path: Path) -> Path:
    try:
        df.to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise OutputError(str(path), e.strerror or type(e).__name__) from e
    return path


def _ensure_dir(output_dir: Path) -> None:
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(str(output_dir), e.strerror or type(e).__name__) from e


def summarize(rows: list[ResultRow]) -> list[dict[str, Any]]:
    """Median over seeds of every metric, per (n, method), successful cells only."""
    df = rows_frame(rows)
    ok = df[df["status"] == "ok"]
    if ok.empty:
        return []
    cells = (
        ok.groupby(["n", "method"], sort=False)[SUMMARY_METRICS]
        .median(numeric_only=False)
        .reset_index()
    )
    counts = ok.groupby(["n", "method"], sort=False).size().reset_index(name="seeds")
    cells = cells.merge(counts, on=["n", "method"])
    records: list[dict[str, Any]] = json.loads(cells.to_json(orient="records"))
    return records


def emit_tables(
    rows: list[ResultRow],
    output_dir: Path,
    config: ExperimentConfig | None = None,
) -> list[Path]:
    """Write numerical.csv, reconstruction.csv, summary.json and histories.

    Raises:
        EmptyRowsError: If rows is empty
        OutputError: If a file cannot be written
    """
    if not rows:
        raise EmptyRowsError()
    _ensure_dir(output_dir)
    written = []

    for row in rows:
        if row.residual_history:
            name = f"history_{row.n}_{row.method}_{row.seed}.csv"
            steps = len(row.residual_history)
            history = pd.DataFrame(
                {
                    "iteration": range(steps),
                    "residual": row.residual_history,
                    "obj_gap": row.obj_gap_history[:steps],
                },
                columns=HISTORY_COLUMNS,
            )
            written.append(_write_csv(history, output_dir / name))
            row.history_path = name

    df = rows_frame(rows)
    written.append(_write_csv(df[NUMERICAL_COLUMNS], output_dir / "numerical.csv"))
    written.append(_write_csv(df[RECONSTRUCTION_COLUMNS], output_dir / "reconstruction.csv"))

    failed = [
        {"n": r.n, "method": r.method, "seed": r.seed, "error": r.error}
        for r in rows
        if r.status == "failed"
    ]
    summary: dict[str, Any] = {"cells": summarize(rows), "failed": failed}
    if config is not None:
        summary["config"] = config.model_dump(mode="json", by_alias=True)
    path = output_dir / "summary.json"
    try:
        path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except OSError as e:
        raise OutputError(str(path), e.strerror or type(e).__name__) from e
    written.append(path)
    logger.info("Wrote %d result files to %s", len(written), output_dir)
    return written


def emit_maps(maps: Mapping[MapKey, RadioMap], output_dir: Path) -> list[Path]:
    """Write every collected map, plus the comparison files per (n, seed).

    map_<n>_<label>_<seed>.csv holds each map. discrepancy_<n>_<seed>.csv
    holds |laker - reference| when both maps exist. slice_<n>_<seed>.csv
    holds the middle grid row of truth, reference, gprt and laker, one
    column per available label, when at least two of them exist.
    """
    _ensure_dir(output_dir)
    written = []
    groups: dict[tuple[int, int], dict[str, RadioMap]] = {}
    for (n, seed, label), radio_map in sorted(maps.items()):
        written.append(radio_map.to_csv(output_dir / f"map_{n}_{label}_{seed}.csv"))
        groups.setdefault((n, seed), {})[label] = radio_map

    for (n, seed), by_label in groups.items():
        if "laker" in by_label and "reference" in by_label:
            diff = discrepancy_map(by_label["laker"], by_label["reference"])
            written.append(diff.to_csv(output_dir / f"discrepancy_{n}_{seed}.csv"))
        labels = [label for label in SLICE_LABELS if label in by_label]
        if len(labels) < 2:
            continue
        frame = mid_row_slice(by_label[labels[0]]).rename(columns={"value_dbm": labels[0]})
        for label in labels[1:]:
            frame[label] = mid_row_slice(by_label[label])["value_dbm"].to_numpy()
        written.append(_write_csv(frame, output_dir / f"slice_{n}_{seed}.csv"))
    return written
