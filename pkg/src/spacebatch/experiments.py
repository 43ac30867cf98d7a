"""Parameter sweeps, analytic-vs-simulation comparisons and CSV output."""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import chain, errors
from .config import SystemConfig, ValidatedConfig, is_homogeneous_traffic, uniform, validate
from .simulator import measured_metrics, simulate

log = logging.getLogger(__name__)

AXES = ("load", "n_nodes", "buffer_size", "s_max", "packet_error_prob")
MODES = ("analytic", "simulate", "compare")
METRICS = ("p_b", "throughput", "mean_queue", "mean_delay", "mean_batch")

# Model-vs-simulation acceptance band per metric: (absolute, relative). A gap
# passes when it is within 3 standard errors of the simulated mean or inside
# this band, whichever is wider.
COMPARE_BANDS = {
    "p_b": (0.02, 0.0),
    "throughput": (0.0, 0.02),
    "mean_queue": (0.0, 0.05),
    "mean_delay": (0.0, 0.05),
    "mean_batch": (0.0, 0.05),
}
N_STDERR = 3.0


@dataclass(frozen=True)
class SweepSpec:
    base: ValidatedConfig
    axis: str
    values: tuple[float, ...]
    mode: str = "analytic"
    seeds: tuple[int, ...] = (1,)
    duration: float = 1000.0
    warmup: float | None = None
    jobs: int = 1

    def check(self) -> None:
        if self.axis not in AXES:
            raise errors.SpecError(f"unknown axis {self.axis!r}; expected one of {AXES}")
        if self.mode not in MODES:
            raise errors.SpecError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.values:
            raise errors.SpecError("sweep needs at least one axis value")
        if self.mode != "analytic" and not self.seeds:
            raise errors.SpecError("simulation modes need at least one seed")
        if self.axis in ("n_nodes", "buffer_size", "s_max"):
            bad = [v for v in self.values if float(v) != int(v)]
            if bad:
                raise errors.SpecError(f"axis {self.axis} takes integers, got {bad}")


@dataclass
class ResultRow:
    axis: str
    axis_value: float
    config: ValidatedConfig | None
    analytic: dict[str, float] | None = None
    sim_mean: dict[str, float] | None = None
    sim_stderr: dict[str, float] | None = None
    n_seeds: int = 0
    compare_pass: bool | None = None
    runtime_s: float = 0.0
    error: str = ""
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.error and self.compare_pass is not False


def apply_axis(base: SystemConfig, axis: str, value: float) -> ValidatedConfig:
    """Config with one parameter replaced; ``load`` is given in Mbit/s."""
    if axis == "load":
        return validate(base.replace(aggregate_rate=value * 1e6 / base.frame_lengths.l_d))
    if axis == "n_nodes":
        n = int(value)
        if not (uniform(base.node_mean_snr) and uniform(base.traffic_weights)):
            raise errors.SpecError("n_nodes sweeps need identical nodes in the base config")
        return validate(base.replace(
            n_nodes=n,
            node_mean_snr=(base.node_mean_snr[0],) * n,
            traffic_weights=(base.traffic_weights[0],) * n,
        ))
    if axis in ("buffer_size", "s_max"):
        return validate(base.replace(**{axis: int(value)}))
    if axis == "packet_error_prob":
        return validate(base.replace(packet_error_prob=float(value)))
    raise errors.SpecError(f"unknown axis {axis!r}")


def _sim_task(args) -> dict[str, float]:
    config, seed, duration, warmup = args
    stats = simulate(config, seed, duration, warmup)
    return measured_metrics(stats, config).as_dict()


def _aggregate(samples: Sequence[dict[str, float]]) -> tuple[dict, dict]:
    mean, stderr = {}, {}
    for k in METRICS:
        v = np.array([s[k] for s in samples])
        mean[k] = float(v.mean())
        stderr[k] = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
    return mean, stderr


def passes(metric: str, analytic: float, sim_mean: float, sim_stderr: float) -> tuple[bool, float]:
    """Whether the analytic value is within tolerance of the simulation; returns the tolerance."""
    abs_band, rel_band = COMPARE_BANDS[metric]
    se = 0.0 if math.isnan(sim_stderr) else sim_stderr
    tol = max(N_STDERR * se, abs_band, rel_band * abs(sim_mean))
    return abs(analytic - sim_mean) <= tol, tol


def _map(fn, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _safe_sim(args):
    try:
        return _sim_task(args)
    except errors.SpaceBatchError as exc:
        return exc


def run_sweep(spec: SweepSpec) -> list[ResultRow]:
    """Evaluate every axis value; failures are recorded per row, not raised."""
    spec.check()
    rows: list[ResultRow] = []
    for value in spec.values:
        try:
            cfg = apply_axis(spec.base, spec.axis, value)
            rows.append(ResultRow(spec.axis, float(value), cfg))
        except errors.SpaceBatchError as exc:
            rows.append(ResultRow(spec.axis, float(value), None, error=f"{type(exc).__name__}: {exc}"))

    if spec.mode in ("analytic", "compare"):
        for row in rows:
            if row.error:
                continue
            start = time.perf_counter()
            try:
                row.analytic = chain.solve(row.config).metrics.as_dict()
            except errors.HeterogeneousTrafficUnsupported as exc:
                if spec.mode == "analytic":
                    row.error = f"{type(exc).__name__}: {exc}"
                else:
                    row.notes.append("heterogeneous traffic: simulation only")
            except errors.SpaceBatchError as exc:
                row.error = f"{type(exc).__name__}: {exc}"
            row.runtime_s += time.perf_counter() - start

    if spec.mode in ("simulate", "compare"):
        live = [r for r in rows if not r.error]
        tasks = [(r.config, s, spec.duration, spec.warmup) for r in live for s in spec.seeds]
        start = time.perf_counter()
        results = _map(_safe_sim, tasks, spec.jobs)
        elapsed = (time.perf_counter() - start) / max(1, len(live))
        n = len(spec.seeds)
        for k, row in enumerate(live):
            chunk = results[k * n:(k + 1) * n]
            failures = [c for c in chunk if isinstance(c, Exception)]
            row.runtime_s += elapsed
            if failures:
                row.error = f"{type(failures[0]).__name__}: {failures[0]}"
                continue
            row.sim_mean, row.sim_stderr = _aggregate(chunk)
            row.n_seeds = n

    if spec.mode == "compare":
        for row in rows:
            if row.error or row.analytic is None or row.sim_mean is None:
                continue
            row.compare_pass = all(
                passes(k, row.analytic[k], row.sim_mean[k], row.sim_stderr[k])[0] for k in METRICS)
    return rows


# --- comparison report -------------------------------------------------------

@dataclass
class CompareRow:
    metric: str
    analytic: float | None
    sim_mean: float
    sim_stderr: float
    abs_gap: float | None
    rel_gap: float | None
    tolerance: float | None
    passed: bool | None
    note: str = ""


@dataclass
class CompareReport:
    config: ValidatedConfig
    n_seeds: int
    duration: float
    rows: list[CompareRow]

    @property
    def passed(self) -> bool:
        return all(r.passed is not False for r in self.rows)

    def format(self) -> str:
        lines = [
            "# analytic vs simulation "
            f"({self.n_seeds} seeds x {self.duration:g} s); a metric passes when "
            f"|gap| <= max({N_STDERR:g} standard errors, per-metric band)",
            f"{'metric':<12}{'analytic':>14}{'sim_mean':>14}{'sim_stderr':>12}"
            f"{'abs_gap':>12}{'rel_gap':>10}{'tol':>12}  result",
        ]
        fmt = lambda v, w, spec=".6g": f"{'-':>{w}}" if v is None else f"{v:>{w}{spec}}"
        for r in self.rows:
            verdict = {True: "pass", False: "FAIL", None: "n/a"}[r.passed]
            lines.append(f"{r.metric:<12}{fmt(r.analytic, 14)}{fmt(r.sim_mean, 14)}"
                         f"{fmt(r.sim_stderr, 12, '.3g')}{fmt(r.abs_gap, 12, '.3g')}"
                         f"{fmt(r.rel_gap, 10, '.3g')}{fmt(r.tolerance, 12, '.3g')}  {verdict}"
                         + (f"  ({r.note})" if r.note else ""))
        return "\n".join(lines)


def compare(config: ValidatedConfig, seeds: Iterable[int], duration: float,
            warmup: float | None = None, jobs: int = 1) -> CompareReport:
    seeds = tuple(seeds)
    samples = _map(_sim_task, [(config, s, duration, warmup) for s in seeds], jobs)
    mean, stderr = _aggregate(samples)
    if not is_homogeneous_traffic(config):
        rows = [CompareRow("warning", None, math.nan, math.nan, None, None, None, None,
                           "heterogeneous traffic: analytic model not applicable")]
        rows += [CompareRow(k, None, mean[k], stderr[k], None, None, None, None) for k in METRICS]
        return CompareReport(config, len(seeds), duration, rows)
    analytic = chain.solve(config).metrics.as_dict()
    rows = []
    for k in METRICS:
        gap = analytic[k] - mean[k]
        ok, tol = passes(k, analytic[k], mean[k], stderr[k])
        rel = gap / mean[k] if mean[k] else (0.0 if gap == 0 else math.inf)
        rows.append(CompareRow(k, analytic[k], mean[k], stderr[k], gap, rel, tol, ok))
    return CompareReport(config, len(seeds), duration, rows)


# --- CSV ---------------------------------------------------------------------

def csv_columns(with_runtime: bool = False) -> list[str]:
    cols = ["axis", "axis_value", "load_mbps", "n_nodes", "buffer", "s_max", "p_e",
            "ideal_channel"]
    for k in METRICS:
        cols += [f"{k}_analytic", f"{k}_sim", f"{k}_sim_stderr"]
    cols += ["n_seeds", "compare_pass", "error"]
    if with_runtime:
        cols.append("runtime_s")
    return cols


def fmt_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.9g}"


def row_record(row: ResultRow, with_runtime: bool = False) -> dict[str, str]:
    cfg = row.config
    rec = {
        "axis": row.axis,
        "axis_value": fmt_value(row.axis_value),
        "load_mbps": fmt_value(cfg.load_bps / 1e6) if cfg else "",
        "n_nodes": fmt_value(cfg.n_nodes) if cfg else "",
        "buffer": fmt_value(cfg.buffer_size) if cfg else "",
        "s_max": fmt_value(cfg.s_max) if cfg else "",
        "p_e": fmt_value(cfg.packet_error_prob) if cfg else "",
        "ideal_channel": fmt_value(cfg.ideal_channel) if cfg else "",
        "n_seeds": fmt_value(row.n_seeds) if row.n_seeds else "",
        "compare_pass": fmt_value(row.compare_pass),
        "error": row.error,
    }
    for k in METRICS:
        rec[f"{k}_analytic"] = fmt_value(row.analytic[k]) if row.analytic else ""
        rec[f"{k}_sim"] = fmt_value(row.sim_mean[k]) if row.sim_mean else ""
        rec[f"{k}_sim_stderr"] = fmt_value(row.sim_stderr[k]) if row.sim_stderr else ""
    if with_runtime:
        rec["runtime_s"] = fmt_value(row.runtime_s)
    return rec


def emit_csv(rows: Sequence[ResultRow], path: str | Path, with_runtime: bool = False) -> None:
    cols = csv_columns(with_runtime)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row_record(row, with_runtime))
