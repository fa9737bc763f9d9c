"""Duplex sampling over trajectory windows, aging analysis and summary statistics.

For every update period ``gamma`` a set of windows of ``gamma`` consecutive
observations is drawn from the trajectory. Each window yields a locality
sphere, the training points of Z inside it, a constrained local surrogate of
``f``, and the surrogate's agreement with ``f`` on the window itself.

Cells (gamma, window) are independent. Their random streams are keyed by
(seed, gamma, window start), so results do not depend on execution order or
on the number of worker processes.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .classifiers import KernelModel, agreement, predict
from .errors import EmptyInput, InvalidParameter, TrajectoryTooShort
from .locality import CONTAIN_EPS, Sphere, enclosing_sphere, within_mask
from .semcomp import (
    ConstraintSpec,
    FallbackKind,
    LinearSvmParams,
    LocalFitResult,
    LossSpec,
    constant_fit,
    fit_local,
)
from .trajectory import Trajectory
from .worldgen import Dataset

_WINDOW_TAG = 1
_AGING_TAG = 2
_SPHERE_TAG = 3

RECORD_COLUMNS = ("gamma", "t", "radius", "accuracy", "local_n", "fallback", "feasible",
                  "energy_pen", "bandwidth_pen")
AGING_COLUMNS = ("gamma", "delay_multiple", "relative_accuracy", "n_windows")
AGING_RAW_COLUMNS = ("gamma", "t", "delay_multiple", "accuracy")
SUMMARY_COLUMNS = ("gamma", "metric", "mean", "q25", "q75", "n")
GLOBAL_COLUMNS = ("gamma", "t", "global_accuracy")


@dataclass(frozen=True)
class ExperimentConfig:
    gamma_grid: tuple[int, ...] = (5, 10, 20, 40, 80, 160, 320)
    coverage: float = 0.95
    windows_per_gamma: int = 200
    aging_windows_per_gamma: int = 1000
    min_local_points: int = 10
    aging_delays: tuple[int, ...] = (0, 1, 2, 4)
    seed: int = 0
    svm: LinearSvmParams = field(default_factory=LinearSvmParams)

    def __post_init__(self):
        if not self.gamma_grid or any(g < 2 for g in self.gamma_grid):
            raise InvalidParameter("every gamma must be >= 2")
        if self.windows_per_gamma < 1 or self.aging_windows_per_gamma < 1:
            raise InvalidParameter("window counts must be >= 1")
        if any(k < 0 for k in self.aging_delays):
            raise InvalidParameter("aging delays must be nonnegative")
        if not 0.0 < self.coverage <= 1.0:
            raise InvalidParameter("coverage must lie in (0, 1]")
        if self.min_local_points < 1:
            raise InvalidParameter("min_local_points must be >= 1")


@dataclass(frozen=True)
class SubsequenceRecord:
    t: int
    gamma: int
    radius: float
    accuracy: float
    local_sample_size: int
    fallback_kind: FallbackKind
    feasible: bool
    energy_penalty: float
    bandwidth_penalty: float
    coverage: float = 1.0


@dataclass(frozen=True)
class AgingRecord:
    gamma: int
    delay_multiple: int
    relative_accuracy: float
    n_windows: int


@dataclass(frozen=True)
class AgingSample:
    gamma: int
    t: int
    delay_multiple: int
    accuracy: float


@dataclass(frozen=True)
class MetricStats:
    mean: float
    q25: float
    q75: float
    n: int


@dataclass(frozen=True)
class SummaryStats:
    radius: dict[int, MetricStats]
    accuracy: dict[int, MetricStats]
    fallbacks: dict[int, int]
    infeasible: dict[int, int]

    @property
    def gammas(self) -> list[int]:
        return sorted(self.radius)


@dataclass(frozen=True)
class DuplexResult:
    records: list[SubsequenceRecord]
    skipped: dict[int, int]


# --------------------------------------------------------------------------
# shared per-run state


@dataclass
class _Context:
    Z: Dataset
    z_verdicts: np.ndarray
    traj: np.ndarray
    s_verdicts: np.ndarray
    config: ExperimentConfig
    constraints: ConstraintSpec
    loss: LossSpec


_WORKER_CTX: Optional[_Context] = None


def _init_worker(ctx: _Context) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def window_starts(T: int, gamma: int, count: int, seed: int, tag: int = _WINDOW_TAG,
                  span: Optional[int] = None) -> list[int]:
    """Sorted window starts drawn uniformly without replacement.

    ``span`` is the number of trajectory steps a cell needs from its start
    (``gamma`` for plain windows, longer for aging).
    """
    span = gamma if span is None else span
    n_valid = T - span + 1
    if n_valid < 1:
        raise TrajectoryTooShort(f"trajectory of length {T} cannot hold a span of {span}")
    take = min(count, n_valid)
    picks = _rng(seed, tag, gamma).choice(n_valid, size=take, replace=False)
    return sorted(int(p) for p in picks)


def _fit_window(ctx: _Context, gamma: int, start: int) -> tuple[LocalFitResult, Sphere, int]:
    cfg = ctx.config
    window = ctx.traj[start : start + gamma]
    w_verdicts = ctx.s_verdicts[start : start + gamma]
    sphere = enclosing_sphere(window, cfg.coverage, _rng(cfg.seed, _SPHERE_TAG, gamma, start))
    inside = within_mask(ctx.Z.points, sphere)
    local_n = int(np.count_nonzero(inside))
    if local_n < cfg.min_local_points:
        # sparse locality: f's majority verdict on the window, ties forwarded
        positive = 2 * int(np.count_nonzero(w_verdicts)) >= len(w_verdicts)
        fit = constant_fit(positive, window, w_verdicts, ctx.constraints, ctx.loss)
    else:
        local = Dataset(ctx.Z.points[inside], ctx.Z.labels[inside])
        fit = fit_local(None, local, ctx.constraints, ctx.loss, cfg.svm, window,
                        local_verdicts=ctx.z_verdicts[inside], eval_verdicts=w_verdicts)
    return fit, sphere, local_n


def _duplex_cell(args: tuple[int, int]) -> SubsequenceRecord:
    ctx = _WORKER_CTX
    gamma, start = args
    fit, sphere, local_n = _fit_window(ctx, gamma, start)
    window = ctx.traj[start : start + gamma]
    acc = agreement(predict(fit.model, window), ctx.s_verdicts[start : start + gamma])
    return SubsequenceRecord(start + gamma - 1, gamma, sphere.radius, acc.accuracy, local_n,
                             fit.fallback_kind, fit.feasible, fit.energy_penalty,
                             fit.bandwidth_penalty, sphere.coverage)


def _aging_cell(args: tuple[int, int, tuple[int, ...]]) -> list[AgingSample]:
    ctx = _WORKER_CTX
    gamma, start, delays = args
    fit, _, _ = _fit_window(ctx, gamma, start)
    out = []
    for k in delays:
        lo = start + k * gamma
        window = ctx.traj[lo : lo + gamma]
        acc = agreement(predict(fit.model, window), ctx.s_verdicts[lo : lo + gamma])
        out.append(AgingSample(gamma, start + gamma - 1, k, acc.accuracy))
    return out


def _run_cells(ctx: _Context, fn, cells: list, jobs: int) -> list:
    if jobs <= 1 or len(cells) < 2:
        _init_worker(ctx)
        return [fn(c) for c in cells]
    chunk = max(1, len(cells) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(ctx,)) as ex:
        return list(ex.map(fn, cells, chunksize=chunk))


def _context(f: KernelModel, Z: Dataset, S: Trajectory | np.ndarray, config: ExperimentConfig,
             constraints: ConstraintSpec, loss: LossSpec, z_verdicts=None,
             s_verdicts=None) -> _Context:
    if len(Z) == 0:
        raise EmptyInput("training sample Z is empty")
    traj = np.ascontiguousarray(S.points if isinstance(S, Trajectory) else S, dtype=float)
    zv = predict(f, Z.points) if z_verdicts is None else np.asarray(z_verdicts)
    sv = predict(f, traj) if s_verdicts is None else np.asarray(s_verdicts)
    return _Context(Z, zv.astype(np.int8), traj, sv.astype(np.int8), config, constraints, loss)


# --------------------------------------------------------------------------
# public drivers


def run_duplex(f: KernelModel, Z: Dataset, S: Trajectory | np.ndarray,
               config: ExperimentConfig = ExperimentConfig(),
               constraints: ConstraintSpec = ConstraintSpec(), loss: LossSpec = LossSpec(),
               jobs: int = 1, *, z_verdicts=None, s_verdicts=None) -> DuplexResult:
    ctx = _context(f, Z, S, config, constraints, loss, z_verdicts, s_verdicts)
    T = len(ctx.traj)
    if T < max(config.gamma_grid):
        raise TrajectoryTooShort(f"trajectory length {T} < largest gamma {max(config.gamma_grid)}")
    cells, skipped = [], {}
    for gamma in config.gamma_grid:
        starts = window_starts(T, gamma, config.windows_per_gamma, config.seed)
        skipped[gamma] = config.windows_per_gamma - len(starts)
        cells.extend((gamma, s) for s in starts)
    records = _run_cells(ctx, _duplex_cell, cells, jobs)
    records.sort(key=lambda r: (r.gamma, r.t))
    return DuplexResult(records, skipped)


def run_aging(f: KernelModel, Z: Dataset, S: Trajectory | np.ndarray,
              config: ExperimentConfig = ExperimentConfig(),
              constraints: ConstraintSpec = ConstraintSpec(), loss: LossSpec = LossSpec(),
              jobs: int = 1, *, z_verdicts=None,
              s_verdicts=None) -> tuple[list[AgingRecord], list[AgingSample]]:
    """Accuracy of each window's surrogate on windows ``k * gamma`` steps later."""
    ctx = _context(f, Z, S, config, constraints, loss, z_verdicts, s_verdicts)
    T = len(ctx.traj)
    delays = tuple(sorted(set(int(k) for k in config.aging_delays) | {0}))
    cells = []
    for gamma in config.gamma_grid:
        span = gamma * (1 + max(delays))
        starts = window_starts(T, gamma, config.aging_windows_per_gamma, config.seed, _AGING_TAG,
                               span)
        cells.extend((gamma, s, delays) for s in starts)
    samples = [s for group in _run_cells(ctx, _aging_cell, cells, jobs) for s in group]
    samples.sort(key=lambda s: (s.gamma, s.t, s.delay_multiple))
    return aging_from_samples(samples, config.aging_delays), samples


def aging_from_samples(samples: Sequence[AgingSample],
                       delays: Optional[Iterable[int]] = None) -> list[AgingRecord]:
    by_key: dict[tuple[int, int], list[float]] = {}
    for s in samples:
        by_key.setdefault((s.gamma, s.delay_multiple), []).append(s.accuracy)
    gammas = sorted({g for g, _ in by_key})
    wanted = sorted(set(delays)) if delays is not None else sorted({k for _, k in by_key})
    out = []
    for g in gammas:
        base = by_key.get((g, 0))
        if not base:
            raise EmptyInput(f"no delay-0 accuracies for gamma={g}")
        base_mean = math.fsum(base) / len(base)
        if base_mean <= 0:
            raise InvalidParameter(f"zero training-time accuracy for gamma={g}")
        for k in wanted:
            vals = by_key[(g, k)]
            out.append(AgingRecord(g, k, (math.fsum(vals) / len(vals)) / base_mean, len(vals)))
    return out


def global_window_accuracy(s_verdicts: np.ndarray, truth: np.ndarray,
                           records: Sequence[SubsequenceRecord]) -> list[tuple[int, int, float]]:
    """Agreement of ``f`` with ground truth on each record's window."""
    rows = []
    for r in records:
        lo = r.t - r.gamma + 1
        acc = agreement(s_verdicts[lo : r.t + 1], truth[lo : r.t + 1]).accuracy
        rows.append((r.gamma, r.t, acc))
    return rows


# --------------------------------------------------------------------------
# statistics


def nearest_rank(values: Sequence[float], q: float) -> float:
    """Nearest-rank quantile: the ceil(q*n)-th smallest value."""
    if not values:
        raise EmptyInput("no values")
    s = sorted(values)
    rank = max(1, math.ceil(q * len(s) - 1e-12))
    return float(s[rank - 1])


def metric_stats(values: Sequence[float]) -> MetricStats:
    vals = [float(v) for v in values]
    if not vals:
        raise EmptyInput("no values")
    return MetricStats(math.fsum(vals) / len(vals), nearest_rank(vals, 0.25),
                       nearest_rank(vals, 0.75), len(vals))


def summarize(records: Sequence[SubsequenceRecord]) -> SummaryStats:
    if not records:
        raise EmptyInput("no records to summarize")
    groups: dict[int, list[SubsequenceRecord]] = {}
    for r in records:
        groups.setdefault(r.gamma, []).append(r)
    radius, acc, fb, inf = {}, {}, {}, {}
    for g in sorted(groups):
        rs = groups[g]
        radius[g] = metric_stats([r.radius for r in rs])
        acc[g] = metric_stats([r.accuracy for r in rs])
        fb[g] = sum(r.fallback_kind is not FallbackKind.NONE for r in rs)
        inf[g] = sum(not r.feasible for r in rs)
    return SummaryStats(radius, acc, fb, inf)


def summary_rows(records: Sequence[SubsequenceRecord]) -> list[tuple]:
    """Rows of the summary table: radius and accuracy, plus fallback and infeasibility rates."""
    stats = summarize(records)
    groups: dict[int, list[SubsequenceRecord]] = {}
    for r in records:
        groups.setdefault(r.gamma, []).append(r)
    rows = []
    for g in stats.gammas:
        rs = groups[g]
        fb = metric_stats([float(r.fallback_kind is not FallbackKind.NONE) for r in rs])
        inf = metric_stats([float(not r.feasible) for r in rs])
        for name, st in (("radius", stats.radius[g]), ("accuracy", stats.accuracy[g]),
                         ("fallback_rate", fb), ("infeasible_rate", inf)):
            rows.append((g, name, st.mean, st.q25, st.q75, st.n))
    return rows


def window_containment_ok(window: np.ndarray, sphere: Sphere, coverage: float) -> bool:
    dist = np.sqrt(((window - sphere.center) ** 2).sum(axis=1))
    need = math.ceil(coverage * len(window) - 1e-12)
    return int(np.count_nonzero(dist <= sphere.radius + CONTAIN_EPS)) >= need


# --------------------------------------------------------------------------
# CSV persistence


def _num(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, FallbackKind):
        return x.value
    if isinstance(x, str):
        return x
    return repr(float(x))


def _write(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_num(v) for v in row) + "\n")


def _read(path: str | Path, header: Sequence[str]) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != tuple(header):
            raise InvalidParameter(f"{path}: expected header {','.join(header)}")
        return list(reader)


def write_records_csv(records: Sequence[SubsequenceRecord], path: str | Path) -> None:
    _write(path, RECORD_COLUMNS, ((r.gamma, r.t, r.radius, r.accuracy, r.local_sample_size,
                                   r.fallback_kind, r.feasible, r.energy_penalty,
                                   r.bandwidth_penalty) for r in records))


def read_records_csv(path: str | Path) -> list[SubsequenceRecord]:
    out = []
    for row in _read(path, RECORD_COLUMNS):
        out.append(SubsequenceRecord(
            t=int(row["t"]), gamma=int(row["gamma"]), radius=float(row["radius"]),
            accuracy=float(row["accuracy"]), local_sample_size=int(row["local_n"]),
            fallback_kind=FallbackKind(row["fallback"]), feasible=row["feasible"] == "true",
            energy_penalty=float(row["energy_pen"]), bandwidth_penalty=float(row["bandwidth_pen"])))
    return out


def write_summary_csv(records: Sequence[SubsequenceRecord], path: str | Path) -> None:
    _write(path, SUMMARY_COLUMNS, summary_rows(records))


def read_summary_csv(path: str | Path) -> list[dict[str, str]]:
    return _read(path, SUMMARY_COLUMNS)


def write_aging_csv(records: Sequence[AgingRecord], path: str | Path) -> None:
    _write(path, AGING_COLUMNS, ((r.gamma, r.delay_multiple, r.relative_accuracy, r.n_windows)
                                 for r in records))


def read_aging_csv(path: str | Path) -> list[AgingRecord]:
    return [AgingRecord(int(r["gamma"]), int(r["delay_multiple"]), float(r["relative_accuracy"]),
                        int(r["n_windows"])) for r in _read(path, AGING_COLUMNS)]


def write_aging_raw_csv(samples: Sequence[AgingSample], path: str | Path) -> None:
    _write(path, AGING_RAW_COLUMNS, ((s.gamma, s.t, s.delay_multiple, s.accuracy) for s in samples))


def read_aging_raw_csv(path: str | Path) -> list[AgingSample]:
    return [AgingSample(int(r["gamma"]), int(r["t"]), int(r["delay_multiple"]), float(r["accuracy"]))
            for r in _read(path, AGING_RAW_COLUMNS)]


def write_global_csv(rows: Sequence[tuple[int, int, float]], path: str | Path) -> None:
    _write(path, GLOBAL_COLUMNS, rows)


def read_global_csv(path: str | Path) -> list[tuple[int, int, float]]:
    return [(int(r["gamma"]), int(r["t"]), float(r["global_accuracy"]))
            for r in _read(path, GLOBAL_COLUMNS)]
