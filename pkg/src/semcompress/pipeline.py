"""Pipeline stages with on-disk artifacts, shared by the CLI and the test-suite.

Each stage reads the artifacts of earlier stages from ``out_dir`` and writes
its own. Stage seeds are derived from the master seed and a fixed per-stage
label, so re-running one stage never perturbs another.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classifiers, experiment, semcomp, svgplot
from .config import RunConfig
from .errors import SemCompError
from .trajectory import MhConfig, read_trajectory_csv, sample_trajectory, write_trajectory_csv
from .worldgen import (
    WorldConfig,
    build_mixture,
    posterior_labels,
    read_dataset_csv,
    sample_labeled,
    write_dataset_csv,
)

log = logging.getLogger("semcompress")

STAGE_WORLD = 1
STAGE_GLOBAL = 2
STAGE_TRAJECTORY = 3
STAGE_EXPERIMENT = 4
STAGE_TRUTH = 5

ARTIFACTS = {
    "dataset": ("dataset.csv", "gen-world"),
    "global_model": ("global_model.txt", "train-global"),
    "global_metrics": ("global_metrics.csv", "train-global"),
    "trajectory": ("trajectory.csv", "gen-trajectory"),
    "records": ("records.csv", "simulate"),
    "summary": ("summary.csv", "simulate"),
    "global_windows": ("global_windows.csv", "simulate"),
    "aging": ("aging.csv", "aging"),
    "aging_raw": ("aging_raw.csv", "aging"),
    "control": ("control.csv", "control"),
    "radius_svg": ("radius.svg", "report"),
    "accuracy_svg": ("accuracy.svg", "report"),
    "aging_svg": ("aging.svg", "report"),
}


class MissingArtifact(SemCompError):
    def __init__(self, artifact: str, producer: str, path: Path | None = None):
        self.artifact = artifact
        self.producer = producer
        where = f" ({path})" if path is not None else ""
        super().__init__(f"missing artifact {artifact!r}{where}; run '{producer}' first")


def stage_rng(master_seed: int, stage: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, stage]))


def stage_seed(master_seed: int, stage: int) -> int:
    return int(np.random.SeedSequence([master_seed, stage]).generate_state(1, dtype=np.uint32)[0])


def artifact_path(out_dir: Path, name: str) -> Path:
    return Path(out_dir) / ARTIFACTS[name][0]


def require(out_dir: Path, *names: str) -> dict[str, Path]:
    paths = {}
    for name in names:
        p = artifact_path(out_dir, name)
        if not p.is_file():
            raise MissingArtifact(name, ARTIFACTS[name][1], p)
        paths[name] = p
    return paths


# --------------------------------------------------------------------------
# config -> module objects


def world_config(cfg: RunConfig) -> WorldConfig:
    w = cfg["world"]
    return WorldConfig(w["dimension"], w["lines_per_class"], w["components_per_line"],
                       w["line_offset"], w["component_spacing"], w["component_stddev"])


def experiment_config(cfg: RunConfig) -> experiment.ExperimentConfig:
    e = cfg["experiment"]
    svm = semcomp.LinearSvmParams(e["local_C"], (e["negative_weight"], e["positive_weight"]),
                                  e["local_tol"])
    return experiment.ExperimentConfig(
        gamma_grid=tuple(e["gamma_grid"]), coverage=e["coverage"],
        windows_per_gamma=e["windows_per_gamma"],
        aging_windows_per_gamma=e["aging_windows_per_gamma"],
        min_local_points=e["min_local_points"], aging_delays=tuple(e["aging_delays"]),
        seed=stage_seed(cfg.master_seed, STAGE_EXPERIMENT), svm=svm)


def constraint_spec(cfg: RunConfig) -> semcomp.ConstraintSpec:
    c = cfg["constraints"]
    return semcomp.ConstraintSpec(c["energy_budget"], c["bandwidth_budget"],
                                  c["energy_tolerance"], c["bandwidth_tolerance"],
                                  c["payload_size"])


def loss_spec(cfg: RunConfig) -> semcomp.LossSpec:
    e = cfg["experiment"]
    return semcomp.LossSpec(semcomp.LossKind(e["loss"]), e["logistic_delta"])


def control_spec(cfg: RunConfig) -> semcomp.ControlSpec:
    return semcomp.ControlSpec(cfg["control"]["target_accuracy"],
                               tuple(cfg["experiment"]["gamma_grid"]))


# --------------------------------------------------------------------------
# stages


def gen_world(cfg: RunConfig, out_dir: Path) -> Path:
    spec = build_mixture(world_config(cfg))
    data = sample_labeled(spec, cfg["world"]["dataset_size"], stage_rng(cfg.master_seed, STAGE_WORLD))
    path = artifact_path(out_dir, "dataset")
    write_dataset_csv(data, path)
    log.info("wrote %d labeled points to %s", len(data), path)
    return path


@dataclass(frozen=True)
class GlobalMetrics:
    heldout_accuracy: float
    n_train: int
    n_heldout: int
    n_support: int
    prediction_ops: int


def train_global(cfg: RunConfig, out_dir: Path) -> GlobalMetrics:
    paths = require(out_dir, "dataset")
    data = read_dataset_csv(paths["dataset"])
    g = cfg["global_classifier"]
    n_train = min(g["train_size"], len(data))
    train, heldout = data.subset(slice(0, n_train)), data.subset(slice(n_train, None))
    model = classifiers.train_rbf_svm(train, g["C"], g["rbf_gamma"], g["tol"],
                                      stage_rng(cfg.master_seed, STAGE_GLOBAL), g["max_iter"])
    ref = heldout if len(heldout) else train
    acc = classifiers.accuracy(model, ref).accuracy
    metrics = GlobalMetrics(acc, n_train, len(heldout), model.n_support,
                            classifiers.prediction_ops(model))
    artifact_path(out_dir, "global_model").write_text(classifiers.dumps_model(model), encoding="utf-8")
    with open(artifact_path(out_dir, "global_metrics"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("metric,value\n")
        fh.write(f"heldout_accuracy,{acc!r}\n")
        fh.write(f"n_train,{n_train}\n")
        fh.write(f"n_heldout,{len(heldout)}\n")
        fh.write(f"n_support,{model.n_support}\n")
        fh.write(f"prediction_ops,{metrics.prediction_ops}\n")
    log.info("global classifier: %d support points, held-out accuracy %.4f", model.n_support, acc)
    return metrics


def read_global_metrics(out_dir: Path) -> dict[str, float]:
    path = require(out_dir, "global_metrics")["global_metrics"]
    rows = path.read_text(encoding="utf-8").splitlines()[1:]
    return {k: float(v) for k, v in (r.split(",") for r in rows if r)}


def gen_trajectory(cfg: RunConfig, out_dir: Path) -> float:
    spec = build_mixture(world_config(cfg))
    t = cfg["trajectory"]
    traj = sample_trajectory(spec, t["length"], MhConfig(t["proposal_stddev"], t["burn_in"]),
                             stage_rng(cfg.master_seed, STAGE_TRAJECTORY))
    write_trajectory_csv(traj, artifact_path(out_dir, "trajectory"))
    log.info("trajectory of %d steps, acceptance rate %.3f", len(traj), traj.accept_rate)
    return traj.accept_rate


def _load_inputs(cfg: RunConfig, out_dir: Path):
    paths = require(out_dir, "dataset", "global_model", "trajectory")
    data = read_dataset_csv(paths["dataset"])
    f = classifiers.loads_model(paths["global_model"].read_text(encoding="utf-8"))
    traj = read_trajectory_csv(paths["trajectory"])
    return data, f, traj


def simulate(cfg: RunConfig, out_dir: Path, jobs: int = 1) -> experiment.DuplexResult:
    data, f, traj = _load_inputs(cfg, out_dir)
    exp_cfg = experiment_config(cfg)
    s_verdicts = classifiers.predict(f, traj.points)
    result = experiment.run_duplex(f, data, traj, exp_cfg, constraint_spec(cfg), loss_spec(cfg),
                                   jobs, s_verdicts=s_verdicts)
    experiment.write_records_csv(result.records, artifact_path(out_dir, "records"))
    experiment.write_summary_csv(result.records, artifact_path(out_dir, "summary"))
    spec = build_mixture(world_config(cfg))
    truth = posterior_labels(spec, traj.points, stage_rng(cfg.master_seed, STAGE_TRUTH))
    rows = experiment.global_window_accuracy(s_verdicts, truth, result.records)
    experiment.write_global_csv(rows, artifact_path(out_dir, "global_windows"))
    skipped = sum(result.skipped.values())
    log.info("simulated %d windows (%d requested windows skipped)", len(result.records), skipped)
    return result


def aging(cfg: RunConfig, out_dir: Path, jobs: int = 1) -> list[experiment.AgingRecord]:
    data, f, traj = _load_inputs(cfg, out_dir)
    records, samples = experiment.run_aging(f, data, traj, experiment_config(cfg),
                                            constraint_spec(cfg), loss_spec(cfg), jobs)
    experiment.write_aging_csv(records, artifact_path(out_dir, "aging"))
    experiment.write_aging_raw_csv(samples, artifact_path(out_dir, "aging_raw"))
    log.info("aging: %d curve points from %d window evaluations", len(records), len(samples))
    return records


def control(cfg: RunConfig, out_dir: Path) -> semcomp.ControlDecision:
    paths = require(out_dir, "records")
    records = experiment.read_records_csv(paths["records"])
    by_gamma: dict[int, list[float]] = defaultdict(list)
    for r in records:
        by_gamma[r.gamma].append(r.accuracy)
    spec = control_spec(cfg)
    qualities = semcomp.control_quality(by_gamma, spec)
    decision = semcomp.choose_update_period(qualities, spec)
    with open(artifact_path(out_dir, "control"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("gamma,quality,tolerance,qualifies\n")
        for g, q in sorted(qualities.items()):
            ok = "true" if q <= decision.tolerance else "false"
            fh.write(f"{g},{q!r},{decision.tolerance!r},{ok}\n")
    return decision


def report(cfg: RunConfig, out_dir: Path) -> list[Path]:
    paths = require(out_dir, "summary", "aging")
    rows = experiment.read_summary_csv(paths["summary"])
    written = []
    f_line = None
    gw_path = artifact_path(out_dir, "global_windows")
    if gw_path.is_file():
        per: dict[int, list[float]] = defaultdict(list)
        for g, _, a in experiment.read_global_csv(gw_path):
            per[g].append(a)
        gs = sorted(per)
        f_line = svgplot.Series("global f", gs, [sum(per[g]) / len(per[g]) for g in gs], dashed=True)

    for metric, title, ylabel, key in (
        ("radius", "Locality radius vs. update period", "sphere radius", "radius_svg"),
        ("accuracy", "Local accuracy vs. update period", "agreement with f", "accuracy_svg"),
    ):
        sel = sorted((r for r in rows if r["metric"] == metric), key=lambda r: int(r["gamma"]))
        x = [int(r["gamma"]) for r in sel]
        series = [svgplot.Series("mean (q25-q75 band)", x, [float(r["mean"]) for r in sel],
                                 [float(r["q25"]) for r in sel], [float(r["q75"]) for r in sel])]
        if metric == "accuracy" and f_line is not None:
            series.append(f_line)
        chart = svgplot.Chart(title, "update period gamma", ylabel, series, log_x=True)
        p = artifact_path(out_dir, key)
        p.write_text(svgplot.render(chart), encoding="utf-8")
        written.append(p)

    curves: dict[int, list[experiment.AgingRecord]] = defaultdict(list)
    for rec in experiment.read_aging_csv(paths["aging"]):
        curves[rec.gamma].append(rec)
    series = []
    for g in sorted(curves):
        pts = sorted(curves[g], key=lambda r: r.delay_multiple)
        series.append(svgplot.Series(f"gamma = {g}", [r.delay_multiple for r in pts],
                                     [r.relative_accuracy for r in pts]))
    chart = svgplot.Chart("Local classifier aging", "delay / update period",
                          "relative mean accuracy", series)
    p = artifact_path(out_dir, "aging_svg")
    p.write_text(svgplot.render(chart), encoding="utf-8")
    written.append(p)
    return written
