"""Constrained fitting of cheap local surrogates to the global classifier.

The local classifier minimizes its empirical disagreement loss with ``f`` over
the observation window, subject to hinge penalties on energy (operation count
against a budget) and bandwidth (payload per positive verdict against a
budget). The family is linear, so energy is fixed by the dimension and the
decision threshold is the only lever trading loss against bandwidth.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .classifiers import (
    KernelModel,
    LinearModel,
    decision_value,
    predict,
    prediction_ops,
    train_linear_svm,
)
from .errors import EmptyInput, EmptyLocalData, InvalidParameter
from .worldgen import Dataset


class LossKind(enum.Enum):
    SQUARED = "squared"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class LossSpec:
    kind: LossKind = LossKind.SQUARED
    delta: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.delta < 0.5:
            raise InvalidParameter("logistic clamp delta must lie in (0, 0.5)")


class FallbackKind(enum.Enum):
    NONE = "none"
    CONSTANT_POSITIVE = "constant_positive"
    CONSTANT_NEGATIVE = "constant_negative"
    REUSED_PREVIOUS = "reused_previous"


@dataclass(frozen=True)
class ConstraintSpec:
    energy_budget: float = 64.0
    bandwidth_budget: float = 1.0
    energy_tolerance: float = 0.0
    bandwidth_tolerance: float = 0.0
    payload_size: float = 1.0

    def __post_init__(self):
        if not self.energy_budget > 0:
            raise InvalidParameter("energy_budget must be > 0")
        if not self.payload_size > 0:
            raise InvalidParameter("payload_size must be > 0")
        if min(self.bandwidth_budget, self.energy_tolerance, self.bandwidth_tolerance) < 0:
            raise InvalidParameter("budgets and tolerances must be >= 0")


@dataclass(frozen=True)
class LinearSvmParams:
    C: float = 1.0
    class_weights: tuple[float, float] = (1.0, 1.0)
    tol: float = 0.1


@dataclass(frozen=True)
class LocalFitResult:
    model: LinearModel
    expected_loss: float
    energy_ops: int
    energy_penalty: float
    expected_bandwidth: float
    bandwidth_penalty: float
    feasible: bool
    fallback_kind: FallbackKind


@dataclass(frozen=True)
class ControlSpec:
    target_accuracy: float = 0.95
    gamma_grid: tuple[int, ...] = (5, 10, 20, 40, 80, 160, 320)
    control_distribution: str = "trajectory"

    def __post_init__(self):
        if not 0.0 < self.target_accuracy <= 1.0:
            raise InvalidParameter("target_accuracy must lie in (0, 1]")
        g = list(self.gamma_grid)
        if any(v < 2 for v in g) or any(b <= a for a, b in zip(g, g[1:])):
            raise InvalidParameter("gamma_grid must be strictly increasing with entries >= 2")

    @property
    def quality_tolerance(self) -> float:
        return 1.0 - self.target_accuracy


# --------------------------------------------------------------------------
# losses and penalties


def sigmoid(v):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(v, dtype=float)))


def loss(kind: LossKind | LossSpec, f_label, g_value):
    """Pointwise loss between f's verdict and g's output.

    SQUARED expects g's hard verdict in {0, 1}. LOGISTIC expects g's decision
    value, squashed by the sigmoid and clamped to [delta, 1 - delta].
    """
    spec = kind if isinstance(kind, LossSpec) else LossSpec(kind)
    a = np.asarray(f_label, dtype=float)
    b = np.asarray(g_value, dtype=float)
    if spec.kind is LossKind.SQUARED:
        out = (a - b) ** 2
    else:
        p = np.clip(sigmoid(b), spec.delta, 1.0 - spec.delta)
        out = -a * np.log(p) - (1.0 - a) * np.log(1.0 - p)
    return float(out) if out.ndim == 0 else out


def energy_penalty(ops: float, budget: float) -> float:
    return max(0.0, float(ops) - float(budget))


def bandwidth_penalty(mean_bandwidth: float, budget: float) -> float:
    return max(0.0, float(mean_bandwidth) - float(budget))


def expected_bandwidth(model: LinearModel, eval_points, payload_size: float) -> float:
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    if pts.size == 0:
        raise EmptyInput("no evaluation points")
    positives = int(np.count_nonzero(predict(model, pts)))
    return payload_size * positives / len(pts)


# --------------------------------------------------------------------------
# threshold sweep


def candidate_thresholds(scores: np.ndarray) -> np.ndarray:
    """Thresholds realizing every distinct positive set on ``scores``.

    Midpoints between consecutive distinct sorted scores, plus one threshold
    below the minimum (all positive) and one above the maximum (all negative).
    """
    s = np.unique(scores)
    pad = 1.0 + float(np.abs(s).max()) if len(s) else 1.0
    mids = 0.5 * (s[:-1] + s[1:])
    return np.concatenate([[s[0] - pad], mids, [s[-1] + pad]])


@dataclass(frozen=True)
class SweepResult:
    threshold: float
    expected_loss: float
    false_negatives: int
    positive_rate: float


def sweep_threshold(scores: np.ndarray, f_labels: np.ndarray, loss_spec: LossSpec,
                    payload_size: float, bandwidth_budget: float,
                    bandwidth_tolerance: float) -> SweepResult:
    """Best threshold by empirical loss under the bandwidth constraint; ties go to fewer misses."""
    scores = np.asarray(scores, dtype=float)
    f_labels = np.asarray(f_labels).astype(int)
    n = len(scores)
    best: Optional[SweepResult] = None
    for th in candidate_thresholds(scores):
        pred = scores >= th
        rate = float(np.count_nonzero(pred)) / n
        if bandwidth_penalty(payload_size * rate, bandwidth_budget) > bandwidth_tolerance:
            continue
        if loss_spec.kind is LossKind.SQUARED:
            value = float(np.mean(loss(loss_spec, f_labels, pred.astype(float))))
        else:
            value = float(np.mean(loss(loss_spec, f_labels, scores - th)))
        fn = int(np.count_nonzero(~pred & (f_labels == 1)))
        cand = SweepResult(float(th), value, fn, rate)
        if best is None or (value, fn) < (best.expected_loss, best.false_negatives):
            best = cand
    # the all-negative threshold always meets a nonnegative budget
    assert best is not None
    return best


# --------------------------------------------------------------------------
# constrained local fit


def _finish(model: LinearModel, kind: FallbackKind, eval_points: np.ndarray,
            eval_labels: np.ndarray, constraints: ConstraintSpec,
            loss_spec: LossSpec) -> LocalFitResult:
    if loss_spec.kind is LossKind.SQUARED:
        value = float(np.mean(loss(loss_spec, eval_labels, predict(model, eval_points))))
    else:
        value = float(np.mean(loss(loss_spec, eval_labels, decision_value(model, eval_points))))
    ops = prediction_ops(model)
    e_pen = energy_penalty(ops, constraints.energy_budget)
    bw = expected_bandwidth(model, eval_points, constraints.payload_size)
    b_pen = bandwidth_penalty(bw, constraints.bandwidth_budget)
    feasible = e_pen <= constraints.energy_tolerance and b_pen <= constraints.bandwidth_tolerance
    return LocalFitResult(model, value, ops, e_pen, bw, b_pen, feasible, kind)


def constant_fit(positive: bool, eval_points, eval_labels, constraints: ConstraintSpec,
                 loss_spec: LossSpec = LossSpec()) -> LocalFitResult:
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    kind = FallbackKind.CONSTANT_POSITIVE if positive else FallbackKind.CONSTANT_NEGATIVE
    model = LinearModel.constant(pts.shape[1], positive)
    return _finish(model, kind, pts, np.asarray(eval_labels), constraints, loss_spec)


def fit_local(f: Optional[KernelModel], local_data: Dataset, constraints: ConstraintSpec = ConstraintSpec(),
              loss_kind: LossKind | LossSpec = LossKind.SQUARED,
              svm_params: LinearSvmParams = LinearSvmParams(), eval_points=None,
              *, local_verdicts=None, eval_verdicts=None) -> LocalFitResult:
    """Fit a linear surrogate of ``f`` on the points of ``local_data``.

    Ground-truth labels in ``local_data`` are ignored: training targets are
    f's verdicts. Loss, bandwidth and threshold selection are evaluated on
    ``eval_points`` (the observation window). Precomputed verdicts of ``f``
    may be passed to skip re-evaluating it.
    """
    loss_spec = loss_kind if isinstance(loss_kind, LossSpec) else LossSpec(loss_kind)
    if len(local_data) == 0:
        raise EmptyLocalData("no training points inside the locality")
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    if pts.size == 0:
        raise EmptyInput("no evaluation points")
    if f is None and (local_verdicts is None or eval_verdicts is None):
        raise InvalidParameter("either f or both verdict arrays are required")
    y_local = np.asarray(predict(f, local_data.points) if local_verdicts is None else local_verdicts)
    y_eval = np.asarray(predict(f, pts) if eval_verdicts is None else eval_verdicts)

    if np.all(y_local == y_local[0]):
        positive = bool(y_local[0] == 1)
        if positive:
            full_rate = bandwidth_penalty(constraints.payload_size, constraints.bandwidth_budget)
            positive = full_rate <= constraints.bandwidth_tolerance
        return constant_fit(positive, pts, y_eval, constraints, loss_spec)

    base = train_linear_svm(Dataset(local_data.points, y_local.astype(np.int8)),
                            svm_params.C, svm_params.class_weights, svm_params.tol)
    scores = decision_value(base, pts)
    best = sweep_threshold(scores, y_eval, loss_spec, constraints.payload_size,
                           constraints.bandwidth_budget, constraints.bandwidth_tolerance)
    model = base.with_threshold(best.threshold)
    result = _finish(model, FallbackKind.NONE, pts, y_eval, constraints, loss_spec)
    assert result.feasible == (result.energy_penalty <= constraints.energy_tolerance
                               and result.bandwidth_penalty <= constraints.bandwidth_tolerance)
    return result


# --------------------------------------------------------------------------
# update-period control


def control_quality(accuracy_by_gamma: Mapping[int, Sequence[float]],
                    spec: ControlSpec = ControlSpec()) -> dict[int, float]:
    """Mean disagreement with ``f`` per update period.

    Every window of period g has g observations, so the mean of per-window
    disagreement rates equals the per-observation misclassification mean.
    """
    if not accuracy_by_gamma:
        raise EmptyInput("no accuracy statistics")
    out = {}
    for gamma, accs in sorted(accuracy_by_gamma.items()):
        values = [float(a) for a in np.atleast_1d(accs)]
        if not values:
            raise EmptyInput(f"no windows for gamma={gamma}")
        out[int(gamma)] = 1.0 - math.fsum(values) / len(values)
    return out


@dataclass(frozen=True)
class ControlDecision:
    gamma0: int
    target_met: bool
    tolerance: float
    qualities: dict[int, float] = field(default_factory=dict)


def choose_update_period(per_gamma_quality: Mapping[int, float],
                         spec: ControlSpec = ControlSpec()) -> ControlDecision:
    """Largest grid period whose quality stays within ``1 - target_accuracy``."""
    grid = [g for g in spec.gamma_grid if g in per_gamma_quality] or sorted(per_gamma_quality)
    if not grid:
        raise EmptyInput("gamma grid is empty")
    tol = spec.quality_tolerance
    ok = [g for g in grid if per_gamma_quality[g] <= tol]
    qualities = {g: float(per_gamma_quality[g]) for g in grid}
    if ok:
        return ControlDecision(max(ok), True, tol, qualities)
    return ControlDecision(min(grid), False, tol, qualities)
