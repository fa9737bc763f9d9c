"""Global RBF-kernel SVM, local linear SVMs and the per-prediction cost model.

Both solvers work on the SVM dual. The kernel machine is trained by SMO with
second-order working-set selection; the linear machine by dual coordinate
descent with a regularized bias, after centering and isotropic scaling of the
inputs so the bias term is not dominated by the data's location.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numba
import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyReference,
    InvalidParameter,
    ModelFormatError,
    NonConvergence,
    SingleClassData,
)
from .worldgen import Dataset

SV_EPS = 1e-12
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    threshold: float = 0.0

    def __post_init__(self):
        if self.weights.ndim != 1:
            raise DimensionMismatch("weights must be a vector")
        if not (np.all(np.isfinite(self.weights)) and math.isfinite(self.bias)):
            raise InvalidParameter("non-finite linear model")

    @property
    def dimension(self) -> int:
        return len(self.weights)

    def with_threshold(self, threshold: float) -> "LinearModel":
        return LinearModel(self.weights, self.bias, float(threshold))

    @classmethod
    def constant(cls, dimension: int, positive: bool) -> "LinearModel":
        return cls(np.zeros(dimension), 1.0 if positive else -1.0)


@dataclass(frozen=True)
class KernelModel:
    support_points: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    rbf_gamma: float

    def __post_init__(self):
        if self.support_points.ndim != 2 or len(self.support_points) == 0:
            raise InvalidParameter("a kernel model needs at least one support point")
        if len(self.dual_coefs) != len(self.support_points):
            raise DimensionMismatch("one dual coefficient per support point")
        if not self.rbf_gamma > 0:
            raise InvalidParameter("rbf_gamma must be > 0")

    @property
    def dimension(self) -> int:
        return self.support_points.shape[1]

    @property
    def n_support(self) -> int:
        return len(self.support_points)


Model = Union[LinearModel, KernelModel]


# --------------------------------------------------------------------------
# decision function and cost model


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = np.zeros((len(a), len(b)))
    for k in range(a.shape[1]):
        diff = a[:, k, None] - b[None, :, k]
        sq += diff * diff
    return np.exp(-gamma * sq)


def decision_value(model: Model, x) -> Union[float, np.ndarray]:
    """Signed decision value; ``x`` may be one point (d,) or a batch (n, d)."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if pts.shape[1] != model.dimension:
        raise DimensionMismatch(f"model dimension {model.dimension}, input {pts.shape[1]}")
    if isinstance(model, LinearModel):
        out = pts @ model.weights + model.bias - model.threshold
    else:
        out = np.empty(len(pts))
        # chunked to bound the kernel block size
        step = max(1, 2_000_000 // max(1, model.n_support))
        for lo in range(0, len(pts), step):
            k = rbf_kernel(pts[lo : lo + step], model.support_points, model.rbf_gamma)
            out[lo : lo + step] = k @ model.dual_coefs + model.bias
    return float(out[0]) if single else out


def predict(model: Model, x) -> Union[int, np.ndarray]:
    v = decision_value(model, x)
    if isinstance(v, float):
        return int(v >= 0.0)
    return (v >= 0.0).astype(np.int8)


def prediction_ops(model: Model) -> int:
    d = model.dimension
    if isinstance(model, LinearModel):
        return 2 * d + 2
    n_sv = model.n_support
    return n_sv * (3 * d + 3) + n_sv + 1


@dataclass(frozen=True)
class AccuracyReport:
    accuracy: float
    false_positives: int
    false_negatives: int
    n: int


def accuracy(model: Model, points, labels=None) -> AccuracyReport:
    """Agreement of ``model`` with reference labels.

    ``points`` may be a :class:`Dataset` (its labels are the reference) or an
    array of points paired with ``labels``.
    """
    if isinstance(points, Dataset):
        pts, ref = points.points, points.labels
    else:
        pts, ref = np.atleast_2d(np.asarray(points, dtype=float)), np.asarray(labels)
    if len(ref) == 0:
        raise EmptyReference("accuracy needs a nonempty reference set")
    return agreement(predict(model, pts), ref)


def agreement(pred: np.ndarray, ref: np.ndarray) -> AccuracyReport:
    if len(ref) == 0:
        raise EmptyReference("accuracy needs a nonempty reference set")
    pred = np.asarray(pred).astype(bool)
    ref = np.asarray(ref).astype(bool)
    fp = int(np.count_nonzero(pred & ~ref))
    fn = int(np.count_nonzero(~pred & ref))
    n = len(ref)
    return AccuracyReport(1.0 - (fp + fn) / n, fp, fn, n)


# --------------------------------------------------------------------------
# SMO for the RBF machine


@numba.njit(cache=True)
def _smo_solve(K, y, C, tol, max_iter):
    n = len(y)
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 0.5 a'Qa - e'a with Q = yy'K
    tau = 1e-12
    it = 0
    while True:
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * G[t]
                if v >= gmax:
                    gmax = v
                    i = t
        gmin = np.inf
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                v = -y[t] * G[t]
                if v < gmin:
                    gmin = v
                if i >= 0 and v < gmax:
                    b = gmax - v
                    a = K[i, i] + K[t, t] - 2.0 * K[i, t]
                    if a <= 0:
                        a = tau
                    score = -(b * b) / a
                    if score <= best:
                        best = score
                        j = t
        if i < 0 or j < 0 or gmax - gmin < tol:
            return alpha, G, it, True
        if it >= max_iter:
            return alpha, G, it, False
        it += 1

        Qij = y[i] * y[j] * K[i, j]
        old_ai = alpha[i]
        old_aj = alpha[j]
        if y[i] != y[j]:
            quad = K[i, i] + K[j, j] + 2.0 * Qij
            if quad <= 0:
                quad = tau
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = K[i, i] + K[j, j] - 2.0 * Qij
            if quad <= 0:
                quad = tau
            delta = (G[i] - G[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = s
            if s > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = s
        dai = alpha[i] - old_ai
        daj = alpha[j] - old_aj
        for t in range(n):
            G[t] += y[t] * (y[i] * K[t, i] * dai + y[j] * K[t, j] * daj)


def _smo_offset(y, alpha, G, C):
    """LIBSVM's rho: mean of y*G over free vectors, else the midpoint of the bounds."""
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        return float(yG[free].mean())
    at_upper = alpha >= C
    at_lower = alpha <= 0
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yG[ub_mask].min() if np.any(ub_mask) else np.inf
    lb = yG[lb_mask].max() if np.any(lb_mask) else -np.inf
    return float((ub + lb) / 2.0)


@dataclass(frozen=True)
class KernelFit:
    model: KernelModel
    alpha: np.ndarray
    iterations: int


def solve_rbf_dual(points: np.ndarray, labels: np.ndarray, C: float, gamma: float,
                   tol: float = 1e-3, max_iter: int = 1_000_000) -> KernelFit:
    """Solve the soft-margin dual and return the full dual vector with the model."""
    if not (C > 0 and gamma > 0 and tol > 0):
        raise InvalidParameter("C, gamma and tol must be > 0")
    labels = np.asarray(labels)
    if len(np.unique(labels)) < 2:
        raise SingleClassData("kernel SVM training needs both labels")
    y = np.where(labels > 0, 1.0, -1.0)
    K = rbf_kernel(points, points, gamma)
    alpha, G, iters, converged = _smo_solve(K, y, float(C), float(tol), int(max_iter))
    if not converged:
        raise NonConvergence(f"SMO did not reach tol={tol} within {max_iter} pair updates")
    rho = _smo_offset(y, alpha, G, C)
    coef = alpha * y
    keep = np.abs(coef) > SV_EPS
    model = KernelModel(points[keep].copy(), coef[keep].copy(), -rho, float(gamma))
    return KernelFit(model, alpha, int(iters))


def train_rbf_svm(data: Dataset, C: float = 10.0, gamma: float = 30.0, tol: float = 1e-3,
                  rng: np.random.Generator | None = None,
                  max_iter: int = 1_000_000) -> KernelModel:
    """Train the global classifier. ``rng`` shuffles the training order when given."""
    points, labels = data.points, data.labels
    if rng is not None:
        order = rng.permutation(len(labels))
        points, labels = points[order], labels[order]
    return solve_rbf_dual(points, labels, C, gamma, tol, max_iter).model


def kkt_violations(K: np.ndarray, labels: np.ndarray, alpha: np.ndarray, bias: float,
                   C: float) -> np.ndarray:
    """Per-point KKT violation of a soft-margin dual solution (0 means satisfied)."""
    y = np.where(np.asarray(labels) > 0, 1.0, -1.0)
    margin = y * (K @ (alpha * y) + bias)
    lower = alpha <= 0
    upper = alpha >= C
    free = ~lower & ~upper
    viol = np.zeros(len(y))
    viol[lower] = np.maximum(0.0, 1.0 - margin[lower])
    viol[upper] = np.maximum(0.0, margin[upper] - 1.0)
    viol[free] = np.abs(margin[free] - 1.0)
    return viol


# --------------------------------------------------------------------------
# dual coordinate descent for the linear machine


@numba.njit(cache=True)
def _dcd_solve(X, y, U, tol, max_epochs, seed):
    n, p = X.shape
    alpha = np.zeros(n)
    w = np.zeros(p)
    qd = np.empty(n)
    for i in range(n):
        s = 0.0
        for k in range(p):
            s += X[i, k] * X[i, k]
        qd[i] = s
    order = np.arange(n)
    np.random.seed(seed)
    for epoch in range(max_epochs):
        np.random.shuffle(order)
        pg_max = -np.inf
        pg_min = np.inf
        for s_ in range(n):
            i = order[s_]
            g = 0.0
            for k in range(p):
                g += w[k] * X[i, k]
            g = y[i] * g - 1.0
            if alpha[i] <= 0.0:
                pg = min(g, 0.0)
            elif alpha[i] >= U[i]:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg > pg_max:
                pg_max = pg
            if pg < pg_min:
                pg_min = pg
            if pg != 0.0 and qd[i] > 0.0:
                old = alpha[i]
                a = old - g / qd[i]
                if a < 0.0:
                    a = 0.0
                elif a > U[i]:
                    a = U[i]
                alpha[i] = a
                step = (a - old) * y[i]
                for k in range(p):
                    w[k] += step * X[i, k]
        if pg_max - pg_min <= tol:
            return w, alpha, epoch + 1, True
    return w, alpha, max_epochs, False


def _normalizer(points: np.ndarray) -> tuple[np.ndarray, float]:
    center = points.mean(axis=0)
    scale = math.sqrt(float(((points - center) ** 2).sum(axis=1).mean()))
    return center, (scale if scale > 0 else 1.0)


def _augmented(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    center, scale = _normalizer(points)
    Z = (points - center) / scale
    X = np.hstack([Z, np.ones((len(Z), 1))])
    return X, center, scale


def _cost_vector(labels: np.ndarray, C: float, class_weights) -> np.ndarray:
    w_neg, w_pos = class_weights
    return np.where(labels > 0, C * w_pos, C * w_neg).astype(float)


def train_linear_svm(data: Dataset, C: float = 10.0, class_weights=(1.0, 1.0),
                     tol: float = 1e-3, max_epochs: int = 20_000) -> LinearModel:
    """Soft-margin linear SVM; ``class_weights`` = (negative, positive) cost multipliers."""
    if not (C > 0 and tol > 0) or min(class_weights) <= 0:
        raise InvalidParameter("C, tol and class weights must be > 0")
    labels = np.asarray(data.labels)
    if len(np.unique(labels)) < 2:
        raise SingleClassData("linear SVM training needs both labels")
    X, center, scale = _augmented(data.points)
    y = np.where(labels > 0, 1.0, -1.0)
    U = _cost_vector(labels, C, class_weights)
    w_aug, _, epochs, converged = _dcd_solve(X, y, U, float(tol), int(max_epochs), 0)
    if not converged:
        raise NonConvergence(f"dual coordinate descent did not reach tol={tol} in {epochs} epochs")
    w_scaled, b_scaled = w_aug[:-1], float(w_aug[-1])
    weights = w_scaled / scale
    bias = b_scaled - float(weights @ center)
    return LinearModel(weights, bias)


def linear_objective(model: LinearModel, data: Dataset, C: float, class_weights=(1.0, 1.0)) -> float:
    """Primal objective minimized by :func:`train_linear_svm`, in normalized coordinates."""
    center, scale = _normalizer(data.points)
    w_scaled = model.weights * scale
    b_scaled = model.bias + float(model.weights @ center)
    Z = (data.points - center) / scale
    y = np.where(np.asarray(data.labels) > 0, 1.0, -1.0)
    hinge = np.maximum(0.0, 1.0 - y * (Z @ w_scaled + b_scaled))
    U = _cost_vector(np.asarray(data.labels), C, class_weights)
    return 0.5 * (float(w_scaled @ w_scaled) + b_scaled**2) + float(U @ hinge)


# --------------------------------------------------------------------------
# plain-text persistence


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps_model(model: Model) -> str:
    lines = [
        "# semcompress classifier model",
        f"version = {MODEL_FORMAT_VERSION}",
    ]
    if isinstance(model, LinearModel):
        lines += [
            "kind = linear",
            f"dimension = {model.dimension}",
            f"bias = {_fmt(model.bias)}",
            f"threshold = {_fmt(model.threshold)}",
            "weights = " + " ".join(_fmt(v) for v in model.weights),
        ]
    else:
        lines += [
            "kind = rbf",
            f"dimension = {model.dimension}",
            f"rbf_gamma = {_fmt(model.rbf_gamma)}",
            f"bias = {_fmt(model.bias)}",
            f"n_support = {model.n_support}",
            "# coef x_0 ... x_{d-1}",
        ]
        for c, s in zip(model.dual_coefs, model.support_points):
            lines.append(" ".join([_fmt(c)] + [_fmt(v) for v in s]))
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> Model:
    header: dict[str, str] = {}
    rows: list[list[float]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            header[key.strip()] = value.strip()
        else:
            try:
                rows.append([float(v) for v in line.split()])
            except ValueError as exc:
                raise ModelFormatError(f"line {lineno}: bad numeric row") from exc
    try:
        version = int(header["version"])
        kind = header["kind"]
        d = int(header["dimension"])
    except (KeyError, ValueError) as exc:
        raise ModelFormatError("missing or malformed header field") from exc
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    if kind == "linear":
        weights = np.array([float(v) for v in header["weights"].split()])
        if len(weights) != d:
            raise ModelFormatError("weights length does not match dimension")
        return LinearModel(weights, float(header["bias"]), float(header["threshold"]))
    if kind == "rbf":
        arr = np.array(rows, dtype=float)
        n_sv = int(header["n_support"])
        if arr.shape != (n_sv, d + 1):
            raise ModelFormatError(f"expected {n_sv} support rows of width {d + 1}")
        return KernelModel(arr[:, 1:].copy(), arr[:, 0].copy(), float(header["bias"]),
                           float(header["rbf_gamma"]))
    raise ModelFormatError(f"unknown model kind {kind!r}")
