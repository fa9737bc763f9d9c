"""Synthetic observation world: two Gaussian mixtures inside the unit hypercube.

Each class owns ``lines_per_class`` lines parallel to the main diagonal. Lines
of the two classes alternate across the diagonal, and every line carries
``components_per_line`` isotropic components spaced evenly along it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import CenterOutOfBounds, DimensionMismatch, InvalidParameter

_BOUND_EPS = 1e-12


@dataclass(frozen=True)
class WorldConfig:
    dimension: int = 2
    lines_per_class: int = 2
    components_per_line: int = 5
    line_offset: float = 0.12
    component_spacing: float = 0.17
    component_stddev: float = 0.05


@dataclass(frozen=True)
class MixtureSpec:
    """Resolved mixture. ``centers[c]`` is an (m, d) array for class ``c``."""

    dimension: int
    stddev: float
    centers: tuple[np.ndarray, np.ndarray]
    weights: tuple[np.ndarray, np.ndarray]
    config: Optional[WorldConfig] = field(default=None, compare=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise InvalidParameter("dimension must be >= 1")
        if not self.stddev > 0:
            raise InvalidParameter("component stddev must be > 0")
        if len(self.centers) != 2 or len(self.weights) != 2:
            raise InvalidParameter("exactly two classes are required")
        for c, w in zip(self.centers, self.weights):
            if c.ndim != 2 or c.shape[1] != self.dimension:
                raise DimensionMismatch("center array has wrong shape")
            if len(w) != len(c) or abs(w.sum() - 1.0) > 1e-12:
                raise InvalidParameter("class weights must sum to 1")

    @classmethod
    def from_centers(cls, centers0, centers1, stddev: float) -> "MixtureSpec":
        c0 = np.atleast_2d(np.asarray(centers0, dtype=float))
        c1 = np.atleast_2d(np.asarray(centers1, dtype=float))
        w0 = np.full(len(c0), 1.0 / len(c0))
        w1 = np.full(len(c1), 1.0 / len(c1))
        return cls(c0.shape[1], float(stddev), (c0, c1), (w0, w1))

    @property
    def components_per_class(self) -> int:
        return len(self.centers[0])


@dataclass(frozen=True)
class LabeledSample:
    point: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    """Labeled sample Z stored column-wise: ``points`` (n, d), ``labels`` (n,)."""

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.points.ndim != 2:
            raise DimensionMismatch("points must be a 2-D array")
        if len(self.points) != len(self.labels):
            raise DimensionMismatch("points and labels differ in length")

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[LabeledSample]:
        for p, y in zip(self.points, self.labels):
            yield LabeledSample(p, int(y))

    def subset(self, mask_or_index) -> "Dataset":
        return Dataset(self.points[mask_or_index], self.labels[mask_or_index])

    @classmethod
    def empty(cls, dimension: int) -> "Dataset":
        return cls(np.empty((0, dimension)), np.empty(0, dtype=np.int8))


def build_mixture(config: WorldConfig = WorldConfig()) -> MixtureSpec:
    d = config.dimension
    if d < 1:
        raise InvalidParameter("dimension must be >= 1")
    if config.lines_per_class < 1 or config.components_per_line < 1:
        raise InvalidParameter("line and component counts must be >= 1")
    if not config.component_spacing > 0 or not config.component_stddev > 0:
        raise InvalidParameter("spacing and stddev must be > 0")
    if config.line_offset < 0:
        raise InvalidParameter("line_offset must be >= 0")
    if d == 1 and config.line_offset > 0:
        raise InvalidParameter("a 1-D world has no direction perpendicular to the diagonal")

    mid = np.full(d, 0.5)
    along = np.full(d, 1.0 / math.sqrt(d))
    across = np.zeros(d)
    if d > 1:
        across[0], across[1] = 1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0)

    n_lines = 2 * config.lines_per_class
    k = config.components_per_line
    steps = (np.arange(k) - (k - 1) / 2.0) * config.component_spacing
    per_class: list[list[np.ndarray]] = [[], []]
    for i in range(n_lines):
        # adjacent lines are 2*offset apart, the innermost pair at +-offset
        u = config.line_offset * (2 * i - (n_lines - 1))
        for s in steps:
            per_class[i % 2].append(mid + s * along + u * across)

    centers = tuple(np.array(c) for c in per_class)
    for c in centers:
        if np.any(c < -_BOUND_EPS) or np.any(c > 1.0 + _BOUND_EPS):
            raise CenterOutOfBounds(
                f"mixture center leaves the unit hypercube (min {c.min():.4f}, max {c.max():.4f})"
            )
    m = len(centers[0])
    weights = (np.full(m, 1.0 / m), np.full(m, 1.0 / m))
    return MixtureSpec(d, float(config.component_stddev), centers, weights, config)


def _class_density(spec: MixtureSpec, x: np.ndarray, cls: int) -> np.ndarray:
    c, w = spec.centers[cls], spec.weights[cls]
    sq = ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
    norm = (2.0 * math.pi * spec.stddev**2) ** (-spec.dimension / 2.0)
    return norm * (np.exp(-sq / (2.0 * spec.stddev**2)) @ w)


def pdf(spec: MixtureSpec, x, cls: Optional[int] = None):
    """Density of class ``cls`` at ``x`` (or the equal-weight joint density).

    Accepts a single point of shape (d,) or a batch of shape (n, d).
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if pts.shape[1] != spec.dimension:
        raise DimensionMismatch(f"expected dimension {spec.dimension}, got {pts.shape[1]}")
    if cls is None:
        out = 0.5 * _class_density(spec, pts, 0) + 0.5 * _class_density(spec, pts, 1)
    elif cls in (0, 1):
        out = _class_density(spec, pts, cls)
    else:
        raise InvalidParameter("class must be 0, 1 or None")
    return float(out[0]) if single else out


def sample_labeled(spec: MixtureSpec, n: int, rng: np.random.Generator) -> Dataset:
    if n < 1:
        raise InvalidParameter("n must be >= 1")
    labels = rng.integers(0, 2, size=n).astype(np.int8)
    points = np.empty((n, spec.dimension))
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        comp = rng.choice(len(spec.centers[cls]), size=len(idx), p=spec.weights[cls])
        points[idx] = spec.centers[cls][comp]
    points += rng.normal(0.0, spec.stddev, size=points.shape)
    return Dataset(points, labels)


def posterior_labels(spec: MixtureSpec, points: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw ground-truth labels y ~ P(y | x) for points already distributed as the joint."""
    p0 = _class_density(spec, points, 0)
    p1 = _class_density(spec, points, 1)
    total = p0 + p1
    prob1 = np.divide(p1, total, out=np.full_like(total, 0.5), where=total > 0)
    return (rng.random(len(points)) < prob1).astype(np.int8)


def write_dataset_csv(data: Dataset, path) -> None:
    header = ",".join(f"x_{k}" for k in range(data.dimension)) + ",label"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for p, y in zip(data.points, data.labels):
            fh.write(",".join(repr(float(v)) for v in p) + f",{int(y)}\n")


def read_dataset_csv(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        d = len(header) - 1
        if d < 1 or header[-1] != "label" or any(h != f"x_{k}" for k, h in enumerate(header[:-1])):
            raise InvalidParameter(f"{path}: not a dataset CSV (header {header})")
        rows = np.loadtxt(fh, delimiter=",", ndmin=2)
    if len(rows) == 0:
        return Dataset.empty(d)
    return Dataset(np.ascontiguousarray(rows[:, :d]), rows[:, d].astype(np.int8))
