"""Locality spheres over observation windows and selection of training points inside them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput, InvalidParameter
from .worldgen import Dataset

CONTAIN_EPS = 1e-9


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float
    coverage: float = 1.0

    @property
    def dimension(self) -> int:
        return len(self.center)


def _circumball(support: list[np.ndarray]) -> tuple[np.ndarray, float]:
    """Smallest ball with every support point on its boundary."""
    p0 = support[0]
    if len(support) == 1:
        return p0.copy(), 0.0
    A = np.array([p - p0 for p in support[1:]])
    gram = A @ A.T
    rhs = 0.5 * np.einsum("ij,ij->i", A, A)
    try:
        lam = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        lam = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    center = p0 + lam @ A
    radius = max(float(np.linalg.norm(p - center)) for p in support)
    return center, radius


def _outside(p: np.ndarray, center: np.ndarray, radius: float) -> bool:
    diff = p - center
    return float(diff @ diff) > radius * radius * (1.0 + 1e-12) + 1e-24


def _mtf_ball(pts: list[np.ndarray], end: int, support: list[np.ndarray], dim: int):
    center, radius = _circumball(support) if support else (None, -1.0)
    if len(support) == dim + 1:
        return center, radius
    i = 0
    while i < end:
        p = pts[i]
        if center is None or _outside(p, center, radius):
            center, radius = _mtf_ball(pts, i, support + [p], dim)
            # move-to-front keeps likely support points early for later passes
            pts.insert(0, pts.pop(i))
        i += 1
    return center, radius


def minimum_enclosing_ball(points, rng: np.random.Generator | int | None = 0) -> tuple[np.ndarray, float]:
    """Exact minimum enclosing ball (Welzl's algorithm with move-to-front)."""
    arr = np.atleast_2d(np.asarray(points, dtype=float))
    if arr.size == 0:
        raise EmptyInput("no points")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    unique = np.unique(arr, axis=0)
    pts = [unique[k] for k in rng.permutation(len(unique))]
    center, radius = _mtf_ball(pts, len(pts), [], arr.shape[1])
    # guard against rounding in the circumcenter solve
    radius = max(radius, float(np.sqrt(((arr - center) ** 2).sum(axis=1)).max()))
    return center, radius


def enclosing_sphere(points, coverage: float = 1.0,
                     rng: np.random.Generator | int | None = 0) -> Sphere:
    """Sphere around a window of observations.

    ``coverage`` 1 gives the exact minimum enclosing ball. Below 1 the center
    stays at the full ball's center and the radius shrinks to the nearest-rank
    ``coverage``-quantile of distances from it, which is an approximation of
    the smallest ball holding that fraction of points.
    """
    arr = np.atleast_2d(np.asarray(points, dtype=float))
    if arr.size == 0:
        raise EmptyInput("no points")
    if not 0.0 < coverage <= 1.0:
        raise InvalidParameter("coverage must lie in (0, 1]")
    center, radius = minimum_enclosing_ball(arr, rng)
    dist = np.sqrt(((arr - center) ** 2).sum(axis=1))
    m = len(arr)
    if coverage < 1.0:
        rank = math.ceil(coverage * m - 1e-12)
        radius = float(np.sort(dist)[max(rank, 1) - 1])
    realized = float(np.count_nonzero(dist <= radius + CONTAIN_EPS)) / m
    return Sphere(center, float(radius), realized)


def contains(sphere: Sphere, x) -> bool:
    p = np.asarray(x, dtype=float)
    if p.shape != sphere.center.shape:
        raise DimensionMismatch("point and sphere differ in dimension")
    return bool(np.sqrt(((p - sphere.center) ** 2).sum()) <= sphere.radius)


def within_mask(points: np.ndarray, sphere: Sphere) -> np.ndarray:
    """Boolean mask of the rows of ``points`` inside ``sphere`` (boundary inclusive)."""
    if points.shape[1] != sphere.dimension:
        raise DimensionMismatch("points and sphere differ in dimension")
    return np.sqrt(((points - sphere.center) ** 2).sum(axis=1)) <= sphere.radius


def select_within(data: Dataset, sphere: Sphere) -> Dataset:
    return data.subset(within_mask(data.points, sphere))
