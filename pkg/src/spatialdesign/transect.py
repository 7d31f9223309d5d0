"""Coral-reef transect geometry and the coarse covariance grid.

A transect is a line of image locations described by its midpoint, angle
(degrees counterclockwise from the easting axis), length and image
spacing. A positive radius turns the line into a sampling region: image
points are jittered by independent uniform offsets per coordinate. The
spatial random effect is carried on a coarse rectangular grid: points in
one cell share the same effect and the covariance uses cell-centre
Euclidean distances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .exceptions import ModelError
from .utils import knn_mean


@dataclass(frozen=True)
class Transect:
    midpoint: tuple[float, float]
    angle: float
    length: float
    radius: float = 0.0
    spacing: float = 5.0

    def __post_init__(self):
        if self.length <= 0:
            raise ModelError("transect length must be positive")
        if self.radius < 0:
            raise ModelError("transect radius must be non-negative")
        n = self.length / self.spacing
        if abs(n - round(n)) > 1e-9:
            raise ModelError(
                f"length {self.length} not divisible by spacing {self.spacing}"
            )

    @property
    def n_images(self) -> int:
        return int(round(self.length / self.spacing))


def transect_points(t: Transect) -> np.ndarray:
    """Image locations along the transect line, shape (n_images, 2).

    Points sit at signed offsets -l/2 + spacing*(k - 1/2) from the
    midpoint, symmetric about it with no endpoint duplication, so a 500 m
    transect at 5 m spacing yields exactly 100 images.
    """
    n = t.n_images
    offsets = -t.length / 2.0 + t.spacing * (np.arange(1, n + 1) - 0.5)
    rad = np.deg2rad(t.angle)
    direction = np.array([np.cos(rad), np.sin(rad)])
    return np.asarray(t.midpoint, dtype=float)[None, :] + offsets[:, None] * direction[None, :]


def jitter_points(points: np.ndarray, r: float, rng: np.random.Generator) -> np.ndarray:
    """Disperse points by independent Unif(-r, r) offsets per coordinate."""
    points = np.asarray(points, dtype=float)
    if r < 0:
        raise ModelError("jitter radius must be non-negative")
    if r == 0:
        return points.copy()
    return points + rng.uniform(-r, r, size=points.shape)


def coarsen_to_grid(
    points: np.ndarray,
    bounds: tuple[float, float, float, float],
    nx: int = 10,
    ny: int = 10,
) -> tuple[np.ndarray, np.ndarray]:
    """Assign points to cells of an (nx x ny) grid over ``bounds``.

    Returns ``(cell_index, centre_distances)`` where ``cell_index`` maps
    each point to its flat cell id (row-major, x fastest) and
    ``centre_distances`` is the (nx*ny, nx*ny) Euclidean distance matrix
    between cell centres. A point exactly on an interior boundary belongs
    to the higher-index cell; the outer boundary belongs to the last cell.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    xmin, xmax, ymin, ymax = bounds
    if np.any(points[:, 0] < xmin) or np.any(points[:, 0] > xmax) \
            or np.any(points[:, 1] < ymin) or np.any(points[:, 1] > ymax):
        raise ModelError("point outside grid bounds")
    wx = (xmax - xmin) / nx
    wy = (ymax - ymin) / ny
    ix = np.minimum(np.floor((points[:, 0] - xmin) / wx).astype(int), nx - 1)
    iy = np.minimum(np.floor((points[:, 1] - ymin) / wy).astype(int), ny - 1)
    cell_index = iy * nx + ix

    cx = xmin + (np.arange(nx) + 0.5) * wx
    cy = ymin + (np.arange(ny) + 0.5) * wy
    centres = np.array([[cx[i], cy[j]] for j in range(ny) for i in range(nx)])
    diff = centres[:, None, :] - centres[None, :, :]
    return cell_index, np.sqrt((diff**2).sum(axis=2))


def grid_cell_centres(bounds, nx: int = 10, ny: int = 10) -> np.ndarray:
    xmin, xmax, ymin, ymax = bounds
    cx = xmin + (np.arange(nx) + 0.5) * (xmax - xmin) / nx
    cy = ymin + (np.arange(ny) + 0.5) * (ymax - ymin) / ny
    return np.array([[cx[i], cy[j]] for j in range(ny) for i in range(nx)])


@dataclass(frozen=True, eq=False)
class ReefSurvey:
    """Point cloud of survey locations with a depth covariate.

    Depth at arbitrary points is the unweighted mean of the 3 nearest
    survey values (Euclidean distance).
    """

    points: np.ndarray
    depth: np.ndarray

    def __post_init__(self):
        if len(self.points) != len(self.depth):
            raise ModelError("points and depth must have equal length")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (
            float(self.points[:, 0].min()),
            float(self.points[:, 0].max()),
            float(self.points[:, 1].min()),
            float(self.points[:, 1].max()),
        )

    def depth_at(self, targets: np.ndarray, k: int = 3) -> np.ndarray:
        return knn_mean(self.points, self.depth, targets, k=k)


def load_reef(path) -> ReefSurvey:
    """Read a reef surrogate CSV ``easting,northing,depth``."""
    df = pd.read_csv(path, float_precision="round_trip")
    required = ["easting", "northing", "depth"]
    if list(df.columns[:3]) != required:
        raise ModelError(f"reef file must start with columns {required}")
    return ReefSurvey(df[["easting", "northing"]].to_numpy(float), df["depth"].to_numpy(float))


def save_reef(survey: ReefSurvey, path):
    pd.DataFrame(
        {
            "easting": survey.points[:, 0],
            "northing": survey.points[:, 1],
            "depth": survey.depth,
        }
    ).to_csv(path, index=False)
