"""Small shared helpers: random streams, k-NN interpolation, array checks."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def as_generator(seed=None) -> np.random.Generator:
    """Coerce ``seed`` (None, int, SeedSequence or Generator) to a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def split_streams(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Split ``n`` independent child streams off ``rng`` (order-stable)."""
    return list(rng.spawn(n))


def knn_mean(points: np.ndarray, values: np.ndarray, targets: np.ndarray, k: int = 3) -> np.ndarray:
    """Unweighted mean of ``values`` at the k Euclidean-nearest ``points``.

    ``points`` is (m, 2), ``targets`` is (t, 2); returns shape (t,).
    Distance ties are broken by the lower point index (cKDTree is stable for
    exact ties only up to floating-point ordering, which is deterministic).
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if len(points) < k:
        raise ValueError(f"need at least k={k} reference points, got {len(points)}")
    tree = cKDTree(points)
    _, idx = tree.query(targets, k=k)
    idx = np.atleast_2d(idx)
    return values[idx].mean(axis=1)


def check_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def check_symmetric(a: np.ndarray, name: str = "matrix", tol: float = 1e-8) -> np.ndarray:
    a = check_square(a, name)
    if not np.allclose(a, a.T, atol=tol, rtol=0.0):
        raise ValueError(f"{name} is not symmetric within {tol}")
    return a
