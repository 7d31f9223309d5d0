"""Covariance kernels and assembly of the response covariance matrix.

The response covariance on a river network is a sum of components:
Euclidean-distance decay, tail-up (flow-connected pairs only, with
junction weights), tail-down (any pair of one component, by stream
distance) and an independent nugget. All three components use the
exponential kernel, the only form known to stay valid when Euclidean
distance is replaced by total hydrologic distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, cholesky

from .exceptions import CovarianceError
from .network import StreamNetwork

EUCLIDEAN = "euclidean"
TAILUP = "tailup"
TAILDOWN = "taildown"
COMPONENTS = (EUCLIDEAN, TAILUP, TAILDOWN)


def exp_cov(h, sill: float, range_param: float):
    """Exponential covariance ``sill * exp(-3 h / range)``.

    ``h`` may be a scalar or an array of non-negative distances.
    """
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise CovarianceError("distances must be non-negative")
    if range_param <= 0:
        raise CovarianceError("range parameter must be positive")
    if sill < 0:
        raise CovarianceError("partial sill must be non-negative")
    out = sill * np.exp(-3.0 * h / range_param)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CovParams:
    """Partial sill and range of one covariance component."""

    partial_sill: float
    range_param: float

    def __post_init__(self):
        if self.partial_sill < 0:
            raise CovarianceError("partial sill must be non-negative")
        if self.range_param <= 0:
            raise CovarianceError("range parameter must be positive")


@dataclass(frozen=True)
class CovSpec:
    """Component parameters plus nugget for one covariance realisation."""

    components: Mapping[str, CovParams]
    nugget: float = 0.0

    def __post_init__(self):
        for name in self.components:
            if name not in COMPONENTS:
                raise CovarianceError(f"unknown covariance component {name!r}")
        if self.nugget < 0:
            raise CovarianceError("nugget must be non-negative")
        total = self.nugget + sum(p.partial_sill for p in self.components.values())
        if total <= 0:
            raise CovarianceError("at least one component or the nugget must carry variance")


def assemble_sigma_from_matrices(matrices: Mapping[str, np.ndarray], spec: CovSpec) -> np.ndarray:
    """Assemble the full covariance from precomputed pairwise matrices.

    ``matrices`` must hold ``hydro``, ``euclid``, ``connected`` and
    ``weights`` as produced by :meth:`StreamNetwork.site_matrices`.
    """
    n = matrices["hydro"].shape[0]
    sigma = np.zeros((n, n))
    for name, params in spec.components.items():
        if name == EUCLIDEAN:
            sigma += exp_cov(matrices["euclid"], params.partial_sill, params.range_param)
        elif name == TAILDOWN:
            sigma += exp_cov(matrices["hydro"], params.partial_sill, params.range_param)
        elif name == TAILUP:
            tu = matrices["weights"] * exp_cov(
                matrices["hydro"], params.partial_sill, params.range_param
            )
            tu[~matrices["connected"]] = 0.0
            sigma += tu
    sigma += spec.nugget * np.eye(n)
    return sigma


def assemble_sigma(net: StreamNetwork, design_sites: Iterable[int], spec: CovSpec) -> np.ndarray:
    """Response covariance over an ordered site list (symmetric, n >= 1)."""
    sites = tuple(design_sites)
    if len(sites) < 1:
        raise CovarianceError("need at least one design site")
    return assemble_sigma_from_matrices(net.site_matrices(sites), spec)


_NOT_PD_MSG = (
    "covariance is not positive definite (duplicated sites with zero "
    "nugget?); add a nugget to regularise"
)


def cholesky_factor(sigma: np.ndarray):
    """Factorisation for solves; raises CovarianceError when not PD.

    No silent regularisation: callers wanting a PD matrix add nugget.
    """
    try:
        return cho_factor(sigma, lower=True)
    except LinAlgError as exc:
        raise CovarianceError(_NOT_PD_MSG) from exc


def cholesky_lower(sigma: np.ndarray) -> np.ndarray:
    """Clean lower-triangular Cholesky factor (for simulation)."""
    try:
        return cholesky(sigma, lower=True)
    except LinAlgError as exc:
        raise CovarianceError(_NOT_PD_MSG) from exc


def chol_solve(factor, b: np.ndarray) -> np.ndarray:
    return cho_solve(factor, b)


def chol_logdet(factor) -> float:
    c, _ = factor
    return 2.0 * float(np.sum(np.log(np.diag(c))))
