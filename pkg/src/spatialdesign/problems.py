"""Bind a model and a spatial domain into evaluable design problems.

A "prepared design" caches everything that depends only on the design
geometry (fixed-effects matrix, distance matrices, grid-cell machinery)
so that repeated likelihood evaluations during posterior fitting touch
only the covariance parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import (
    EUCLIDEAN,
    assemble_sigma_from_matrices,
    cholesky_lower,
    exp_cov,
)
from .exceptions import ModelError
from .model import (
    BINOMIAL,
    GAUSSIAN,
    ModelSpec,
    ParamDraw,
    binomial_loglik,
    binomial_loglik_rows,
    clamp_eta,
    gaussian_loglik,
    inverse_logit,
    log_mean_exp,
)
from .network import StreamNetwork
from .transect import ReefSurvey, Transect, coarsen_to_grid, jitter_points, transect_points


def _design_matrix(spec: ModelSpec, columns: dict[str, np.ndarray], n: int) -> np.ndarray:
    cols = []
    for name in spec.fixed_effects:
        if name == "intercept":
            cols.append(np.ones(n))
        elif name in columns:
            cols.append(np.asarray(columns[name], dtype=float))
        else:
            raise ModelError(f"fixed effect {name!r} not available at the design points")
    return np.column_stack(cols)


class PreparedGaussianDesign:
    """Gaussian river model evaluated at a fixed tuple of network sites."""

    def __init__(self, spec: ModelSpec, net: StreamNetwork, design_sites):
        if spec.family != GAUSSIAN:
            raise ModelError("network designs use the gaussian_identity family")
        self.spec = spec
        self.layout = spec.layout()
        self.sites = tuple(design_sites)
        if len(self.sites) == 0:
            raise ModelError("design needs at least one site")
        self.coords = self.sites
        self.matrices = net.site_matrices(self.sites)
        columns: dict[str, np.ndarray] = {}
        for name in spec.fixed_effects:
            if name == "intercept":
                continue
            if any(name not in net.site(s).covariates for s in self.sites):
                raise ModelError(f"covariate {name!r} missing at some design sites")
            columns[name] = np.array([net.site(s).covariates[name] for s in self.sites])
        self.X = _design_matrix(spec, columns, len(self.sites))
        self.n_obs = len(self.sites)

    def sigma(self, cov_spec) -> np.ndarray:
        return assemble_sigma_from_matrices(self.matrices, cov_spec)

    def simulate(self, theta: ParamDraw, rng: np.random.Generator) -> np.ndarray:
        mu = self.X @ theta.beta
        chol = cholesky_lower(self.sigma(theta.cov_spec))
        return mu + chol @ rng.standard_normal(self.n_obs)

    def loglik(self, theta: ParamDraw, y: np.ndarray) -> float:
        return gaussian_loglik(y, self.X @ theta.beta, self.sigma(theta.cov_spec))

    def make_working_loglik(self, y, mz=None, rng=None):
        def working_loglik(w: np.ndarray) -> float:
            theta = self.layout.working_to_draw(w)
            return self.loglik(theta, y)

        return working_loglik


class PreparedBinomialDesign:
    """Binomial reef model for image points of a set of transects.

    The latent effect lives on the occupied cells of the coarse grid; all
    images in one cell share its value.
    """

    def __init__(
        self,
        spec: ModelSpec,
        domain: "ReefDomain",
        transects: tuple[Transect, ...],
        rng: np.random.Generator | None = None,
    ):
        if spec.family != BINOMIAL:
            raise ModelError("reef designs use the binomial_logit family")
        for comp in spec.components:
            if comp != EUCLIDEAN:
                raise ModelError("reef models support the euclidean component only")
        self.spec = spec
        self.layout = spec.layout()
        self.transects = transects
        self.coords = tuple(
            (t.midpoint[0], t.midpoint[1], t.angle, t.radius) for t in transects
        )

        pts = np.vstack([transect_points(t) for t in transects])
        radii = np.concatenate(
            [np.full(t.n_images, t.radius) for t in transects]
        )
        self.clamped_points = 0
        if np.any(radii > 0):
            if rng is None:
                raise ModelError("jittered transect regions need a random stream")
            jittered = pts.copy()
            for t_i, t in enumerate(transects):
                lo = sum(tr.n_images for tr in transects[:t_i])
                hi = lo + t.n_images
                jittered[lo:hi] = jitter_points(pts[lo:hi], t.radius, rng)
            xmin, xmax, ymin, ymax = domain.survey.bounds
            clipped = np.column_stack(
                [np.clip(jittered[:, 0], xmin, xmax), np.clip(jittered[:, 1], ymin, ymax)]
            )
            self.clamped_points = int(np.sum(np.any(clipped != jittered, axis=1)))
            pts = clipped
        self.points = pts
        self.n_obs = len(pts)
        self.trials = np.full(self.n_obs, spec.trials_per_image)

        cell_index, centre_dist = coarsen_to_grid(
            pts, domain.survey.bounds, nx=domain.nx, ny=domain.ny
        )
        occupied, compressed = np.unique(cell_index, return_inverse=True)
        self.cell_index = compressed
        self.cell_dist = centre_dist[np.ix_(occupied, occupied)]
        self.n_cells = len(occupied)

        self.X = _design_matrix(
            spec, {"depth": domain.survey.depth_at(pts)}, self.n_obs
        )

    def cell_cov(self, cov_spec) -> np.ndarray:
        sigma = np.zeros((self.n_cells, self.n_cells))
        for name, params in cov_spec.components.items():
            sigma += exp_cov(self.cell_dist, params.partial_sill, params.range_param)
        return sigma + cov_spec.nugget * np.eye(self.n_cells)

    def _cell_chol(self, cov_spec) -> np.ndarray:
        return cholesky_lower(self.cell_cov(cov_spec))

    def simulate(self, theta: ParamDraw, rng: np.random.Generator) -> np.ndarray:
        if theta.z is not None:
            z_cell = np.asarray(theta.z, dtype=float)
        else:
            z_cell = self._cell_chol(theta.cov_spec) @ rng.standard_normal(self.n_cells)
        eta = clamp_eta(self.X @ theta.beta + z_cell[self.cell_index])
        return rng.binomial(self.trials, inverse_logit(eta))

    def loglik(self, theta: ParamDraw, y: np.ndarray) -> float:
        """Conditional log likelihood; theta must carry the latent z."""
        if theta.z is None:
            raise ModelError("binomial likelihood is conditional on z; use marginal_loglik_mc")
        z_cell = np.asarray(theta.z, dtype=float)
        eta = self.X @ theta.beta + z_cell[self.cell_index]
        return binomial_loglik(y, self.trials, eta)

    def marginal_loglik_mc(
        self,
        theta: ParamDraw,
        y: np.ndarray,
        mz: int = 50,
        rng: np.random.Generator | None = None,
        eps: np.ndarray | None = None,
    ) -> float:
        """Monte-Carlo marginal log likelihood over ``mz`` latent draws.

        Pass ``eps`` (mz x n_cells standard normals) for common random
        numbers across evaluations.
        """
        if mz < 1:
            raise ModelError("mz must be >= 1")
        if eps is None:
            if rng is None:
                raise ModelError("need a random stream or frozen eps draws")
            eps = rng.standard_normal((mz, self.n_cells))
        chol = self._cell_chol(theta.cov_spec)
        z_cells = eps @ chol.T
        eta_rows = (self.X @ theta.beta)[None, :] + z_cells[:, self.cell_index]
        return log_mean_exp(binomial_loglik_rows(y, self.trials, eta_rows))

    def make_working_loglik(self, y, mz: int = 50, rng: np.random.Generator | None = None):
        """Marginal working-scale log likelihood with frozen latent draws
        (common random numbers across one optimisation)."""
        if rng is None:
            raise ModelError("binomial working likelihood needs a random stream to freeze")
        eps = rng.standard_normal((mz, self.n_cells))

        def working_loglik(w: np.ndarray) -> float:
            theta = self.layout.working_to_draw(w)
            return self.marginal_loglik_mc(theta, y, mz=mz, eps=eps)

        return working_loglik


@dataclass(frozen=True, eq=False)
class ReefDomain:
    """Reef survey plus the fixed transect/grid configuration."""

    survey: ReefSurvey
    nx: int = 10
    ny: int = 10
    transect_length: float = 500.0
    spacing: float = 5.0

    def as_transect(self, coord) -> Transect:
        """Coerce a design coordinate (Transect or (E, N, angle[, radius])
        tuple) to a Transect with the domain's length and spacing."""
        if isinstance(coord, Transect):
            return coord
        e, n, angle = coord[0], coord[1], coord[2]
        radius = coord[3] if len(coord) > 3 else 0.0
        return Transect((e, n), angle, self.transect_length, radius, self.spacing)


def prepare_design(spec: ModelSpec, domain, design, rng=None):
    """Dispatch a design onto its domain.

    Network domains expect site-id designs under the Gaussian family; reef
    domains expect transect coordinates under the binomial family.
    """
    if isinstance(domain, StreamNetwork):
        return PreparedGaussianDesign(spec, domain, design)
    if isinstance(domain, ReefDomain):
        transects = tuple(domain.as_transect(c) for c in design)
        return PreparedBinomialDesign(spec, domain, transects, rng=rng)
    raise ModelError(f"unsupported domain type {type(domain).__name__}")


# -- module-level convenience wrappers ------------------------------------------

def simulate_data(spec: ModelSpec, domain, design, theta: ParamDraw, rng) -> np.ndarray:
    """Draw a response vector for a design under theta.

    For jittered reef designs the same stream first realises the image
    locations, then the response.
    """
    return prepare_design(spec, domain, design, rng=rng).simulate(theta, rng)


def loglik(spec: ModelSpec, domain, design, theta: ParamDraw, y) -> float:
    """Exact log density: marginal for the Gaussian family, conditional on
    theta.z for the binomial family."""
    return prepare_design(spec, domain, design).loglik(theta, y)


def marginal_loglik_mc(spec: ModelSpec, domain, design, theta: ParamDraw, y,
                       mz: int = 50, rng=None) -> float:
    """Monte-Carlo marginal log likelihood (binomial family only; the
    Gaussian family integrates z analytically inside its covariance)."""
    prepared = prepare_design(spec, domain, design)
    if not isinstance(prepared, PreparedBinomialDesign):
        raise ModelError("marginal_loglik_mc applies to the binomial family only")
    return prepared.marginal_loglik_mc(theta, y, mz=mz, rng=rng)
