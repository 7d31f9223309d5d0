"""Posterior approximation: MAP search, Laplace, and an MH baseline.

The Laplace approximation treats the posterior as Gaussian around the
MAP with covariance given by the inverse Hessian of the negative log
posterior. All of it operates on the unconstrained working scale (see
:mod:`spatialdesign.model`), where the binomial marginal likelihood is a
Monte-Carlo estimate made deterministic by freezing its latent draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .exceptions import PosteriorError
from .model import BINOMIAL
from .problems import prepare_design
from .utils import as_generator


@dataclass(frozen=True)
class MapResult:
    point: np.ndarray
    value: float
    converged: bool
    n_eval: int


@dataclass(frozen=True)
class GaussianPosterior:
    """Gaussian posterior summary: mean and (symmetric PD) covariance.

    ``hessian_floored`` records that the Hessian needed eigenvalue
    flooring; ``map_converged`` that the MAP search hit its iteration cap.
    """

    mean: np.ndarray
    covariance: np.ndarray
    hessian_floored: bool = False
    map_converged: bool = True

    def __post_init__(self):
        cov = np.asarray(self.covariance)
        if not np.allclose(cov, cov.T, atol=1e-8):
            raise PosteriorError("posterior covariance must be symmetric")
        if np.any(np.linalg.eigvalsh(cov) <= 0):
            raise PosteriorError("posterior covariance must be positive definite")


@dataclass(frozen=True)
class McmcChain:
    draws: np.ndarray
    acceptance_rate: float
    burn_in: int

    @property
    def mean(self) -> np.ndarray:
        return self.draws.mean(axis=0)

    @property
    def cov(self) -> np.ndarray:
        return np.cov(self.draws.T, ddof=1).reshape(self.draws.shape[1], -1)


def _guarded(log_post):
    def f(x):
        v = float(log_post(np.asarray(x, dtype=float)))
        if math.isnan(v):
            raise PosteriorError("log posterior returned NaN")
        return v

    return f


def find_map(log_post, init, max_iter: int = 2000, tol: float = 1e-8) -> MapResult:
    """Maximise ``log_post`` from ``init``: derivative-free simplex search
    followed by a coordinate polish.

    Constrained parameters are assumed already transformed to an
    unconstrained scale by the caller. The polish loops over coordinates
    with a bounded 1-D search and stops once a full pass improves the
    objective by less than ``tol``. Hitting the iteration cap is flagged,
    not fatal.
    """
    f = _guarded(log_post)
    x0 = np.atleast_1d(np.asarray(init, dtype=float))
    v0 = f(x0)
    if not math.isfinite(v0):
        raise PosteriorError("log posterior not finite at the initial point")
    neg = lambda x: -f(x)
    n_eval = 1

    res = optimize.minimize(
        neg,
        x0,
        method="Nelder-Mead",
        options={"maxiter": max_iter, "maxfev": 10 * max_iter, "xatol": 1e-6, "fatol": 1e-10},
    )
    x, best = (res.x, -res.fun) if -res.fun >= v0 else (x0, v0)
    n_eval += res.nfev
    converged = bool(res.success)

    for _ in range(5):
        improvement = 0.0
        for i in range(len(x)):
            def f1d(t, i=i):
                xt = x.copy()
                xt[i] = t
                return -f(xt)

            h = max(0.1, 0.01 * abs(x[i]))
            r = optimize.minimize_scalar(
                f1d, bounds=(x[i] - h, x[i] + h), method="bounded",
                options={"xatol": 1e-12},
            )
            n_eval += r.nfev
            if -r.fun > best:
                improvement += -r.fun - best
                best = -r.fun
                x = x.copy()
                x[i] = r.x
        if improvement < tol:
            break

    return MapResult(x, best, converged, n_eval)


def hessian_fd(log_post, theta_star, floor: float = 1e-8) -> tuple[np.ndarray, bool]:
    """Central-difference Hessian of -log_post at ``theta_star``.

    Steps are ``max(1e-4, 1e-4 |theta_i|)`` per coordinate. The result is
    symmetrised and, if not positive definite, projected by flooring its
    eigenvalues at ``floor`` (returned flag reports this).
    """
    f = _guarded(log_post)
    x = np.atleast_1d(np.asarray(theta_star, dtype=float))
    d = len(x)
    h = np.maximum(1e-4, 1e-4 * np.abs(x))
    f0 = f(x)

    def at(delta):
        v = f(x + delta)
        if not math.isfinite(v):
            raise PosteriorError("non-finite log posterior inside the Hessian stencil")
        return v

    H = np.empty((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        H[i, i] = -(at(ei) - 2.0 * f0 + at(-ei)) / h[i] ** 2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h[j]
            mixed = at(ei + ej) - at(ei - ej) - at(-ei + ej) + at(-ei - ej)
            H[i, j] = H[j, i] = -mixed / (4.0 * h[i] * h[j])
    H = 0.5 * (H + H.T)

    vals, vecs = np.linalg.eigh(H)
    if np.all(vals >= floor):
        return H, False
    vals = np.maximum(vals, floor)
    return vecs @ np.diag(vals) @ vecs.T, True


def laplace_from_logpost(log_post, init, max_iter: int = 2000) -> GaussianPosterior:
    """Gaussian posterior N(theta*, H(theta*)^-1) around the MAP."""
    map_res = find_map(log_post, init, max_iter=max_iter)
    H, floored = hessian_fd(log_post, map_res.point)
    vals, vecs = np.linalg.eigh(H)
    cov = vecs @ np.diag(1.0 / vals) @ vecs.T
    cov = 0.5 * (cov + cov.T)
    return GaussianPosterior(map_res.point, cov, floored, map_res.converged)


def laplace(spec, domain, design, y, mz: int = 50, rng=None, init=None) -> GaussianPosterior:
    """Laplace approximation for a design's posterior on the working scale.

    The binomial family replaces the intractable full-data likelihood by
    a Monte-Carlo marginal with latent draws frozen from ``rng`` so the
    objective stays deterministic during the optimisation.
    """
    prepared = prepare_design(spec, domain, design)
    return laplace_prepared(prepared, y, mz=mz, rng=rng, init=init)


def laplace_prepared(prepared, y, mz: int = 50, rng=None, init=None) -> GaussianPosterior:
    layout = prepared.layout
    if prepared.spec.family == BINOMIAL:
        rng = as_generator(rng)
    loglik = prepared.make_working_loglik(y, mz=mz, rng=rng)

    def log_post(w):
        lp = layout.working_log_prior(w)
        if not math.isfinite(lp):
            return -math.inf
        return lp + loglik(w)

    if init is None:
        init = layout.prior_gaussian()[0]
    return laplace_from_logpost(log_post, init)


def mh_sample(log_post, init, n_iter: int, proposal_scale: float, rng) -> McmcChain:
    """Gaussian random-walk Metropolis-Hastings.

    The proposal scale adapts toward ~0.3 acceptance during the burn-in
    (first 20% of iterations) and is frozen afterwards; only post-burn-in
    draws are returned.
    """
    if n_iter < 1:
        raise PosteriorError("n_iter must be >= 1")
    f = _guarded(log_post)
    rng = as_generator(rng)
    x = np.atleast_1d(np.asarray(init, dtype=float)).copy()
    lp = f(x)
    if not math.isfinite(lp):
        raise PosteriorError("log posterior not finite at the initial point")

    d = len(x)
    burn = int(0.2 * n_iter)
    scale = float(proposal_scale)
    draws = np.empty((n_iter - burn, d))
    accepted_post = 0
    window_acc, window_n = 0, 0

    for it in range(n_iter):
        prop = x + scale * rng.standard_normal(d)
        lp_prop = f(prop)
        accept = math.log(rng.uniform()) < lp_prop - lp
        if accept:
            x, lp = prop, lp_prop
        if it < burn:
            window_acc += accept
            window_n += 1
            if window_n == 50:
                rate = window_acc / window_n
                scale *= math.exp(rate - 0.3)
                window_acc, window_n = 0, 0
        else:
            draws[it - burn] = x
            accepted_post += accept

    post_n = n_iter - burn
    return McmcChain(draws, accepted_post / max(post_n, 1), burn)
