"""KL-divergence design utility and its Monte-Carlo summaries.

One utility draw simulates parameters from the prior and data from the
likelihood, fits the posterior (Laplace by default, MH as a validation
baseline) and scores the design by the KL divergence of the posterior
from the prior, evaluated between Gaussians on the working scale. The
expected utility is the mean or median of M such draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.linalg import solve_triangular

from .covariance import cholesky_lower
from .exceptions import CovarianceError, ModelError, PosteriorError, UtilityError
from .model import BINOMIAL
from .posterior import laplace_prepared, mh_sample
from .utils import as_generator


def kl_gaussian(mu0, sigma0, mu1, sigma1) -> float:
    """KL divergence of N(mu1, sigma1) from N(mu0, sigma0).

    With (mu0, sigma0) the prior and (mu1, sigma1) the posterior this is
    the divergence of the posterior from the prior:
    0.5 [ (mu0-mu1)' S0^-1 (mu0-mu1) + tr(S0^-1 S1) - ln(|S1|/|S0|) - k ].
    """
    mu0 = np.atleast_1d(np.asarray(mu0, dtype=float))
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    sigma0 = np.atleast_2d(np.asarray(sigma0, dtype=float))
    sigma1 = np.atleast_2d(np.asarray(sigma1, dtype=float))
    k = len(mu0)
    if mu1.shape != (k,) or sigma0.shape != (k, k) or sigma1.shape != (k, k):
        raise ValueError("dimension mismatch between means and covariances")
    if not np.allclose(sigma0, sigma0.T, atol=1e-10) or not np.allclose(
        sigma1, sigma1.T, atol=1e-10
    ):
        raise CovarianceError("covariances must be symmetric")
    L0 = cholesky_lower(sigma0)
    L1 = cholesky_lower(sigma1)
    diff = solve_triangular(L0, mu0 - mu1, lower=True)
    cross = solve_triangular(L0, L1, lower=True)
    logdet0 = 2.0 * float(np.sum(np.log(np.diag(L0))))
    logdet1 = 2.0 * float(np.sum(np.log(np.diag(L1))))
    return 0.5 * (float(diff @ diff) + float((cross**2).sum()) - (logdet1 - logdet0) - k)


@dataclass(frozen=True)
class UtilitySample:
    """The Monte-Carlo utility draws behind one design summary."""

    draws: np.ndarray
    design: tuple
    summary_mode: str
    n_failed: int = 0

    def __post_init__(self):
        if len(self.draws) < 1:
            raise UtilityError("need at least one utility draw")
        if not np.all(np.isfinite(self.draws)):
            raise UtilityError("utility draws must be finite")

    @property
    def summary(self) -> float:
        if self.summary_mode == "mean":
            return float(np.mean(self.draws))
        return float(np.median(self.draws))

    @property
    def mc_se(self) -> float:
        if len(self.draws) < 2:
            return float("nan")
        return float(np.std(self.draws, ddof=1) / math.sqrt(len(self.draws)))


def utility_draw(
    prepared,
    rng,
    method: str = "laplace",
    mz: int = 50,
    mh_iterations: int = 20_000,
    mh_scale: float | None = None,
) -> float:
    """One u(d, theta, y) draw: KL of the fitted posterior from the prior.

    ``prepared`` is a prepared design (see :mod:`spatialdesign.problems`).
    The Laplace fit is initialised at the drawn theta; the MH baseline
    targets the same working-scale posterior.
    """
    rng = as_generator(rng)
    layout = prepared.layout
    theta_nat = layout.sample_natural(rng)
    theta = layout.natural_to_draw(theta_nat)
    y = prepared.simulate(theta, rng)
    mu0, sigma0 = layout.prior_gaussian()
    init = layout.natural_to_working(theta_nat)

    if method == "laplace":
        post = laplace_prepared(prepared, y, mz=mz, rng=rng, init=init)
        mu1, sigma1 = post.mean, post.covariance
    elif method == "mh":
        loglik = prepared.make_working_loglik(
            y, mz=mz, rng=rng if prepared.spec.family == BINOMIAL else None
        )

        def log_post(w):
            lp = layout.working_log_prior(w)
            if not math.isfinite(lp):
                return -math.inf
            return lp + loglik(w)

        scale = mh_scale
        if scale is None:
            scale = 0.5 * float(np.sqrt(np.diag(sigma0)).mean())
        chain = mh_sample(log_post, init, mh_iterations, scale, rng)
        mu1, sigma1 = chain.mean, chain.cov
    else:
        raise ModelError(f"unknown posterior method {method!r}")

    return kl_gaussian(mu0, sigma0, mu1, sigma1)


def _try_draw(prepared, stream, kwargs):
    try:
        u = utility_draw(prepared, stream, **kwargs)
        return u if math.isfinite(u) else None
    except (PosteriorError, CovarianceError, UtilityError):
        return None


def estimate_utility(
    prepared,
    m: int,
    mode: str = "median",
    rng=None,
    max_failure_frac: float = 0.05,
    n_jobs: int = 1,
    **draw_kwargs,
) -> tuple[float, UtilitySample]:
    """Monte-Carlo expected utility over ``m`` independent draws.

    ``mode`` "mean" gives the empirical mean, "median" the sample median
    (even m: average of the central pair). Draws whose posterior fit
    fails are excluded; more than ``max_failure_frac`` failures raise.
    The m draws use split child streams, so results are reproducible and
    independent of evaluation order (set ``n_jobs`` to parallelise).
    """
    if m < 1:
        raise UtilityError("m must be >= 1")
    if mode not in ("mean", "median"):
        raise UtilityError(f"unknown summary mode {mode!r}")
    rng = as_generator(rng)
    streams = rng.spawn(m)
    if n_jobs == 1:
        results = [_try_draw(prepared, s, draw_kwargs) for s in streams]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_try_draw)(prepared, s, draw_kwargs) for s in streams
        )
    draws = np.array([r for r in results if r is not None])
    n_failed = m - len(draws)
    if n_failed > max_failure_frac * m:
        raise UtilityError(
            f"{n_failed}/{m} utility draws failed (tolerance {max_failure_frac:.0%})"
        )
    sample = UtilitySample(draws, getattr(prepared, "coords", ()), mode, n_failed)
    return sample.summary, sample


def estimate_design_utility(spec, domain, design, m: int, mode: str = "median",
                            rng=None, **kwargs) -> tuple[float, UtilitySample]:
    """Convenience wrapper: prepare the design on its domain, then estimate."""
    from .problems import prepare_design

    rng = as_generator(rng)
    prepared = prepare_design(spec, domain, design, rng=rng)
    return estimate_utility(prepared, m, mode=mode, rng=rng, **kwargs)


def export_utility_csv(sample: UtilitySample, path):
    """Audit export: one row per draw, columns ``draw_index,utility``."""
    pd.DataFrame(
        {"draw_index": np.arange(len(sample.draws)), "utility": sample.draws}
    ).to_csv(path, index=False)
