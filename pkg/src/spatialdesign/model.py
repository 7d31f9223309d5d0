"""Model specification, priors and likelihood families.

Two observation models are supported: a Gaussian response with identity
link whose covariance comes from the network components, and a binomial
response with logit link whose latent spatial effect lives on a coarse
grid. Parameters are ``theta = (beta, theta_z)`` where ``theta_z`` packs
the per-component partial sills and ranges plus the nugget.

Inference never works on the natural scale directly: every
positivity-constrained parameter (sills, ranges, nugget) is mapped to its
log, giving the unconstrained "working scale" shared by the MAP search,
the Hessian, the MCMC baseline and the KL utility. Lognormal priors are
exactly normal there; other priors carry their Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import stats

from .covariance import COMPONENTS, CovParams, CovSpec
from .exceptions import ModelError

GAUSSIAN = "gaussian_identity"
BINOMIAL = "binomial_logit"
FAMILIES = (GAUSSIAN, BINOMIAL)

INTERCEPT = "intercept"

# linear-predictor cap and probability clamp for the logit family
ETA_CAP = 30.0
PROB_EPS = 1e-12

# fixed stream for moment-matching non-Gaussian priors (cached per model)
_MOMENT_MATCH_SEED = 20240718
_MOMENT_MATCH_DRAWS = 10_000


@dataclass(frozen=True)
class Prior:
    """Independent prior for one scalar parameter.

    kind "normal": a = mean, b = variance.
    kind "lognormal": a = mean of log, b = variance of log.
    kind "uniform": a = low, b = high.

    Degenerate settings (zero variance, equal bounds) denote a point mass;
    such parameters are held fixed and excluded from inference.
    """

    kind: str
    a: float
    b: float

    def __post_init__(self):
        if self.kind not in ("normal", "lognormal", "uniform"):
            raise ModelError(f"unknown prior kind {self.kind!r}")
        if self.kind in ("normal", "lognormal") and self.b < 0:
            raise ModelError("prior variance must be non-negative")
        if self.kind == "uniform" and self.b < self.a:
            raise ModelError("uniform prior needs high >= low")

    @property
    def degenerate(self) -> bool:
        if self.kind == "uniform":
            return self.a == self.b
        return self.b == 0.0

    @property
    def point_value(self) -> float:
        if not self.degenerate:
            raise ModelError("prior is not a point mass")
        return math.exp(self.a) if self.kind == "lognormal" else self.a

    @property
    def positive_support(self) -> bool:
        if self.kind == "lognormal":
            return True
        if self.kind == "uniform":
            return self.a > 0 or (self.a == self.b == 0.0)
        return False

    def sample(self, rng: np.random.Generator, size=None):
        if self.degenerate:
            return np.full(size, self.point_value) if size else self.point_value
        if self.kind == "normal":
            return rng.normal(self.a, math.sqrt(self.b), size=size)
        if self.kind == "lognormal":
            return np.exp(rng.normal(self.a, math.sqrt(self.b), size=size))
        return rng.uniform(self.a, self.b, size=size)


_LOG_2PI = math.log(2.0 * math.pi)


def _normal_logpdf(w: float, mean: float, var: float) -> float:
    return -0.5 * ((w - mean) ** 2 / var + math.log(var) + _LOG_2PI)


def _working_log_prior(prior: Prior, positive: bool, w: float) -> float:
    """Log density of the prior on the working scale (with Jacobian)."""
    if positive:
        if prior.kind == "lognormal":
            return _normal_logpdf(w, prior.a, prior.b)
        if prior.kind == "uniform":
            lo, hi = prior.a, prior.b
            v = math.exp(w)
            if not lo <= v <= hi:
                return -math.inf
            return w - math.log(hi - lo)
        raise ModelError(f"prior kind {prior.kind!r} unsupported for a positive parameter")
    if prior.kind == "normal":
        return _normal_logpdf(w, prior.a, prior.b)
    if prior.kind == "uniform":
        if not prior.a <= w <= prior.b:
            return -math.inf
        return -math.log(prior.b - prior.a)
    # lognormal prior on an unconstrained parameter: natural scale is the
    # working scale, support (0, inf)
    if w <= 0:
        return -math.inf
    return float(stats.lognorm.logpdf(w, math.sqrt(prior.b), scale=math.exp(prior.a)))


def default_priors(fixed_effects, components) -> dict[str, Prior]:
    """Package defaults: N(0, 2^2) coefficients, lognormal(0,1) sills and
    ranges, lognormal(-1,1) nugget."""
    priors: dict[str, Prior] = {}
    for name in fixed_effects:
        priors[f"beta:{name}"] = Prior("normal", 0.0, 4.0)
    for comp in components:
        priors[f"{comp}:sill"] = Prior("lognormal", 0.0, 1.0)
        priors[f"{comp}:range"] = Prior("lognormal", 0.0, 1.0)
    priors["nugget"] = Prior("lognormal", -1.0, 1.0)
    return priors


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Likelihood family, fixed effects, covariance structure and priors.

    ``fixed_effects`` are covariate names forming the columns of X; the
    name "intercept" denotes the constant column. ``priors`` must contain
    one entry per parameter: ``beta:<name>``, ``<component>:sill``,
    ``<component>:range`` and ``nugget``.
    """

    family: str
    fixed_effects: tuple[str, ...]
    components: tuple[str, ...]
    priors: Mapping[str, Prior]
    trials_per_image: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ModelError(f"unknown family {self.family!r}")
        if self.family == BINOMIAL and not self.trials_per_image:
            raise ModelError("binomial family needs trials_per_image")
        if len(set(self.components)) != len(self.components):
            raise ModelError("duplicate covariance components")
        for comp in self.components:
            if comp not in COMPONENTS:
                raise ModelError(f"unknown covariance component {comp!r}")
        if not self.fixed_effects:
            raise ModelError("need at least one fixed effect")
        missing = [n for n in self.param_names if n not in self.priors]
        if missing:
            raise ModelError(f"missing priors for {missing}")
        for name, positive in zip(self.param_names, self.param_positive):
            prior = self.priors[name]
            if positive and not prior.degenerate and not prior.positive_support:
                raise ModelError(f"prior for {name} must have positive support")

    @property
    def param_names(self) -> tuple[str, ...]:
        names = [f"beta:{n}" for n in self.fixed_effects]
        for comp in self.components:
            names += [f"{comp}:sill", f"{comp}:range"]
        names.append("nugget")
        return tuple(names)

    @property
    def param_positive(self) -> tuple[bool, ...]:
        flags = [False] * len(self.fixed_effects)
        flags += [True, True] * len(self.components)
        flags.append(True)
        return tuple(flags)

    @property
    def n_beta(self) -> int:
        return len(self.fixed_effects)

    def layout(self) -> "ParamLayout":
        return ParamLayout(self)


@dataclass(frozen=True)
class ParamDraw:
    """One realisation of theta: coefficients, covariance parameters and
    optionally the latent spatial effect z."""

    beta: np.ndarray
    cov_spec: CovSpec
    z: np.ndarray | None = None

    def with_z(self, z: np.ndarray) -> "ParamDraw":
        return ParamDraw(self.beta, self.cov_spec, np.asarray(z, dtype=float))


class ParamLayout:
    """Mapping between natural parameters and the free working vector.

    Point-mass parameters are pinned; the rest form the working vector in
    declaration order, with positivity-constrained entries stored as logs.
    """

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.names = spec.param_names
        self.positive = spec.param_positive
        self.free = tuple(not spec.priors[n].degenerate for n in self.names)
        self.fixed_values = {
            n: spec.priors[n].point_value for n, f in zip(self.names, self.free) if not f
        }
        self.free_names = tuple(n for n, f in zip(self.names, self.free) if f)
        self.n_free = len(self.free_names)
        self._prior_gaussian: tuple[np.ndarray, np.ndarray] | None = None
        # vectorised transform plumbing (these run inside every MAP/MH step)
        self._free_idx = np.array([i for i, f in enumerate(self.free) if f], dtype=int)
        self._pos_free = np.array(
            [p for p, f in zip(self.positive, self.free) if f], dtype=bool
        )
        self._natural_template = np.array(
            [0.0 if f else self.fixed_values[n] for n, f in zip(self.names, self.free)]
        )

    # -- vector plumbing ------------------------------------------------------

    def natural_to_draw(self, values: np.ndarray) -> ParamDraw:
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self.names),):
            raise ModelError(f"expected {len(self.names)} natural parameters")
        p = self.spec.n_beta
        beta = values[:p]
        comps = {}
        for i, comp in enumerate(self.spec.components):
            sill, rng_ = values[p + 2 * i], values[p + 2 * i + 1]
            comps[comp] = CovParams(sill, rng_)
        return ParamDraw(beta, CovSpec(comps, nugget=values[-1]))

    def draw_to_natural(self, draw: ParamDraw) -> np.ndarray:
        vals = list(np.asarray(draw.beta, dtype=float))
        for comp in self.spec.components:
            params = draw.cov_spec.components[comp]
            vals += [params.partial_sill, params.range_param]
        vals.append(draw.cov_spec.nugget)
        return np.array(vals)

    def working_to_natural(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n_free,):
            raise ModelError(f"expected {self.n_free} working parameters")
        vals = w.copy()
        vals[self._pos_free] = np.exp(vals[self._pos_free])
        out = self._natural_template.copy()
        out[self._free_idx] = vals
        return out

    def natural_to_working(self, values: np.ndarray) -> np.ndarray:
        vals = np.asarray(values, dtype=float)[self._free_idx].copy()
        vals[self._pos_free] = np.log(vals[self._pos_free])
        return vals

    def working_to_draw(self, w: np.ndarray) -> ParamDraw:
        return self.natural_to_draw(self.working_to_natural(w))

    def draw_to_working(self, draw: ParamDraw) -> np.ndarray:
        return self.natural_to_working(self.draw_to_natural(draw))

    # -- prior ----------------------------------------------------------------

    def sample_natural(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([self.spec.priors[n].sample(rng) for n in self.names])

    def working_log_prior(self, w: np.ndarray) -> float:
        w = np.asarray(w, dtype=float)
        total = 0.0
        j = 0
        for i, name in enumerate(self.names):
            if not self.free[i]:
                continue
            total += _working_log_prior(self.spec.priors[name], self.positive[i], w[j])
            j += 1
            if not math.isfinite(total):
                return -math.inf
        return total

    def prior_gaussian(self) -> tuple[np.ndarray, np.ndarray]:
        """Gaussian summary (mean, covariance) of the prior on the working
        scale: exact for normal/lognormal entries, moment-matched from
        10^4 transformed draws otherwise. Cached per layout."""
        if self._prior_gaussian is not None:
            return self._prior_gaussian
        mean = np.empty(self.n_free)
        var = np.empty(self.n_free)
        rng = np.random.default_rng(_MOMENT_MATCH_SEED)
        j = 0
        for i, name in enumerate(self.names):
            if not self.free[i]:
                continue
            prior = self.spec.priors[name]
            exact = (prior.kind == "lognormal" and self.positive[i]) or (
                prior.kind == "normal" and not self.positive[i]
            )
            if exact:
                mean[j], var[j] = prior.a, prior.b
            else:
                draws = np.asarray(prior.sample(rng, size=_MOMENT_MATCH_DRAWS), dtype=float)
                if self.positive[i]:
                    draws = np.log(draws)
                mean[j], var[j] = draws.mean(), draws.var(ddof=1)
            j += 1
        self._prior_gaussian = (mean, np.diag(var))
        return self._prior_gaussian


def draw_prior(spec: ModelSpec, rng: np.random.Generator) -> ParamDraw:
    """Independent draw from every declared prior."""
    layout = spec.layout()
    return layout.natural_to_draw(layout.sample_natural(rng))


# -- family primitives ---------------------------------------------------------

def gaussian_loglik(y: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> float:
    """Exact N(mu, sigma) log density via Cholesky solves."""
    from .covariance import cholesky_factor, chol_logdet, chol_solve

    y = np.asarray(y, dtype=float)
    r = y - np.asarray(mu, dtype=float)
    factor = cholesky_factor(sigma)
    quad = float(r @ chol_solve(factor, r))
    n = len(y)
    return -0.5 * (n * math.log(2.0 * math.pi) + chol_logdet(factor) + quad)


def clamp_eta(eta: np.ndarray) -> np.ndarray:
    return np.clip(eta, -ETA_CAP, ETA_CAP)


def inverse_logit(eta: np.ndarray) -> np.ndarray:
    q = 1.0 / (1.0 + np.exp(-clamp_eta(np.asarray(eta, dtype=float))))
    return np.clip(q, PROB_EPS, 1.0 - PROB_EPS)


def binomial_loglik(y: np.ndarray, trials: np.ndarray, eta: np.ndarray) -> float:
    """Conditional binomial log likelihood given the full linear predictor
    (including the latent effect)."""
    y = np.asarray(y)
    trials = np.asarray(trials)
    if np.any(y < 0) or np.any(y > trials):
        raise ModelError("binomial response outside [0, trials]")
    q = inverse_logit(eta)
    return float(np.sum(stats.binom.logpmf(y, trials, q)))


def binomial_loglik_rows(y: np.ndarray, trials: np.ndarray, eta_rows: np.ndarray) -> np.ndarray:
    """Vectorised conditional log likelihood, one value per row of eta."""
    q = inverse_logit(eta_rows)
    return stats.binom.logpmf(y[None, :], trials[None, :], q).sum(axis=1)


def log_mean_exp(values: np.ndarray) -> float:
    """log(mean(exp(values))) with max-shift stabilisation."""
    values = np.asarray(values, dtype=float)
    m = np.max(values)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.mean(np.exp(values - m))))
