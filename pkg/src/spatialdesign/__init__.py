"""Bayesian optimal design and sampling windows for spatial processes."""

__version__ = "0.1.0"

from .covariance import CovParams, CovSpec, assemble_sigma, exp_cov
from .emulator import (
    ConditionalSlice,
    EfficiencySurface,
    GPEmulator,
    WindowDomain,
    WindowSpace,
    build_utility_grid,
    conditional_slice,
    efficiency_surface,
    window_space_from_levels,
)
from .model import ModelSpec, ParamDraw, Prior, default_priors, draw_prior
from .network import Segment, Site, StreamNetwork, load_network, save_network
from .posterior import GaussianPosterior, McmcChain, find_map, hessian_fd, laplace, mh_sample
from .problems import (
    PreparedBinomialDesign,
    PreparedGaussianDesign,
    ReefDomain,
    loglik,
    marginal_loglik_mc,
    prepare_design,
    simulate_data,
)
from .search import (
    CoordinateExchange,
    Design,
    UtilityEvaluator,
    ace_p,
    exhaustive_oracle,
    wilcoxon_p,
)
from .transect import ReefSurvey, Transect, coarsen_to_grid, jitter_points, transect_points
from .utility import (
    UtilitySample,
    estimate_design_utility,
    estimate_utility,
    kl_gaussian,
    utility_draw,
)

__all__ = [
    "CovParams",
    "CovSpec",
    "assemble_sigma",
    "exp_cov",
    "ConditionalSlice",
    "EfficiencySurface",
    "GPEmulator",
    "WindowDomain",
    "WindowSpace",
    "build_utility_grid",
    "conditional_slice",
    "efficiency_surface",
    "window_space_from_levels",
    "ModelSpec",
    "ParamDraw",
    "Prior",
    "default_priors",
    "draw_prior",
    "Segment",
    "Site",
    "StreamNetwork",
    "load_network",
    "save_network",
    "GaussianPosterior",
    "McmcChain",
    "find_map",
    "hessian_fd",
    "laplace",
    "mh_sample",
    "PreparedBinomialDesign",
    "PreparedGaussianDesign",
    "ReefDomain",
    "loglik",
    "marginal_loglik_mc",
    "prepare_design",
    "simulate_data",
    "CoordinateExchange",
    "Design",
    "UtilityEvaluator",
    "ace_p",
    "exhaustive_oracle",
    "wilcoxon_p",
    "ReefSurvey",
    "Transect",
    "coarsen_to_grid",
    "jitter_points",
    "transect_points",
    "UtilitySample",
    "estimate_design_utility",
    "estimate_utility",
    "kl_gaussian",
    "utility_draw",
]
