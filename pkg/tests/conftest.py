import numpy as np
import pytest

from spatialdesign.covariance import CovParams, CovSpec
from spatialdesign.model import ModelSpec, Prior, default_priors
from spatialdesign.network import Segment, Site, StreamNetwork


@pytest.fixture
def y_network():
    """Two order-1 headwaters (1, 2) joining into an order-2 trunk (3).

    Trunk drains to the outlet; lengths 10 m each. Sites: 101 on branch 1
    (2 m above the junction), 102 on branch 2 (3 m above the junction),
    103 on the trunk (4 m below the junction).
    """
    segments = [
        Segment(1, 3, 10.0, 1),
        Segment(2, 3, 10.0, 1),
        Segment(3, None, 10.0, 2),
    ]
    sites = [
        Site(101, 1, 2.0, -1.0, 12.0, {"temp": 10.0}),
        Site(102, 2, 3.0, 1.0, 13.0, {"temp": 12.0}),
        Site(103, 3, 6.0, 0.0, 6.0, {"temp": 14.0}),
    ]
    return StreamNetwork(segments, sites)


@pytest.fixture
def line_network():
    """A single 100 m segment with three sites along it."""
    segments = [Segment(1, None, 100.0, 1)]
    sites = [
        Site(1, 1, 10.0, 10.0, 0.0, {"temp": 1.0}),
        Site(2, 1, 14.0, 14.0, 0.0, {"temp": 2.0}),
        Site(3, 1, 50.0, 50.0, 0.0, {"temp": 3.0}),
    ]
    return StreamNetwork(segments, sites)


def random_tree_network(
    rng: np.random.Generator,
    n_segments: int = 7,
    n_sites: int = 8,
    covariates=("temp",),
) -> StreamNetwork:
    """Random forest-shaped network with consistent Shreve orders."""
    downstream = {0: None}
    for sid in range(1, n_segments):
        downstream[sid] = int(rng.integers(0, sid))
    children = {s: [] for s in range(n_segments)}
    for s, d in downstream.items():
        if d is not None:
            children[d].append(s)

    order: dict[int, int] = {}

    def fill(s):
        if not children[s]:
            order[s] = 1
        else:
            for c in children[s]:
                fill(c)
            order[s] = sum(order[c] for c in children[s])

    fill(0)
    lengths = rng.uniform(50.0, 500.0, size=n_segments)
    segments = [Segment(s, downstream[s], float(lengths[s]), order[s]) for s in range(n_segments)]

    sites = []
    for i in range(n_sites):
        seg = int(rng.integers(0, n_segments))
        offset = float(rng.uniform(0.0, lengths[seg]))
        covs = {c: float(rng.normal()) for c in covariates}
        sites.append(
            Site(100 + i, seg, offset, float(rng.uniform(0, 1000)), float(rng.uniform(0, 1000)), covs)
        )
    return StreamNetwork(segments, sites)


@pytest.fixture
def reef_domain():
    """Small reef: 12x12 survey grid over [0,100]^2, planar depth field,
    short 20 m transects (4 images each) on a 4x4 covariance grid."""
    from spatialdesign.problems import ReefDomain
    from spatialdesign.transect import ReefSurvey

    xs, ys = np.meshgrid(np.linspace(0, 100, 12), np.linspace(0, 100, 12))
    pts = np.column_stack([xs.ravel(), ys.ravel()])
    depth = 20.0 + 0.1 * pts[:, 0] + 0.05 * pts[:, 1]
    survey = ReefSurvey(pts, depth)
    return ReefDomain(survey, nx=4, ny=4, transect_length=20.0, spacing=5.0)


def binomial_spec(
    fixed_effects=("intercept", "depth"),
    trials=20,
    priors_override=None,
) -> ModelSpec:
    priors = default_priors(fixed_effects, ("euclidean",))
    if priors_override:
        priors.update(priors_override)
    return ModelSpec(
        "binomial_logit", tuple(fixed_effects), ("euclidean",), priors,
        trials_per_image=trials,
    )


def gaussian_spec(
    fixed_effects=("intercept",),
    components=("taildown",),
    priors_override=None,
) -> ModelSpec:
    priors = default_priors(fixed_effects, components)
    if priors_override:
        priors.update(priors_override)
    return ModelSpec("gaussian_identity", tuple(fixed_effects), tuple(components), priors)


def point_prior(value: float) -> Prior:
    return Prior("uniform", value, value)


def td_cov_spec(sill=1.0, range_=50.0, nugget=0.1) -> CovSpec:
    return CovSpec({"taildown": CovParams(sill, range_)}, nugget=nugget)
