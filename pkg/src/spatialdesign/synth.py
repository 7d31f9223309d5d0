"""Synthetic surrogate datasets: river networks and reef depth fields.

The real monitoring datasets behind the two case studies are not
redistributable, so the CLI ships generators with the same shape: a
branching river network with candidate sites carrying four covariates
(stream slope, elevation, watershed area, air temperature), and a reef
survey point cloud with a smooth depth field inside a configured range.
"""

from __future__ import annotations

import numpy as np

from .network import Segment, Site, StreamNetwork
from .transect import ReefSurvey
from .utils import as_generator


def synth_river(
    n_segments: int = 9,
    n_sites: int = 15,
    seed: int = 0,
    mean_length: float = 1500.0,
) -> StreamNetwork:
    """Random binary river tree embedded in the plane.

    Segment lengths are lognormal around ``mean_length``; Shreve orders
    are recomputed from the leaves, and the four covariates echo the
    river case study: slope and watershed area vary by segment, elevation
    follows distance to the outlet, air temperature is a smooth planar
    field.
    """
    rng = as_generator(seed)
    downstream: dict[int, int | None] = {0: None}
    children: dict[int, list[int]] = {0: []}
    for sid in range(1, n_segments):
        open_parents = [s for s in children if len(children[s]) < 2]
        parent = int(open_parents[rng.integers(0, len(open_parents))])
        downstream[sid] = parent
        children[parent].append(sid)
        children[sid] = []

    order: dict[int, int] = {}

    def fill_order(s: int) -> int:
        if not children[s]:
            order[s] = 1
        else:
            order[s] = sum(fill_order(c) for c in children[s])
        return order[s]

    fill_order(0)

    lengths = {s: float(rng.lognormal(np.log(mean_length), 0.4)) for s in downstream}

    # plane embedding: downstream end of the outlet at the origin, children
    # diverge from their parent's upstream end
    down_xy: dict[int, np.ndarray] = {0: np.array([0.0, 0.0])}
    direction: dict[int, float] = {0: np.pi / 2}
    up_xy: dict[int, np.ndarray] = {}

    def embed(s: int):
        d = direction[s]
        up_xy[s] = down_xy[s] + lengths[s] * np.array([np.cos(d), np.sin(d)])
        kids = children[s]
        if len(kids) == 1:
            spreads = [rng.uniform(-0.25, 0.25)]
        else:
            spreads = [rng.uniform(0.3, 0.8), -rng.uniform(0.3, 0.8)]
        for c, spread in zip(kids, spreads):
            down_xy[c] = up_xy[s]
            direction[c] = d + spread
            embed(c)

    embed(0)

    segments = [
        Segment(s, downstream[s], lengths[s], order[s]) for s in sorted(downstream)
    ]

    # segment-level covariates
    dist_out = {}

    def fill_dist(s: int) -> float:
        if s not in dist_out:
            parent = downstream[s]
            dist_out[s] = 0.0 if parent is None else fill_dist(parent) + lengths[parent]
        return dist_out[s]

    slope = {s: 0.5 / order[s] + float(rng.normal(0, 0.05)) for s in downstream}
    area = {s: 10.0 * order[s] * float(rng.lognormal(0, 0.2)) for s in downstream}

    # air temperature is emitted as a mean-zero anomaly so it is usable as
    # a regression covariate without further centering
    bumps = rng.uniform(-4000, 8000, size=(3, 2))
    bump_amp = rng.uniform(2.0, 5.0, size=3) * rng.choice([-1.0, 1.0], size=3)
    t_grad = rng.uniform(-8e-4, 8e-4, size=2)

    def air_temp(x: float, y: float) -> float:
        v = t_grad[0] * x + t_grad[1] * y
        for b, amp in zip(bumps, bump_amp):
            v += amp * np.exp(-((x - b[0]) ** 2 + (y - b[1]) ** 2) / (2 * 2000.0**2))
        return float(v)

    sites = []
    seg_ids = sorted(downstream)
    for i in range(n_sites):
        s = int(seg_ids[rng.integers(0, len(seg_ids))])
        offset = float(rng.uniform(0.05, 0.95) * lengths[s])
        frac = offset / lengths[s]
        xy = down_xy[s] + frac * (up_xy[s] - down_xy[s])
        elevation = 400.0 + 0.02 * (fill_dist(s) + offset) + float(rng.normal(0, 5.0))
        sites.append(
            Site(
                100 + i,
                s,
                offset,
                float(xy[0]),
                float(xy[1]),
                {
                    "stream_slope": slope[s],
                    "elevation": elevation,
                    "watershed_area": area[s],
                    "air_temp": air_temp(xy[0], xy[1]),
                },
            )
        )
    return StreamNetwork(segments, sites)


def synth_reef(
    n_points: int = 900,
    seed: int = 0,
    depth_range: tuple[float, float] = (12.0, 50.0),
    extent: tuple[float, float, float, float] = (0.0, 1000.0, 0.0, 800.0),
) -> ReefSurvey:
    """Scattered survey points with a smooth random depth field scaled to
    exactly span ``depth_range``."""
    rng = as_generator(seed)
    xmin, xmax, ymin, ymax = extent
    pts = np.column_stack(
        [rng.uniform(xmin, xmax, n_points), rng.uniform(ymin, ymax, n_points)]
    )
    centres = np.column_stack(
        [rng.uniform(xmin, xmax, 6), rng.uniform(ymin, ymax, 6)]
    )
    weights = rng.uniform(-1.0, 1.0, 6)
    scale = 0.35 * max(xmax - xmin, ymax - ymin)
    field = np.zeros(n_points)
    for c, w in zip(centres, weights):
        field += w * np.exp(-np.sum((pts - c) ** 2, axis=1) / (2 * scale**2))
    lo, hi = depth_range
    span = field.max() - field.min()
    depth = lo + (field - field.min()) / span * (hi - lo)
    return ReefSurvey(pts, depth)
