"""Sampling windows: GP emulation of the utility over a window space.

Phase I evaluates the median utility of the current design augmented by
one point per window over a training grid. Phase II fits a zero-mean GP
with the additive exponential kernel, choosing the nugget and the
per-dimension inverse length-scales by leave-one-out cross-validation.
Phase III normalises the predicted surface into design efficiencies and
extracts threshold sets ("sampling windows") and conditional slices for
in-field decisions.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import EmulatorError
from .network import Site, StreamNetwork
from .problems import ReefDomain, prepare_design
from .utility import estimate_utility
from .utils import as_generator


def additive_exp_kernel(x1: np.ndarray, x2: np.ndarray, inv_lengthscales) -> np.ndarray:
    """Additive kernel: sum over dimensions of exp(-zeta_j |x_j - y_j|)."""
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    zeta = np.asarray(inv_lengthscales, dtype=float)
    if x1.shape[1] != x2.shape[1] or x1.shape[1] != len(zeta):
        raise EmulatorError("kernel dimension mismatch")
    if np.any(zeta <= 0):
        raise EmulatorError("inverse length-scales must be positive")
    out = np.zeros((x1.shape[0], x2.shape[0]))
    for j in range(len(zeta)):
        out += np.exp(-zeta[j] * np.abs(x1[:, j : j + 1] - x2[None, :, j]))
    return out


def _loo_cv_score(K: np.ndarray, y: np.ndarray, nugget: float) -> float | None:
    """Leave-one-out shortcut score; None when the smoother is unusable.

    Uses residual_i = [(K + z0 I)^-1 y]_i / [(K + z0 I)^-1]_ii, which
    equals (y_i - f_i)/(1 - S_ii) for positive nuggets and stays defined
    at nugget zero (where the smoother interpolates).
    """
    n = len(y)
    try:
        factor = cho_factor(K + nugget * np.eye(n), lower=True)
    except LinAlgError:
        return None
    inv = cho_solve(factor, np.eye(n))
    diag = np.diag(inv)
    if np.any(diag <= 1e-12):
        return None
    resid = (inv @ y) / diag
    return float(np.mean(resid**2))


class GPEmulator(BaseEstimator):
    """Zero-mean GP emulator with an additive exponential kernel.

    Hyperparameters (nugget and per-dimension inverse length-scales) are
    selected by minimising the leave-one-out cross-validation error over
    a logarithmic grid, then refined by one local coordinate-descent
    pass. With a zero nugget the fitted surface interpolates the
    training responses.

    Parameters
    ----------
    nugget_grid : array-like or None
        Candidate nuggets as multiples of var(y); default
        {0, 1e-4, 1e-3, 1e-2, 1e-1, 1}.
    lengthscale_factors : array-like or None
        Candidate length-scales as multiples of the median pairwise
        distance per dimension; default logspace(0.1, 10, 5 points).
    nugget : float or None
        Fix the nugget instead of searching.
    inv_lengthscales : array-like or None
        Fix the inverse length-scales instead of searching.
    refine : bool
        Run the local refinement pass after the grid search.

    Attributes
    ----------
    inv_lengthscales_ : ndarray of shape (q,)
    nugget_ : float
    alpha_ : ndarray of shape (n,)
        Prediction weights [K + nugget I]^-1 y.
    cv_score_ : float
    """

    def __init__(
        self,
        nugget_grid=None,
        lengthscale_factors=None,
        nugget: float | None = None,
        inv_lengthscales=None,
        refine: bool = True,
    ):
        self.nugget_grid = nugget_grid
        self.lengthscale_factors = lengthscale_factors
        self.nugget = nugget
        self.inv_lengthscales = inv_lengthscales
        self.refine = refine

    # -- fitting -----------------------------------------------------------------

    def _candidate_grids(self, X, y):
        q = X.shape[1]
        var = float(np.var(y))
        if var == 0.0:
            var = 1.0
        nuggets = self.nugget_grid
        if nuggets is None:
            nuggets = np.array([0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0])
        nuggets = np.asarray(nuggets, dtype=float) * var
        if self.nugget is not None:
            nuggets = np.array([float(self.nugget)])

        factors = self.lengthscale_factors
        if factors is None:
            factors = np.logspace(-1.0, 1.0, 5)
        factors = np.asarray(factors, dtype=float)
        zeta_grids = []
        for j in range(q):
            d = np.abs(X[:, j : j + 1] - X[None, :, j])
            med = float(np.median(d[np.triu_indices_from(d, k=1)])) if X.shape[0] > 1 else 0.0
            if med <= 0:
                med = max(float(np.ptp(X[:, j])), 1.0)
            zeta_grids.append(1.0 / (factors * med))
        if self.inv_lengthscales is not None:
            fixed = np.asarray(self.inv_lengthscales, dtype=float)
            zeta_grids = [np.array([fixed[j]]) for j in range(q)]
        return nuggets, zeta_grids

    def _score(self, X, y, zeta, nugget):
        return _loo_cv_score(additive_exp_kernel(X, X, zeta), y, nugget)

    def fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim != 2 or len(X) != len(y):
            raise EmulatorError("X must be (n, q) with matching responses")
        if len(y) < 2:
            raise EmulatorError("need at least two training points")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise EmulatorError("training data must be finite")

        nuggets, zeta_grids = self._candidate_grids(X, y)
        best = None
        for zeta in itertools.product(*zeta_grids):
            K = additive_exp_kernel(X, X, np.array(zeta))
            for nug in nuggets:
                score = _loo_cv_score(K, y, float(nug))
                if score is None:
                    continue
                if best is None or score < best[0]:
                    best = (score, np.array(zeta), float(nug))
        if best is None:
            raise EmulatorError("every hyperparameter candidate was degenerate or non-PD")
        score, zeta, nug = best

        if self.refine:
            score, zeta, nug = self._refine(X, y, score, zeta, nug, nuggets)

        self.X_ = X
        self.y_ = y
        self.inv_lengthscales_ = zeta
        self.nugget_ = nug
        self.cv_score_ = score
        K = additive_exp_kernel(X, X, zeta)
        try:
            factor = cho_factor(K + nug * np.eye(len(y)), lower=True)
        except LinAlgError as exc:
            raise EmulatorError("selected kernel matrix is not positive definite") from exc
        self.alpha_ = cho_solve(factor, y)
        self._inv = cho_solve(factor, np.eye(len(y)))
        return self

    def _refine(self, X, y, score, zeta, nug, nuggets):
        """One coordinate-descent pass over multiplicative neighbours."""
        steps = np.array([0.5, 1.0 / 1.5, 1.5, 2.0])
        if self.inv_lengthscales is None:
            for j in range(len(zeta)):
                for s in steps:
                    cand = zeta.copy()
                    cand[j] = zeta[j] * s
                    sc = self._score(X, y, cand, nug)
                    if sc is not None and sc < score:
                        score, zeta = sc, cand
        if self.nugget is None:
            cands = [nug * s for s in steps if nug > 0]
            if nug == 0 and len(nuggets) > 1:
                cands = [min(n for n in nuggets if n > 0) / 10.0]
            for c in cands:
                sc = self._score(X, y, zeta, c)
                if sc is not None and sc < score:
                    score, nug = sc, c
        return score, zeta, nug

    # -- prediction ----------------------------------------------------------------

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "alpha_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.X_.shape[1]:
            raise EmulatorError("prediction dimension mismatch")
        return additive_exp_kernel(X, self.X_, self.inv_lengthscales_) @ self.alpha_

    def smoother_diagonal(self) -> np.ndarray:
        """S_ii of the training smoother S = K [K + nugget I]^-1."""
        check_is_fitted(self, "alpha_")
        K = additive_exp_kernel(self.X_, self.X_, self.inv_lengthscales_)
        return np.diag(K @ self._inv)


# -- window spaces ----------------------------------------------------------------

@dataclass(frozen=True)
class WindowDomain:
    """One window: a closed interval of a scalar design parameter.

    Network windows ("network_arc") live on a single stream segment; the
    position value is the upstream offset in meters, and the easting/
    northing anchors at the interval ends geo-locate interior points by
    linear interpolation (for covariate lookups).
    """

    name: str
    lower: float
    upper: float
    kind: str = "interval"
    segment_id: int | None = None
    xy_lower: tuple[float, float] | None = None
    xy_upper: tuple[float, float] | None = None

    def __post_init__(self):
        if self.upper <= self.lower:
            raise EmulatorError(f"window {self.name}: upper must exceed lower")
        if self.kind not in ("interval", "network_arc"):
            raise EmulatorError(f"window {self.name}: unknown kind {self.kind!r}")
        if self.kind == "network_arc" and (
            self.segment_id is None or self.xy_lower is None or self.xy_upper is None
        ):
            raise EmulatorError(f"window {self.name}: network windows need segment and anchors")

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def xy_at(self, value: float) -> tuple[float, float]:
        frac = (value - self.lower) / (self.upper - self.lower)
        x = self.xy_lower[0] + frac * (self.xy_upper[0] - self.xy_lower[0])
        y = self.xy_lower[1] + frac * (self.xy_upper[1] - self.xy_lower[1])
        return (x, y)


@dataclass(frozen=True)
class WindowSpace:
    windows: tuple[WindowDomain, ...]
    train_grid: np.ndarray
    predict_grid: np.ndarray

    def __post_init__(self):
        q = len(self.windows)
        for grid, label in ((self.train_grid, "training"), (self.predict_grid, "prediction")):
            if grid.ndim != 2 or grid.shape[1] != q:
                raise EmulatorError(f"{label} grid must be (n, {q})")
            for j, w in enumerate(self.windows):
                if np.any(grid[:, j] < w.lower) or np.any(grid[:, j] > w.upper):
                    raise EmulatorError(f"{label} grid leaves window {w.name}")
        if len(self.train_grid) < 2:
            raise EmulatorError("need at least two training points")

    @property
    def q(self) -> int:
        return len(self.windows)


def window_space_from_levels(windows, train_levels, predict_levels) -> WindowSpace:
    """Cartesian-product grids from per-window level vectors."""
    train = np.array(list(itertools.product(*train_levels)), dtype=float)
    predict = np.array(list(itertools.product(*predict_levels)), dtype=float)
    return WindowSpace(tuple(windows), train, predict)


# -- utility grid (Phase I) ---------------------------------------------------------

def _network_point_design(net: StreamNetwork, model, windows, values):
    """Extended network and design ids for one training point."""
    next_id = max(net.site_ids) + 1
    virtual = []
    for w, v in zip(windows, values):
        x, y = w.xy_at(float(v))
        covs = {}
        for name in model.fixed_effects:
            if name != "intercept":
                covs[name] = net.interpolate_covariate((x, y), name, k=3)
        seg = net.segment(w.segment_id)
        offset = min(max(float(v), 0.0), seg.length)
        virtual.append(Site(next_id, w.segment_id, offset, x, y, covs))
        next_id += 1
    net_ext = net.with_extra_sites(virtual)
    return net_ext, tuple(s.site_id for s in virtual)


def build_utility_grid(
    model,
    domain,
    space: WindowSpace,
    current,
    m_draws: int,
    rng,
    summary: str = "median",
    mz: int = 50,
    location_draws: int = 3,
    n_jobs: int = 1,
) -> np.ndarray:
    """Median utility of (grid point augmented by the current design) at
    every training point.

    River windows add one virtual site per window to the network (with
    3-NN interpolated covariates) and evaluate the union with the current
    site design. Reef windows treat the grid point as per-transect radii;
    the summary is averaged over ``location_draws`` independent jittered
    image layouts.
    """
    rng = as_generator(rng)
    current = tuple(current)
    streams = rng.spawn(len(space.train_grid))
    responses = np.empty(len(space.train_grid))

    for i, values in enumerate(space.train_grid):
        if isinstance(domain, StreamNetwork):
            net_ext, virtual_ids = _network_point_design(domain, model, space.windows, values)
            prepared = prepare_design(model, net_ext, current + virtual_ids)
            responses[i], _ = estimate_utility(
                prepared, m_draws, mode=summary, rng=streams[i], mz=mz, n_jobs=n_jobs
            )
        elif isinstance(domain, ReefDomain):
            if len(current) != space.q:
                raise EmulatorError("need one radius window per transect")
            coords = tuple(
                (t[0], t[1], t[2], float(r)) for t, r in zip(current, values)
            )
            r_draws = location_draws if np.any(values > 0) else 1
            vals = []
            for _ in range(r_draws):
                prepared = prepare_design(model, domain, coords, rng=streams[i])
                val, _ = estimate_utility(
                    prepared, m_draws, mode=summary, rng=streams[i], mz=mz, n_jobs=n_jobs
                )
                vals.append(val)
            responses[i] = float(np.mean(vals))
        else:
            raise EmulatorError(f"unsupported domain type {type(domain).__name__}")
    return responses


# -- efficiency surface (Phase III) ---------------------------------------------------

ARGMAX_NORM = "argmax_norm"
BASELINE_NORM = "baseline_norm"


@dataclass(frozen=True)
class EfficiencySurface:
    """Predicted utility surface normalised into design efficiencies.

    ``argmax_norm`` divides by the maximum predicted mean, so the best
    prediction point has efficiency exactly 1; ``baseline_norm`` divides
    by a supplied reference utility (e.g. the current design's), which
    can exceed 1. Threshold sets collect the points with eff >= t.
    """

    windows: tuple[WindowDomain, ...]
    points: np.ndarray
    f_hat: np.ndarray
    eff: np.ndarray
    mode: str
    baseline: float | None = None
    thresholds: Mapping[float, np.ndarray] = field(default_factory=dict)

    @property
    def q(self) -> int:
        return len(self.windows)

    @property
    def argmax_index(self) -> int:
        return int(np.argmax(self.eff))

    @property
    def argmax_point(self) -> np.ndarray:
        return self.points[self.argmax_index]

    def threshold_set(self, t: float) -> np.ndarray:
        return np.flatnonzero(self.eff >= t)

    def window_names(self) -> tuple[str, ...]:
        return tuple(w.name for w in self.windows)


def efficiency_surface(
    emulator: GPEmulator,
    space: WindowSpace,
    mode: str = ARGMAX_NORM,
    baseline: float | None = None,
    thresholds=(),
) -> EfficiencySurface:
    f_hat = emulator.predict(space.predict_grid)
    if mode == ARGMAX_NORM:
        denom = float(np.max(f_hat))
    elif mode == BASELINE_NORM:
        if baseline is None:
            raise EmulatorError("baseline_norm needs a baseline value")
        denom = float(baseline)
    else:
        raise EmulatorError(f"unknown normalisation mode {mode!r}")
    if denom <= 0:
        raise EmulatorError("non-positive efficiency normaliser")
    eff = f_hat / denom
    surface = EfficiencySurface(
        space.windows, space.predict_grid, f_hat, eff, mode,
        baseline if mode == BASELINE_NORM else None,
    )
    ts = {float(t): surface.threshold_set(float(t)) for t in thresholds}
    return EfficiencySurface(
        space.windows, space.predict_grid, f_hat, eff, mode, surface.baseline, ts
    )


@dataclass(frozen=True)
class ConditionalSlice:
    """Efficiencies over the free windows with the fixed ones pinned."""

    fixed: dict[str, float]
    free_windows: tuple[str, ...]
    indices: np.ndarray
    points: np.ndarray
    f_hat: np.ndarray
    eff: np.ndarray
    argmax_point: np.ndarray
    argmax_eff: float
    retained_efficiency: float

    def to_dict(self) -> dict:
        return {
            "fixed": self.fixed,
            "free_windows": list(self.free_windows),
            "indices": self.indices.tolist(),
            "points": self.points.tolist(),
            "f_hat": self.f_hat.tolist(),
            "eff": self.eff.tolist(),
            "argmax_point": self.argmax_point.tolist(),
            "argmax_eff": self.argmax_eff,
            "retained_efficiency": self.retained_efficiency,
        }


def conditional_slice(surface: EfficiencySurface, fixed: Mapping[str, float]) -> ConditionalSlice:
    """Pin a strict subset of windows (snapping to prediction-grid levels)
    and return the conditional surface, its argmax and the efficiency
    retained relative to the global optimum."""
    names = surface.window_names()
    unknown = [n for n in fixed if n not in names]
    if unknown:
        raise EmulatorError(f"unknown window name(s) {unknown}")
    if len(fixed) == len(names):
        raise EmulatorError("cannot fix every window; leave at least one free")

    snapped: dict[str, float] = {}
    mask = np.ones(len(surface.points), dtype=bool)
    for name, value in fixed.items():
        j = names.index(name)
        w = surface.windows[j]
        if not w.contains(float(value)):
            raise EmulatorError(
                f"value {value} outside window {name} domain [{w.lower}, {w.upper}]"
            )
        levels = np.unique(surface.points[:, j])
        level = float(levels[np.argmin(np.abs(levels - float(value)))])
        snapped[name] = level
        mask &= surface.points[:, j] == level

    free_idx = [j for j, n in enumerate(names) if n not in fixed]
    indices = np.flatnonzero(mask)
    pts = surface.points[np.ix_(indices, free_idx)]
    f_hat = surface.f_hat[indices]
    eff = surface.eff[indices]
    best = int(np.argmax(eff))
    retained = float(eff[best] / np.max(surface.eff))
    return ConditionalSlice(
        snapped,
        tuple(names[j] for j in free_idx),
        indices,
        pts,
        f_hat,
        eff,
        pts[best],
        float(eff[best]),
        retained,
    )


# -- persistence -----------------------------------------------------------------------

def save_surface(surface: EfficiencySurface, out_dir, extra_meta: dict | None = None):
    """Write surface.csv, contours.csv and meta.json into ``out_dir``."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = {f"coord_{j + 1}": surface.points[:, j] for j in range(surface.q)}
    cols["f_hat"] = surface.f_hat
    cols["eff"] = surface.eff
    pd.DataFrame(cols).to_csv(out / "surface.csv", index=False)

    rows = [
        {"t": t, "point_index": int(i)}
        for t in sorted(surface.thresholds)
        for i in surface.thresholds[t]
    ]
    pd.DataFrame(rows, columns=["t", "point_index"]).to_csv(out / "contours.csv", index=False)

    meta = {
        "mode": surface.mode,
        "baseline": surface.baseline,
        "q": surface.q,
        "windows": [
            {
                "name": w.name,
                "lower": w.lower,
                "upper": w.upper,
                "kind": w.kind,
                "segment_id": w.segment_id,
                "xy_lower": w.xy_lower,
                "xy_upper": w.xy_upper,
            }
            for w in surface.windows
        ],
        "thresholds": sorted(surface.thresholds),
        "argmax_index": surface.argmax_index,
        "argmax_point": surface.argmax_point.tolist(),
    }
    meta.update(extra_meta or {})
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_surface(surface_dir) -> tuple[EfficiencySurface, dict]:
    """Read a surface directory back; returns (surface, meta)."""
    from pathlib import Path

    out = Path(surface_dir)
    meta = json.loads((out / "meta.json").read_text())
    df = pd.read_csv(out / "surface.csv", float_precision="round_trip")
    q = meta["q"]
    points = df[[f"coord_{j + 1}" for j in range(q)]].to_numpy(float)
    windows = tuple(
        WindowDomain(
            w["name"], w["lower"], w["upper"], w["kind"], w["segment_id"],
            tuple(w["xy_lower"]) if w["xy_lower"] else None,
            tuple(w["xy_upper"]) if w["xy_upper"] else None,
        )
        for w in meta["windows"]
    )
    contours = pd.read_csv(out / "contours.csv")
    thresholds = {
        float(t): grp["point_index"].to_numpy(int)
        for t, grp in contours.groupby("t")
    }
    surface = EfficiencySurface(
        windows,
        points,
        df["f_hat"].to_numpy(float),
        df["eff"].to_numpy(float),
        meta["mode"],
        meta.get("baseline"),
        thresholds,
    )
    return surface, meta


def render_surface(surface: EfficiencySurface, path, thresholds=(0.8, 0.9, 0.95)):
    """Raster plot of the efficiency surface (1-D profile, 2-D heatmap with
    contour lines, or pairwise argmax slices for q >= 3)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    q = surface.q
    names = surface.window_names()
    if q == 1:
        fig, ax = plt.subplots(figsize=(6, 4))
        order = np.argsort(surface.points[:, 0])
        ax.plot(surface.points[order, 0], surface.eff[order])
        for t in thresholds:
            ax.axhline(t, ls="--", lw=0.6, color="grey")
        ax.set_xlabel(names[0])
        ax.set_ylabel("efficiency")
    elif q == 2:
        fig, ax = plt.subplots(figsize=(6, 5))
        _heatmap_pair(ax, surface.points[:, 0], surface.points[:, 1], surface.eff, thresholds)
        ax.set_xlabel(names[0])
        ax.set_ylabel(names[1])
    else:
        pairs = list(itertools.combinations(range(q), 2))
        fig, axes = plt.subplots(1, len(pairs), figsize=(5 * len(pairs), 4.2))
        axes = np.atleast_1d(axes)
        best = surface.argmax_point
        for ax, (a, b) in zip(axes, pairs):
            mask = np.ones(len(surface.points), dtype=bool)
            for j in range(q):
                if j not in (a, b):
                    levels = np.unique(surface.points[:, j])
                    level = levels[np.argmin(np.abs(levels - best[j]))]
                    mask &= surface.points[:, j] == level
            _heatmap_pair(
                ax,
                surface.points[mask, a],
                surface.points[mask, b],
                surface.eff[mask],
                thresholds,
            )
            ax.set_xlabel(names[a])
            ax.set_ylabel(names[b])
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _heatmap_pair(ax, xs, ys, eff, thresholds):
    xl = np.unique(xs)
    yl = np.unique(ys)
    grid = np.full((len(yl), len(xl)), np.nan)
    xi = np.searchsorted(xl, xs)
    yi = np.searchsorted(yl, ys)
    grid[yi, xi] = eff
    im = ax.imshow(
        grid,
        origin="lower",
        aspect="auto",
        extent=(xl.min(), xl.max(), yl.min(), yl.max()),
        cmap="viridis",
    )
    if len(xl) > 1 and len(yl) > 1 and np.all(np.isfinite(grid)):
        ax.contour(xl, yl, grid, levels=sorted(thresholds), colors="white", linewidths=0.8)
    ax.figure.colorbar(im, ax=ax, label="efficiency")
