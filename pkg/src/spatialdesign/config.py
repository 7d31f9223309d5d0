"""Run configuration: one YAML file per run, validated exhaustively.

See docs/config.md for the full schema. Every command reads the shared
``seed``, ``data`` and ``model`` sections plus its own section; unknown
families, missing files and malformed priors are collected into a single
error list so a bad file fails with every problem named at once.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .covariance import COMPONENTS
from .exceptions import ConfigError
from .model import BINOMIAL, FAMILIES, GAUSSIAN, ModelSpec, Prior, default_priors
from .network import StreamNetwork, load_network
from .problems import ReefDomain
from .transect import load_reef


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    return cfg


def _parse_prior(name: str, raw, errors: list[str]) -> Prior | None:
    if not isinstance(raw, dict) or "kind" not in raw:
        errors.append(f"prior {name!r} must be a mapping with a 'kind'")
        return None
    kind = raw["kind"]
    try:
        if kind == "normal":
            return Prior("normal", float(raw["mean"]), float(raw["variance"]))
        if kind == "lognormal":
            return Prior("lognormal", float(raw["mu"]), float(raw["sigma2"]))
        if kind == "uniform":
            return Prior("uniform", float(raw["low"]), float(raw["high"]))
        if kind == "point":
            v = float(raw["value"])
            return Prior("uniform", v, v)
    except (KeyError, TypeError, ValueError) as exc:
        errors.append(f"prior {name!r}: {exc}")
        return None
    errors.append(f"prior {name!r}: unknown kind {kind!r}")
    return None


def build_model_spec(cfg: dict, errors: list[str]) -> ModelSpec | None:
    n0 = len(errors)
    model = cfg.get("model")
    if not isinstance(model, dict):
        errors.append("missing 'model' section")
        return None
    family = model.get("family")
    if family not in FAMILIES:
        errors.append(f"model.family must be one of {list(FAMILIES)}, got {family!r}")
        return None
    fixed_effects = tuple(model.get("fixed_effects", ("intercept",)))
    components = tuple(model.get("components", ()))
    for comp in components:
        if comp not in COMPONENTS:
            errors.append(f"model.components: unknown component {comp!r}")
            return None
    priors = default_priors(fixed_effects, components)
    for name, raw in (model.get("priors") or {}).items():
        prior = _parse_prior(name, raw, errors)
        if prior is not None:
            if name not in priors:
                errors.append(f"prior {name!r} does not match any model parameter")
            else:
                priors[name] = prior
    if len(errors) > n0:
        return None
    try:
        return ModelSpec(
            family,
            fixed_effects,
            components,
            priors,
            trials_per_image=model.get("trials_per_image"),
        )
    except Exception as exc:
        errors.append(f"model: {exc}")
        return None


def build_domain(cfg: dict, base_dir: Path, errors: list[str]):
    data = cfg.get("data")
    if not isinstance(data, dict):
        errors.append("missing 'data' section")
        return None
    kind = data.get("kind")
    if kind == "river":
        missing = [k for k in ("segments", "sites") if k not in data]
        if missing:
            errors.append(f"data: river needs {missing}")
            return None
        paths = {k: (base_dir / data[k]) for k in ("segments", "sites")}
        missing_files = [f"data.{k}: file not found: {p}" for k, p in paths.items() if not p.exists()]
        if missing_files:
            errors.extend(missing_files)
            return None
        try:
            return load_network(paths["segments"], paths["sites"])
        except Exception as exc:
            errors.append(f"data: {exc}")
            return None
    if kind == "reef":
        if "reef" not in data:
            errors.append("data: reef needs a 'reef' point-cloud path")
            return None
        path = base_dir / data["reef"]
        if not path.exists():
            errors.append(f"data.reef: file not found: {path}")
            return None
        grid = data.get("grid", {})
        transect = data.get("transect", {})
        try:
            return ReefDomain(
                load_reef(path),
                nx=int(grid.get("nx", 10)),
                ny=int(grid.get("ny", 10)),
                transect_length=float(transect.get("length", 500.0)),
                spacing=float(transect.get("spacing", 5.0)),
            )
        except Exception as exc:
            errors.append(f"data: {exc}")
            return None
    errors.append(f"data.kind must be 'river' or 'reef', got {kind!r}")
    return None


def search_candidates(cfg: dict, domain, errors: list[str]):
    search = cfg.get("search", {})
    raw = search.get("candidates", "all")
    if isinstance(domain, StreamNetwork):
        if raw == "all":
            return list(domain.site_ids)
        cands = [int(c) for c in raw]
        unknown = [c for c in cands if c not in domain.site_ids]
        if unknown:
            errors.append(f"search.candidates: unknown site ids {unknown}")
            return None
        return cands
    # reef: Cartesian grid of transect midpoints and discretised angles
    if raw == "all":
        grid = search.get("transect_grid")
        if not isinstance(grid, dict):
            errors.append("search.transect_grid required for reef candidate enumeration")
            return None
        try:
            eastings = [float(v) for v in grid["eastings"]]
            northings = [float(v) for v in grid["northings"]]
            angles = [float(v) for v in grid.get("angles", [0.0, 45.0, 90.0, 135.0])]
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"search.transect_grid: {exc}")
            return None
        return [(e, n, a) for e in eastings for n in northings for a in angles]
    return [tuple(float(v) for v in c) for c in raw]


def validate_config(cfg: dict, base_dir: Path, section: str | None = None) -> list[str]:
    """Collect every validation error; empty list means usable."""
    errors: list[str] = []
    if "seed" in cfg and not isinstance(cfg["seed"], int):
        errors.append("seed must be an integer")
    spec = build_model_spec(cfg, errors)
    domain = build_domain(cfg, base_dir, errors)
    if spec is not None and domain is not None:
        if isinstance(domain, StreamNetwork) and spec.family != GAUSSIAN:
            errors.append("river data requires the gaussian_identity family")
        if isinstance(domain, ReefDomain) and spec.family != BINOMIAL:
            errors.append("reef data requires the binomial_logit family")
        missing = [
            c
            for c in spec.fixed_effects
            if c != "intercept"
            and isinstance(domain, StreamNetwork)
            and c not in domain.covariate_names()
        ]
        if missing:
            errors.append(f"model.fixed_effects not present in site covariates: {missing}")
    if section in (None, "search") and "search" in cfg:
        s = cfg["search"]
        if not isinstance(s.get("design_size"), int) or s.get("design_size", 0) < 1:
            errors.append("search.design_size must be a positive integer")
        if s.get("acceptance", "wilcoxon") not in ("wilcoxon", "ace"):
            errors.append("search.acceptance must be 'wilcoxon' or 'ace'")
        if s.get("summary", "median") not in ("median", "mean"):
            errors.append("search.summary must be 'median' or 'mean'")
        if domain is not None and spec is not None:
            cands = search_candidates(cfg, domain, errors)
            if cands is not None and isinstance(s.get("design_size"), int):
                if s["design_size"] > len(cands):
                    errors.append(
                        f"search.design_size {s['design_size']} exceeds "
                        f"{len(cands)} candidates"
                    )
    if section in (None, "windows") and "windows" in cfg:
        w = cfg["windows"]
        if "domains" not in w or not w["domains"]:
            errors.append("windows.domains must list at least one window")
        if w.get("normalisation", "argmax_norm") not in ("argmax_norm", "baseline_norm"):
            errors.append("windows.normalisation must be 'argmax_norm' or 'baseline_norm'")
        if "current_design" not in w:
            errors.append("windows.current_design is required")
    return errors
