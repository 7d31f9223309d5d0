"""Command-line entry points: synth | search | windows | validate | serve."""

from __future__ import annotations

import hashlib
import json
import os
import sys
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import __version__
from .config import (
    build_domain,
    build_model_spec,
    load_config,
    search_candidates,
    validate_config,
)
from .emulator import (
    GPEmulator,
    WindowDomain,
    build_utility_grid,
    efficiency_surface,
    render_surface,
    save_surface,
    window_space_from_levels,
)
from .exceptions import ConfigError, SpatialDesignError
from .manifest import build_manifest, file_digest, write_manifest
from .network import StreamNetwork, save_network
from .problems import ReefDomain, prepare_design
from .search import CoordinateExchange, save_trace
from .synth import synth_reef, synth_river
from .transect import save_reef
from .utility import estimate_utility, export_utility_csv


def _fail(errors):
    for err in errors if isinstance(errors, list) else [errors]:
        click.echo(f"error: {err}", err=True)
    sys.exit(2)


def _load_validated(config_path, section):
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        _fail(str(exc))
    base = Path(config_path).resolve().parent
    errors = validate_config(cfg, base, section)
    if errors:
        _fail(errors)
    return cfg, base


def _resolve_seed(cfg, override):
    if override is not None:
        return int(override)
    return int(cfg.get("seed", 0))


def _run_digest(command: str, config_path, seed: int) -> str:
    core = f"{command}:{file_digest(config_path)}:{seed}:{__version__}"
    return hashlib.sha256(core.encode()).hexdigest()


@click.group()
@click.version_option(__version__)
def main():
    """Bayesian design search and sampling windows for spatial monitoring."""


# -- synth ------------------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the config seed.")
def synth(config_path, out_dir, seed):
    """Generate a synthetic river network or reef survey dataset."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        _fail(str(exc))
    section = cfg.get("synth")
    if not isinstance(section, dict) or section.get("kind") not in ("river", "reef"):
        _fail("synth.kind must be 'river' or 'reef'")
    seed = _resolve_seed(cfg, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    outputs = {}
    if section["kind"] == "river":
        net = synth_river(
            n_segments=int(section.get("segments", 9)),
            n_sites=int(section.get("sites", 15)),
            seed=seed,
            mean_length=float(section.get("mean_length", 1500.0)),
        )
        save_network(net, out / "segments.csv", out / "sites.csv")
        outputs = {"segments": out / "segments.csv", "sites": out / "sites.csv"}
    else:
        depth = section.get("depth", [12.0, 50.0])
        extent = section.get("extent", [0.0, 1000.0, 0.0, 800.0])
        survey = synth_reef(
            n_points=int(section.get("points", 900)),
            seed=seed,
            depth_range=(float(depth[0]), float(depth[1])),
            extent=tuple(float(v) for v in extent),
        )
        save_reef(survey, out / "reef.csv")
        outputs = {"reef": out / "reef.csv"}

    manifest = build_manifest(
        "synth", seed, config_path,
        inputs={"config": config_path},
        outputs=outputs,
        settings=section,
    )
    write_manifest(manifest, out / "manifest.json")
    click.echo(f"wrote {', '.join(str(p) for p in outputs.values())}")


# -- search -----------------------------------------------------------------------

def _design_record(design, evaluator_mode: str) -> dict:
    sample = design.utility_sample
    return {
        "coords": [list(c) if isinstance(c, tuple) else c for c in design.coords],
        "summary": sample.summary,
        "summary_mode": evaluator_mode,
        "mc_se": sample.mc_se,
        "n_draws": int(len(sample.draws)),
        "n_failed": sample.n_failed,
    }


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the config seed.")
def search(config_path, out_dir, seed):
    """Run the stochastic coordinate-exchange design search."""
    cfg, base = _load_validated(config_path, "search")
    if "search" not in cfg:
        _fail("missing 'search' section")
    seed = _resolve_seed(cfg, seed)
    errors: list[str] = []
    model = build_model_spec(cfg, errors)
    domain = build_domain(cfg, base, errors)
    candidates = search_candidates(cfg, domain, errors) if domain is not None else None
    if errors:
        _fail(errors)

    s = cfg["search"]
    ce = CoordinateExchange(
        model=model,
        domain=domain,
        design_size=int(s["design_size"]),
        n_starts=int(s.get("n_starts", 5)),
        n_sweeps=int(s.get("n_sweeps", 15)),
        draws_proposal=int(s.get("draws_proposal", 20)),
        draws_accept=int(s.get("draws_accept", 40)),
        draws_final=int(s.get("draws_final", 100)),
        acceptance=s.get("acceptance", "wilcoxon"),
        summary=s.get("summary", "median"),
        threshold_accept=bool(s.get("threshold_accept", False)),
        crn_seed=s.get("crn_seed"),
        fixed=tuple(s.get("fixed", ())),
        mz=int(s.get("mz", 50)),
        n_jobs=int(s.get("n_jobs", 1)),
        random_state=seed,
    )
    try:
        ce.fit(candidates)
    except SpatialDesignError as exc:
        _fail(str(exc))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    record = _design_record(ce.best_design_, ce.summary)
    record["per_start"] = [
        {"start": res.start, **_design_record(res.design, ce.summary)}
        for res in ce.per_start_
    ]
    record["run_digest"] = _run_digest("search", config_path, seed)
    (out / "design.json").write_text(json.dumps(record, indent=2, sort_keys=True))
    save_trace(ce.trace_, out / "trace.csv")
    export_utility_csv(ce.best_design_.utility_sample, out / "best_design_draws.csv")

    manifest = build_manifest(
        "search", seed, config_path,
        inputs={"config": config_path},
        outputs={
            "design": out / "design.json",
            "trace": out / "trace.csv",
            "draws": out / "best_design_draws.csv",
        },
        settings=s,
    )
    write_manifest(manifest, out / "manifest.json")
    click.echo(f"best design: {record['coords']} (summary {record['summary']:.4f})")


# -- windows ----------------------------------------------------------------------

def _current_design(cfg, base: Path, domain):
    raw = cfg["windows"]["current_design"]
    if isinstance(raw, str):
        path = base / raw
        if not path.exists():
            _fail(f"windows.current_design: file not found: {path}")
        coords = json.loads(path.read_text())["coords"]
    else:
        coords = raw
    if isinstance(domain, StreamNetwork):
        return tuple(int(c) for c in coords)
    return tuple(tuple(float(v) for v in c) for c in coords)


def _window_domains(cfg, domain) -> list[WindowDomain]:
    out = []
    for d in cfg["windows"]["domains"]:
        if isinstance(domain, StreamNetwork):
            out.append(
                WindowDomain(
                    str(d["name"]), float(d["lower"]), float(d["upper"]),
                    "network_arc", int(d["segment"]),
                    tuple(float(v) for v in d["xy_lower"]),
                    tuple(float(v) for v in d["xy_upper"]),
                )
            )
        else:
            out.append(WindowDomain(str(d["name"]), float(d["lower"]), float(d["upper"])))
    return out


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the config seed.")
def windows(config_path, out_dir, seed):
    """Fit the utility emulator and emit the efficiency surface."""
    cfg, base = _load_validated(config_path, "windows")
    if "windows" not in cfg:
        _fail("missing 'windows' section")
    seed = _resolve_seed(cfg, seed)
    errors: list[str] = []
    model = build_model_spec(cfg, errors)
    domain = build_domain(cfg, base, errors)
    if errors:
        _fail(errors)

    w = cfg["windows"]
    current = _current_design(cfg, base, domain)
    domains = _window_domains(cfg, domain)
    try:
        space = window_space_from_levels(
            domains,
            [np.linspace(d.lower, d.upper, int(raw.get("train_points", 5)))
             for d, raw in zip(domains, w["domains"])],
            [np.linspace(d.lower, d.upper, int(raw.get("predict_points", 21)))
             for d, raw in zip(domains, w["domains"])],
        )
        rng = np.random.default_rng(seed)
        responses = build_utility_grid(
            model, domain, space, current,
            m_draws=int(w.get("draws", 20)),
            rng=rng,
            summary=w.get("summary", "median"),
            mz=int(w.get("mz", 50)),
            location_draws=int(w.get("location_draws", 3)),
            n_jobs=int(w.get("n_jobs", 1)),
        )

        emulator = GPEmulator().fit(space.train_grid, responses)

        mode = w.get("normalisation", "argmax_norm")
        baseline = w.get("baseline")
        if mode == "baseline_norm" and (baseline is None or baseline == "current"):
            prepared = prepare_design(
                model, domain, current,
                rng=rng if isinstance(domain, ReefDomain) else None,
            )
            baseline, _ = estimate_utility(
                prepared, int(w.get("draws", 20)), mode=w.get("summary", "median"),
                rng=rng, mz=int(w.get("mz", 50)),
            )
        thresholds = [float(t) for t in w.get("thresholds", [0.8, 0.9, 0.95])]
        surface = efficiency_surface(
            emulator, space, mode=mode,
            baseline=float(baseline) if baseline is not None else None,
            thresholds=thresholds,
        )
    except SpatialDesignError as exc:
        _fail(str(exc))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid_cols = {f"coord_{j + 1}": space.train_grid[:, j] for j in range(space.q)}
    grid_cols["utility"] = responses
    pd.DataFrame(grid_cols).to_csv(out / "grid.csv", index=False)
    (out / "hyperparams.json").write_text(
        json.dumps(
            {
                "inv_lengthscales": emulator.inv_lengthscales_.tolist(),
                "nugget": emulator.nugget_,
                "cv_score": emulator.cv_score_,
            },
            indent=2,
            sort_keys=True,
        )
    )
    save_surface(
        surface, out,
        extra_meta={
            "digest": _run_digest("windows", config_path, seed),
            "version": __version__,
            "current_design": [list(c) if isinstance(c, tuple) else c for c in current],
        },
    )
    render_surface(surface, out / "surface.png", thresholds=thresholds)

    manifest = build_manifest(
        "windows", seed, config_path,
        inputs={"config": config_path},
        outputs={
            "grid": out / "grid.csv",
            "hyperparams": out / "hyperparams.json",
            "surface": out / "surface.csv",
            "contours": out / "contours.csv",
            "meta": out / "meta.json",
            "plot": out / "surface.png",
        },
        settings=w,
    )
    write_manifest(manifest, out / "manifest.json")
    click.echo(f"surface written to {out} (argmax eff {surface.eff.max():.4f})")


# -- validate / serve ----------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
def validate(config_path):
    """Validate a run configuration, listing every problem found."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        _fail(str(exc))
    errors = validate_config(cfg, Path(config_path).resolve().parent, None)
    if errors:
        _fail(errors)
    click.echo("config ok")


@main.command()
@click.option("--surface", "surface_dir", required=True, type=click.Path())
@click.option("--port", type=int, default=None)
@click.option("--host", default="127.0.0.1")
def serve(surface_dir, port, host):
    """Serve a saved efficiency surface to the planner UI."""
    from .service import serve as run_service

    if not (Path(surface_dir) / "meta.json").exists():
        _fail(f"surface directory {surface_dir} has no meta.json")
    if port is None:
        port = int(os.environ.get("SPATIALDESIGN_PORT", 8000))
    log_level = os.environ.get("SPATIALDESIGN_LOG_LEVEL", "info")
    run_service(surface_dir, port=port, host=host, log_level=log_level)


if __name__ == "__main__":
    main()
