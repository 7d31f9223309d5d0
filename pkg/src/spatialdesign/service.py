"""Read-only planner service over a saved efficiency surface.

Endpoints (JSON over HTTP):
  GET /meta     window domains, grid levels, normalisation mode, digest
  GET /surface  the full efficiency surface
  GET /slice    conditional slice, e.g. /slice?fix=n1:350.0,n2:120.0

The service is stateless per request: every response is a pure function
of the loaded surface directory.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware

from .emulator import conditional_slice, load_surface
from .exceptions import EmulatorError


def parse_fix(fix: str) -> dict[str, float]:
    """Parse ``w1:<value>[,w2:<value>...]`` into a name -> value mapping."""
    out: dict[str, float] = {}
    if not fix:
        return out
    for part in fix.split(","):
        if ":" not in part:
            raise ValueError(f"bad fix entry {part!r}; expected name:value")
        name, raw = part.split(":", 1)
        name = name.strip()
        if name in out:
            raise ValueError(f"window {name!r} pinned twice")
        out[name] = float(raw)
    return out


def build_app(surface_dir) -> FastAPI:
    surface, meta = load_surface(surface_dir)
    app = FastAPI(title="spatialdesign planner service", version=meta.get("version", "0"))
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["GET"], allow_headers=["*"]
    )
    names = surface.window_names()
    levels = {
        w.name: np.unique(surface.points[:, j]).tolist()
        for j, w in enumerate(surface.windows)
    }

    @app.get("/meta")
    def get_meta():
        return {
            "q": surface.q,
            "windows": [
                {
                    "name": w.name,
                    "lower": w.lower,
                    "upper": w.upper,
                    "kind": w.kind,
                    "levels": levels[w.name],
                }
                for w in surface.windows
            ],
            "mode": surface.mode,
            "baseline": surface.baseline,
            "thresholds": sorted(surface.thresholds),
            "digest": meta.get("digest"),
            "argmax_point": surface.argmax_point.tolist(),
            "argmax_eff": float(surface.eff[surface.argmax_index]),
        }

    @app.get("/surface")
    def get_surface():
        return {
            "windows": list(names),
            "points": surface.points.tolist(),
            "f_hat": surface.f_hat.tolist(),
            "eff": surface.eff.tolist(),
            "mode": surface.mode,
            "argmax_index": surface.argmax_index,
            "argmax_point": surface.argmax_point.tolist(),
        }

    @app.get("/slice")
    def get_slice(fix: str = Query("", description="name:value[,name:value...]")):
        try:
            fixed = parse_fix(fix)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        unknown = [n for n in fixed if n not in names]
        if unknown:
            raise HTTPException(status_code=404, detail=f"unknown window name(s) {unknown}")
        try:
            result = conditional_slice(surface, fixed)
        except EmulatorError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return result.to_dict()

    return app


def serve(surface_dir, port: int = 8000, host: str = "127.0.0.1", log_level: str = "info"):
    import uvicorn

    uvicorn.run(build_app(surface_dir), host=host, port=port, log_level=log_level)
