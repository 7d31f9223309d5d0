"""Regenerate the planner-UI test fixtures from the backend service.

Run from the repository root after installing the Python package:
    python3 frontend/scripts/record_fixtures.py
"""

import json
import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from spatialdesign.emulator import (
    GPEmulator,
    WindowDomain,
    efficiency_surface,
    save_surface,
    window_space_from_levels,
)
from spatialdesign.service import build_app


def main():
    w1 = WindowDomain("n1", 0.0, 100.0)
    w2 = WindowDomain("n2", 0.0, 50.0)
    space = window_space_from_levels(
        (w1, w2),
        [np.linspace(0, 100, 5), np.linspace(0, 50, 5)],
        [np.linspace(0, 100, 9), np.linspace(0, 50, 9)],
    )
    y = 0.6 + np.exp(
        -(((space.train_grid[:, 0] - 60.0) / 40.0) ** 2)
        - (((space.train_grid[:, 1] - 20.0) / 25.0) ** 2)
    )
    em = GPEmulator().fit(space.train_grid, y)
    surface = efficiency_surface(em, space, thresholds=[0.8, 0.95])

    out = Path(__file__).resolve().parent.parent / "test" / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        save_surface(surface, tmp, extra_meta={"digest": "fixture-digest"})
        client = TestClient(build_app(tmp))
        meta = client.get("/meta").json()
        surf = client.get("/surface").json()
        argmax = surf["points"][surf["argmax_index"]]
        slice_at_argmax = client.get("/slice", params={"fix": f"n1:{argmax[0]}"}).json()
        slice_off = client.get("/slice", params={"fix": "n1:37.0"}).json()
        err = client.get("/slice", params={"fix": "n1:5000.0"})

    (out / "meta.json").write_text(json.dumps(meta, indent=1))
    (out / "surface.json").write_text(json.dumps(surf, indent=1))
    (out / "slice_at_argmax.json").write_text(json.dumps(slice_at_argmax, indent=1))
    (out / "slice_off_optimal.json").write_text(json.dumps(slice_off, indent=1))
    (out / "error_out_of_domain.json").write_text(
        json.dumps({"status": err.status_code, "body": err.json()}, indent=1)
    )
    print("wrote fixtures to", out)


if __name__ == "__main__":
    main()
