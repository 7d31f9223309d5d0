import numpy as np
import pytest
from fastapi.testclient import TestClient

from spatialdesign.emulator import (
    GPEmulator,
    WindowDomain,
    conditional_slice,
    efficiency_surface,
    save_surface,
    window_space_from_levels,
)
from spatialdesign.service import build_app, parse_fix


@pytest.fixture(scope="module")
def surface_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("surface")
    w1 = WindowDomain("n1", 0.0, 100.0)
    w2 = WindowDomain("n2", 0.0, 50.0)
    space = window_space_from_levels(
        (w1, w2),
        [np.linspace(0, 100, 5), np.linspace(0, 50, 5)],
        [np.linspace(0, 100, 9), np.linspace(0, 50, 9)],
    )
    y = np.exp(
        -(((space.train_grid[:, 0] - 60.0) / 40.0) ** 2)
        - (((space.train_grid[:, 1] - 20.0) / 25.0) ** 2)
    )
    em = GPEmulator().fit(space.train_grid, y)
    surface = efficiency_surface(em, space, thresholds=[0.8, 0.95])
    save_surface(surface, out, extra_meta={"digest": "test-digest"})
    return out, surface


@pytest.fixture(scope="module")
def client(surface_dir):
    out, _ = surface_dir
    return TestClient(build_app(out))


class TestMeta:
    def test_echoes_windows_and_mode(self, client):
        meta = client.get("/meta").json()
        assert meta["q"] == 2
        assert [w["name"] for w in meta["windows"]] == ["n1", "n2"]
        assert meta["windows"][0]["lower"] == 0.0
        assert meta["windows"][0]["upper"] == 100.0
        assert len(meta["windows"][0]["levels"]) == 9
        assert meta["mode"] == "argmax_norm"
        assert meta["digest"] == "test-digest"
        assert meta["thresholds"] == [0.8, 0.95]


class TestSurface:
    def test_payload_matches_offline_surface(self, client, surface_dir):
        _, surface = surface_dir
        body = client.get("/surface").json()
        assert body["windows"] == ["n1", "n2"]
        assert np.allclose(body["points"], surface.points)
        assert np.allclose(body["eff"], surface.eff)
        assert body["argmax_index"] == surface.argmax_index
        assert max(body["eff"]) == 1.0


class TestSlice:
    def test_matches_offline_slice_field_for_field(self, client, surface_dir):
        _, surface = surface_dir
        body = client.get("/slice", params={"fix": "n1:37.0"}).json()
        want = conditional_slice(surface, {"n1": 37.0}).to_dict()
        assert body == want

    def test_slice_through_argmax(self, client, surface_dir):
        _, surface = surface_dir
        best = surface.argmax_point
        body = client.get("/slice", params={"fix": f"n1:{best[0]}"}).json()
        assert body["argmax_point"][0] == pytest.approx(best[1])
        assert body["retained_efficiency"] == pytest.approx(1.0)

    def test_unknown_window_404(self, client):
        r = client.get("/slice", params={"fix": "bogus:1.0"})
        assert r.status_code == 404
        assert "bogus" in r.json()["detail"]

    def test_out_of_domain_400(self, client):
        r = client.get("/slice", params={"fix": "n1:5000.0"})
        assert r.status_code == 400
        assert "outside window" in r.json()["detail"]

    def test_all_windows_fixed_400(self, client):
        r = client.get("/slice", params={"fix": "n1:10.0,n2:10.0"})
        assert r.status_code == 400

    def test_malformed_fix_400(self, client):
        r = client.get("/slice", params={"fix": "n1=10"})
        assert r.status_code == 400


def test_parse_fix():
    assert parse_fix("") == {}
    assert parse_fix("a:1.5,b:2") == {"a": 1.5, "b": 2.0}
    with pytest.raises(ValueError, match="twice"):
        parse_fix("a:1,a:2")
    with pytest.raises(ValueError):
        parse_fix("a")
