"""HTTP service endpoints over a synthetic sequence."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from lfvideo.server import create_app
from lfvideo.synthdata import LayerSpec, SceneSpec, render_scene


@pytest.fixture(scope="module")
def client():
    spec = SceneSpec(layers=[LayerSpec(disparity=1.0, velocity=(0.2, 0.0))],
                     frames=4, height=48, width=48, keyframe_stride=3, seed=31)
    bundle = render_scene(spec)
    app = create_app({"demo": bundle})
    return TestClient(app)


def test_sequences_listing(client):
    r = client.get("/api/sequences")
    assert r.status_code == 200
    assert r.json() == {"sequences": ["demo"]}


def test_meta(client):
    r = client.get("/api/meta", params={"seq": "demo"})
    assert r.status_code == 200
    meta = r.json()
    assert meta["A"] == 5 and meta["H"] == 48 and meta["W"] == 48
    assert meta["frames"] == 4 and meta["keyframe_stride"] == 3
    assert meta["d_min"] < meta["d_max"]


def test_view_central(client):
    r = client.get("/api/view", params={"seq": "demo", "t": 0, "u": 0, "v": 0})
    assert r.status_code == 200
    assert r.headers["content-type"] == "image/png"


def test_refocus_r0_byte_identical_to_central_view(client):
    view = client.get("/api/view", params={"seq": "demo", "t": 1, "u": 0, "v": 0})
    refocus = client.get("/api/refocus", params={"seq": "demo", "t": 1, "s": 0.4, "r": 0.0})
    assert refocus.status_code == 200
    assert refocus.content == view.content


def test_refocus_determinism(client):
    a = client.get("/api/refocus", params={"seq": "demo", "t": 0, "s": 1.0, "r": 2.0})
    b = client.get("/api/refocus", params={"seq": "demo", "t": 0, "s": 1.0, "r": 2.0})
    assert a.content == b.content


def test_click_returns_scene_disparity(client):
    r = client.post("/api/click", json={"seq": "demo", "t": 0, "x": 20, "y": 20})
    assert r.status_code == 200
    assert r.json()["s"] == pytest.approx(1.0, abs=0.01)


def test_track_schedule(client):
    r = client.post("/api/track", json={"seq": "demo", "t0": 0, "x": 24, "y": 24})
    assert r.status_code == 200
    body = r.json()
    assert len(body["points"]) == 4
    for i, pt in enumerate(body["points"]):
        assert pt["t"] == i
        assert pt["s"] == pytest.approx(1.0, abs=0.05)


def test_unknown_sequence_404(client):
    r = client.get("/api/meta", params={"seq": "nope"})
    assert r.status_code == 404
    body = r.json()
    assert "error" in body and "message" in body


def test_bad_view_params(client):
    r = client.get("/api/view", params={"seq": "demo", "t": 0, "u": 9, "v": 0})
    assert r.status_code == 400
    assert "message" in r.json()
    r = client.get("/api/view", params={"seq": "demo", "t": 99})
    assert r.status_code == 400


def test_bad_refocus_params(client):
    r = client.get("/api/refocus", params={"seq": "demo", "t": 0, "s": 0.0, "r": 7.0})
    assert r.status_code == 400


def test_click_out_of_bounds(client):
    r = client.post("/api/click", json={"seq": "demo", "t": 0, "x": 500, "y": 20})
    assert r.status_code == 400


def test_validation_error_shape(client):
    r = client.get("/api/view", params={"seq": "demo", "t": "abc"})
    assert r.status_code == 400
    body = r.json()
    assert body["error"] == "bad_request"
