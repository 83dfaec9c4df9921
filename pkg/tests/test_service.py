import base64
import io
import json
import os
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from sketchvision import fixtures, pipeline as pl, service
from sketchvision.core import save_image


def _png_b64(img) -> str:
    import tempfile

    with tempfile.NamedTemporaryFile(suffix=".png") as f:
        save_image(img, f.name)
        return base64.b64encode(open(f.name, "rb").read()).decode()


def _wait_done(client, job_id, timeout=120.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        view = client.get(f"/api/jobs/{job_id}").json()
        if view["status"] in ("done", "failed"):
            return view
        time.sleep(0.05)
    raise TimeoutError(f"job {job_id} did not finish")


@pytest.fixture()
def client(tmp_path, registry):
    cfg = fixtures.toy_config(encode_iterations=5, turntable_frames=2,
                              samples_per_ray=12, render_size=24,
                              grid_resolution=8)
    app = service.create_app(tmp_path / "jobs", registry, cfg)
    with TestClient(app) as c:
        yield c
    app.state.worker.stop()


def test_health(client):
    r = client.get("/api/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_submit_invalid_kind(client):
    r = client.post("/api/jobs", json={"kind": "nonsense", "image_b64": "aaaa"})
    assert r.status_code == 400


def test_submit_interpolate_redirected(client):
    r = client.post("/api/jobs", json={"kind": "interpolate", "image_b64": "aaaa"})
    assert r.status_code == 400
    assert "interpolate" in r.json()["detail"]


def test_submit_bad_base64(client):
    r = client.post("/api/jobs", json={"kind": "sketchify", "image_b64": "!!!"})
    assert r.status_code == 400


def test_submit_missing_image(client):
    r = client.post("/api/jobs", json={"kind": "sketchify"})
    assert r.status_code == 400


def test_submit_oversized(tmp_path, registry):
    app = service.create_app(tmp_path / "jobs", registry,
                             fixtures.toy_config(), max_upload=64,
                             start_worker=False)
    big = base64.b64encode(b"\x00" * 1024).decode()
    with TestClient(app) as c:
        r = c.post("/api/jobs", json={"kind": "sketchify", "image_b64": big})
    assert r.status_code == 413


def test_submit_undecodable_image(client):
    raw = base64.b64encode(b"not a png at all").decode()
    r = client.post("/api/jobs", json={"kind": "sketchify", "image_b64": raw})
    assert r.status_code == 422


def test_unknown_job_404(client):
    assert client.get("/api/jobs/deadbeef").status_code == 404


def test_sketchify_job_lifecycle(client):
    img = fixtures.synthetic_shape_image(np.random.default_rng(0), 32)
    r = client.post("/api/jobs", json={"kind": "sketchify",
                                       "image_b64": _png_b64(img)})
    assert r.status_code == 202
    view = r.json()
    assert view["status"] == "queued"
    final = _wait_done(client, view["job_id"])
    assert final["status"] == "done"
    assert all(s["done"] for s in final["stages"])
    url = final["artifacts"]["sketch"][0]
    assert url.startswith("/assets/")
    asset = client.get(url)
    assert asset.status_code == 200
    assert asset.headers["content-type"].startswith("image/png")
    listed = client.get("/api/jobs").json()["jobs"]
    assert any(j["job_id"] == view["job_id"] for j in listed)


def test_sketch_to_3d_and_interpolate_flow(client):
    rng = np.random.default_rng(1)
    ids = []
    for seed in (0, 1):
        sketch = fixtures.synthetic_shape_image(rng, 32)[..., :1]
        r = client.post("/api/jobs", json={"kind": "sketch_to_3d",
                                           "image_b64": _png_b64(sketch),
                                           "seed": seed})
        assert r.status_code == 202
        ids.append(r.json()["job_id"])
    for jid in ids:
        view = _wait_done(client, jid)
        assert view["status"] == "done", view["error"]
        assert view["artifacts"]["latent"]

    r = client.post("/api/interpolate", json={"latent_a_job": ids[0],
                                              "latent_b_job": ids[1], "n": 3})
    assert r.status_code == 202
    view = _wait_done(client, r.json()["job_id"])
    assert view["status"] == "done", view["error"]
    assert len(view["artifacts"]["frames"]) == 3


def test_interpolate_bad_n(client):
    r = client.post("/api/interpolate", json={"latent_a_job": "x",
                                              "latent_b_job": "y", "n": 1})
    assert r.status_code == 400
    r = client.post("/api/interpolate", json={"latent_a_job": "x",
                                              "latent_b_job": "y", "n": 33})
    assert r.status_code == 400


def test_interpolate_unknown_source(client):
    r = client.post("/api/interpolate", json={"latent_a_job": "nope",
                                              "latent_b_job": "nah", "n": 3})
    assert r.status_code == 404


def test_interpolate_source_without_latent(client):
    img = fixtures.synthetic_shape_image(np.random.default_rng(2), 32)
    r = client.post("/api/jobs", json={"kind": "sketchify",
                                       "image_b64": _png_b64(img)})
    jid = r.json()["job_id"]
    _wait_done(client, jid)
    r = client.post("/api/interpolate", json={"latent_a_job": jid,
                                              "latent_b_job": jid, "n": 3})
    assert r.status_code == 409


def test_asset_traversal_blocked(client):
    img = fixtures.synthetic_shape_image(np.random.default_rng(3), 32)
    r = client.post("/api/jobs", json={"kind": "sketchify",
                                       "image_b64": _png_b64(img)})
    jid = r.json()["job_id"]
    _wait_done(client, jid)
    # literal dot segments are normalized away by the client, so exercise
    # the server-side guard with percent-encoded traversal
    assert client.get(f"/assets/{jid}/..%2f..%2fetc%2fpasswd").status_code == 404
    assert client.get(f"/assets/{jid}/%2e%2e/%2e%2e/etc/passwd").status_code == 404
    assert client.get(f"/assets/{jid}/missing.png").status_code == 404


def test_restart_recovery(tmp_path, registry):
    jobs_root = tmp_path / "jobs"
    cfg = fixtures.toy_config()
    # fabricate a job that was mid-run when the process died
    stuck = pl.PipelineJob(job_id="stuck01", kind="sketchify",
                           status="running", inputs={"input": "input.png"})
    pl.save_job(stuck, jobs_root)
    # and one still queued, with its input present
    img = fixtures.synthetic_shape_image(np.random.default_rng(4), 32)
    d = pl.job_dir(jobs_root, "queued01")
    os.makedirs(d, exist_ok=True)
    save_image(img, os.path.join(d, "input.png"))
    pl.save_job(pl.PipelineJob(job_id="queued01", kind="sketchify",
                               inputs={"input": "input.png"}), jobs_root)

    app = service.create_app(jobs_root, registry, cfg)
    with TestClient(app) as c:
        stuck_view = c.get("/api/jobs/stuck01").json()
        assert stuck_view["status"] == "failed"
        assert "restarted" in stuck_view["error"]
        final = _wait_done(c, "queued01")
        assert final["status"] == "done"
    app.state.worker.stop()
