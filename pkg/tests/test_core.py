import json

import numpy as np
import pytest
from PIL import Image

from sketchvision import core
from sketchvision.errors import MalformedLatentFile, UnsupportedFormat


def test_load_white_png(tmp_path):
    p = tmp_path / "white.png"
    Image.fromarray(np.full((64, 64, 3), 255, np.uint8)).save(p)
    img = core.load_image(p, 3)
    assert img.shape == (64, 64, 3)
    assert (img == 1.0).all()


def test_load_black_png_gray(tmp_path):
    p = tmp_path / "black.png"
    Image.fromarray(np.zeros((32, 32), np.uint8), mode="L").save(p)
    img = core.load_image(p, 1)
    assert img.shape == (32, 32, 1)
    assert (img == 0.0).all()


def test_load_midgray_value(tmp_path):
    # byte oracle: 8-bit value 128 -> 128/255
    p = tmp_path / "mid.png"
    Image.fromarray(np.full((16, 16, 3), 128, np.uint8)).save(p)
    img = core.load_image(p, 3)
    assert img == pytest.approx(128 / 255)


def test_load_image_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        core.load_image(tmp_path / "missing.png", 3)
    bad = tmp_path / "notpng.png"
    bad.write_bytes(b"JFIF not a png")
    with pytest.raises(UnsupportedFormat):
        core.load_image(bad, 3)


def test_image_roundtrip_8bit_grid(tmp_path):
    rng = np.random.default_rng(0)
    img = (rng.integers(0, 256, (32, 32, 3)) / 255.0).astype(np.float32)
    p = tmp_path / "rt.png"
    core.save_image(img, p)
    assert np.array_equal(core.load_image(p, 3), img)


def test_luminance_gray_identity():
    rng = np.random.default_rng(1)
    v = rng.random((16, 16, 1)).astype(np.float32)
    rgb = np.repeat(v, 3, axis=2)
    assert core.luminance(rgb) == pytest.approx(v, abs=1e-6)


def test_resize_constant_and_identity():
    img = np.full((16, 16, 3), 0.5, np.float32)
    out = core.resize(img, 24)
    assert out.shape == (24, 24, 3)
    assert out == pytest.approx(0.5, abs=1e-6)
    same = core.resize(img, 16)
    assert np.array_equal(same, img)


def test_resize_checkerboard_bilinear_oracle():
    img = np.array([[0.0, 1.0], [1.0, 0.0]], np.float32)[..., None]
    # hand-computed with half-pixel centers and edge clamping
    expected = np.array([
        [0.0, 0.25, 0.75, 1.0],
        [0.25, 0.375, 0.625, 0.75],
        [0.75, 0.625, 0.375, 0.25],
        [1.0, 0.75, 0.25, 0.0],
    ], np.float32)
    out = core.resize(img, 4)
    assert out[..., 0] == pytest.approx(expected, abs=1e-6)


def _bilinear_oracle_apply(img, size):
    # same half-pixel convention, written independently (loop form)
    h, w, c = img.shape
    out = np.zeros((size, size, c), np.float32)
    for i in range(size):
        for j in range(size):
            y = (i + 0.5) * h / size - 0.5
            x = (j + 0.5) * w / size - 0.5
            y0 = min(max(int(np.floor(y)), 0), h - 1)
            x0 = min(max(int(np.floor(x)), 0), w - 1)
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            wy = min(max(y - y0, 0.0), 1.0)
            wx = min(max(x - x0, 0.0), 1.0)
            out[i, j] = ((1 - wy) * ((1 - wx) * img[y0, x0] + wx * img[y0, x1])
                         + wy * ((1 - wx) * img[y1, x0] + wx * img[y1, x1]))
    return out


def test_resize_matches_loop_oracle():
    rng = np.random.default_rng(2)
    img = rng.random((9, 9, 3)).astype(np.float32)
    assert core.resize(img, 13) == pytest.approx(_bilinear_oracle_apply(img, 13), abs=1e-5)


def test_latent_roundtrip_exact(tmp_path):
    for z in ([0.0, 0.0, 0.0], [1.5, -2.25], list(np.random.default_rng(3).standard_normal(64))):
        p = tmp_path / "z.latent.json"
        core.save_latent(np.array(z), p)
        back = core.load_latent(p)
        assert np.array_equal(back, np.array(z, np.float64))
    with open(p) as f:
        payload = json.load(f)
    assert payload["format"] == "sketchvision-latent/1"


def test_latent_malformed(tmp_path):
    p = tmp_path / "bad.latent.json"
    p.write_text(json.dumps({"format": core.LATENT_FORMAT, "dim": 3, "values": [1.0, 2.0]}))
    with pytest.raises(MalformedLatentFile):
        core.load_latent(p)
    p.write_text(json.dumps({"values": [1.0]}))
    with pytest.raises(MalformedLatentFile):
        core.load_latent(p)


def test_camera_invariants():
    cam = core.Camera(azimuth=370.0)
    assert cam.azimuth == pytest.approx(10.0)
    with pytest.raises(ValueError):
        core.Camera(radius=0.0)
    with pytest.raises(ValueError):
        core.Camera(fov=180.0)


def test_config_json_roundtrip(tmp_path):
    cfg = core.Config(latent_dim=32, lambda_geo=2.0)
    p = tmp_path / "config.json"
    cfg.to_json(p)
    back = core.Config.from_json(p)
    assert back == cfg
    with pytest.raises(ValueError):
        core.Config(lambda_adv=-1.0).validate()
    with pytest.raises(ValueError):
        core.Config(near=2.0, far=1.0).validate()
