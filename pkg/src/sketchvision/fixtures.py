"""Synthetic corpora and toy scenes used by the test suite, the smoke
training runs, and the demo CLI paths. Everything here is seeded and
deterministic."""

from __future__ import annotations

import json
import os

import numpy as np

from . import neural_field as nf
from .core import Camera, Config, rng_from_seed, save_image, turntable_cameras


def synthetic_shape_image(rng: np.random.Generator, size: int = 64) -> np.ndarray:
    """One random colored primitive (disk, square, or triangle) on white."""
    img = np.ones((size, size, 3), dtype=np.float32)
    kind = rng.integers(3)
    color = rng.uniform(0.05, 0.7, size=3).astype(np.float32)
    cx, cy = rng.uniform(0.3, 0.7, size=2) * size
    r = rng.uniform(0.15, 0.3) * size
    yy, xx = np.mgrid[0:size, 0:size]
    if kind == 0:
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r ** 2
    elif kind == 1:
        mask = (np.abs(yy - cy) <= r) & (np.abs(xx - cx) <= r)
    else:
        mask = (yy >= cy - r) & (np.abs(xx - cx) <= (yy - (cy - r)) / 2)
    img[mask] = color
    return img


def write_shape_corpus(out_dir, n: int = 32, size: int = 64, seed: int = 0) -> list[str]:
    """n synthetic shape photos as PNGs; returns the file stems."""
    os.makedirs(out_dir, exist_ok=True)
    rng = rng_from_seed(seed, 10)
    stems = []
    for i in range(n):
        stem = f"shape_{i:03d}"
        save_image(synthetic_shape_image(rng, size), os.path.join(out_dir, f"{stem}.png"))
        stems.append(stem)
    return stems


def toy_scene_views(field, n_views: int = 6, image_size: int = 64,
                    samples_per_ray: int = 48) -> list[tuple[np.ndarray, Camera]]:
    """Ground-truth renders of an analytic field from a turntable ring."""
    cams = turntable_cameras(n_views, elevation=20.0, radius=2.0,
                             fov=50.0, image_size=image_size)
    return [(nf.render(field, None, cam, samples_per_ray, seed=0), cam)
            for cam in cams]


def sphere_cube_scenes(image_size: int = 64, n_views: int = 6,
                       samples_per_ray: int = 48):
    """The two-scene auto-decoder fixture: a red sphere and a blue cube."""
    return [
        ("sphere", toy_scene_views(nf.sphere_field(), n_views, image_size, samples_per_ray)),
        ("cube", toy_scene_views(nf.cube_field(), n_views, image_size, samples_per_ray)),
    ]


def write_scenes_dir(scenes, out_dir) -> None:
    """Persist scenes in the CLI `train-field --scenes` directory contract:
    <scene>/view_###.png plus <scene>/cameras.json."""
    for sid, pairs in scenes:
        d = os.path.join(out_dir, sid)
        os.makedirs(d, exist_ok=True)
        cams = []
        for i, (img, cam) in enumerate(pairs):
            save_image(img, os.path.join(d, f"view_{i:03d}.png"))
            cams.append({"azimuth": cam.azimuth, "elevation": cam.elevation,
                         "radius": cam.radius, "fov": cam.fov,
                         "image_size": cam.image_size})
        with open(os.path.join(d, "cameras.json"), "w") as f:
            json.dump(cams, f)


def read_scenes_dir(scenes_dir):
    from .core import load_image

    scenes = []
    for sid in sorted(os.listdir(scenes_dir)):
        d = os.path.join(scenes_dir, sid)
        if not os.path.isdir(d):
            continue
        with open(os.path.join(d, "cameras.json")) as f:
            cams = [Camera(**c) for c in json.load(f)]
        pairs = []
        for i, cam in enumerate(cams):
            img = load_image(os.path.join(d, f"view_{i:03d}.png"), 3)
            pairs.append((img, cam))
        scenes.append((sid, pairs))
    return scenes


def toy_config(**overrides) -> Config:
    """Small, fast configuration used across tests and demos."""
    base = dict(
        latent_dim=16, image_size=64, residual_blocks=1, base_channels=8,
        samples_per_ray=24, render_size=48, grid_resolution=32,
        encode_iterations=60, field_iterations=1500, rays_per_batch=512,
        turntable_frames=4, batch_size=2,
    )
    base.update(overrides)
    return Config(**base).validate()
