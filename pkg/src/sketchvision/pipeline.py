"""Orchestration of the bidirectional flow: sketch -> photo -> latent ->
turntable -> re-sketch, plus dataset preparation and background
whitening. Every stage persists its artifact so failed jobs stay
inspectable and the UI can show intermediates."""

from __future__ import annotations

import json
import os
import time
import traceback
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from . import inverse_drawings as idw
from . import neural_field as nf
from .core import (Camera, Config, load_image, luminance, resize,
                   rng_from_seed, save_image, save_latent, turntable_cameras,
                   validate_image)
from .errors import BackendUnresolved, EmptyDataset
from .sketchify import FALLBACK, SketchifyBackend, pseudo_depth, sketchify

KINDS = ("sketch_to_3d", "sketchify", "interpolate", "roundtrip")

# Stage order per job kind; a later artifact implies all earlier ones.
STAGES = {
    "sketchify": ["photo", "sketch"],
    "sketch_to_3d": ["sketch", "photo", "photo_whitened", "latent",
                     "turntable", "density_grid"],
    "roundtrip": ["sketch", "photo", "photo_whitened", "latent",
                  "turntable", "density_grid", "re_sketch"],
    "interpolate": ["latent_a", "latent_b", "frames"],
}


@dataclass
class PipelineJob:
    job_id: str
    kind: str
    status: str = "queued"
    inputs: dict = dc_field(default_factory=dict)
    artifacts: list = dc_field(default_factory=list)  # [{stage, paths}]
    error: str | None = None
    created_at: float = 0.0
    updated_at: float = 0.0

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id, "kind": self.kind, "status": self.status,
            "inputs": self.inputs, "artifacts": self.artifacts,
            "error": self.error, "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineJob":
        return cls(**d)


def job_dir(jobs_root, job_id: str) -> str:
    return os.path.join(jobs_root, job_id)


def save_job(job: PipelineJob, jobs_root) -> None:
    """Atomic write-replace of job.json."""
    job.updated_at = time.time()
    d = job_dir(jobs_root, job.job_id)
    os.makedirs(d, exist_ok=True)
    tmp = os.path.join(d, "job.json.tmp")
    with open(tmp, "w") as f:
        json.dump(job.to_dict(), f, indent=2)
    os.replace(tmp, os.path.join(d, "job.json"))


def load_job(jobs_root, job_id: str) -> PipelineJob:
    with open(os.path.join(job_dir(jobs_root, job_id), "job.json")) as f:
        return PipelineJob.from_dict(json.load(f))


@dataclass
class BackendRegistry:
    """Everything a job needs, resolved before it may enter running."""

    sketchify_backend: SketchifyBackend = FALLBACK
    embedder: object = None
    depth_fn: object = None
    generator: idw.Generator | None = None
    field: nf.MLPField | None = None
    latent_table: dict | None = None

    def __post_init__(self):
        if self.embedder is None:
            self.embedder = idw.ToyEmbedder()
        if self.depth_fn is None:
            self.depth_fn = pseudo_depth

    def require(self, *names) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise BackendUnresolved(f"registry entry '{name}' is not resolved")

    @classmethod
    def from_checkpoints(cls, generator_path=None, field_path=None,
                         backend: SketchifyBackend = FALLBACK) -> "BackendRegistry":
        gen = idw.load_generator(generator_path) if generator_path else None
        field, table = (None, None)
        if field_path:
            field, table = nf.load_field(field_path)
        return cls(sketchify_backend=backend, generator=gen, field=field,
                   latent_table=table)


# ---------------------------------------------------------------------------
# image-level operations

def whiten_background(photo: np.ndarray, threshold: float = 0.15) -> np.ndarray:
    """Set border-connected regions whose luminance is within `threshold`
    of the border-median luminance to pure white; leave everything else
    untouched (enclosed background-colored pixels survive)."""
    validate_image(photo, channels=3)
    lum = luminance(photo)[..., 0]
    border = np.concatenate([lum[0], lum[-1], lum[1:-1, 0], lum[1:-1, -1]])
    ref = float(np.median(border))
    mask = np.abs(lum - ref) <= threshold
    labels, count = ndimage.label(mask)
    if count == 0:
        return photo.copy()
    edge_labels = np.unique(np.concatenate([
        labels[0], labels[-1], labels[1:-1, 0], labels[1:-1, -1]]))
    edge_labels = edge_labels[edge_labels != 0]
    out = photo.copy()
    out[np.isin(labels, edge_labels)] = 1.0
    return out


def circle_outline_mask(size: int, radius_frac: float, band: int = 2) -> np.ndarray:
    """Boolean ring mask used as the silhouette oracle for the sphere
    fixture's re-sketch."""
    yy, xx = np.mgrid[0:size, 0:size]
    c = (size - 1) / 2
    r = np.hypot(yy - c, xx - c)
    target = radius_frac * size / 2
    return np.abs(r - target) <= band


# ---------------------------------------------------------------------------
# dataset preparation

def prepare_dataset(photo_dir, out_dir, backend: SketchifyBackend = FALLBACK,
                    seed: int = 0, image_size: int | None = None) -> dict:
    """Build the photos/sketches/depths triplet tree plus the seeded
    style shuffle. Per-file failures are skipped and reported."""
    names = sorted(f for f in os.listdir(photo_dir) if f.lower().endswith(".png"))
    if not names:
        raise EmptyDataset(f"no PNG files in {photo_dir}")
    for sub in ("photos", "sketches", "depths"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    prepared, skipped = [], []
    for name in names:
        stem = os.path.splitext(name)[0]
        try:
            photo = load_image(os.path.join(photo_dir, name), 3)
            if image_size:
                photo = resize(photo, image_size)
            sketch = backend.to_sketch(photo)
            depth = backend.to_depth(photo)
            save_image(photo, os.path.join(out_dir, "photos", f"{stem}.png"))
            save_image(sketch, os.path.join(out_dir, "sketches", f"{stem}.png"))
            save_image(depth, os.path.join(out_dir, "depths", f"{stem}.png"))
            prepared.append(stem)
        except Exception as e:
            skipped.append({"file": name, "error": str(e)})
    if not prepared:
        raise EmptyDataset(f"no usable PNG files in {photo_dir}")
    order = [prepared[i] for i in rng_from_seed(seed, 5).permutation(len(prepared))]
    with open(os.path.join(out_dir, "style_order.json"), "w") as f:
        json.dump({"seed": seed, "order": order}, f)
    return {"count": len(prepared), "skipped": skipped, "out_dir": str(out_dir)}


def validate_dataset(data_dir) -> list[str]:
    """Check the triplet directory contract; returns the sorted ids."""
    subs = {}
    for sub in ("photos", "sketches", "depths"):
        d = os.path.join(data_dir, sub)
        if not os.path.isdir(d):
            raise ValueError(f"missing directory {d}")
        subs[sub] = {os.path.splitext(f)[0] for f in os.listdir(d) if f.endswith(".png")}
    if not (subs["photos"] == subs["sketches"] == subs["depths"]):
        raise ValueError("photo/sketch/depth id stems do not match")
    order_path = os.path.join(data_dir, "style_order.json")
    if os.path.isfile(order_path):
        with open(order_path) as f:
            order = json.load(f)["order"]
        if set(order) != subs["photos"]:
            raise ValueError("style_order.json is not a permutation of the ids")
    return sorted(subs["photos"])


# ---------------------------------------------------------------------------
# job execution

def _add_artifact(job: PipelineJob, jobs_root, stage: str, paths: list[str]) -> None:
    rel = [os.path.relpath(p, job_dir(jobs_root, job.job_id)) for p in paths]
    job.artifacts.append({"stage": stage, "paths": rel})
    save_job(job, jobs_root)


def frontal_camera(config: Config) -> Camera:
    return Camera(azimuth=0.0, elevation=20.0, radius=2.0, fov=50.0,
                  image_size=config.render_size)


def _execute_3d_stages(job: PipelineJob, jobs_root, sketch: np.ndarray,
                       registry: BackendRegistry, config: Config, seed: int):
    d = job_dir(jobs_root, job.job_id)
    registry.require("generator", "field")

    sketch = resize(sketch, config.image_size)
    save_image(sketch, os.path.join(d, "sketch.png"))
    _add_artifact(job, jobs_root, "sketch", [os.path.join(d, "sketch.png")])

    photo = idw.generate(registry.generator, sketch)
    save_image(photo, os.path.join(d, "photo.png"))
    _add_artifact(job, jobs_root, "photo", [os.path.join(d, "photo.png")])

    whitened = whiten_background(photo, config.whiten_threshold)
    save_image(whitened, os.path.join(d, "photo_whitened.png"))
    _add_artifact(job, jobs_root, "photo_whitened", [os.path.join(d, "photo_whitened.png")])

    cam = frontal_camera(config)
    target = resize(whitened, config.render_size)
    result = nf.encode(registry.field, target, cam, config.encode_iterations,
                       seed=seed, lr=config.encode_lr,
                       samples_per_ray=config.samples_per_ray, config=config)
    latent_path = os.path.join(d, "latent.latent.json")
    save_latent(result.latent, latent_path)
    _add_artifact(job, jobs_root, "latent", [latent_path])

    cams = turntable_cameras(config.turntable_frames, radius=cam.radius,
                             fov=cam.fov, image_size=config.render_size)
    frames = nf.decode(result.latent, registry.field, cams,
                       config.samples_per_ray, config.background, seed=seed,
                       config=config)
    paths = nf.export_turntable(frames, os.path.join(d, "turntable"))
    _add_artifact(job, jobs_root, "turntable", paths)

    grid = nf.extract_density_grid(registry.field, result.latent,
                                   config.grid_resolution)
    gb, gj = nf.export_density_grid(grid, os.path.join(d, "density_grid"),
                                    threshold=config.iso_threshold)
    _add_artifact(job, jobs_root, "density_grid", [gb, gj])
    return frames


def run_sketch_to_3d(sketch: np.ndarray, registry: BackendRegistry,
                     config: Config, jobs_root, job_id: str,
                     seed: int = 0) -> PipelineJob:
    return _run(job_id, "sketch_to_3d", jobs_root, registry, config, seed,
                sketch=sketch)


def run_roundtrip(sketch: np.ndarray, registry: BackendRegistry,
                  config: Config, jobs_root, job_id: str,
                  seed: int = 0) -> PipelineJob:
    return _run(job_id, "roundtrip", jobs_root, registry, config, seed,
                sketch=sketch)


def run_sketchify_job(photo: np.ndarray, registry: BackendRegistry,
                      config: Config, jobs_root, job_id: str,
                      seed: int = 0) -> PipelineJob:
    return _run(job_id, "sketchify", jobs_root, registry, config, seed,
                photo=photo)


def run_interpolate_job(z_a: np.ndarray, z_b: np.ndarray, n: int,
                        registry: BackendRegistry, config: Config,
                        jobs_root, job_id: str, seed: int = 0) -> PipelineJob:
    return _run(job_id, "interpolate", jobs_root, registry, config, seed,
                z_a=z_a, z_b=z_b, n=n)


def _run(job_id, kind, jobs_root, registry, config, seed, **inputs) -> PipelineJob:
    try:
        job = load_job(jobs_root, job_id)  # keep a pre-created queued record
        job.kind = kind
        job.artifacts = []
    except FileNotFoundError:
        job = PipelineJob(job_id=job_id, kind=kind, created_at=time.time())
    save_job(job, jobs_root)
    d = job_dir(jobs_root, job_id)
    try:
        if kind in ("sketch_to_3d", "roundtrip"):
            registry.require("generator", "field")
        job.status = "running"
        save_job(job, jobs_root)
        if kind == "sketchify":
            photo = inputs["photo"]
            save_image(photo, os.path.join(d, "photo.png"))
            _add_artifact(job, jobs_root, "photo", [os.path.join(d, "photo.png")])
            sk = sketchify(photo, registry.sketchify_backend)
            save_image(sk, os.path.join(d, "sketch.png"))
            _add_artifact(job, jobs_root, "sketch", [os.path.join(d, "sketch.png")])
        elif kind in ("sketch_to_3d", "roundtrip"):
            frames = _execute_3d_stages(job, jobs_root, inputs["sketch"],
                                        registry, config, seed)
            if kind == "roundtrip":
                frontal = frames[0]
                re_sk = registry.sketchify_backend.to_sketch(frontal)
                p = os.path.join(d, "re_sketch.png")
                save_image(re_sk, p)
                _add_artifact(job, jobs_root, "re_sketch", [p])
        elif kind == "interpolate":
            registry.require("field")
            za, zb, n = inputs["z_a"], inputs["z_b"], inputs["n"]
            pa = os.path.join(d, "latent_a.latent.json")
            pb = os.path.join(d, "latent_b.latent.json")
            save_latent(za, pa)
            _add_artifact(job, jobs_root, "latent_a", [pa])
            save_latent(zb, pb)
            _add_artifact(job, jobs_root, "latent_b", [pb])
            cam = frontal_camera(config)
            paths = []
            frames_dir = os.path.join(d, "frames")
            os.makedirs(frames_dir, exist_ok=True)
            for i, z in enumerate(nf.interpolate(za, zb, n)):
                frame = nf.render(registry.field, z, cam, config.samples_per_ray,
                                  config.background, seed=seed, config=config)
                p = os.path.join(frames_dir, f"frame_{i:03d}.png")
                save_image(frame, p)
                paths.append(p)
            _add_artifact(job, jobs_root, "frames", paths)
        else:
            raise ValueError(f"unknown job kind {kind!r}")
        job.status = "done"
        job.error = None
        save_job(job, jobs_root)
    except Exception as e:
        stage = STAGES[kind][len(job.artifacts)] if kind in STAGES and \
            len(job.artifacts) < len(STAGES[kind]) else "?"
        job.status = "failed"
        job.error = f"stage '{stage}': {type(e).__name__}: {e}"
        save_job(job, jobs_root)
        job.traceback = traceback.format_exc()
    return job
