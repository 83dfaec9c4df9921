"""Shared data model: images, latents, cameras, config, seeded RNG.

Images are numpy float32 arrays of shape (H, W, C) with values in [0, 1]
and C in {1, 3}. Latents are 1-D numpy float64 arrays. Both are plain
arrays rather than wrapper classes; `validate_image` / `validate_latent`
enforce the invariants at module boundaries.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorruptImage, MalformedLatentFile, UnsupportedFormat

LATENT_FORMAT = "sketchvision-latent/1"

# Rec. 601 luma weights, used everywhere RGB collapses to one channel.
LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


def validate_image(img: np.ndarray, channels: int | None = None) -> np.ndarray:
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"image must be (H, W, 1|3), got {img.shape}")
    if img.shape[0] < 8 or img.shape[1] < 8:
        raise ValueError(f"image smaller than 8x8: {img.shape}")
    if channels is not None and img.shape[2] != channels:
        raise ValueError(f"expected {channels} channels, got {img.shape[2]}")
    if not np.isfinite(img).all():
        raise ValueError("image contains non-finite values")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values outside [0, 1]")
    return img


def validate_latent(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise ValueError(f"latent must be a non-empty 1-D vector, got shape {z.shape}")
    if not np.isfinite(z).all():
        raise ValueError("latent contains non-finite values")
    return z


def luminance(img: np.ndarray) -> np.ndarray:
    """RGB (H,W,3) -> grayscale (H,W,1). Pass-through for 1-channel input."""
    if img.shape[2] == 1:
        return img
    out = img @ LUMA
    return np.clip(out, 0.0, 1.0).astype(np.float32)[..., None]


def load_image(path: str | os.PathLike, expected_channels: int) -> np.ndarray:
    """Load an 8-bit PNG into a float32 image in [0, 1].

    RGB is collapsed to gray by luminance when expected_channels == 1;
    grayscale is broadcast to 3 channels when expected_channels == 3.
    """
    if expected_channels not in (1, 3):
        raise ValueError("expected_channels must be 1 or 3")
    if not os.path.isfile(path):
        raise FileNotFoundError(str(path))
    with open(path, "rb") as f:
        magic = f.read(8)
    if magic != b"\x89PNG\r\n\x1a\n":
        raise UnsupportedFormat(f"not a PNG file: {path}")
    try:
        with Image.open(path) as im:
            im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float32) / 255.0
    except (UnidentifiedImageError, OSError, SyntaxError) as e:
        raise CorruptImage(f"{path}: {e}") from e
    if expected_channels == 1:
        arr = luminance(arr)
    return validate_image(arr, expected_channels)


def save_image(img: np.ndarray, path: str | os.PathLike) -> None:
    """Write an image as an 8-bit PNG (grayscale or RGB)."""
    validate_image(img)
    arr = np.rint(img * 255.0).clip(0, 255).astype(np.uint8)
    if arr.shape[2] == 1:
        pil = Image.fromarray(arr[..., 0], mode="L")
    else:
        pil = Image.fromarray(arr, mode="RGB")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    pil.save(path, format="PNG")


def resize(img: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize to size x size (half-pixel-center convention).

    Accepts inputs below the 8x8 floor so tiny fixtures can be upsampled.
    """
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"image must be (H, W, 1|3), got {img.shape}")
    if size < 2:
        raise ValueError("size must be >= 2")
    h, w, c = img.shape
    if h == size and w == size:
        return img.copy()
    # Half-pixel centers: out center i maps to (i + 0.5) * scale - 0.5.
    ys = (np.arange(size) + 0.5) * (h / size) - 0.5
    xs = (np.arange(size) + 0.5) * (w / size) - 0.5
    y0 = np.clip(np.floor(ys), 0, h - 1).astype(int)
    x0 = np.clip(np.floor(xs), 0, w - 1).astype(int)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0).astype(np.float32)[:, None, None]
    wx = np.clip(xs - x0, 0.0, 1.0).astype(np.float32)[None, :, None]
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    out = top * (1 - wy) + bot * wy
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def save_latent(z: np.ndarray, path: str | os.PathLike) -> None:
    z = validate_latent(z)
    payload = {"format": LATENT_FORMAT, "dim": int(z.size), "values": z.tolist()}
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)


def load_latent(path: str | os.PathLike) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise MalformedLatentFile(f"{path}: {e}") from e
    if not isinstance(payload, dict) or "dim" not in payload or "values" not in payload:
        raise MalformedLatentFile(f"{path}: missing dim/values")
    values = payload["values"]
    if not isinstance(values, list) or len(values) != payload["dim"]:
        raise MalformedLatentFile(f"{path}: dim/values mismatch")
    z = np.asarray(values, dtype=np.float64)
    if z.ndim != 1 or not np.isfinite(z).all():
        raise MalformedLatentFile(f"{path}: non-finite or non-vector values")
    return z


@dataclass(frozen=True)
class Camera:
    """Look-at-origin camera on a sphere. Azimuth/elevation in degrees."""

    azimuth: float = 0.0
    elevation: float = 20.0
    radius: float = 2.0
    fov: float = 50.0
    image_size: int = 64

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be > 0")
        if not (0 < self.fov < 180):
            raise ValueError("fov must be in (0, 180)")
        if self.image_size < 8:
            raise ValueError("image_size must be >= 8")
        object.__setattr__(self, "azimuth", self.azimuth % 360.0)

    @property
    def position(self) -> np.ndarray:
        az = math.radians(self.azimuth)
        el = math.radians(self.elevation)
        return np.array(
            [
                self.radius * math.cos(el) * math.cos(az),
                self.radius * math.cos(el) * math.sin(az),
                self.radius * math.sin(el),
            ]
        )


def turntable_cameras(n: int, elevation: float = 20.0, radius: float = 2.0,
                      fov: float = 50.0, image_size: int = 64) -> list[Camera]:
    return [
        Camera(azimuth=360.0 * k / n, elevation=elevation, radius=radius,
               fov=fov, image_size=image_size)
        for k in range(n)
    ]


@dataclass
class Config:
    """Flat configuration; every field mirrors one JSON key / CLI flag."""

    latent_dim: int = 256
    image_size: int = 256
    # inverse_drawings training
    lr_generator: float = 2e-4
    # the patch discriminator overpowers the small generator at equal
    # rates, so it trains an order of magnitude slower
    lr_discriminator: float = 2e-5
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    lambda_adv: float = 1.0
    lambda_sem: float = 1.0
    lambda_geo: float = 10.0
    lambda_style: float = 0.5
    batch_size: int = 4
    epochs: int = 1
    residual_blocks: int = 2
    base_channels: int = 32
    # renderer; near/far are multiples of the camera radius
    samples_per_ray: int = 32
    near: float = 0.5
    far: float = 1.5
    background: float = 1.0
    # neural field
    pe_frequencies: int = 6
    field_hidden: int = 64
    field_layers: int = 4
    iso_threshold: float = 5.0
    # encoder (image -> latent optimization)
    encode_iterations: int = 500
    encode_lr: float = 0.05
    # field training
    field_iterations: int = 10000
    field_lr: float = 1e-3
    rays_per_batch: int = 1024
    # pipeline
    whiten_threshold: float = 0.15
    turntable_frames: int = 8
    render_size: int = 64
    grid_resolution: int = 32

    def validate(self) -> "Config":
        for name in ("lambda_adv", "lambda_sem", "lambda_geo", "lambda_style"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.near < self.far:
            raise ValueError("near must be < far")
        if self.samples_per_ray < 2:
            raise ValueError("samples_per_ray must be >= 2")
        if self.latent_dim < 1 or self.image_size < 8:
            raise ValueError("latent_dim >= 1 and image_size >= 8 required")
        return self

    def to_json(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(dataclasses.asdict(self), f, indent=2)

    @classmethod
    def from_json(cls, path: str | os.PathLike, **overrides) -> "Config":
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data).validate()


def rng_from_seed(seed: int, *streams: int) -> np.random.Generator:
    """Deterministic numpy Generator derived from a 64-bit seed plus
    optional stream labels, so sub-operations get independent streams."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *streams])))
