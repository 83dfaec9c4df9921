"""Photo -> sketch and photo -> pseudo-depth backends.

The fallback backend is a pure classical function (blur -> Sobel ->
normalize -> invert -> gamma) so the whole pipeline runs and tests
deterministically without any pretrained weights. A pretrained model can
be plugged in through a subprocess adapter selected by name.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage

from .core import load_image, luminance, save_image, validate_image
from .errors import BackendUnavailable


@dataclass(frozen=True)
class SketchifyBackend:
    name: str
    to_sketch: Callable[[np.ndarray], np.ndarray]
    to_depth: Callable[[np.ndarray], np.ndarray]


def fallback_sketch(img: np.ndarray) -> np.ndarray:
    """Line extraction: Gaussian blur (sigma 1.0), Sobel magnitude,
    normalize by the per-image max, invert, gamma 0.7."""
    validate_image(img)
    gray = luminance(img)[..., 0].astype(np.float64)
    blurred = ndimage.gaussian_filter(gray, sigma=1.0, mode="reflect")
    gx = ndimage.sobel(blurred, axis=1, mode="reflect")
    gy = ndimage.sobel(blurred, axis=0, mode="reflect")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak > 0:
        mag = mag / peak
    out = (1.0 - mag) ** 0.7
    return np.clip(out, 0.0, 1.0).astype(np.float32)[..., None]


def pseudo_depth(img: np.ndarray) -> np.ndarray:
    """Deterministic depth stand-in: blurred luminance plus a vertical
    prior (top row = 1 = nearest), min-max normalized per image."""
    validate_image(img)
    gray = luminance(img)[..., 0].astype(np.float64)
    h = gray.shape[0]
    prior = 1.0 - np.arange(h, dtype=np.float64) / (h - 1)
    raw = 0.5 * ndimage.gaussian_filter(gray, sigma=2.0, mode="reflect") + prior[:, None]
    lo, hi = raw.min(), raw.max()
    if hi - lo < 1e-12:
        out = np.full_like(raw, 0.5)
    else:
        out = (raw - lo) / (hi - lo)
    return np.clip(out, 0.0, 1.0).astype(np.float32)[..., None]


FALLBACK = SketchifyBackend("fallback", fallback_sketch, pseudo_depth)


def _subprocess_image_op(command_template: str, img: np.ndarray) -> np.ndarray:
    """Run `command_template` with {input} / {output} PNG path placeholders."""
    with tempfile.TemporaryDirectory() as tmp:
        in_path = os.path.join(tmp, "in.png")
        out_path = os.path.join(tmp, "out.png")
        save_image(img, in_path)
        cmd = [part.format(input=in_path, output=out_path)
               for part in shlex.split(command_template)]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0 or not os.path.isfile(out_path):
            raise BackendUnavailable(
                f"pretrained backend command failed (exit {proc.returncode}): {proc.stderr[-500:]}"
            )
        return load_image(out_path, expected_channels=1)


def _pretrained_backend(name: str) -> SketchifyBackend:
    """Adapter contract: env vars SKETCHVISION_SKETCH_CMD_<NAME> and
    SKETCHVISION_DEPTH_CMD_<NAME> hold command templates that read
    {input} and write {output} as PNG, exiting 0 on success."""
    key = name.upper().replace("-", "_")
    sketch_cmd = os.environ.get(f"SKETCHVISION_SKETCH_CMD_{key}")
    depth_cmd = os.environ.get(f"SKETCHVISION_DEPTH_CMD_{key}")
    if not sketch_cmd:
        raise BackendUnavailable(
            f"pretrained backend '{name}' not configured "
            f"(set SKETCHVISION_SKETCH_CMD_{key})"
        )

    def to_sketch(img: np.ndarray) -> np.ndarray:
        return _subprocess_image_op(sketch_cmd, img)

    def to_depth(img: np.ndarray) -> np.ndarray:
        if not depth_cmd:
            return pseudo_depth(img)
        return _subprocess_image_op(depth_cmd, img)

    return SketchifyBackend(f"pretrained:{name}", to_sketch, to_depth)


def get_backend(selector: str = "fallback") -> SketchifyBackend:
    if selector == "fallback":
        return FALLBACK
    if selector.startswith("pretrained:"):
        return _pretrained_backend(selector.split(":", 1)[1])
    raise BackendUnavailable(f"unknown sketchify backend: {selector!r}")


def sketchify(img: np.ndarray, backend: SketchifyBackend = FALLBACK) -> np.ndarray:
    validate_image(img, channels=3)
    out = backend.to_sketch(img)
    return validate_image(out, channels=1)
