"""Latent-conditioned implicit field with a differentiable volumetric
renderer, optimization-based image -> latent encoding, linear latent
interpolation, density-grid export, and auto-decoder training on toy
scenes.

Conventions: scenes live in the [-1, 1]^3 box, cameras look at the
origin, the default sampling bounds are 0.5r..1.5r of the camera radius,
and the background is white.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from . import checkpoint as ckpt
from .core import Camera, Config, rng_from_seed, save_image
from .errors import DimensionMismatch, InvalidStepCount, NonFiniteLoss


# ---------------------------------------------------------------------------
# fields

def positional_encoding(points: torch.Tensor, frequencies: int) -> torch.Tensor:
    """(N, 3) -> (N, 3 + 6*frequencies): raw xyz plus sin/cos at octave
    frequencies 2^k."""
    parts = [points]
    for k in range(frequencies):
        parts.append(torch.sin((2.0 ** k) * points))
        parts.append(torch.cos((2.0 ** k) * points))
    return torch.cat(parts, dim=-1)


class MLPField(nn.Module):
    """(position, latent) -> (density, rgb). Softplus keeps density
    nonnegative; sigmoid keeps color in [0, 1]."""

    def __init__(self, latent_dim: int = 16, frequencies: int = 6,
                 hidden: int = 64, layers: int = 4):
        super().__init__()
        self.latent_dim = latent_dim
        self.frequencies = frequencies
        in_dim = 3 + 6 * frequencies + latent_dim
        dims = [in_dim] + [hidden] * (layers - 1) + [4]
        self.layers = nn.ModuleList(nn.Linear(a, b) for a, b in zip(dims[:-1], dims[1:]))

    def forward(self, points: torch.Tensor, z: torch.Tensor):
        if z.shape[-1] != self.latent_dim:
            raise DimensionMismatch(f"latent dim {z.shape[-1]}, field expects {self.latent_dim}")
        if z.dim() == 1:
            z = z[None].expand(points.shape[0], -1)
        h = torch.cat([positional_encoding(points, self.frequencies), z], dim=-1)
        for layer in self.layers[:-1]:
            h = F.relu(layer(h))
        out = self.layers[-1](h)
        return F.softplus(out[:, 0]), torch.sigmoid(out[:, 1:4])


class AnalyticField:
    """Field defined by plain functions of position; ignores the latent.
    Used for fixtures (sphere, cube, constant slabs)."""

    latent_dim = 0

    def __init__(self, sigma_fn, rgb_fn):
        self.sigma_fn = sigma_fn
        self.rgb_fn = rgb_fn

    def __call__(self, points: torch.Tensor, z=None):
        return self.sigma_fn(points), self.rgb_fn(points)

    def parameters(self):
        return []


def sphere_field(radius: float = 0.5, density: float = 50.0,
                 color=(0.8, 0.2, 0.2)) -> AnalyticField:
    c = torch.tensor(color)

    def sigma(p):
        return torch.where(p.norm(dim=-1) <= radius,
                           torch.full_like(p[:, 0], density),
                           torch.zeros_like(p[:, 0]))

    return AnalyticField(sigma, lambda p: c.to(p.dtype).expand(p.shape[0], 3).clone())


def cube_field(half_extent: float = 0.45, density: float = 50.0,
               color=(0.2, 0.3, 0.8)) -> AnalyticField:
    c = torch.tensor(color)

    def sigma(p):
        inside = (p.abs() <= half_extent).all(dim=-1)
        return torch.where(inside, torch.full_like(p[:, 0], density),
                           torch.zeros_like(p[:, 0]))

    return AnalyticField(sigma, lambda p: c.to(p.dtype).expand(p.shape[0], 3).clone())


# ---------------------------------------------------------------------------
# rays and compositing

def camera_rays(cam: Camera, dtype=torch.float32):
    """Pinhole rays through pixel centers; returns (H*W, 3) origins and
    unit directions, row-major over the image."""
    pos = torch.tensor(cam.position, dtype=dtype)
    forward = -pos / pos.norm()
    world_up = torch.tensor([0.0, 0.0, 1.0], dtype=dtype)
    if forward.abs()[2] > 0.999:
        world_up = torch.tensor([0.0, 1.0, 0.0], dtype=dtype)
    right = torch.linalg.cross(forward, world_up)
    right = right / right.norm()
    up = torch.linalg.cross(right, forward)
    n = cam.image_size
    half = math.tan(math.radians(cam.fov) / 2)
    coords = (torch.arange(n, dtype=dtype) + 0.5) / n * 2 - 1
    v, u = torch.meshgrid(coords, coords, indexing="ij")
    dirs = (forward[None, None]
            + u[..., None] * half * right[None, None]
            - v[..., None] * half * up[None, None])
    dirs = dirs / dirs.norm(dim=-1, keepdim=True)
    dirs = dirs.reshape(-1, 3)
    origins = pos[None].expand_as(dirs)
    return origins, dirs


def stratified_ts(n_rays: int, samples: int, near: float, far: float,
                  seed: int | None, dtype=torch.float32) -> torch.Tensor:
    """Strictly increasing per-ray t samples: one per uniform bin, either
    at bin midpoints (seed None) or jittered from the seed."""
    edges = torch.linspace(near, far, samples + 1, dtype=torch.float64)
    lo, width = edges[:-1], edges[1:] - edges[:-1]
    if seed is None:
        offs = torch.full((n_rays, samples), 0.5, dtype=torch.float64)
    else:
        rng = rng_from_seed(seed, 2)
        offs = torch.from_numpy(rng.random((n_rays, samples)))
    return (lo[None] + offs * width[None]).to(dtype)


def deltas_from_ts(ts: torch.Tensor, far: float) -> torch.Tensor:
    """delta_i = t_{i+1} - t_i, last delta = far - t_last."""
    last = far - ts[:, -1:]
    return torch.cat([ts[:, 1:] - ts[:, :-1], last], dim=1)


def composite(sigma: torch.Tensor, rgb: torch.Tensor, deltas: torch.Tensor,
              background) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Emission-absorption quadrature along each ray.

    sigma (R,S), rgb (R,S,3), deltas (R,S) -> (pixels (R,3),
    weights (R,S), T_final (R,)).
    """
    alpha = 1.0 - torch.exp(-sigma * deltas)
    trans = torch.cumprod(1.0 - alpha + 1e-24, dim=1)
    t_excl = torch.cat([torch.ones_like(trans[:, :1]), trans[:, :-1]], dim=1)
    weights = t_excl * alpha
    t_final = trans[:, -1]
    bg = torch.as_tensor(background, dtype=rgb.dtype)
    if bg.dim() == 0:
        bg = bg.expand(3)
    pixels = (weights[..., None] * rgb).sum(dim=1) + t_final[:, None] * bg[None]
    return pixels, weights, t_final


def render_rays(field, z: torch.Tensor | None, origins: torch.Tensor,
                dirs: torch.Tensor, ts: torch.Tensor, far: float,
                background=1.0, chunk: int = 65536):
    """Differentiable ray rendering; keeps the graph when z or field
    parameters require grad."""
    r, s = ts.shape
    points = origins[:, None, :] + ts[..., None] * dirs[:, None, :]
    flat = points.reshape(-1, 3)
    sigmas, rgbs = [], []
    for i in range(0, flat.shape[0], chunk):
        sg, cl = field(flat[i:i + chunk], z)
        sigmas.append(sg)
        rgbs.append(cl)
    sigma = torch.cat(sigmas).reshape(r, s)
    rgb = torch.cat(rgbs).reshape(r, s, 3)
    deltas = deltas_from_ts(ts, far)
    return composite(sigma, rgb, deltas, background)


def bounds_for(cam: Camera, config: Config | None = None) -> tuple[float, float]:
    near_f = config.near if config else 0.5
    far_f = config.far if config else 1.5
    return near_f * cam.radius, far_f * cam.radius


def render(field, z, cam: Camera, samples_per_ray: int = 32,
           background=1.0, seed: int | None = 0,
           config: Config | None = None) -> np.ndarray:
    """Render a camera view to an (H, W, 3) float32 image."""
    if samples_per_ray < 2:
        raise ValueError("samples_per_ray must be >= 2")
    zt = None
    if getattr(field, "latent_dim", 0):
        zt = torch.as_tensor(np.asarray(z), dtype=torch.float32)
        if zt.shape[-1] != field.latent_dim:
            raise DimensionMismatch(f"latent dim {zt.shape[-1]}, field expects {field.latent_dim}")
    near, far = bounds_for(cam, config)
    origins, dirs = camera_rays(cam)
    ts = stratified_ts(origins.shape[0], samples_per_ray, near, far, seed)
    with torch.no_grad():
        pixels, _, _ = render_rays(field, zt, origins, dirs, ts, far, background)
    n = cam.image_size
    img = pixels.reshape(n, n, 3).numpy()
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def decode(z, field, cams: list[Camera], samples_per_ray: int = 32,
           background=1.0, seed: int | None = 0,
           config: Config | None = None) -> list[np.ndarray]:
    """One render per camera; pure function of (z, field, cams)."""
    return [render(field, z, cam, samples_per_ray, background, seed, config)
            for cam in cams]


# ---------------------------------------------------------------------------
# encoding (image -> latent by gradient descent)

@dataclass
class EncodeResult:
    latent: np.ndarray
    final_loss: float
    iterations_used: int
    loss_curve: list[float]


def encode(field, target: np.ndarray, cam: Camera, budget: int,
           seed: int = 0, lr: float = 0.05, samples_per_ray: int = 32,
           background=1.0, config: Config | None = None) -> EncodeResult:
    """Adam descent on the latent minimizing MSE between the render and
    the target image; the decoder stays frozen. Returns the best iterate."""
    if target.shape[0] != cam.image_size or target.shape[1] != cam.image_size:
        raise ValueError("target must match cam.image_size")
    dim = field.latent_dim
    rng = rng_from_seed(seed, 3)
    z = torch.tensor(0.1 * rng.standard_normal(dim), dtype=torch.float32,
                     requires_grad=True)
    target_t = torch.from_numpy(np.asarray(target, dtype=np.float32)).reshape(-1, 3)
    near, far = bounds_for(cam, config)
    origins, dirs = camera_rays(cam)
    ts = stratified_ts(origins.shape[0], samples_per_ray, near, far, seed)

    def image_loss(zt):
        pixels, _, _ = render_rays(field, zt, origins, dirs, ts, far, background)
        return ((pixels - target_t) ** 2).mean()

    # Each recorded loss belongs to the iterate evaluated before the
    # optimizer step, so the returned best iterate is always one whose
    # loss appears in the curve.
    best_z, best_loss = None, float("inf")
    curve = []
    opt = torch.optim.Adam([z], lr=lr)
    used = 0
    for i in range(budget + 1):
        opt.zero_grad()
        loss = image_loss(z)
        if not torch.isfinite(loss):
            raise NonFiniteLoss(f"encode: loss non-finite at iteration {i}")
        val = float(loss.detach())
        curve.append(val)
        if val < best_loss:
            best_loss = val
            best_z = z.detach().clone()
        if i == budget:
            break
        loss.backward()
        opt.step()
        used = i + 1
    return EncodeResult(
        latent=best_z.numpy().astype(np.float64),
        final_loss=best_loss,
        iterations_used=used,
        loss_curve=curve,
    )


# ---------------------------------------------------------------------------
# interpolation

def interpolate(z_a: np.ndarray, z_b: np.ndarray, n: int) -> list[np.ndarray]:
    """n evenly spaced convex combinations; endpoints are bit-equal
    copies of the inputs."""
    z_a = np.asarray(z_a, dtype=np.float64)
    z_b = np.asarray(z_b, dtype=np.float64)
    if z_a.shape != z_b.shape:
        raise DimensionMismatch(f"{z_a.shape} vs {z_b.shape}")
    if n < 2:
        raise InvalidStepCount(f"n must be >= 2, got {n}")
    out = []
    for k in range(n):
        if k == 0:
            out.append(z_a.copy())
        elif k == n - 1:
            out.append(z_b.copy())
        else:
            t = k / (n - 1)
            out.append((1.0 - t) * z_a + t * z_b)
    return out


# ---------------------------------------------------------------------------
# density grid

def extract_density_grid(field, z, resolution: int,
                         bounds: tuple[float, float] = (-1.0, 1.0)) -> np.ndarray:
    """Densities at cell centers of a resolution^3 grid over the cube;
    index order [ix, iy, iz]."""
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    zt = None
    if getattr(field, "latent_dim", 0):
        zt = torch.as_tensor(np.asarray(z), dtype=torch.float32)
        if zt.shape[-1] != field.latent_dim:
            raise DimensionMismatch(f"latent dim {zt.shape[-1]}, field expects {field.latent_dim}")
    lo, hi = bounds
    centers = lo + (np.arange(resolution) + 0.5) * (hi - lo) / resolution
    xs, ys, zs = np.meshgrid(centers, centers, centers, indexing="ij")
    pts = torch.tensor(np.stack([xs, ys, zs], axis=-1).reshape(-1, 3), dtype=torch.float32)
    out = np.empty(pts.shape[0], dtype=np.float32)
    with torch.no_grad():
        for i in range(0, pts.shape[0], 65536):
            sg, _ = field(pts[i:i + 65536], zt)
            out[i:i + sg.shape[0]] = sg.numpy()
    return out.reshape(resolution, resolution, resolution)


def export_density_grid(grid: np.ndarray, path_base, bounds=(-1.0, 1.0),
                        threshold: float = 5.0) -> tuple[str, str]:
    """Write grid.bin (flat little-endian float32, C order) plus a JSON
    sidecar with resolution/bounds/threshold."""
    bin_path = f"{path_base}.bin"
    json_path = f"{path_base}.json"
    os.makedirs(os.path.dirname(os.path.abspath(bin_path)), exist_ok=True)
    grid.astype("<f4").tofile(bin_path)
    with open(json_path, "w") as f:
        json.dump({"resolution": grid.shape[0], "bounds": list(bounds),
                   "threshold": threshold, "order": "xyz"}, f)
    return bin_path, json_path


def export_turntable(frames: list[np.ndarray], out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i, frame in enumerate(frames):
        p = os.path.join(out_dir, f"view_{i:03d}.png")
        save_image(frame, p)
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# auto-decoder training

def psnr(a: np.ndarray, b: np.ndarray) -> float:
    mse = float(np.mean((np.asarray(a, np.float64) - np.asarray(b, np.float64)) ** 2))
    if mse == 0:
        return float("inf")
    return -10.0 * math.log10(mse)


def train_field(field: MLPField, scenes: list[tuple[str, list[tuple[np.ndarray, Camera]]]],
                config: Config, seed: int = 0, iterations: int | None = None,
                rays_per_batch: int | None = None, target_psnr: float | None = None,
                eval_every: int = 250, log_every: int = 0):
    """Jointly optimize decoder parameters and one latent per scene on
    mean-squared rendering error. Returns (field, {scene_id: latent}).

    Stops early once every scene's full render clears target_psnr.
    """
    if not scenes:
        raise ValueError("need at least one scene")
    iterations = config.field_iterations if iterations is None else iterations
    rays_per_batch = rays_per_batch or config.rays_per_batch
    torch.manual_seed(seed & 0x7FFFFFFFFFFFFFFF)
    latents = nn.Parameter(0.01 * torch.randn(len(scenes), field.latent_dim))
    opt = torch.optim.Adam([
        {"params": field.parameters(), "lr": config.field_lr},
        {"params": [latents], "lr": 10 * config.field_lr},
    ])

    # Precompute rays and targets per view.
    views = []
    for si, (sid, pairs) in enumerate(scenes):
        for img, cam in pairs:
            origins, dirs = camera_rays(cam)
            near, far = bounds_for(cam, config)
            target = torch.from_numpy(np.asarray(img, np.float32)).reshape(-1, 3)
            views.append((si, origins, dirs, near, far, target))

    rng = rng_from_seed(seed, 4)
    for it in range(iterations):
        si, origins, dirs, near, far, target = views[int(rng.integers(len(views)))]
        pick = torch.from_numpy(rng.integers(0, origins.shape[0], size=min(rays_per_batch, origins.shape[0])))
        o, d, tgt = origins[pick], dirs[pick], target[pick]
        ts = stratified_ts(o.shape[0], config.samples_per_ray, near, far,
                           int(rng.integers(2 ** 62)))
        opt.zero_grad()
        pixels, _, _ = render_rays(field, latents[si], o, d, ts, far, config.background)
        loss = ((pixels - tgt) ** 2).mean()
        if not torch.isfinite(loss):
            raise NonFiniteLoss(f"train_field: loss non-finite at iteration {it}")
        loss.backward()
        opt.step()
        if log_every and (it + 1) % log_every == 0:
            print(f"[train_field] iter {it + 1}/{iterations} loss {float(loss):.5f}")
        if target_psnr is not None and (it + 1) % eval_every == 0:
            if _all_scenes_clear(field, latents, scenes, config, target_psnr):
                break

    table = {sid: latents[i].detach().numpy().astype(np.float64)
             for i, (sid, _) in enumerate(scenes)}
    return field, table


def _all_scenes_clear(field, latents, scenes, config, target_psnr) -> bool:
    with torch.no_grad():
        for i, (sid, pairs) in enumerate(scenes):
            img, cam = pairs[0]
            out = render(field, latents[i].detach().numpy(), cam,
                         config.samples_per_ray, config.background, seed=0,
                         config=config)
            if psnr(out, img) < target_psnr:
                return False
    return True


# ---------------------------------------------------------------------------
# field checkpoints

def save_field(field: MLPField, latent_table: dict[str, np.ndarray],
               config: Config, path) -> None:
    tensors = {f"field.{k}": v for k, v in field.state_dict().items()}
    for sid, z in latent_table.items():
        tensors[f"latent.{sid}"] = torch.as_tensor(np.asarray(z, np.float32))
    meta = {
        "config_hash": ckpt.config_hash(config),
        "step": 0,
        "epoch": 0,
        "latent_dim": field.latent_dim,
        "frequencies": field.frequencies,
        "hidden": field.layers[0].out_features,
        "layers": len(field.layers),
        "scene_ids": sorted(latent_table),
    }
    ckpt.save_archive(path, "field", tensors, meta)


def load_field(path) -> tuple[MLPField, dict[str, np.ndarray]]:
    meta, tensors = ckpt.load_archive(path, "field")
    field = MLPField(meta["latent_dim"], meta["frequencies"],
                     meta["hidden"], meta["layers"])
    field.load_state_dict({k[len("field."):]: v for k, v in tensors.items()
                           if k.startswith("field.")})
    field.eval()
    table = {sid: tensors[f"latent.{sid}"].numpy().astype(np.float64)
             for sid in meta["scene_ids"]}
    return field, table
