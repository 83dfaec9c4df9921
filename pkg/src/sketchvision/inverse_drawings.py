"""Sketch -> photo translation trained with adversarial + semantic +
geometry + style losses.

The generator is a resnet-style translation network with its input/output
channel counts swapped relative to a photo->sketch network (1-channel
sketch in, 3-channel photo out). The discriminator is a sketch-conditioned
patch classifier. All four loss terms are differentiable torch ops so the
whole objective trains end to end and gradient-checks against finite
differences.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from . import checkpoint as ckpt
from .core import Config, load_image, rng_from_seed
from .errors import NonFiniteLoss, ShapeError

LOSS_TERMS = ("adv", "sem", "geo", "style")


# ---------------------------------------------------------------------------
# tensor <-> image plumbing

def img_to_tensor(img: np.ndarray) -> torch.Tensor:
    """(H, W, C) float image -> (1, C, H, W) tensor."""
    return torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1)))[None]


def tensor_to_img(t: torch.Tensor) -> np.ndarray:
    """(1, C, H, W) tensor -> (H, W, C) float32 image."""
    arr = t.detach().cpu().numpy()[0].transpose(1, 2, 0)
    return np.clip(arr, 0.0, 1.0).astype(np.float32)


def rgb_to_luma(t: torch.Tensor) -> torch.Tensor:
    """(N, 3, H, W) -> (N, 1, H, W) using Rec. 601 weights."""
    w = torch.tensor([0.299, 0.587, 0.114], dtype=t.dtype, device=t.device)
    return (t * w[None, :, None, None]).sum(dim=1, keepdim=True)


# ---------------------------------------------------------------------------
# networks

class ResidualBlock(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1, padding_mode="reflect")
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1, padding_mode="reflect")

    def forward(self, x):
        h = F.relu(self.conv1(x))
        return x + self.conv2(h)


class Generator(nn.Module):
    """Downsampling encoder (two stride-2 stages), residual trunk,
    upsampling decoder; sigmoid keeps outputs in [0, 1]."""

    def __init__(self, residual_blocks: int = 2, base_channels: int = 32):
        super().__init__()
        c = base_channels
        self.stem = nn.Conv2d(1, c, 7, padding=3, padding_mode="reflect")
        self.down1 = nn.Conv2d(c, 2 * c, 3, stride=2, padding=1)
        self.down2 = nn.Conv2d(2 * c, 4 * c, 3, stride=2, padding=1)
        self.trunk = nn.Sequential(*[ResidualBlock(4 * c) for _ in range(residual_blocks)])
        self.up1 = nn.Conv2d(4 * c, 2 * c, 3, padding=1)
        self.up2 = nn.Conv2d(2 * c, c, 3, padding=1)
        self.head = nn.Conv2d(c, 3, 7, padding=3, padding_mode="reflect")

    def encode_features(self, x: torch.Tensor) -> list[torch.Tensor]:
        """The two post-downsampling encoder activations (style layers)."""
        h = F.relu(self.stem(x))
        f1 = F.relu(self.down1(h))
        f2 = F.relu(self.down2(f1))
        return [f1, f2]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] % 4 or x.shape[-2] % 4:
            raise ShapeError(f"spatial dims must be divisible by 4, got {tuple(x.shape[-2:])}")
        f1, f2 = self.encode_features(x)
        h = self.trunk(f2)
        h = F.relu(self.up1(F.interpolate(h, scale_factor=2, mode="nearest")))
        h = F.relu(self.up2(F.interpolate(h, scale_factor=2, mode="nearest")))
        return torch.sigmoid(self.head(h))

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


class Discriminator(nn.Module):
    """Patch classifier over photo concatenated with its sketch condition;
    outputs one logit per receptive patch."""

    def __init__(self, base_channels: int = 32):
        super().__init__()
        c = base_channels
        self.net = nn.Sequential(
            nn.Conv2d(4, c, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(c, 2 * c, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(2 * c, 1, 4, padding=1),
        )

    def forward(self, photo: torch.Tensor, sketch: torch.Tensor) -> torch.Tensor:
        return self.net(torch.cat([photo, sketch], dim=1))


def generate(generator: Generator, sketch: np.ndarray) -> np.ndarray:
    """Run the generator on a single-channel sketch image."""
    if sketch.shape[0] % 4 or sketch.shape[1] % 4:
        raise ShapeError(f"sketch dims must be divisible by 4, got {sketch.shape[:2]}")
    generator.eval()
    with torch.no_grad():
        out = generator(img_to_tensor(sketch))
    return tensor_to_img(out)


# ---------------------------------------------------------------------------
# loss terms

def adversarial_loss(scores: torch.Tensor, target_real: bool) -> torch.Tensor:
    """BCE-with-logits averaged over the patch score map."""
    target = torch.ones_like(scores) if target_real else torch.zeros_like(scores)
    return F.binary_cross_entropy_with_logits(scores, target)


class ToyEmbedder:
    """Deterministic stand-in for a semantic image embedder: 8x8 area
    downsample per channel, flatten, mean-center, L2-normalize."""

    name = "toy"
    dim = 192

    def embed(self, img: torch.Tensor) -> torch.Tensor:
        pooled = F.adaptive_avg_pool2d(img, (8, 8)).reshape(img.shape[0], -1)
        centered = pooled - pooled.mean(dim=1, keepdim=True)
        norm = centered.norm(dim=1, keepdim=True)
        # Constant images center to zero; map them to a fixed unit vector
        # so the norm-1 invariant holds everywhere.
        fallback = torch.zeros_like(centered)
        fallback[:, 0] = 1.0
        safe = torch.where(norm > 1e-8, centered / norm.clamp_min(1e-12), fallback)
        return safe


def semantic_loss(embedder, generated: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """1 - cosine similarity of the two embeddings; in [0, 2]."""
    ea = embedder.embed(generated)
    eb = embedder.embed(target)
    return (1.0 - (ea * eb).sum(dim=1)).mean()


def gaussian_kernel1d(sigma: float, radius: int) -> torch.Tensor:
    x = torch.arange(-radius, radius + 1, dtype=torch.float64)
    k = torch.exp(-0.5 * (x / sigma) ** 2)
    return (k / k.sum()).float()


def _pad_symmetric(x: torch.Tensor, radius: int, dim: int) -> torch.Tensor:
    """Edge-inclusive mirror padding (numpy 'symmetric'), which is what
    scipy.ndimage calls 'reflect'."""
    left = x.narrow(dim, 0, radius).flip(dim)
    right = x.narrow(dim, x.shape[dim] - radius, radius).flip(dim)
    return torch.cat([left, x, right], dim=dim)


def pseudo_depth_torch(img: torch.Tensor) -> torch.Tensor:
    """Differentiable twin of sketchify.pseudo_depth: blurred luminance
    plus a vertical near-at-top prior, min-max normalized per image."""
    gray = rgb_to_luma(img)
    sigma, radius = 2.0, 8  # matches scipy's truncate=4 default
    k = gaussian_kernel1d(sigma, radius).to(img.dtype)
    h = F.conv2d(_pad_symmetric(gray, radius, 3), k.view(1, 1, 1, -1))
    h = F.conv2d(_pad_symmetric(h, radius, 2), k.view(1, 1, -1, 1))
    rows = img.shape[-2]
    prior = 1.0 - torch.arange(rows, dtype=img.dtype) / (rows - 1)
    raw = 0.5 * h + prior.view(1, 1, -1, 1)
    flat = raw.reshape(raw.shape[0], -1)
    lo = flat.min(dim=1).values.view(-1, 1, 1, 1)
    hi = flat.max(dim=1).values.view(-1, 1, 1, 1)
    return (raw - lo) / (hi - lo).clamp_min(1e-12)


def geometry_loss(depth_fn, generated: torch.Tensor, depth_label: torch.Tensor) -> torch.Tensor:
    """Mean absolute error between inferred and labeled depth; in [0, 1]."""
    return (depth_fn(generated) - depth_label).abs().mean()


def gram_matrix(feat: torch.Tensor) -> torch.Tensor:
    """(N, C, H, W) -> (N, C, C) Gram normalized by C*H*W."""
    n, c, h, w = feat.shape
    flat = feat.reshape(n, c, h * w)
    return flat @ flat.transpose(1, 2) / (c * h * w)


def style_loss(feats_generated: list[torch.Tensor], feats_style: list[torch.Tensor]) -> torch.Tensor:
    """Sum over layers of mean squared Gram differences."""
    total = 0.0
    for fg, fs in zip(feats_generated, feats_style):
        total = total + ((gram_matrix(fg) - gram_matrix(fs)) ** 2).mean()
    return total


def style_features(generator: Generator, img: torch.Tensor) -> list[torch.Tensor]:
    """Style layers come from the generator's own encoder; RGB images are
    collapsed to luminance to fit its 1-channel input."""
    return generator.encode_features(rgb_to_luma(img))


# ---------------------------------------------------------------------------
# training

@dataclass
class Triplet:
    photo: np.ndarray
    sketch: np.ndarray
    depth: np.ndarray
    id: str

    def __post_init__(self):
        shapes = {self.photo.shape[:2], self.sketch.shape[:2], self.depth.shape[:2]}
        if len(shapes) != 1:
            raise ValueError(f"triplet {self.id}: mismatched spatial dims {shapes}")


def load_dataset(data_dir) -> tuple[list[Triplet], list[str]]:
    """Read the photos/sketches/depths directory contract plus the
    style_order.json shuffle written by dataset preparation."""
    photo_dir = os.path.join(data_dir, "photos")
    ids = sorted(os.path.splitext(f)[0] for f in os.listdir(photo_dir) if f.endswith(".png"))
    triplets = []
    for i in ids:
        triplets.append(Triplet(
            photo=load_image(os.path.join(data_dir, "photos", f"{i}.png"), 3),
            sketch=load_image(os.path.join(data_dir, "sketches", f"{i}.png"), 1),
            depth=load_image(os.path.join(data_dir, "depths", f"{i}.png"), 1),
            id=i,
        ))
    order_path = os.path.join(data_dir, "style_order.json")
    if os.path.isfile(order_path):
        with open(order_path) as f:
            style_order = json.load(f)["order"]
    else:
        style_order = ids
    return triplets, style_order


@dataclass
class TrainState:
    generator: Generator
    discriminator: Discriminator
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    step: int = 0
    epoch: int = 0
    seed: int = 0
    loss_history: dict = field(default_factory=lambda: {k: [] for k in (*LOSS_TERMS, "total", "d")})


def create_train_state(config: Config, seed: int = 0) -> TrainState:
    torch.manual_seed(seed & 0x7FFFFFFFFFFFFFFF)
    g = Generator(config.residual_blocks, config.base_channels)
    d = Discriminator(config.base_channels)
    opt_g = torch.optim.Adam(g.parameters(), lr=config.lr_generator,
                             betas=(config.adam_beta1, config.adam_beta2))
    opt_d = torch.optim.Adam(d.parameters(), lr=config.lr_discriminator,
                             betas=(config.adam_beta1, config.adam_beta2))
    return TrainState(g, d, opt_g, opt_d, seed=seed)


def _check_finite(value: torch.Tensor, term: str) -> torch.Tensor:
    if not torch.isfinite(value).all():
        raise NonFiniteLoss(f"loss term '{term}' is non-finite at this step")
    return value


def train_step(state: TrainState, batch: list[tuple[Triplet, np.ndarray]],
               config: Config, embedder=None, depth_fn=pseudo_depth_torch) -> TrainState:
    """One discriminator update then one generator update.

    `batch` pairs each triplet with its unpaired style reference photo.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    embedder = embedder or ToyEmbedder()
    g, d = state.generator, state.discriminator
    g.train(), d.train()

    sketches = torch.cat([img_to_tensor(t.sketch) for t, _ in batch])
    photos = torch.cat([img_to_tensor(t.photo) for t, _ in batch])
    depths = torch.cat([img_to_tensor(t.depth) for t, _ in batch])
    styles = torch.cat([img_to_tensor(s) for _, s in batch])

    # discriminator: real-as-real + fake-as-fake
    with torch.no_grad():
        fake_detached = g(sketches)
    state.opt_d.zero_grad()
    d_real = adversarial_loss(d(photos, sketches), target_real=True)
    d_fake = adversarial_loss(d(fake_detached, sketches), target_real=False)
    d_loss = _check_finite(0.5 * (d_real + d_fake), "discriminator")
    d_loss.backward()
    state.opt_d.step()

    # generator: weighted sum of the four terms; disabled terms stay zero
    state.opt_g.zero_grad()
    fake = g(sketches)
    zero = torch.zeros(())
    l_adv = adversarial_loss(d(fake, sketches), target_real=True) if config.lambda_adv > 0 else zero
    l_sem = semantic_loss(embedder, fake, photos) if config.lambda_sem > 0 else zero
    l_geo = geometry_loss(depth_fn, fake, depths) if config.lambda_geo > 0 else zero
    l_sty = (style_loss(style_features(g, fake), style_features(g, styles))
             if config.lambda_style > 0 else zero)
    for term, value in zip(LOSS_TERMS, (l_adv, l_sem, l_geo, l_sty)):
        _check_finite(value, term)
    total = (config.lambda_adv * l_adv + config.lambda_sem * l_sem
             + config.lambda_geo * l_geo + config.lambda_style * l_sty)
    _check_finite(total, "total")
    total.backward()
    state.opt_g.step()

    for term, value in zip(LOSS_TERMS, (l_adv, l_sem, l_geo, l_sty)):
        state.loss_history[term].append(float(value.detach()))
    state.loss_history["total"].append(float(total.detach()))
    state.loss_history["d"].append(float(d_loss.detach()))
    state.step += 1
    return state


def make_batch(triplets: list[Triplet], style_order: list[str], seed: int,
               step: int, batch_size: int) -> list[tuple[Triplet, np.ndarray]]:
    """Deterministic per-step batch selection: a pure function of
    (seed, step) so resumed runs reproduce the schedule exactly."""
    by_id = {t.id: t for t in triplets}
    ids = sorted(by_id)
    style_for = {i: by_id[style_order[k % len(style_order)]].photo
                 for k, i in enumerate(ids)}
    rng = rng_from_seed(seed, 1, step)
    picks = rng.choice(len(ids), size=min(batch_size, len(ids)), replace=False)
    return [(by_id[ids[p]], style_for[ids[p]]) for p in picks]


def train(data_dir, config: Config, seed: int, steps: int,
          state: TrainState | None = None, embedder=None) -> TrainState:
    triplets, style_order = load_dataset(data_dir)
    if state is None:
        state = create_train_state(config, seed)
    for _ in range(steps):
        batch = make_batch(triplets, style_order, seed, state.step, config.batch_size)
        train_step(state, batch, config, embedder=embedder)
    n = max(1, len(triplets) // config.batch_size)
    state.epoch = state.step // n
    return state


def export_loss_log(state: TrainState, path) -> None:
    if state.step < 1:
        raise ValueError("no steps recorded")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "adv", "sem", "geo", "style", "total"])
        for i in range(state.step):
            writer.writerow([i] + [repr(state.loss_history[k][i])
                                   for k in (*LOSS_TERMS, "total")])


# ---------------------------------------------------------------------------
# checkpointing

def _optimizer_tensors(opt: torch.optim.Adam, params: list, prefix: str):
    tensors, steps = {}, {}
    for i, p in enumerate(params):
        st = opt.state.get(p)
        if st is None:
            continue
        tensors[f"{prefix}.{i}.exp_avg"] = st["exp_avg"]
        tensors[f"{prefix}.{i}.exp_avg_sq"] = st["exp_avg_sq"]
        steps[str(i)] = float(st["step"])
    return tensors, steps


def save_train_state(state: TrainState, config: Config, path) -> None:
    tensors = {}
    for name, p in state.generator.state_dict().items():
        tensors[f"g.{name}"] = p
    for name, p in state.discriminator.state_dict().items():
        tensors[f"d.{name}"] = p
    g_params = [p for grp in state.opt_g.param_groups for p in grp["params"]]
    d_params = [p for grp in state.opt_d.param_groups for p in grp["params"]]
    tg, sg = _optimizer_tensors(state.opt_g, g_params, "optg")
    td, sd = _optimizer_tensors(state.opt_d, d_params, "optd")
    tensors.update(tg), tensors.update(td)
    meta = {
        "config_hash": ckpt.config_hash(config),
        "step": state.step,
        "epoch": state.epoch,
        "seed": state.seed,
        "residual_blocks": config.residual_blocks,
        "base_channels": config.base_channels,
        "adam_steps_g": sg,
        "adam_steps_d": sd,
        "loss_history": state.loss_history,
    }
    ckpt.save_archive(path, "generator", tensors, meta)


def _restore_optimizer(opt: torch.optim.Adam, params: list, prefix: str,
                       tensors: dict, steps: dict) -> None:
    for i, p in enumerate(params):
        key = f"{prefix}.{i}.exp_avg"
        if key not in tensors:
            continue
        opt.state[p] = {
            "step": torch.tensor(steps[str(i)]),
            "exp_avg": tensors[key].reshape(p.shape).clone(),
            "exp_avg_sq": tensors[f"{prefix}.{i}.exp_avg_sq"].reshape(p.shape).clone(),
        }


def load_train_state(path, config: Config) -> TrainState:
    meta, tensors = ckpt.load_archive(path, "generator")
    state = create_train_state(config, seed=meta["seed"])
    g_sd = {k[2:]: v for k, v in tensors.items() if k.startswith("g.")}
    d_sd = {k[2:]: v for k, v in tensors.items() if k.startswith("d.")}
    state.generator.load_state_dict(g_sd)
    state.discriminator.load_state_dict(d_sd)
    g_params = [p for grp in state.opt_g.param_groups for p in grp["params"]]
    d_params = [p for grp in state.opt_d.param_groups for p in grp["params"]]
    _restore_optimizer(state.opt_g, g_params, "optg", tensors, meta["adam_steps_g"])
    _restore_optimizer(state.opt_d, d_params, "optd", tensors, meta["adam_steps_d"])
    state.step = meta["step"]
    state.epoch = meta["epoch"]
    state.loss_history = meta["loss_history"]
    return state


def load_generator(path, config: Config | None = None) -> Generator:
    meta, tensors = ckpt.load_archive(path, "generator")
    g = Generator(meta["residual_blocks"], meta["base_channels"])
    g.load_state_dict({k[2:]: v for k, v in tensors.items() if k.startswith("g.")})
    g.eval()
    return g
