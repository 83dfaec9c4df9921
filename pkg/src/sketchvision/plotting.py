"""Matplotlib report figures rendered to files alongside the CSV logs."""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def smooth(values, window: int = 10) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if len(v) < 2 or window < 2:
        return v
    k = min(window, len(v))
    kernel = np.ones(k) / k
    return np.convolve(v, kernel, mode="valid")


def plot_loss_log(csv_path, out_png, window: int = 10) -> str:
    """Render the per-term training loss curves from a loss CSV."""
    with open(csv_path, newline="") as f:
        rows = list(csv.DictReader(f))
    steps = [int(r["step"]) for r in rows]
    fig, ax = plt.subplots(figsize=(8, 5))
    for term in ("adv", "sem", "geo", "style", "total"):
        series = [float(r[term]) for r in rows]
        sm = smooth(series, window)
        ax.plot(steps[len(steps) - len(sm):], sm, label=term)
    ax.set_xlabel("step")
    ax.set_ylabel("loss (smoothed)")
    ax.set_yscale("log")
    ax.legend()
    ax.set_title("training losses")
    fig.tight_layout()
    os.makedirs(os.path.dirname(os.path.abspath(out_png)), exist_ok=True)
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return str(out_png)


def plot_image_strip(images, out_png, titles=None) -> str:
    """Row of images (morph strips, turntable contact sheets)."""
    n = len(images)
    fig, axes = plt.subplots(1, n, figsize=(2.2 * n, 2.4))
    if n == 1:
        axes = [axes]
    for i, (ax, img) in enumerate(zip(axes, images)):
        ax.imshow(img.squeeze(), cmap="gray" if img.shape[-1] == 1 else None,
                  vmin=0, vmax=1)
        ax.set_axis_off()
        if titles:
            ax.set_title(titles[i], fontsize=8)
    fig.tight_layout()
    os.makedirs(os.path.dirname(os.path.abspath(out_png)), exist_ok=True)
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return str(out_png)


def plot_encode_curve(loss_curve, out_png) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(loss_curve)
    ax.set_xlabel("iteration")
    ax.set_ylabel("image MSE")
    ax.set_yscale("log")
    ax.set_title("latent optimization")
    fig.tight_layout()
    os.makedirs(os.path.dirname(os.path.abspath(out_png)), exist_ok=True)
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return str(out_png)
