"""Synthetic disc dataset for overfitting studies and smoke tests.

Each sample is a random disc on the patch grid. Patch tokens carry the disc
membership linearly: token = noise + signal_scale * inside * direction, with
one fixed random unit direction shared across the dataset, so a linear
function of the token features recovers the disc. The ground-truth mask is
the patch-level disc indicator upsampled by pixel replication, which the
rasterizer can represent exactly once logits saturate.
"""

from __future__ import annotations

import numpy as np


def make_disc_dataset(
    n_samples: int = 16,
    grid: int = 16,
    upscale: int = 4,
    feature_dim: int = 768,
    seed: int = 0,
    signal_scale: float = 2.0,
    noise_scale: float = 0.1,
):
    """Build (embeddings, masks, discs).

    embeddings: (n, grid*grid+1, feature_dim) float32, global token first.
    masks:      (n, grid*upscale, grid*upscale) float32 in {0, 1}.
    discs:      list of (center_row, center_col, radius) in patch units.
    """
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=feature_dim)
    direction /= np.linalg.norm(direction)
    rows, cols = np.meshgrid(np.arange(grid) + 0.5, np.arange(grid) + 0.5, indexing="ij")

    embeddings = np.empty((n_samples, grid * grid + 1, feature_dim), dtype=np.float32)
    masks = np.empty((n_samples, grid * upscale, grid * upscale), dtype=np.float32)
    discs: list[tuple[float, float, float]] = []
    for i in range(n_samples):
        cy = rng.uniform(grid * 0.25, grid * 0.75)
        cx = rng.uniform(grid * 0.25, grid * 0.75)
        radius = rng.uniform(grid * 0.15, grid * 0.33)
        inside = ((rows - cy) ** 2 + (cols - cx) ** 2 <= radius * radius).astype(np.float64)
        tokens = noise_scale * rng.normal(size=(grid * grid, feature_dim))
        tokens += signal_scale * inside.reshape(-1, 1) * direction
        embeddings[i, 0] = tokens.mean(axis=0)
        embeddings[i, 1:] = tokens
        masks[i] = np.kron(inside, np.ones((upscale, upscale)))
        discs.append((cy, cx, radius))
    return embeddings, masks, discs
