"""Turning per-node scores into dense saliency maps.

The rasterizer drops the global token, reshapes the remaining patch scores to
their grid, bilinearly interpolates the *scores* to the target resolution
(half-pixel-centered sampling, edges clamped), and only then squashes through
the logistic function. Interpolating before squashing keeps the map a
monotone function of every node score.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.special import expit


@lru_cache(maxsize=64)
def interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    """1-d bilinear interpolation operator (n_out, n_in), float64.

    Output sample o reads the source at (o + 0.5) * n_in/n_out - 0.5, clamped
    to the valid range, blending the two bracketing inputs. For n_in == n_out
    this is exactly the identity.
    """
    m = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for o in range(n_out):
        src = (o + 0.5) * scale - 0.5
        src = min(max(src, 0.0), n_in - 1.0)
        lo = int(np.floor(src))
        hi = min(lo + 1, n_in - 1)
        f = src - lo
        m[o, lo] += 1.0 - f
        m[o, hi] += f
    m.setflags(write=False)  # cached instances are shared
    return m


def bilinear_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize a 2-d array or (H, W, C) channels-last stack; returns float64."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim not in (2, 3):
        raise ValueError(f"expected 2-d or 3-d array, got shape {a.shape}")
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be positive")
    ry = interp_matrix(a.shape[0], out_h)
    rx = interp_matrix(a.shape[1], out_w)
    if a.ndim == 2:
        return ry @ a @ rx.T
    return np.einsum("oi,ijc,pj->opc", ry, a, rx, optimize=True)


def _logit_grid(node_logits: np.ndarray, grid: int) -> np.ndarray:
    alpha = np.asarray(node_logits)
    if alpha.ndim != 1 or alpha.shape[0] != grid * grid + 1:
        raise ValueError(
            f"expected {grid * grid + 1} node logits (global token first), got shape {alpha.shape}"
        )
    return alpha[1:].reshape(grid, grid)


def rasterize(node_logits: np.ndarray, out_h: int, out_w: int, grid: int = 16) -> np.ndarray:
    """Map node logits to an (out_h, out_w) saliency map in (0, 1).

    The global-token entry (index 0) carries no spatial footprint and is
    dropped; the grid*grid patch logits are interpolated to the output size
    and squashed elementwise.
    """
    g = _logit_grid(node_logits, grid)
    ry = interp_matrix(grid, out_h).astype(g.dtype, copy=False)
    rx = interp_matrix(grid, out_w).astype(g.dtype, copy=False)
    return expit(ry @ g @ rx.T)


def rasterize_vjp(node_logits: np.ndarray, out_h: int, out_w: int, grid: int = 16):
    """Like :func:`rasterize` but also returns the reverse-mode pullback.

    Returns (saliency_map, vjp) where vjp maps dLoss/dmap to dLoss/dlogits
    (length grid*grid + 1, zero at the global-token slot).
    """
    g = _logit_grid(node_logits, grid)
    ry = interp_matrix(grid, out_h).astype(g.dtype, copy=False)
    rx = interp_matrix(grid, out_w).astype(g.dtype, copy=False)
    s = expit(ry @ g @ rx.T)

    def vjp(d_map: np.ndarray) -> np.ndarray:
        dz = np.asarray(d_map, dtype=g.dtype) * s * (1.0 - s)
        d_grid = ry.T @ dz @ rx
        out = np.zeros(grid * grid + 1, dtype=g.dtype)
        out[1:] = d_grid.ravel()
        return out

    return s, vjp


def binarize(saliency: np.ndarray, theta: float) -> np.ndarray:
    """Threshold a map: value >= theta -> 1 else 0 (uint8)."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    return (np.asarray(saliency) >= theta).astype(np.uint8)


def dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Morphological dilation with a (2*radius+1)^2 square structuring element."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    m = np.asarray(mask, dtype=np.uint8)
    if radius == 0:
        return m.copy()
    return maximum_filter(m, size=2 * radius + 1, mode="constant", cval=0)
