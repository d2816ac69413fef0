"""Saliency-guided composition and candidate ranking.

Three consumers of a reference saliency map are provided:

* :func:`mask_blend` fuses a foreground and a background render per pixel.
* :func:`export_inpaint_mask` thresholds and dilates the map into the binary
  region an external inpainting generator should repaint.
* :func:`rank` scores candidate reconstructions as
  ``lambda_clip * cosine(candidate_vec, text_vec) +
  lambda_mask * consistency(candidate_mask, reference_map)``
  with consistency measured as IoU or Dice between thresholded masks.
  Candidates without an externally supplied mask fall back to a
  spectral-residual saliency estimate of the candidate image itself;
  the rank result records where that fallback fired.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .metrics import _gaussian_kernel
from .saliency import bilinear_resize, binarize, dilate

SR_WORK_SIZE = 64
SR_BLUR_SIZE = 5
SR_BLUR_SIGMA = 1.5


def mask_blend(fg: np.ndarray, bg: np.ndarray, saliency: np.ndarray) -> np.ndarray:
    """Per-pixel convex blend: round_half_up(s*fg + (1-s)*bg), uint8.

    Saliency 1 keeps the foreground pixel exactly, 0 the background pixel.
    """
    fg = np.asarray(fg)
    bg = np.asarray(bg)
    s = np.asarray(saliency, dtype=np.float64)
    if fg.shape != bg.shape:
        raise ValueError(f"foreground {fg.shape} and background {bg.shape} differ")
    if fg.shape[:2] != s.shape:
        raise ValueError(f"saliency {s.shape} does not match image plane {fg.shape[:2]}")
    if s.min() < 0.0 or s.max() > 1.0:
        raise ValueError("saliency values must lie in [0, 1]")
    weight = s if fg.ndim == 2 else s[:, :, None]
    mixed = weight * fg.astype(np.float64) + (1.0 - weight) * bg.astype(np.float64)
    return np.clip(np.floor(mixed + 0.5), 0.0, 255.0).astype(np.uint8)


def export_inpaint_mask(saliency: np.ndarray, theta: float, dilate_radius: int) -> np.ndarray:
    """Binary repaint region: threshold at theta, then square dilation."""
    return dilate(binarize(saliency, theta), dilate_radius)


def _box_mean_replicate(a: np.ndarray, size: int) -> np.ndarray:
    pad = size // 2
    padded = np.pad(a, pad, mode="edge")
    kernel = np.full((size, size), 1.0 / (size * size))
    return convolve2d(padded, kernel, mode="valid")


def fallback_saliency(image: np.ndarray) -> np.ndarray:
    """Spectral-residual saliency of an image, normalized to [0, 1].

    Luma is resized to a 64x64 working grid; the FFT log-amplitude minus its
    3x3 local mean forms the residual spectrum, which is inverted with the
    original phase; the squared magnitude is blurred (5x5 Gaussian, sigma
    1.5), min-max normalized, and resized back to the input size. A constant
    input has no residual structure and maps to all zeros, as does any
    constant pre-normalization map.
    """
    img = np.asarray(image)
    if img.ndim == 3:
        gray = 0.299 * img[:, :, 0] + 0.587 * img[:, :, 1] + 0.114 * img[:, :, 2]
    elif img.ndim == 2:
        gray = img.astype(np.float64)
    else:
        raise ValueError(f"expected (H, W) or (H, W, 3) image, got shape {img.shape}")
    h, w = gray.shape
    if np.all(img == img.flat[0]):
        return np.zeros((h, w))
    small = bilinear_resize(gray, SR_WORK_SIZE, SR_WORK_SIZE)
    spectrum = np.fft.fft2(small)
    amplitude = np.abs(spectrum)
    phase = np.angle(spectrum)
    # log1p keeps exactly-zero bins (common in synthetic images) from
    # cratering the local mean and exploding the residual
    log_amp = np.log1p(amplitude)
    residual = log_amp - _box_mean_replicate(log_amp, 3)
    restored = np.fft.ifft2(np.exp(residual) * np.exp(1j * phase))
    energy = np.abs(restored) ** 2
    kernel = _gaussian_kernel(SR_BLUR_SIZE, SR_BLUR_SIGMA)
    padded = np.pad(energy, SR_BLUR_SIZE // 2, mode="edge")
    smooth = convolve2d(padded, kernel, mode="valid")
    lo, hi = smooth.min(), smooth.max()
    if hi == lo:
        return np.zeros((h, w))
    norm = (smooth - lo) / (hi - lo)
    return np.clip(bilinear_resize(norm, h, w), 0.0, 1.0)


# ---------------------------------------------------------------------------
# Mask agreement


def _check_binary_pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return a > 0, b > 0


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two binary masks; both-empty counts as 1."""
    a, b = _check_binary_pair(a, b)
    union = int((a | b).sum())
    if union == 0:
        return 1.0
    return float((a & b).sum() / union)


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """Dice coefficient 2|a&b| / (|a|+|b|); both-empty counts as 1."""
    a, b = _check_binary_pair(a, b)
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return float(2.0 * (a & b).sum() / total)


# ---------------------------------------------------------------------------
# Candidate ranking


@dataclass(frozen=True)
class Candidate:
    image: np.ndarray  # uint8 (H, W) or (H, W, 3)
    clip_vec: np.ndarray  # (d,)
    mask: np.ndarray | None = None  # optional saliency map in [0, 1]


@dataclass(frozen=True)
class RankWeights:
    lambda_clip: float = 1.0
    lambda_mask: float = 0.5
    theta: float = 0.5
    consistency: str = "iou"  # or "dice"


@dataclass(frozen=True)
class RankResult:
    order: list[int]  # candidate indices, best first
    totals: list[float]
    s_clip: list[float]
    s_mask: list[float]
    fallback_used: list[bool] = field(default_factory=list)


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity undefined for zero vectors")
    return float(u @ v / (nu * nv))


def rank(
    candidates: list[Candidate],
    reference_saliency: np.ndarray,
    text_vec: np.ndarray,
    weights: RankWeights = RankWeights(),
) -> RankResult:
    """Score and order candidates, best first; ties keep the lower index.

    Candidate images (and masks, when supplied) are resized to the reference
    saliency resolution before mask comparison.
    """
    if not candidates:
        raise ValueError("cannot rank an empty candidate set")
    if weights.consistency not in ("iou", "dice"):
        raise ValueError(f"unknown consistency mode {weights.consistency!r}")
    agreement = iou if weights.consistency == "iou" else dice
    ref = np.asarray(reference_saliency, dtype=np.float64)
    text_vec = np.asarray(text_vec, dtype=np.float64)
    ref_bin = binarize(ref, weights.theta)
    h, w = ref.shape

    s_clip, s_mask, fallback_used = [], [], []
    for cand in candidates:
        vec = np.asarray(cand.clip_vec, dtype=np.float64)
        if vec.shape != text_vec.shape:
            raise ValueError(f"candidate vector shape {vec.shape} != text vector {text_vec.shape}")
        s_clip.append(_cosine(vec, text_vec))
        if cand.mask is not None:
            cand_map = np.clip(bilinear_resize(np.asarray(cand.mask, np.float64), h, w), 0.0, 1.0)
            fallback_used.append(False)
        else:
            image = cand.image
            if image.shape[:2] != (h, w):
                resized = bilinear_resize(image.astype(np.float64), h, w)
                image = np.clip(np.floor(resized + 0.5), 0.0, 255.0).astype(np.uint8)
            cand_map = fallback_saliency(image)
            fallback_used.append(True)
        s_mask.append(agreement(binarize(cand_map, weights.theta), ref_bin))
    totals = [
        weights.lambda_clip * c + weights.lambda_mask * m for c, m in zip(s_clip, s_mask)
    ]
    # stable sort on negated totals keeps equal scores in index order
    order = sorted(range(len(candidates)), key=lambda i: (-totals[i], i))
    return RankResult(
        order=order, totals=totals, s_clip=s_clip, s_mask=s_mask, fallback_used=fallback_used
    )
