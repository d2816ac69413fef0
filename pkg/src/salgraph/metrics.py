"""Saliency and reconstruction quality metrics.

Saliency metrics compare a predicted map in [0, 1] against a ground-truth
map (binarized at 0.5 where a binary target is required):

* ``mae``    — mean absolute difference of the raw maps.
* ``f_max``  — max over 256 thresholds k/255 of the F-measure with beta^2
  = 0.3; the sweep predicts s > threshold (strict, so an inverted
  prediction scores 0 instead of crediting the all-ones threshold), and an
  empty prediction scores 0 at that threshold.
* ``e_max``  — max over the same thresholds of the enhanced-alignment score:
  with bias-centered maps phi_B, phi_G, per-pixel alignment
  xi = 2*phi_B*phi_G / (phi_B^2 + phi_G^2 + 1e-8) and E = mean((xi+1)^2/4).
  Degenerate targets use E = 1 - mean(B) (empty) or mean(B) (full).
* ``fbw``    — weighted F-measure (beta^2 = 1): the error map |s - g| is
  relaxed on target pixels by a 7x7 sigma-5 Gaussian local mean
  (border-renormalized), off-target pixels are down-weighted by
  2 - exp(ln(0.5)/5 * dist-to-target), and weighted TP/FP/FN feed F.

Reconstruction metrics resize both images bilinearly to 256x256 RGB first:
``pixcorr`` is the Pearson correlation of the flattened pixel vectors and
``ssim`` the mean of the valid-window single-scale SSIM map over luma
(11x11 Gaussian window, sigma 1.5, C1=(0.01*255)^2, C2=(0.03*255)^2).
``two_way_identification`` scores externally supplied feature vectors: a
trial (i, j) counts only if corr(r_i, g_i) strictly exceeds corr(r_i, g_j).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt
from scipy.signal import convolve2d

from .saliency import bilinear_resize

THRESHOLD_COUNT = 256
_THRESHOLDS = np.arange(THRESHOLD_COUNT) / 255.0

FMAX_BETA2 = 0.3
EMAX_EPS = 1e-8
FBW_KERNEL_SIZE = 7
FBW_SIGMA = 5.0
FBW_ALPHA = float(np.log(0.5) / 5.0)

RECON_SIZE = 256
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * 255.0) ** 2
SSIM_C2 = (0.03 * 255.0) ** 2

LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class SaliencyReport:
    mae: float
    f_max: float
    e_max: float
    fbw: float


@dataclass(frozen=True)
class ReconReport:
    pixcorr: float
    ssim: float
    twoway: dict[str, float]


def _check_pair(s, g) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(s, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if s.shape != g.shape:
        raise ValueError(f"map shapes differ: {s.shape} vs {g.shape}")
    if s.size == 0:
        raise ValueError("empty maps")
    for name, m in (("prediction", s), ("ground truth", g)):
        if m.min() < 0.0 or m.max() > 1.0:
            raise ValueError(f"{name} values must lie in [0, 1]")
    return s, g


def mae(s: np.ndarray, g: np.ndarray) -> float:
    s, g = _check_pair(s, g)
    return float(np.abs(s - g).mean())


def _threshold_counts(s: np.ndarray, gbin: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """True-positive and predicted-positive counts at every threshold k/255.

    One histogram pass: a pixel with value v is predicted positive at
    threshold k iff v > k/255, i.e. for every k below its count of strictly
    smaller thresholds.
    """
    below = np.searchsorted(_THRESHOLDS, s.ravel(), side="left")  # in [0, 256]
    pred_hist = np.bincount(below, minlength=THRESHOLD_COUNT + 1)
    tp_hist = np.bincount(below[gbin.ravel()], minlength=THRESHOLD_COUNT + 1)
    # positive at threshold k <=> below > k, so take suffix sums from k+1
    pred = np.cumsum(pred_hist[::-1])[::-1][1:].astype(np.float64)
    tp = np.cumsum(tp_hist[::-1])[::-1][1:].astype(np.float64)
    return tp, pred


def f_max(s: np.ndarray, g: np.ndarray) -> float:
    s, g = _check_pair(s, g)
    gbin = g >= 0.5
    n_pos = int(gbin.sum())
    if n_pos == 0:
        raise ValueError("f_max is undefined for an empty ground truth")
    tp, pred = _threshold_counts(s, gbin)
    precision = tp / np.maximum(pred, 1.0)
    recall = tp / n_pos
    denom = FMAX_BETA2 * precision + recall
    f = (1.0 + FMAX_BETA2) * precision * recall / np.where(denom > 0.0, denom, 1.0)
    return float(f.max())


def e_max(s: np.ndarray, g: np.ndarray) -> float:
    s, g = _check_pair(s, g)
    gbin = g >= 0.5
    n = s.size
    n_pos = int(gbin.sum())
    tp, pred = _threshold_counts(s, gbin)
    if n_pos == 0:
        return float((1.0 - pred / n).max())
    if n_pos == n:
        return float((pred / n).max())
    mean_b = pred / n
    mean_g = n_pos / n
    fp = pred - tp
    fn = n_pos - tp
    tn = n - pred - fn

    def aligned(phi_b, phi_g):
        xi = 2.0 * phi_b * phi_g / (phi_b * phi_b + phi_g * phi_g + EMAX_EPS)
        return (xi + 1.0) ** 2 / 4.0

    # the centered maps take one value per (B, G) class, so the pixel mean
    # collapses to a count-weighted sum over the four classes
    e_t = (
        tp * aligned(1.0 - mean_b, 1.0 - mean_g)
        + fp * aligned(1.0 - mean_b, -mean_g)
        + fn * aligned(-mean_b, 1.0 - mean_g)
        + tn * aligned(-mean_b, -mean_g)
    ) / n
    return float(e_t.max())


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-(ax * ax) / (2.0 * sigma * sigma))
    k2 = np.outer(k, k)
    return k2 / k2.sum()


def fbw(s: np.ndarray, g: np.ndarray) -> float:
    s, g = _check_pair(s, g)
    gbin = g >= 0.5
    if not gbin.any():
        raise ValueError("fbw is undefined for an empty ground truth")
    gf = gbin.astype(np.float64)
    err = np.abs(s - gf)
    kernel = _gaussian_kernel(FBW_KERNEL_SIZE, FBW_SIGMA)
    local = convolve2d(err, kernel, mode="same", boundary="fill", fillvalue=0.0)
    support = convolve2d(np.ones_like(err), kernel, mode="same", boundary="fill", fillvalue=0.0)
    relaxed = local / support
    err_adj = np.where(gbin, np.minimum(err, relaxed), err)
    dist = distance_transform_edt(~gbin)
    importance = np.where(gbin, 1.0, 2.0 - np.exp(FBW_ALPHA * dist))
    tp_w = ((1.0 - err_adj) * importance)[gbin].sum()
    fn_w = (err_adj * importance)[gbin].sum()
    fp_w = (err_adj * importance)[~gbin].sum()
    recall = tp_w / (tp_w + fn_w)
    precision = tp_w / (tp_w + fp_w) if tp_w + fp_w > 0.0 else 0.0
    if precision + recall == 0.0:
        return 0.0
    return float(2.0 * precision * recall / (precision + recall))


def saliency_report(s: np.ndarray, g: np.ndarray) -> SaliencyReport:
    return SaliencyReport(mae=mae(s, g), f_max=f_max(s, g), e_max=e_max(s, g), fbw=fbw(s, g))


# ---------------------------------------------------------------------------
# Reconstruction metrics


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation of two flattened vectors, clamped to [-1, 1]."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    cx = x - x.mean()
    cy = y - y.mean()
    vx = (cx * cx).sum()
    vy = (cy * cy).sum()
    if vx == 0.0 or vy == 0.0:
        raise ValueError("Pearson correlation undefined for zero-variance input")
    r = float((cx * cy).sum() / np.sqrt(vx * vy))
    return min(1.0, max(-1.0, r))


def _as_rgb(img: np.ndarray) -> np.ndarray:
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 2:
        a = np.repeat(a[:, :, None], 3, axis=2)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"expected (H, W) or (H, W, 3) image, got shape {a.shape}")
    return bilinear_resize(a, RECON_SIZE, RECON_SIZE)


def pixcorr(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation over the flattened 256x256 RGB pixel pair."""
    return pearson(_as_rgb(a), _as_rgb(b))


def _luma(rgb: np.ndarray) -> np.ndarray:
    return LUMA[0] * rgb[:, :, 0] + LUMA[1] * rgb[:, :, 1] + LUMA[2] * rgb[:, :, 2]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    x = _luma(_as_rgb(a))
    y = _luma(_as_rgb(b))
    w = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    mu_x = convolve2d(x, w, mode="valid")
    mu_y = convolve2d(y, w, mode="valid")
    var_x = convolve2d(x * x, w, mode="valid") - mu_x * mu_x
    var_y = convolve2d(y * y, w, mode="valid") - mu_y * mu_y
    cov = convolve2d(x * y, w, mode="valid") - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return float((num / den).mean())


def two_way_identification(recon_feats: np.ndarray, gt_feats: np.ndarray) -> float:
    """Percentage of ordered pairs (i, j != i) where reconstruction i
    correlates strictly better with its own target than with target j.
    Ties count as incorrect."""
    r = np.asarray(recon_feats, dtype=np.float64)
    g = np.asarray(gt_feats, dtype=np.float64)
    if r.ndim != 2 or r.shape != g.shape:
        raise ValueError(f"expected matching (n, d) feature matrices, got {r.shape} and {g.shape}")
    n = r.shape[0]
    if n < 2:
        raise ValueError("two-way identification needs at least two samples")

    def center_norm(m):
        c = m - m.mean(axis=1, keepdims=True)
        norms = np.sqrt((c * c).sum(axis=1))
        if np.any(norms == 0.0):
            raise ValueError("zero-variance feature row")
        return c / norms[:, None]

    corr = center_norm(r) @ center_norm(g).T
    own = np.diag(corr)
    wins = own[:, None] > corr  # diagonal compares against itself: never a win
    return float(100.0 * wins.sum() / (n * (n - 1)))


def correlation_distance(recon_feats: np.ndarray, gt_feats: np.ndarray) -> float:
    """Mean (1 - Pearson) over matched feature rows; the feature-file stand-in
    for backbone distance metrics."""
    r = np.asarray(recon_feats, dtype=np.float64)
    g = np.asarray(gt_feats, dtype=np.float64)
    if r.ndim != 2 or r.shape != g.shape:
        raise ValueError(f"expected matching (n, d) feature matrices, got {r.shape} and {g.shape}")
    return float(np.mean([1.0 - pearson(r[i], g[i]) for i in range(r.shape[0])]))
