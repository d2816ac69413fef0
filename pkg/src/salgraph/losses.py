"""Training objective over saliency maps: weighted IoU + weighted BCE.

Per-pixel weights emphasize boundary regions: w = 1 + 5*|boxmean(gt) - gt|
with a 15x15 zero-padded box mean, so w is 1 on flat interior regions and
up to 6 where a pixel disagrees with its neighborhood. Both loss terms and
their analytic gradients with respect to the predicted map are returned; the
total objective is their plain sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

BOX_SIZE = 15
WEIGHT_GAIN = 5.0
IOU_EPS = 1.0
BCE_CLAMP = 1e-7


@dataclass(frozen=True)
class LossValue:
    total: float
    wbce: float
    wiou: float


def weight_map(gt: np.ndarray) -> np.ndarray:
    """Boundary-emphasis weights in [1, 6] for a ground-truth map in [0, 1]."""
    g = np.asarray(gt)
    if g.ndim != 2:
        raise ValueError(f"ground truth must be 2-d, got shape {g.shape}")
    kernel = np.full((BOX_SIZE, BOX_SIZE), 1.0 / (BOX_SIZE * BOX_SIZE), dtype=g.dtype)
    local_mean = convolve2d(g, kernel, mode="same", boundary="fill", fillvalue=0.0)
    return 1.0 + WEIGHT_GAIN * np.abs(local_mean - g)


def _check_shapes(s, gt, w):
    if s.shape != gt.shape or s.shape != w.shape:
        raise ValueError(f"shape mismatch: pred {s.shape}, gt {gt.shape}, weights {w.shape}")


def wbce(s: np.ndarray, gt: np.ndarray, w: np.ndarray) -> tuple[float, np.ndarray]:
    """Weighted binary cross-entropy and its gradient w.r.t. the prediction.

    The prediction is clamped away from {0, 1} before the logs; the gradient
    is zero wherever the clamp is active.
    """
    s, gt, w = np.asarray(s), np.asarray(gt), np.asarray(w)
    _check_shapes(s, gt, w)
    p = np.clip(s, BCE_CLAMP, 1.0 - BCE_CLAMP)
    wsum = w.sum()
    loss = float((w * -(gt * np.log(p) + (1.0 - gt) * np.log1p(-p))).sum() / wsum)
    grad = w * (-gt / p + (1.0 - gt) / (1.0 - p)) / wsum
    grad = np.where((s >= BCE_CLAMP) & (s <= 1.0 - BCE_CLAMP), grad, 0.0)
    return loss, grad


def wiou(s: np.ndarray, gt: np.ndarray, w: np.ndarray) -> tuple[float, np.ndarray]:
    """Weighted soft-IoU loss 1 - (sum(w*s*g)+eps)/(sum(w*(s+g-s*g))+eps)."""
    s, gt, w = np.asarray(s), np.asarray(gt), np.asarray(w)
    _check_shapes(s, gt, w)
    inter = (w * s * gt).sum() + IOU_EPS
    union = (w * (s + gt - s * gt)).sum() + IOU_EPS
    loss = float(1.0 - inter / union)
    grad = -w * (gt * union - (1.0 - gt) * inter) / (union * union)
    return loss, grad


def total_loss(s: np.ndarray, gt: np.ndarray, w: np.ndarray) -> tuple[LossValue, np.ndarray]:
    """Combined objective; returns (LossValue, dLoss/dprediction)."""
    bce_val, bce_grad = wbce(s, gt, w)
    iou_val, iou_grad = wiou(s, gt, w)
    return LossValue(total=bce_val + iou_val, wbce=bce_val, wiou=iou_val), bce_grad + iou_grad
