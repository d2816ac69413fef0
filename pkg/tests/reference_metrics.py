"""Independent straight-from-formula metric references used as oracles.

These deliberately share no code with the package: the threshold sweep is a
plain loop over full binary maps, the Gaussian blur is an explicit
shift-and-add with manual border renormalization, and the distance transform
minimizes Euclidean distance over the listed target pixels directly.
"""

import numpy as np

BETA2 = 0.3
EPS = 1e-8


def reference_f_max(s: np.ndarray, g: np.ndarray) -> float:
    target = g >= 0.5
    n_pos = target.sum()
    best = 0.0
    for k in range(256):
        pred = s > k / 255
        tp = np.logical_and(pred, target).sum()
        pp = pred.sum()
        precision = tp / pp if pp > 0 else 0.0
        recall = tp / n_pos
        denom = BETA2 * precision + recall
        f = (1 + BETA2) * precision * recall / denom if denom > 0 else 0.0
        best = max(best, f)
    return best


def reference_e_max(s: np.ndarray, g: np.ndarray) -> float:
    target = (g >= 0.5).astype(np.float64)
    best = 0.0
    for k in range(256):
        pred = (s > k / 255).astype(np.float64)
        if target.sum() == 0:
            value = 1.0 - pred.mean()
        elif target.sum() == target.size:
            value = pred.mean()
        else:
            phi_b = pred - pred.mean()
            phi_g = target - target.mean()
            xi = 2.0 * phi_b * phi_g / (phi_b * phi_b + phi_g * phi_g + EPS)
            value = (((xi + 1.0) ** 2) / 4.0).mean()
        best = max(best, value)
    return best


def _gauss_7x7_sigma5() -> np.ndarray:
    ax = np.arange(7) - 3.0
    k1 = np.exp(-(ax * ax) / (2.0 * 25.0))
    k = np.outer(k1, k1)
    return k / k.sum()


def _renormalized_blur(err: np.ndarray) -> np.ndarray:
    kernel = _gauss_7x7_sigma5()
    h, w = err.shape
    num = np.zeros_like(err)
    den = np.zeros_like(err)
    for di in range(-3, 4):
        for dj in range(-3, 4):
            kv = kernel[di + 3, dj + 3]
            src_rows = slice(max(0, -di), min(h, h - di))
            dst_rows = slice(max(0, di), min(h, h + di))
            src_cols = slice(max(0, -dj), min(w, w - dj))
            dst_cols = slice(max(0, dj), min(w, w + dj))
            num[dst_rows, dst_cols] += kv * err[src_rows, src_cols]
            den[dst_rows, dst_cols] += kv
    return num / den


def reference_fbw(s: np.ndarray, g: np.ndarray) -> float:
    target = g >= 0.5
    gf = target.astype(np.float64)
    err = np.abs(s - gf)
    blurred = _renormalized_blur(err)
    adjusted = err.copy()
    adjusted[target] = np.minimum(err[target], blurred[target])
    ys, xs = np.nonzero(target)
    h, w = g.shape
    importance = np.ones((h, w))
    for i in range(h):
        for j in range(w):
            if target[i, j]:
                continue
            d = np.sqrt(((ys - i) ** 2 + (xs - j) ** 2).min())
            importance[i, j] = 2.0 - np.exp(np.log(0.5) / 5.0 * d)
    weighted = adjusted * importance
    tp_w = ((1.0 - adjusted) * importance)[target].sum()
    fn_w = weighted[target].sum()
    fp_w = weighted[~target].sum()
    recall = tp_w / (tp_w + fn_w)
    precision = tp_w / (tp_w + fp_w) if tp_w + fp_w > 0 else 0.0
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def reference_two_way(recon: np.ndarray, gt: np.ndarray) -> float:
    n = recon.shape[0]
    correct = 0
    for i in range(n):
        own = np.corrcoef(recon[i], gt[i])[0, 1]
        for j in range(n):
            if j == i:
                continue
            other = np.corrcoef(recon[i], gt[j])[0, 1]
            if own > other:
                correct += 1
    return 100.0 * correct / (n * (n - 1))
