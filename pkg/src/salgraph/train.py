"""Per-subject training loop with Adam, early stopping, and checkpoints.

Samples are processed one graph at a time; batches exist only as gradient
accumulation in fixed visitation order, so a (seed, manifest) pair fully
determines every float of the run. Model selection tracks the mean maximum
F-measure on the validation split; the best parameters are what the returned
checkpoint carries.

Checkpoint files open with magic ``GRSP``, a u32 format version, the variant
tag and layer sizes, training metadata, then every parameter array in
declared order as little-endian float32, optionally followed by optimizer
moments. Loading a checkpoint reproduces forward outputs bitwise.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .arrayio import ManifestEntry, read_array, read_mask
from .errors import DataError
from .gnn import VARIANTS, SaliencyModel, backward, forward, init_model
from .graph import GraphConfig, build_token_graph
from .losses import total_loss, weight_map
from .metrics import f_max
from .saliency import rasterize, rasterize_vjp

CHECKPOINT_MAGIC = b"GRSP"
CHECKPOINT_VERSION = 1
_VARIANT_CODES = {v: i for i, v in enumerate(VARIANTS)}


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def init_adam(params: dict[str, np.ndarray], lr: float = 1e-3) -> AdamState:
    state = AdamState(lr=lr)
    state.m = {k: np.zeros_like(p) for k, p in params.items()}
    state.v = {k: np.zeros_like(p) for k, p in params.items()}
    return state


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# Checkpoints


@dataclass
class Checkpoint:
    variant: str
    dims: tuple[int, ...]
    heads: int
    dropout: float
    params: dict[str, np.ndarray]
    epoch: int = 0
    seed: int = 0
    best_val_fmax: float = 0.0
    opt: AdamState | None = None


def model_from_checkpoint(ckpt: Checkpoint) -> SaliencyModel:
    return SaliencyModel(
        variant=ckpt.variant,
        dims=ckpt.dims,
        heads=ckpt.heads,
        dropout=ckpt.dropout,
        seed=ckpt.seed,
        params={k: v.copy() for k, v in ckpt.params.items()},
    )


def _write_f32(fh, arr: np.ndarray) -> None:
    fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(
            struct.pack(
                "<BBBB",
                _VARIANT_CODES[ckpt.variant],
                len(ckpt.dims),
                ckpt.heads,
                1 if ckpt.opt is not None else 0,
            )
        )
        fh.write(struct.pack("<f", ckpt.dropout))
        fh.write(struct.pack(f"<{len(ckpt.dims)}I", *ckpt.dims))
        fh.write(struct.pack("<IQf", ckpt.epoch, ckpt.seed, ckpt.best_val_fmax))
        fh.write(struct.pack("<I", len(ckpt.params)))
        for name, arr in ckpt.params.items():
            enc = name.encode("utf-8")
            fh.write(struct.pack("<H", len(enc)))
            fh.write(enc)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            _write_f32(fh, arr)
        if ckpt.opt is not None:
            fh.write(struct.pack("<Qfff", ckpt.opt.t, ckpt.opt.lr, ckpt.opt.beta1, ckpt.opt.beta2))
            fh.write(struct.pack("<f", ckpt.opt.eps))
            for name, arr in ckpt.params.items():
                _write_f32(fh, ckpt.opt.m[name])
                _write_f32(fh, ckpt.opt.v[name])


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise DataError(f"{self.path}: truncated checkpoint")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def array(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        size = 4 * count
        if self.pos + size > len(self.data):
            raise DataError(f"{self.path}: truncated checkpoint payload")
        arr = np.frombuffer(self.data, dtype="<f4", count=count, offset=self.pos)
        self.pos += size
        return arr.reshape(shape).copy()


def load_checkpoint(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not a checkpoint file (bad magic)")
    r = _Reader(data, path)
    r.pos = 4
    (version,) = r.take("<I")
    if version != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    vcode, ndims, heads, has_opt = r.take("<BBBB")
    if vcode >= len(VARIANTS):
        raise DataError(f"{path}: unknown variant code {vcode}")
    (dropout,) = r.take("<f")
    dims = r.take(f"<{ndims}I")
    epoch, seed, best = r.take("<IQf")
    (n_params,) = r.take("<I")
    params: dict[str, np.ndarray] = {}
    for _ in range(n_params):
        (name_len,) = r.take("<H")
        name = r.data[r.pos : r.pos + name_len].decode("utf-8")
        r.pos += name_len
        (ndim,) = r.take("<B")
        shape = r.take(f"<{ndim}I")
        params[name] = r.array(shape)
    opt = None
    if has_opt:
        t, lr, beta1, beta2 = r.take("<Qfff")
        (eps,) = r.take("<f")
        opt = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, t=t)
        for name, arr in params.items():
            opt.m[name] = r.array(arr.shape)
            opt.v[name] = r.array(arr.shape)
    if r.pos != len(data):
        raise DataError(f"{path}: {len(data) - r.pos} trailing bytes in checkpoint")
    return Checkpoint(
        variant=VARIANTS[vcode],
        dims=tuple(int(d) for d in dims),
        heads=heads,
        dropout=float(dropout),
        params=params,
        epoch=epoch,
        seed=seed,
        best_val_fmax=float(best),
        opt=opt,
    )


# ---------------------------------------------------------------------------
# Training loop


@dataclass(frozen=True)
class TrainConfig:
    variant: str = "sage"
    hidden: int = 256
    depth: int = 2
    heads: int = 4
    dropout: float = 0.1
    graph: GraphConfig = GraphConfig()
    lr: float = 1e-3
    epochs: int = 200
    batch_size: int = 8
    seed: int = 0
    val_fraction: float = 0.1
    patience: int = 30


def token_grid_size(n_tokens: int) -> int:
    """Patch-grid side length for a token count of grid*grid + 1."""
    grid = int(round(np.sqrt(n_tokens - 1)))
    if grid < 1 or grid * grid + 1 != n_tokens:
        raise DataError(f"{n_tokens} tokens do not form a square patch grid plus global token")
    return grid


def _mean_fmax(model, graphs, embs, gts, grid) -> float:
    scores = []
    for graph, emb, gt in zip(graphs, embs, gts):
        if not (gt >= 0.5).any():
            continue  # maximum F-measure is undefined for an empty target
        logits, _ = forward(model, graph, emb)
        smap = rasterize(logits, gt.shape[0], gt.shape[1], grid=grid)
        scores.append(f_max(smap.astype(np.float64), gt))
    return float(np.mean(scores)) if scores else 0.0


def train_on_arrays(
    embeddings: list[np.ndarray],
    masks: list[np.ndarray],
    cfg: TrainConfig = TrainConfig(),
    val_embeddings: list[np.ndarray] | None = None,
    val_masks: list[np.ndarray] | None = None,
) -> tuple[Checkpoint, list[dict]]:
    """Core loop over in-memory (embedding, mask) pairs.

    When no validation set is given the training set doubles as one, which is
    what overfitting studies want. Returns the best checkpoint plus a history
    of dicts with epoch, train_loss and val_fmax.
    """
    n = len(embeddings)
    if n == 0:
        raise DataError("empty manifest: no training samples")
    if len(masks) != n:
        raise DataError(f"{n} embeddings but {len(masks)} masks")
    shape = masks[0].shape
    if any(m.shape != shape for m in masks):
        raise DataError("ground-truth masks must share one resolution within a run")

    embs = [np.asarray(e, dtype=np.float32) for e in embeddings]
    gts = [np.asarray(m, dtype=np.float32) for m in masks]
    weights = [weight_map(g) for g in gts]
    grid = token_grid_size(embs[0].shape[0])
    if cfg.graph.use_semantic:
        graphs = [build_token_graph(e, cfg.graph, grid=grid) for e in embs]
    else:
        shared = build_token_graph(embs[0], cfg.graph, grid=grid)
        graphs = [shared] * n

    if val_embeddings is None:
        val_embs, val_gts = embs, gts
        val_graphs = graphs
    else:
        val_embs = [np.asarray(e, dtype=np.float32) for e in val_embeddings]
        val_gts = [np.asarray(m, dtype=np.float32) for m in val_masks or []]
        if len(val_embs) != len(val_gts):
            raise DataError("validation embeddings/masks count mismatch")
        if cfg.graph.use_semantic:
            val_graphs = [build_token_graph(e, cfg.graph, grid=grid) for e in val_embs]
        else:
            val_graphs = [graphs[0]] * len(val_embs)

    dims = (embs[0].shape[1],) + (cfg.hidden,) * cfg.depth
    model = init_model(
        cfg.variant, dims, heads=cfg.heads, dropout=cfg.dropout, seed=cfg.seed
    )
    opt = init_adam(model.params, lr=cfg.lr)
    streams = np.random.SeedSequence(cfg.seed).spawn(2)
    shuffle_rng = np.random.default_rng(streams[0])
    dropout_rng = np.random.default_rng(streams[1])

    height, width = shape
    best_fmax = -np.inf
    best_params = model.copy_params()
    best_epoch = 0
    stale = 0
    history: list[dict] = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            acc = {k: np.zeros_like(p) for k, p in model.params.items()}
            for idx in batch:
                logits, cache = forward(
                    model, graphs[idx], embs[idx], train_mode=True, rng=dropout_rng
                )
                smap, vjp = rasterize_vjp(logits, height, width, grid=grid)
                lv, d_map = total_loss(smap, gts[idx], weights[idx])
                grads = backward(model, cache, vjp(d_map))
                for name in acc:
                    acc[name] += grads[name]
                loss_sum += lv.total
            scale = np.float32(1.0 / len(batch))
            for name in acc:
                acc[name] *= scale
            adam_step(model.params, acc, opt)
        train_loss = loss_sum / n
        val_fmax = _mean_fmax(model, val_graphs, val_embs, val_gts, grid)
        history.append({"epoch": epoch, "train_loss": train_loss, "val_fmax": val_fmax})
        if val_fmax > best_fmax:
            best_fmax = val_fmax
            best_params = model.copy_params()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    ckpt = Checkpoint(
        variant=cfg.variant,
        dims=dims,
        heads=cfg.heads,
        dropout=cfg.dropout,
        params=best_params,
        epoch=best_epoch,
        seed=cfg.seed,
        best_val_fmax=float(max(best_fmax, 0.0)),
    )
    return ckpt, history


def train(entries: list[ManifestEntry], cfg: TrainConfig = TrainConfig()):
    """Train from manifest entries: ``train``-tagged rows feed the loop,
    ``val``-tagged rows (if any) drive model selection; otherwise a
    ``val_fraction`` share of the training rows is held out (seeded), and if
    that leaves nothing the training set itself is scored."""
    train_rows = [e for e in entries if e.split == "train"]
    val_rows = [e for e in entries if e.split == "val"]
    if not train_rows:
        raise DataError("empty manifest: no train-tagged entries")
    embs = [read_array(e.emb_path) for e in train_rows]
    gts = [read_mask(e.mask_path) for e in train_rows]
    if val_rows:
        val_embs = [read_array(e.emb_path) for e in val_rows]
        val_gts = [read_mask(e.mask_path) for e in val_rows]
    elif cfg.val_fraction > 0.0 and len(train_rows) > 1:
        n_val = min(max(1, round(cfg.val_fraction * len(train_rows))), len(train_rows) - 1)
        split_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1)))
        picks = set(split_rng.permutation(len(train_rows))[:n_val].tolist())
        val_embs = [e for i, e in enumerate(embs) if i in picks]
        val_gts = [g for i, g in enumerate(gts) if i in picks]
        embs = [e for i, e in enumerate(embs) if i not in picks]
        gts = [g for i, g in enumerate(gts) if i not in picks]
    else:
        val_embs = val_gts = None
    return train_on_arrays(embs, gts, cfg, val_embs, val_gts)
