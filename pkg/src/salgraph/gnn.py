"""Graph saliency backbones: forward pass, exact reverse-mode gradients.

Three message-passing variants share one parameter container and one
forward/backward interface:

* ``gcn``   — h' = relu(A_hat @ h @ W + b) with the symmetric-normalized
              self-loop adjacency A_hat.
* ``gat``   — multi-head attention over each node's neighborhood plus self;
              per-head scores leaky_relu(a_src.z_i + a_dst.z_j) are
              softmaxed over the neighborhood, heads concatenated, bias
              added, relu applied.
* ``sage``  — h' = relu(h @ W_self + mean_nbr(h) @ W_nbr + b), then each
              row is L2-normalized (zero rows stay zero; an empty
              neighborhood aggregates to the zero vector).

A linear readout maps the last hidden layer to one score per node. Dropout
(inverted, applied to every hidden layer output) is active only in training
mode. All reductions run in fixed index order, so identical inputs give
bitwise-identical outputs. Compute follows the parameter dtype: float32 for
training, float64 for gradient checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import TokenGraph

VARIANTS = ("gcn", "gat", "sage")
LEAKY_SLOPE = 0.2
DEFAULT_DIMS = (768, 256, 256)


@dataclass
class SaliencyModel:
    variant: str
    dims: tuple[int, ...]  # (input, hidden_1, ..., hidden_L)
    heads: int
    dropout: float
    seed: int
    params: dict[str, np.ndarray]

    @property
    def depth(self) -> int:
        return len(self.dims) - 1

    @property
    def dtype(self):
        return self.params["readout.weight"].dtype

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


def init_model(
    variant: str,
    dims: tuple[int, ...] = DEFAULT_DIMS,
    heads: int = 4,
    dropout: float = 0.1,
    seed: int = 0,
    dtype=np.float32,
) -> SaliencyModel:
    """Create a model with Glorot-uniform weights and zero biases.

    Parameter creation order is fixed, so a given seed always yields
    bitwise-identical parameters.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"dims must be >= 2 positive sizes, got {dims}")
    if variant == "gat" and any(d % heads for d in dims[1:]):
        raise ValueError(f"gat hidden sizes {dims[1:]} must be divisible by heads={heads}")
    if not 0.0 <= dropout < 1.0:
        raise ValueError(f"dropout must lie in [0, 1), got {dropout}")
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}

    def add(name, arr):
        params[name] = np.ascontiguousarray(arr, dtype=dtype)

    for layer, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
        pre = f"layers.{layer}"
        if variant == "gcn":
            add(f"{pre}.weight", _glorot(rng, din, dout, (din, dout)))
            add(f"{pre}.bias", np.zeros(dout))
        elif variant == "sage":
            add(f"{pre}.self_weight", _glorot(rng, din, dout, (din, dout)))
            add(f"{pre}.neighbor_weight", _glorot(rng, din, dout, (din, dout)))
            add(f"{pre}.bias", np.zeros(dout))
        else:  # gat
            dh = dout // heads
            for h in range(heads):
                add(f"{pre}.head{h}.weight", _glorot(rng, din, dh, (din, dh)))
                add(f"{pre}.head{h}.att", _glorot(rng, 2 * dh, 1, (2 * dh,)))
            add(f"{pre}.bias", np.zeros(dout))
    add("readout.weight", _glorot(rng, dims[-1], 1, (dims[-1],)))
    add("readout.bias", np.zeros(1))
    return SaliencyModel(
        variant=variant, dims=tuple(dims), heads=heads, dropout=dropout, seed=seed, params=params
    )


# ---------------------------------------------------------------------------
# Forward


def _gcn_layer(params, pre, a_hat, x):
    p = a_hat @ x
    z = p @ params[f"{pre}.weight"] + params[f"{pre}.bias"]
    return np.maximum(z, 0.0), {"x": x, "p": p, "z": z}


def _sage_layer(params, pre, mean_adj, x):
    m = mean_adj @ x
    z = x @ params[f"{pre}.self_weight"] + m @ params[f"{pre}.neighbor_weight"]
    z += params[f"{pre}.bias"]
    act = np.maximum(z, 0.0)
    norms = np.sqrt((act * act).sum(axis=1))
    safe = np.where(norms > 0.0, norms, 1.0)
    out = act / safe[:, None]
    return out, {"x": x, "m": m, "z": z, "act": act, "norms": norms, "out": out}


def _gat_layer(params, pre, nbr_mask, heads, x):
    dtype = x.dtype
    outs, head_caches = [], []
    neg = np.asarray(-np.inf, dtype=dtype)
    for h in range(heads):
        w = params[f"{pre}.head{h}.weight"]
        att_vec = params[f"{pre}.head{h}.att"]
        dh = w.shape[1]
        z = x @ w
        s = z @ att_vec[:dh]
        t = z @ att_vec[dh:]
        e = s[:, None] + t[None, :]
        e = np.where(e > 0.0, e, dtype.type(LEAKY_SLOPE) * e)
        e = np.where(nbr_mask, e, neg)
        e -= e.max(axis=1, keepdims=True)  # every row has at least the self entry
        att = np.exp(e)
        att = np.where(nbr_mask, att, 0.0)
        att /= att.sum(axis=1, keepdims=True)
        outs.append(att @ z)
        head_caches.append({"z": z, "att": att, "s": s, "t": t})
    zb = np.concatenate(outs, axis=1) + params[f"{pre}.bias"]
    return np.maximum(zb, 0.0), {"x": x, "heads": head_caches, "zb": zb}


def forward(
    model: SaliencyModel,
    graph: TokenGraph,
    features: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
):
    """Run the network; returns (node_logits, cache) with cache feeding backward.

    ``rng`` is required in training mode when dropout is active; the drawn
    masks are stored in the cache so backward reuses them exactly.
    """
    dtype = model.dtype
    x = np.asarray(features, dtype=dtype)
    if x.ndim != 2 or x.shape[0] != graph.n_nodes or x.shape[1] != model.dims[0]:
        raise ValueError(
            f"features {x.shape} incompatible with {graph.n_nodes} nodes of width {model.dims[0]}"
        )
    use_dropout = train_mode and model.dropout > 0.0
    if use_dropout and rng is None:
        raise ValueError("training-mode forward with dropout needs an rng")

    ops: dict[str, np.ndarray] = {}
    if model.variant == "gcn":
        ops["a_hat"] = graph.normalized_adjacency().astype(dtype)
    elif model.variant == "sage":
        ops["mean_adj"] = graph.mean_adjacency().astype(dtype)
    else:
        ops["nbr_mask"] = graph.neighbor_mask()

    cache = {"ops": ops, "layers": [], "masks": []}
    h = x
    for layer in range(model.depth):
        pre = f"layers.{layer}"
        if model.variant == "gcn":
            h, lc = _gcn_layer(model.params, pre, ops["a_hat"], h)
        elif model.variant == "sage":
            h, lc = _sage_layer(model.params, pre, ops["mean_adj"], h)
        else:
            h, lc = _gat_layer(model.params, pre, ops["nbr_mask"], model.heads, h)
        cache["layers"].append(lc)
        if use_dropout:
            keep = dtype.type(1.0 - model.dropout)
            mask = (rng.random(h.shape) >= model.dropout).astype(dtype) / keep
            h = h * mask
            cache["masks"].append(mask)
        else:
            cache["masks"].append(None)
    cache["readout_in"] = h
    logits = h @ model.params["readout.weight"] + model.params["readout.bias"][0]
    return logits, cache


# ---------------------------------------------------------------------------
# Backward


def _gcn_backward(params, pre, ops, lc, d_out, grads):
    dz = d_out * (lc["z"] > 0.0)
    grads[f"{pre}.weight"] = lc["p"].T @ dz
    grads[f"{pre}.bias"] = dz.sum(axis=0)
    dp = dz @ params[f"{pre}.weight"].T
    return ops["a_hat"].T @ dp


def _sage_backward(params, pre, ops, lc, d_out, grads):
    out, norms = lc["out"], lc["norms"]
    safe = np.where(norms > 0.0, norms, 1.0)
    # derivative of row-wise x/||x||; rows that were all zero keep gradient
    # zero via the relu mask below
    inner = (d_out * out).sum(axis=1, keepdims=True)
    d_act = (d_out - inner * out) / safe[:, None]
    dz = d_act * (lc["z"] > 0.0)
    grads[f"{pre}.self_weight"] = lc["x"].T @ dz
    grads[f"{pre}.neighbor_weight"] = lc["m"].T @ dz
    grads[f"{pre}.bias"] = dz.sum(axis=0)
    dx = dz @ params[f"{pre}.self_weight"].T
    dx += ops["mean_adj"].T @ (dz @ params[f"{pre}.neighbor_weight"].T)
    return dx


def _gat_backward(params, pre, ops, lc, heads, d_out, grads):
    dtype = d_out.dtype
    dzb = d_out * (lc["zb"] > 0.0)
    grads[f"{pre}.bias"] = dzb.sum(axis=0)
    x = lc["x"]
    dx = np.zeros_like(x)
    dh = lc["heads"][0]["z"].shape[1]
    slope = dtype.type(LEAKY_SLOPE)
    one = dtype.type(1.0)
    for h, hc in enumerate(lc["heads"]):
        z, att = hc["z"], hc["att"]
        att_vec = params[f"{pre}.head{h}.att"]
        a_src, a_dst = att_vec[:dh], att_vec[dh:]
        d_agg = dzb[:, h * dh : (h + 1) * dh]
        dz = att.T @ d_agg
        d_att = d_agg @ z.T
        de = att * (d_att - (att * d_att).sum(axis=1, keepdims=True))
        e_raw = hc["s"][:, None] + hc["t"][None, :]
        de *= np.where(e_raw > 0.0, one, slope)
        ds = de.sum(axis=1)
        dt = de.sum(axis=0)
        dz += ds[:, None] * a_src[None, :]
        dz += dt[:, None] * a_dst[None, :]
        d_att_vec = np.concatenate([z.T @ ds, z.T @ dt])
        grads[f"{pre}.head{h}.att"] = d_att_vec
        grads[f"{pre}.head{h}.weight"] = x.T @ dz
        dx += dz @ params[f"{pre}.head{h}.weight"].T
    return dx


def backward(model: SaliencyModel, cache: dict, d_logits: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of sum(d_logits * logits) w.r.t. every parameter.

    ``cache`` must come from a :func:`forward` call on the same inputs;
    training-mode dropout masks stored there are reused.
    """
    d_logits = np.asarray(d_logits, dtype=model.dtype)
    grads: dict[str, np.ndarray] = {}
    h = cache["readout_in"]
    w = model.params["readout.weight"]
    grads["readout.weight"] = h.T @ d_logits
    grads["readout.bias"] = np.array([d_logits.sum()], dtype=model.dtype)
    d_h = d_logits[:, None] * w[None, :]
    ops = cache["ops"]
    for layer in range(model.depth - 1, -1, -1):
        pre = f"layers.{layer}"
        mask = cache["masks"][layer]
        if mask is not None:
            d_h = d_h * mask
        lc = cache["layers"][layer]
        if model.variant == "gcn":
            d_h = _gcn_backward(model.params, pre, ops, lc, d_h, grads)
        elif model.variant == "sage":
            d_h = _sage_backward(model.params, pre, ops, lc, d_h, grads)
        else:
            d_h = _gat_backward(model.params, pre, ops, lc, model.heads, d_h, grads)
    return {name: grads[name] for name in model.params}


# ---------------------------------------------------------------------------
# Finite-difference gradient checking


def random_graph(n_nodes: int, edge_prob: float, rng: np.random.Generator) -> TokenGraph:
    """Erdos-Renyi graph, deterministic for a given generator state."""
    draws = rng.random((n_nodes, n_nodes))
    edges = [
        (i, j) for i in range(n_nodes) for j in range(i + 1, n_nodes) if draws[i, j] < edge_prob
    ]
    return TokenGraph.from_edges(n_nodes, edges)


def grad_check(
    variant: str,
    seed: int = 0,
    n_nodes: int = 8,
    dims: tuple[int, ...] = (10, 8, 8),
    heads: int = 4,
    step: float = 1e-5,
) -> dict:
    """Compare backward against central finite differences on a small random
    instance (float64). The probed scalar is a fixed random weighting of the
    node logits.

    Returns a report with per-parameter and overall max relative error,
    normalized by each parameter tensor's gradient scale.
    """
    rng = np.random.default_rng(seed)
    graph = random_graph(n_nodes, 0.45, rng)
    feats = rng.normal(size=(n_nodes, dims[0]))
    probe = rng.normal(size=n_nodes)
    model = init_model(variant, dims, heads=heads, dropout=0.0, seed=seed + 1, dtype=np.float64)

    logits, cache = forward(model, graph, feats)
    analytic = backward(model, cache, probe)

    def loss() -> float:
        out, _ = forward(model, graph, feats)
        return float(probe @ out)

    per_param: dict[str, float] = {}
    worst = 0.0
    for name, arr in model.params.items():
        fd = np.zeros_like(arr)
        flat = arr.reshape(-1)
        fd_flat = fd.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss()
            flat[i] = orig - step
            down = loss()
            flat[i] = orig
            fd_flat[i] = (up - down) / (2.0 * step)
        scale = max(np.abs(analytic[name]).max(), np.abs(fd).max())
        err = float(np.abs(analytic[name] - fd).max() / scale) if scale > 0 else 0.0
        per_param[name] = err
        worst = max(worst, err)
    return {
        "variant": variant,
        "seed": seed,
        "n_nodes": n_nodes,
        "step": step,
        "max_rel_err": worst,
        "per_param": per_param,
    }
