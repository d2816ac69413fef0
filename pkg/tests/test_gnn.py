import numpy as np
import pytest

from salgraph.gnn import (
    VARIANTS,
    backward,
    forward,
    grad_check,
    init_model,
    random_graph,
)
from salgraph.graph import TokenGraph


def _instance(variant, seed=0, n=8, dims=(10, 8, 8), dtype=np.float64, dropout=0.0):
    rng = np.random.default_rng(seed)
    graph = random_graph(n, 0.45, rng)
    feats = rng.normal(size=(n, dims[0]))
    model = init_model(variant, dims, dropout=dropout, seed=seed + 1, dtype=dtype)
    return model, graph, feats, rng


# ---------------------------------------------------------------------------
# Initialization


def test_init_deterministic_for_seed():
    a = init_model("gat", (12, 8), seed=5)
    b = init_model("gat", (12, 8), seed=5)
    assert a.params.keys() == b.params.keys()
    for k in a.params:
        assert a.params[k].tobytes() == b.params[k].tobytes()


def test_init_biases_zero_and_weights_bounded():
    m = init_model("sage", (20, 12, 12), seed=1)
    for name, arr in m.params.items():
        if name.endswith(".bias"):
            assert not arr.any()
    s1 = np.sqrt(6.0 / (20 + 12))
    assert np.abs(m.params["layers.0.self_weight"]).max() <= s1
    s_read = np.sqrt(6.0 / (12 + 1))
    assert np.abs(m.params["readout.weight"]).max() <= s_read


def test_init_rejects_zero_hidden():
    with pytest.raises(ValueError):
        init_model("gcn", (8, 0))


def test_init_rejects_indivisible_gat_heads():
    with pytest.raises(ValueError, match="divisible"):
        init_model("gat", (8, 6), heads=4)


# ---------------------------------------------------------------------------
# Forward


def test_gcn_single_isolated_node_identity():
    graph = TokenGraph.from_edges(1, [])
    model = init_model("gcn", (3, 3), seed=0, dtype=np.float64)
    model.params["layers.0.weight"] = np.eye(3)
    model.params["layers.0.bias"][:] = 0.0
    x = np.array([[0.5, 1.5, 2.0]])
    _, cache = forward(model, graph, x)
    assert np.array_equal(cache["readout_in"], x)


def test_gat_identical_features_uniform_attention():
    rng = np.random.default_rng(0)
    graph = random_graph(9, 0.5, rng)
    model = init_model("gat", (6, 8), seed=3, dtype=np.float64)
    feats = np.tile(rng.normal(size=6), (9, 1))
    _, cache = forward(model, graph, feats)
    for hc in cache["layers"][0]["heads"]:
        att = hc["att"]
        for i in range(9):
            support = np.concatenate([graph.neighbors(i), [i]])
            expected = 1.0 / len(support)
            assert np.allclose(att[i, support], expected, atol=1e-12)


def test_gat_attention_rows_sum_to_one():
    model, graph, feats, _ = _instance("gat", seed=2)
    _, cache = forward(model, graph, feats)
    for layer in cache["layers"]:
        for hc in layer["heads"]:
            assert np.abs(hc["att"].sum(axis=1) - 1.0).max() < 1e-6


def test_gcn_path_graph_matches_reference_computation():
    # 3-node path, one layer of width 2, hand-set weights: reference computed
    # step by step from the normalized-adjacency formula
    graph = TokenGraph.from_edges(3, [(0, 1), (1, 2)])
    model = init_model("gcn", (2, 2), seed=0, dtype=np.float64)
    w = np.array([[1.0, -0.5], [0.25, 2.0]])
    b = np.array([0.1, -0.2])
    model.params["layers.0.weight"] = w
    model.params["layers.0.bias"] = b
    model.params["readout.weight"] = np.array([1.0, 1.0])
    model.params["readout.bias"] = np.array([0.0])
    x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])

    deg = np.array([1.0, 2.0, 1.0])
    d = 1.0 / np.sqrt(deg + 1.0)
    a_hat = np.zeros((3, 3))
    for i, j in ((0, 0), (1, 1), (2, 2), (0, 1), (1, 0), (1, 2), (2, 1)):
        a_hat[i, j] = d[i] * d[j]
    expected_hidden = np.maximum(a_hat @ x @ w + b, 0.0)
    expected_logits = expected_hidden @ np.array([1.0, 1.0])

    logits, cache = forward(model, graph, x)
    assert np.allclose(cache["readout_in"], expected_hidden, atol=1e-12)
    assert np.allclose(logits, expected_logits, atol=1e-12)


def test_inference_deterministic_bitwise():
    for variant in VARIANTS:
        model, graph, feats, _ = _instance(variant, seed=4, dtype=np.float32)
        out1, _ = forward(model, graph, feats)
        out2, _ = forward(model, graph, feats)
        assert out1.tobytes() == out2.tobytes()


def test_forward_finite_for_all_variants():
    for variant in VARIANTS:
        model, graph, feats, _ = _instance(variant, seed=6, dims=(16, 8, 8))
        logits, _ = forward(model, graph, feats)
        assert np.isfinite(logits).all()
        assert logits.shape == (8,)


def test_forward_shape_mismatch_rejected():
    model, graph, feats, _ = _instance("gcn")
    with pytest.raises(ValueError, match="incompatible"):
        forward(model, graph, feats[:, :-1])


def test_sage_mean_aggregation_order_insensitive():
    # accumulating neighbor features in shuffled order agrees with the fixed
    # matrix reduction to float32 tolerance
    model, graph, feats, rng = _instance("sage", seed=7, dtype=np.float32)
    feats32 = feats.astype(np.float32)
    fixed = graph.mean_adjacency().astype(np.float32) @ feats32
    shuffled = np.zeros_like(fixed)
    for i in range(graph.n_nodes):
        nbrs = list(graph.neighbors(i))
        rng.shuffle(nbrs)
        if not nbrs:
            continue
        acc = np.zeros(feats32.shape[1], dtype=np.float32)
        for j in nbrs:
            acc += feats32[j]
        shuffled[i] = acc / np.float32(len(nbrs))
    assert np.abs(fixed - shuffled).max() < 1e-6


def test_sage_empty_neighborhood_mean_is_zero():
    graph = TokenGraph.from_edges(2, [])  # two isolated nodes
    model = init_model("sage", (4, 4), seed=0, dtype=np.float64)
    feats = np.random.default_rng(0).normal(size=(2, 4))
    _, cache = forward(model, graph, feats)
    assert np.array_equal(cache["layers"][0]["m"], np.zeros((2, 4)))


# ---------------------------------------------------------------------------
# Backward


def test_backward_zero_upstream_gives_zero_grads():
    for variant in VARIANTS:
        model, graph, feats, _ = _instance(variant)
        _, cache = forward(model, graph, feats)
        grads = backward(model, cache, np.zeros(graph.n_nodes))
        assert all(not g.any() for g in grads.values())


def test_backward_is_linear_in_upstream():
    for variant in VARIANTS:
        model, graph, feats, rng = _instance(variant, seed=8)
        _, cache = forward(model, graph, feats)
        d = rng.normal(size=graph.n_nodes)
        g1 = backward(model, cache, d)
        g2 = backward(model, cache, 2.0 * d)
        for k in g1:
            assert np.allclose(2.0 * g1[k], g2[k], rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("seed", [0, 1])
def test_grad_check_small_instances(variant, seed):
    report = grad_check(variant, seed=seed)
    assert report["max_rel_err"] < 1e-4


def test_backward_with_dropout_matches_finite_differences():
    # hold the dropout stream fixed by reseeding before every evaluation
    variant = "gcn"
    model, graph, feats, _ = _instance(variant, seed=9, dims=(6, 4, 4), dropout=0.4)
    probe = np.random.default_rng(10).normal(size=graph.n_nodes)

    def run(collect_cache=False):
        rng = np.random.default_rng(123)
        logits, cache = forward(model, graph, feats, train_mode=True, rng=rng)
        return (logits, cache) if collect_cache else float(probe @ logits)

    _, cache = run(collect_cache=True)
    grads = backward(model, cache, probe)
    h = 1e-6
    for name in ("layers.0.weight", "readout.weight"):
        arr = model.params[name]
        flat = arr.reshape(-1)
        for idx in (0, flat.size // 2, flat.size - 1):
            orig = flat[idx]
            flat[idx] = orig + h
            up = run()
            flat[idx] = orig - h
            down = run()
            flat[idx] = orig
            fd = (up - down) / (2 * h)
            assert grads[name].reshape(-1)[idx] == pytest.approx(fd, rel=1e-4, abs=1e-9)


def test_dropout_train_mode_deterministic_given_rng():
    model, graph, feats, _ = _instance("sage", seed=11, dtype=np.float32, dropout=0.3)
    out1, _ = forward(model, graph, feats, train_mode=True, rng=np.random.default_rng(5))
    out2, _ = forward(model, graph, feats, train_mode=True, rng=np.random.default_rng(5))
    assert out1.tobytes() == out2.tobytes()


def test_train_mode_without_rng_rejected():
    model, graph, feats, _ = _instance("gcn", dropout=0.5)
    with pytest.raises(ValueError, match="rng"):
        forward(model, graph, feats, train_mode=True)
