"""Acceptance gate: one test per release criterion.

Each test emits a PASS/FAIL line into the terminal summary (see conftest) and
asserts the criterion at its stated tolerance.
"""

import os
import time

import numpy as np
import pytest

from reference_metrics import (
    reference_e_max,
    reference_f_max,
    reference_fbw,
    reference_two_way,
)
from salgraph.arrayio import ManifestEntry, write_array, write_image, write_manifest
from salgraph.cli import main
from salgraph.compose import Candidate, RankWeights, dice, iou, mask_blend, rank
from salgraph.gnn import VARIANTS, backward, forward, grad_check, init_model, random_graph
from salgraph.losses import total_loss, weight_map, wbce, wiou
from salgraph.metrics import (
    SSIM_C1,
    e_max,
    f_max,
    fbw,
    pixcorr,
    ssim,
    two_way_identification,
)
from salgraph.saliency import rasterize_vjp
from salgraph.synthetic import make_disc_dataset
from salgraph.train import TrainConfig, train_on_arrays


def _verdict(record, ok, label, detail):
    record(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
    return ok


def test_acceptance_gradient_correctness(acceptance_report):
    start = time.perf_counter()
    worst = 0.0
    for variant in VARIANTS:
        for seed in range(5):
            report = grad_check(variant, seed=seed, n_nodes=8, step=1e-5)
            worst = max(worst, report["max_rel_err"])
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 60.0
    assert _verdict(
        acceptance_report,
        ok,
        "gradient-correctness",
        f"3 variants x 5 seeds, worst rel err {worst:.2e} (<1e-4), {elapsed:.1f}s (<60s)",
    )


def test_acceptance_end_to_end_differentiation(acceptance_report):
    # smallest graph the rasterizer accepts near the 8-node target: a global
    # token plus a 3x3 patch grid (10 nodes), mapped to an 8x8 loss
    rng = np.random.default_rng(0)
    worst = 0.0
    for variant in VARIANTS:
        graph = random_graph(10, 0.5, rng)
        feats = rng.normal(size=(10, 6))
        gt = rng.random((8, 8))
        w = weight_map(gt)
        model = init_model(variant, (6, 4, 4), dropout=0.0, seed=1, dtype=np.float64)

        def loss_value():
            logits, _ = forward(model, graph, feats)
            smap, _ = rasterize_vjp(logits, 8, 8, grid=3)
            return total_loss(smap, gt, w)[0].total

        logits, cache = forward(model, graph, feats)
        smap, vjp = rasterize_vjp(logits, 8, 8, grid=3)
        _, d_map = total_loss(smap, gt, w)
        grads = backward(model, cache, vjp(d_map))
        h = 1e-5
        for name, arr in model.params.items():
            flat = arr.reshape(-1)
            fd = np.zeros(flat.size)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = loss_value()
                flat[i] = orig - h
                fd[i] = (up - loss_value()) / (2 * h)
                flat[i] = orig
            a = grads[name].reshape(-1)
            scale = max(np.abs(a).max(), np.abs(fd).max())
            if scale > 0:
                worst = max(worst, float(np.abs(a - fd).max() / scale))
    ok = worst < 1e-4
    assert _verdict(
        acceptance_report,
        ok,
        "end-to-end-differentiation",
        f"loss->rasterize->network, all variants, worst rel err {worst:.2e} (<1e-4)",
    )


def test_acceptance_metric_oracles(acceptance_report):
    rng = np.random.default_rng(7)
    worst = 0.0
    checked = 0
    while checked < 1000:
        g = (rng.random((8, 8)) > rng.uniform(0.1, 0.9)).astype(np.float64)
        if not g.any():
            continue
        s = rng.random((8, 8))
        worst = max(worst, abs(f_max(s, g) - reference_f_max(s, g)))
        worst = max(worst, abs(e_max(s, g) - reference_e_max(s, g)))
        worst = max(worst, abs(fbw(s, g) - reference_fbw(s, g)))
        checked += 1

    twoway_ok = True
    for n in range(2, 9):
        r = rng.normal(size=(n, 12))
        t = rng.normal(size=(n, 12))
        if abs(two_way_identification(r, t) - reference_two_way(r, t)) > 1e-9:
            twoway_ok = False

    overlap_ok = True
    for code_a in range(16):
        for code_b in range(16):
            a = np.array([(code_a >> k) & 1 for k in range(4)], dtype=np.uint8).reshape(2, 2)
            b = np.array([(code_b >> k) & 1 for k in range(4)], dtype=np.uint8).reshape(2, 2)
            inter = int(np.logical_and(a, b).sum())
            union = int(np.logical_or(a, b).sum())
            total = int(a.sum()) + int(b.sum())
            if iou(a, b) != (inter / union if union else 1.0):
                overlap_ok = False
            if dice(a, b) != (2 * inter / total if total else 1.0):
                overlap_ok = False

    ok = worst < 1e-6 and twoway_ok and overlap_ok
    assert _verdict(
        acceptance_report,
        ok,
        "metric-oracles",
        f"1000 dual-implementation pairs worst diff {worst:.2e} (<1e-6), "
        f"two-way exact n<=8: {twoway_ok}, iou/dice exact on 256 2x2 pairs: {overlap_ok}",
    )


def test_acceptance_analytic_fixtures(acceptance_report):
    rng = np.random.default_rng(11)
    gt = rng.random((9, 9))
    w = weight_map(gt)
    checks = []
    checks.append(bool(abs(wbce(np.full((9, 9), 0.5), gt, w)[0] - np.log(2.0)) <= 1e-9))
    gb = (rng.random((9, 9)) > 0.5).astype(np.float64)
    checks.append(wiou(gb, gb, weight_map(gb))[0] == 0.0)
    img = rng.integers(0, 256, (20, 20, 3)).astype(np.uint8)
    checks.append(abs(ssim(img, img) - 1.0) <= 1e-9)
    expected = SSIM_C1 / (255.0**2 + SSIM_C1)
    checks.append(
        abs(ssim(np.zeros((8, 8), np.uint8), np.full((8, 8), 255, np.uint8)) - expected) <= 1e-6
    )
    checks.append(abs(pixcorr(img, 255 - img) - (-1.0)) <= 1e-9)
    fg = rng.integers(0, 256, (6, 6, 3)).astype(np.uint8)
    bg = rng.integers(0, 256, (6, 6, 3)).astype(np.uint8)
    checks.append(np.array_equal(mask_blend(fg, bg, np.ones((6, 6))), fg))
    checks.append(np.array_equal(mask_blend(fg, bg, np.zeros((6, 6))), bg))
    ok = all(checks)
    assert _verdict(
        acceptance_report,
        ok,
        "analytic-fixtures",
        f"wbce=ln2, wiou=0, ssim self=1, ssim const pair, pixcorr=-1, blend bounds: {checks}",
    )


def test_acceptance_ranking_properties(acceptance_report):
    rng = np.random.default_rng(13)
    scaling_ok = True
    cosine_ok = True
    for _ in range(100):
        n = int(rng.integers(2, 7))
        cands = [
            Candidate(
                image=rng.integers(0, 256, (12, 12, 3)).astype(np.uint8),
                clip_vec=rng.normal(size=6),
                mask=rng.random((12, 12)),
            )
            for _ in range(n)
        ]
        ref = rng.random((12, 12))
        text = rng.normal(size=6)
        base = rank(cands, ref, text, RankWeights(lambda_clip=1.0, lambda_mask=0.5))
        c = float(rng.uniform(0.1, 10.0))
        scaled = rank(cands, ref, text, RankWeights(lambda_clip=c, lambda_mask=0.5 * c))
        if base.order != scaled.order:
            scaling_ok = False
        clip_only = rank(cands, ref, text, RankWeights(lambda_clip=1.0, lambda_mask=0.0))
        cosines = clip_only.s_clip
        expected = sorted(range(n), key=lambda i: (-cosines[i], i))
        if clip_only.order != expected:
            cosine_ok = False
    ok = scaling_ok and cosine_ok
    assert _verdict(
        acceptance_report,
        ok,
        "ranking-properties",
        f"joint lambda scaling preserves order on 100 sets: {scaling_ok}, "
        f"lambda_mask=0 equals cosine order: {cosine_ok}",
    )


def test_acceptance_format_round_trips(tmp_path, acceptance_report):
    from salgraph.arrayio import read_array, read_image
    from salgraph.train import Checkpoint, load_checkpoint, save_checkpoint

    rng = np.random.default_rng(17)
    ok = True
    # arrays
    for dtype in (np.float32, np.float64, np.uint8):
        a = (
            rng.integers(0, 256, (5, 7)).astype(dtype)
            if dtype == np.uint8
            else rng.normal(size=(5, 7)).astype(dtype)
        )
        p1, p2 = tmp_path / f"{dtype.__name__}1.npy", tmp_path / f"{dtype.__name__}2.npy"
        write_array(p1, a)
        write_array(p2, read_array(p1))
        ok &= p1.read_bytes() == p2.read_bytes()
    # pgm / ppm
    gray = rng.integers(0, 256, (6, 9)).astype(np.uint8)
    color = rng.integers(0, 256, (6, 9, 3)).astype(np.uint8)
    for name, img in (("g.pgm", gray), ("c.ppm", color)):
        p1, p2 = tmp_path / name, tmp_path / ("2" + name)
        write_image(p1, img)
        write_image(p2, read_image(p1))
        ok &= p1.read_bytes() == p2.read_bytes()
    # checkpoint
    model = init_model("gat", (10, 8), seed=3)
    ckpt = Checkpoint(
        variant="gat", dims=(10, 8), heads=4, dropout=0.1, params=model.params,
        epoch=2, seed=3, best_val_fmax=0.5,
    )
    p1, p2 = tmp_path / "m1.grsp", tmp_path / "m2.grsp"
    save_checkpoint(p1, ckpt)
    save_checkpoint(p2, load_checkpoint(p1))
    ok &= p1.read_bytes() == p2.read_bytes()
    assert _verdict(
        acceptance_report,
        ok,
        "format-round-trips",
        "array/pgm/ppm/checkpoint write->read->write byte-identical",
    )


def test_acceptance_determinism(tmp_path, acceptance_report):
    embs, masks, _ = make_disc_dataset(n_samples=4, grid=4, upscale=4, feature_dim=16, seed=5)
    entries = []
    for i, (e, m) in enumerate(zip(embs, masks)):
        emb_path = tmp_path / f"e{i}.npy"
        mask_path = tmp_path / f"m{i}.pgm"
        write_array(emb_path, e)
        write_image(mask_path, (m * 255).astype(np.uint8))
        entries.append(ManifestEntry("train", emb_path, mask_path))
    manifest = tmp_path / "data.manifest"
    write_manifest(manifest, entries)

    artifacts = []
    for run in ("one", "two"):
        out = tmp_path / run
        code = main(
            [
                "train", "--manifest", str(manifest), "--out", str(out),
                "--hidden", "8", "--epochs", "3", "--seed", "9",
                "--val-fraction", "0", "--threads", "1",
            ]
        )
        assert code == 0
        infer_out = tmp_path / f"infer_{run}"
        code = main(
            [
                "infer", "--checkpoint", str(out / "checkpoint.grsp"),
                "--emb", str(tmp_path / "e0.npy"), "--out", str(infer_out),
                "--threads", "1",
            ]
        )
        assert code == 0
        eval_out = tmp_path / f"eval_{run}"
        code = main(
            [
                "sal-eval", "--checkpoint", str(out / "checkpoint.grsp"),
                "--manifest", str(manifest), "--split", "train",
                "--out", str(eval_out), "--threads", "1",
            ]
        )
        assert code == 0
        artifacts.append(
            (
                (out / "checkpoint.grsp").read_bytes(),
                (out / "train_log.csv").read_bytes(),
                (infer_out / "saliency.pgm").read_bytes(),
                (eval_out / "sal_metrics.csv").read_bytes(),
            )
        )
    ok = artifacts[0] == artifacts[1]
    assert _verdict(
        acceptance_report,
        ok,
        "determinism",
        "two seeded runs: checkpoint, train log, saliency PGM, metrics CSV byte-identical",
    )


def test_acceptance_synthetic_overfit(acceptance_report):
    start = time.perf_counter()
    embs, masks, _ = make_disc_dataset(n_samples=16, seed=0)
    cfg = TrainConfig(
        variant="sage", epochs=300, seed=0, val_fraction=0.0, patience=10**9
    )
    ckpt, history = train_on_arrays(list(embs), list(masks), cfg)
    elapsed = time.perf_counter() - start
    best = max(h["val_fmax"] for h in history)
    losses = np.array([h["train_loss"] for h in history])
    smoothed = np.convolve(losses, np.ones(10) / 10.0, mode="valid")
    max_rise = float(np.diff(smoothed).max()) if len(smoothed) > 1 else 0.0
    monotone = max_rise <= 1e-9
    ok = best >= 0.95 and monotone and elapsed < 300.0
    assert _verdict(
        acceptance_report,
        ok,
        "synthetic-overfit",
        f"best training F-max {best:.4f} (>=0.95) within {len(history)} epochs, "
        f"smoothed-loss max rise {max_rise:.2e} (<=0), {elapsed:.0f}s (<300s)",
    )


@pytest.mark.skipif(
    "GRASP_FULL_DATA" not in os.environ,
    reason="optional full-data mode: set GRASP_FULL_DATA to a directory holding "
    "full.manifest with externally produced embeddings and pseudo-ground-truth "
    "masks (train split = last 301 stimuli, test split = first 681)",
)
def test_acceptance_full_data_mode(acceptance_report):
    """Non-gating: runs the detector end-to-end on externally supplied data
    and logs (does not assert) the expected F-max ordering between the
    inductive-aggregation and spectral-convolution variants."""
    from salgraph.arrayio import load_manifest, read_array, read_mask
    from salgraph.graph import GraphConfig, build_token_graph
    from salgraph.metrics import saliency_report
    from salgraph.saliency import rasterize
    from salgraph.train import model_from_checkpoint, token_grid_size, train

    entries = load_manifest(os.path.join(os.environ["GRASP_FULL_DATA"], "full.manifest"))
    test_rows = [e for e in entries if e.split == "test"]
    results = {}
    for variant in ("sage", "gcn"):
        ckpt, _ = train(entries, TrainConfig(variant=variant, seed=0))
        model = model_from_checkpoint(ckpt)
        scores = []
        for entry in test_rows:
            emb = read_array(entry.emb_path)
            gt = read_mask(entry.mask_path)
            grid = token_grid_size(emb.shape[0])
            graph = build_token_graph(emb, GraphConfig(), grid=grid)
            logits, _ = forward(model, graph, emb)
            smap = rasterize(logits, gt.shape[0], gt.shape[1], grid=grid).astype(np.float64)
            scores.append(saliency_report(smap, gt))
        results[variant] = {
            name: float(np.mean([getattr(s, name) for s in scores]))
            for name in ("mae", "f_max", "e_max", "fbw")
        }
        row = results[variant]
        print(
            f"{variant}: MAE {row['mae']:.4f}  F-max {row['f_max']:.4f}  "
            f"E-max {row['e_max']:.4f}  Fbw {row['fbw']:.4f}"
        )
    ordering = results["sage"]["f_max"] >= results["gcn"]["f_max"]
    acceptance_report(
        f"INFO full-data-mode: sage F-max {results['sage']['f_max']:.4f} vs "
        f"gcn {results['gcn']['f_max']:.4f}; expected ordering holds: {ordering} "
        "(logged, not asserted)"
    )
