"""Command-line front end wiring the library into reproducible batch runs.

Subcommands: graph, train, infer, sal-eval, recon-eval, gradcheck,
compose {blend, inpaint-mask, rank}, text-cues {fit, extract}.

Settings resolve as defaults < config file (flat ``key = value`` lines) <
command-line flags; the ``GRASP_SEED`` environment variable supplies the seed
when nothing else does. Every subcommand that writes does so strictly under
``--out`` and echoes the fully resolved configuration to
``<out>/config.resolved``. Exit codes: 0 success, 1 usage error, 2 data
error.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .arrayio import (
    load_manifest,
    read_array,
    read_image,
    read_mask,
    write_array,
    write_image,
    write_mask,
)
from .compose import (
    Candidate,
    RankWeights,
    export_inpaint_mask,
    mask_blend,
    rank,
)
from .errors import DataError
from .gnn import VARIANTS, forward, grad_check
from .graph import GraphConfig, build_token_graph
from .metrics import (
    RECON_SIZE,
    SSIM_SIGMA,
    SSIM_WINDOW,
    correlation_distance,
    pixcorr,
    saliency_report,
    ssim,
    two_way_identification,
)
from .saliency import rasterize
from .semantics import (
    DEFAULT_RIDGE_LAMBDA,
    ProjectionMap,
    assemble_prompt,
    extract_cues,
    fit_projection,
    load_vocabulary,
    pool,
)
from .train import (
    CHECKPOINT_VERSION,
    TrainConfig,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
    token_grid_size,
    train,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are exit 1
        raise UsageError(message)


# name -> (type tag, default); bool values read true/false
CONFIG_SPEC: dict[str, tuple[type, object]] = {
    "seed": (int, 0),
    "threads": (int, 1),
    "variant": (str, "sage"),
    "hidden": (int, 256),
    "depth": (int, 2),
    "heads": (int, 4),
    "dropout": (float, 0.1),
    "use_semantic": (bool, False),
    "knn_k": (int, 8),
    "connect_cls": (bool, True),
    "lr": (float, 1e-3),
    "epochs": (int, 200),
    "batch_size": (int, 8),
    "val_fraction": (float, 0.1),
    "patience": (int, 30),
    "theta": (float, 0.5),
    "dilate_radius": (int, 0),
    "lambda_clip": (float, 1.0),
    "lambda_mask": (float, 0.5),
    "consistency": (str, "iou"),
    "out_height": (int, 256),
    "out_width": (int, 256),
    "ridge_lambda": (float, DEFAULT_RIDGE_LAMBDA),
    "cue_count": (int, 5),
}

_FLOAT_FMT = "%.10g"


def _parse_value(key: str, raw: str):
    kind, _ = CONFIG_SPEC[key]
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise UsageError(f"config key {key!r} expects true/false, got {raw!r}")
    try:
        return kind(raw)
    except ValueError as exc:
        raise UsageError(f"config key {key!r}: {exc}") from exc


def _load_config_file(path: str) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in CONFIG_SPEC:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _parse_value(key, value)
    return values


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = {key: default for key, (_, default) in CONFIG_SPEC.items()}
    env_seed = os.environ.get("GRASP_SEED")
    if env_seed is not None:
        cfg["seed"] = _parse_value("seed", env_seed)
    if getattr(args, "config", None):
        cfg.update(_load_config_file(args.config))
    for key in CONFIG_SPEC:
        override = getattr(args, key, None)
        if override is not None:
            cfg[key] = override
    if cfg["variant"] not in VARIANTS:
        raise UsageError(f"variant must be one of {VARIANTS}, got {cfg['variant']!r}")
    if cfg["consistency"] not in ("iou", "dice"):
        raise UsageError(f"consistency must be iou or dice, got {cfg['consistency']!r}")
    return cfg


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _FLOAT_FMT % v
    return str(v)


def _prepare_out(args, cfg) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"{k} = {_format_value(cfg[k])}" for k in sorted(cfg)]
    (out / "config.resolved").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def _graph_config(cfg) -> GraphConfig:
    return GraphConfig(
        use_semantic=cfg["use_semantic"], k=cfg["knn_k"], connect_cls=cfg["connect_cls"]
    )


def _write_csv(path: Path, header_comments: list[str], columns: list[str], rows: list[list]):
    lines = [f"# {c}" for c in header_comments]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(
            ",".join(_FLOAT_FMT % v if isinstance(v, float) else str(v) for v in row)
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_graph(args, cfg) -> int:
    out = _prepare_out(args, cfg)
    emb = read_array(args.emb)
    g = build_token_graph(emb, _graph_config(cfg), grid=token_grid_size(emb.shape[0]))
    lines = [f"{i} {j}" for i, j in g.edges]
    (out / "edges.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{g.n_nodes} nodes, {len(g.edges)} undirected edges -> {out / 'edges.txt'}")
    return 0


def cmd_gradcheck(args, cfg) -> int:
    report = grad_check(cfg["variant"], seed=cfg["seed"])
    line = (
        f"variant={report['variant']} seed={report['seed']} "
        f"max_rel_err={report['max_rel_err']:.6e}"
    )
    print(line)
    if args.out:
        out = _prepare_out(args, cfg)
        (out / "gradcheck.txt").write_text(line + "\n", encoding="utf-8")
    return 0


def cmd_train(args, cfg) -> int:
    out = _prepare_out(args, cfg)
    entries = load_manifest(args.manifest)
    tcfg = TrainConfig(
        variant=cfg["variant"],
        hidden=cfg["hidden"],
        depth=cfg["depth"],
        heads=cfg["heads"],
        dropout=cfg["dropout"],
        graph=_graph_config(cfg),
        lr=cfg["lr"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        seed=cfg["seed"],
        val_fraction=cfg["val_fraction"],
        patience=cfg["patience"],
    )
    ckpt, history = train(entries, tcfg)
    save_checkpoint(out / "checkpoint.grsp", ckpt)
    _write_csv(
        out / "train_log.csv",
        [],
        ["epoch", "train_loss", "val_fmax"],
        [[h["epoch"], float(h["train_loss"]), float(h["val_fmax"])] for h in history],
    )
    print(
        f"trained {ckpt.variant} for {len(history)} epochs; "
        f"best val F-max {ckpt.best_val_fmax:.4f} at epoch {ckpt.epoch}"
    )
    return 0


def cmd_infer(args, cfg) -> int:
    out = _prepare_out(args, cfg)
    ckpt = load_checkpoint(args.checkpoint)
    model = model_from_checkpoint(ckpt)
    emb = read_array(args.emb)
    grid = token_grid_size(emb.shape[0])
    graph = build_token_graph(emb, _graph_config(cfg), grid=grid)
    logits, _ = forward(model, graph, emb)
    smap = rasterize(logits, cfg["out_height"], cfg["out_width"], grid=grid)
    write_mask(out / "saliency.pgm", smap.astype(np.float64))
    print(f"wrote {out / 'saliency.pgm'} ({cfg['out_height']}x{cfg['out_width']})")
    return 0


def _eval_entry(model, gcfg, entry):
    emb = read_array(entry.emb_path)
    gt = read_mask(entry.mask_path)
    grid = token_grid_size(emb.shape[0])
    graph = build_token_graph(emb, gcfg, grid=grid)
    logits, _ = forward(model, graph, emb)
    smap = rasterize(logits, gt.shape[0], gt.shape[1], grid=grid).astype(np.float64)
    return saliency_report(smap, gt)


def cmd_sal_eval(args, cfg) -> int:
    out = _prepare_out(args, cfg)
    ckpt = load_checkpoint(args.checkpoint)
    model = model_from_checkpoint(ckpt)
    entries = load_manifest(args.manifest)
    if args.split != "all":
        entries = [e for e in entries if e.split == args.split]
    if not entries:
        raise DataError(f"no manifest entries for split {args.split!r}")
    gcfg = _graph_config(cfg)
    if cfg["threads"] > 1:
        with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool_:
            reports = list(pool_.map(lambda e: _eval_entry(model, gcfg, e), entries))
    else:
        reports = [_eval_entry(model, gcfg, e) for e in entries]
    rows = [[i, r.mae, r.f_max, r.e_max, r.fbw] for i, r in enumerate(reports)]
    rows.append(
        [
            "mean",
            float(np.mean([r.mae for r in reports])),
            float(np.mean([r.f_max for r in reports])),
            float(np.mean([r.e_max for r in reports])),
            float(np.mean([r.fbw for r in reports])),
        ]
    )
    _write_csv(
        out / "sal_metrics.csv",
        [
            f"salgraph sal-eval, split={args.split}, samples={len(reports)}",
            "f_max beta^2 = 0.3 over 256 strict thresholds k/255; e_max eps = 1e-08",
            "fbw beta^2 = 1, 7x7 sigma-5 gaussian (border-renormalized), alpha = ln(0.5)/5",
            "resolution: predictions rasterized to each sample's ground-truth size",
        ],
        ["sample", "mae", "f_max", "e_max", "fbw"],
        rows,
    )
    mean = rows[-1]
    print(
        f"{len(reports)} samples: MAE {mean[1]:.4f}  F-max {mean[2]:.4f}  "
        f"E-max {mean[3]:.4f}  Fbw {mean[4]:.4f}"
    )
    return 0


def _load_pairs_manifest(path: str) -> list[tuple[Path, Path]]:
    base = Path(path).parent
    pairs = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise DataError(f"{path}:{lineno}: expected 'recon<TAB>target'")
        a, b = base / fields[0], base / fields[1]
        for p in (a, b):
            if not p.is_file():
                raise DataError(f"{path}:{lineno}: missing file {p}")
        pairs.append((a, b))
    if not pairs:
        raise DataError(f"{path}: empty pair manifest")
    return pairs


def cmd_recon_eval(args, cfg) -> int:
    out = _prepare_out(args, cfg)
    pairs = _load_pairs_manifest(args.pairs)

    def score(pair):
        a = read_image(pair[0])
        b = read_image(pair[1])
        return pixcorr(a, b), ssim(a, b)

    if cfg["threads"] > 1:
        with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool_:
            scores = list(pool_.map(score, pairs))
    else:
        scores = [score(p) for p in pairs]
    rows = [[i, pc, ss] for i, (pc, ss) in enumerate(scores)]
    rows.append(
        [
            "mean",
            float(np.mean([s[0] for s in scores])),
            float(np.mean([s[1] for s in scores])),
        ]
    )
    extra_rows = []
    for spec in args.features or []:
        try:
            name, paths = spec.split("=", 1)
            recon_path, gt_path = paths.split(":", 1)
        except ValueError as exc:
            raise UsageError(f"--features expects NAME=recon.npy:target.npy, got {spec!r}") from exc
        recon_feats = read_array(recon_path)
        gt_feats = read_array(gt_path)
        extra_rows.append([f"twoway_{name}", two_way_identification(recon_feats, gt_feats)])
        extra_rows.append([f"corrdist_{name}", correlation_distance(recon_feats, gt_feats)])
    _write_csv(
        out / "recon_metrics.csv",
        [
            f"salgraph recon-eval, pairs={len(pairs)}",
            f"pixcorr/ssim at {RECON_SIZE}x{RECON_SIZE} RGB (bilinear, float)",
            f"ssim: {SSIM_WINDOW}x{SSIM_WINDOW} gaussian sigma {SSIM_SIGMA}, "
            "C1=(0.01*255)^2, C2=(0.03*255)^2, valid windows, luma",
            "twoway_*: % of ordered pairs won strictly; ties incorrect",
            "corrdist_*: mean (1 - Pearson) over matched feature rows",
        ],
        ["pair", "pixcorr", "ssim"],
        rows + extra_rows,
    )
    mean = rows[len(pairs)]
    print(f"{len(pairs)} pairs: PixCorr {mean[1]:.4f}  SSIM {mean[2]:.4f}")
    return 0


def cmd_compose_blend(args, cfg) -> int:
    out = _prepare_out(args, cfg)
    fg = read_image(args.fg)
    bg = read_image(args.bg)
    smap = read_mask(args.saliency)
    blended = mask_blend(fg, bg, smap)
    name = "blend.ppm" if blended.ndim == 3 else "blend.pgm"
    write_image(out / name, blended)
    print(f"wrote {out / name}")
    return 0


def cmd_compose_inpaint(args, cfg) -> int:
    out = _prepare_out(args, cfg)
    smap = read_mask(args.saliency)
    mask = export_inpaint_mask(smap, cfg["theta"], cfg["dilate_radius"])
    write_image(out / "inpaint_mask.pgm", mask * np.uint8(255))
    covered = float(mask.mean())
    print(f"wrote {out / 'inpaint_mask.pgm'} ({covered:.1%} to repaint)")
    return 0


def _load_rank_manifest(path: str) -> list[Candidate]:
    base = Path(path).parent
    candidates = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) not in (2, 3):
            raise DataError(f"{path}:{lineno}: expected 'image<TAB>clipvec[<TAB>mask]'")
        image = read_image(base / fields[0])
        vec = read_array(base / fields[1])
        mask = read_mask(base / fields[2]) if len(fields) == 3 else None
        candidates.append(Candidate(image=image, clip_vec=vec, mask=mask))
    if not candidates:
        raise DataError(f"{path}: empty candidate manifest")
    return candidates


def cmd_compose_rank(args, cfg) -> int:
    out = _prepare_out(args, cfg)
    candidates = _load_rank_manifest(args.manifest)
    reference = read_mask(args.saliency)
    text_vec = read_array(args.text_vec)
    weights = RankWeights(
        lambda_clip=cfg["lambda_clip"],
        lambda_mask=cfg["lambda_mask"],
        theta=cfg["theta"],
        consistency=cfg["consistency"],
    )
    result = rank(candidates, reference, text_vec, weights)
    rows = [
        [pos, idx, result.totals[idx], result.s_clip[idx], result.s_mask[idx]]
        for pos, idx in enumerate(result.order)
    ]
    fallback = [i for i, used in enumerate(result.fallback_used) if used]
    _write_csv(
        out / "rank.csv",
        [
            f"salgraph compose rank, candidates={len(candidates)}",
            f"score = lambda_clip*s_clip + lambda_mask*s_mask "
            f"(lambda_clip={_format_value(weights.lambda_clip)}, "
            f"lambda_mask={_format_value(weights.lambda_mask)}, "
            f"theta={_format_value(weights.theta)}, consistency={weights.consistency})",
            "s_mask via spectral-residual fallback for candidates: "
            + (" ".join(str(i) for i in fallback) if fallback else "none"),
        ],
        ["rank", "index", "total", "s_clip", "s_mask"],
        rows,
    )
    best = result.order[0]
    print(f"best candidate: index {best} (total {result.totals[best]:.4f}) -> {out / 'rank.csv'}")
    return 0


def cmd_cues_fit(args, cfg) -> int:
    out = _prepare_out(args, cfg)
    entries = load_manifest(args.manifest)
    rows = [e for e in entries if e.caption_path is not None]
    if not rows:
        raise DataError("manifest has no caption-vector columns to fit against")
    pooled = np.stack([pool(read_array(e.emb_path)) for e in rows])
    targets = np.stack([read_array(e.caption_path).astype(np.float64).ravel() for e in rows])
    projection = fit_projection(pooled, targets, cfg["ridge_lambda"])
    write_array(out / "projection.npy", projection.weight)
    (out / "projection.meta").write_text(
        "\n".join(
            [
                f"ridge_lambda = {_FLOAT_FMT % projection.ridge_lambda}",
                f"n_samples = {projection.n_samples}",
                f"residual_rms = {_FLOAT_FMT % projection.residual_rms}",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    print(
        f"fit projection on {projection.n_samples} samples "
        f"(lambda {projection.ridge_lambda:g}, residual RMS {projection.residual_rms:.6g})"
    )
    return 0


def cmd_cues_extract(args, cfg) -> int:
    out = _prepare_out(args, cfg)
    weight = read_array(args.projection).astype(np.float64)
    projection = ProjectionMap(
        weight=weight, ridge_lambda=float("nan"), n_samples=0, residual_rms=float("nan")
    )
    vocab = load_vocabulary(args.vocab_terms, args.vocab_vecs)
    emb = read_array(args.emb)
    cues = extract_cues(emb, projection, vocab, cfg["cue_count"])
    prompt = assemble_prompt(cues)
    _write_csv(
        out / "cues.csv",
        [],
        ["rank", "term", "cosine"],
        [[i, term, float(sim)] for i, (term, sim) in enumerate(cues)],
    )
    (out / "prompt.txt").write_text(prompt + "\n", encoding="utf-8")
    for i, (term, sim) in enumerate(cues):
        print(f"{i}: {term} ({sim:.4f})")
    print(f"prompt: {prompt}")
    return 0


# ---------------------------------------------------------------------------
# Wiring


def _add_common(parser, out_required=True):
    parser.add_argument("--config", help="flat key = value settings file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    if out_required:
        parser.add_argument("--out", required=True, help="output directory")


def build_parser() -> _Parser:
    parser = _Parser(prog="salgraph", description=__doc__)
    parser.add_argument("--version", action="store_true", help="print versions and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("graph", parents=[], help="dump the token graph edge list")
    _add_common(p)
    p.add_argument("--emb", required=True)
    p.add_argument("--use-semantic", dest="use_semantic", action="store_const", const=True)
    p.add_argument("--knn-k", dest="knn_k", type=int, default=None)
    p.add_argument(
        "--no-cls", dest="connect_cls", action="store_const", const=False, default=None
    )
    p.set_defaults(handler=cmd_graph, use_semantic=None)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--variant", choices=VARIANTS, default=None)
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("train", help="train a saliency detector from a manifest")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--variant", choices=VARIANTS, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--val-fraction", dest="val_fraction", type=float, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("infer", help="predict a saliency map for one embedding")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--out-height", dest="out_height", type=int, default=None)
    p.add_argument("--out-width", dest="out_width", type=int, default=None)
    p.set_defaults(handler=cmd_infer)

    p = sub.add_parser("sal-eval", help="saliency metrics over a manifest split")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="all")
    p.set_defaults(handler=cmd_sal_eval)

    p = sub.add_parser("recon-eval", help="reconstruction metrics over image pairs")
    _add_common(p)
    p.add_argument("--pairs", required=True, help="manifest of recon<TAB>target image paths")
    p.add_argument(
        "--features",
        action="append",
        help="NAME=recon.npy:target.npy feature files for two-way identification",
    )
    p.set_defaults(handler=cmd_recon_eval)

    comp = sub.add_parser("compose", help="saliency-guided composition tools")
    csub = comp.add_subparsers(dest="compose_command")

    p = csub.add_parser("blend", help="fuse foreground/background through a map")
    _add_common(p)
    p.add_argument("--fg", required=True)
    p.add_argument("--bg", required=True)
    p.add_argument("--saliency", required=True)
    p.set_defaults(handler=cmd_compose_blend)

    p = csub.add_parser("inpaint-mask", help="export the repaint region as PGM")
    _add_common(p)
    p.add_argument("--saliency", required=True)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--dilate-radius", dest="dilate_radius", type=int, default=None)
    p.set_defaults(handler=cmd_compose_inpaint)

    p = csub.add_parser("rank", help="score and order candidate reconstructions")
    _add_common(p)
    p.add_argument("--manifest", required=True, help="image<TAB>clipvec[<TAB>mask] lines")
    p.add_argument("--saliency", required=True, help="reference saliency PGM")
    p.add_argument("--text-vec", dest="text_vec", required=True)
    p.add_argument("--lambda-clip", dest="lambda_clip", type=float, default=None)
    p.add_argument("--lambda-mask", dest="lambda_mask", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--consistency", choices=("iou", "dice"), default=None)
    p.set_defaults(handler=cmd_compose_rank)

    cues = sub.add_parser("text-cues", help="text-aligned cue extraction")
    qsub = cues.add_subparsers(dest="cues_command")

    p = qsub.add_parser("fit", help="fit the embedding-to-text projection")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--ridge-lambda", dest="ridge_lambda", type=float, default=None)
    p.set_defaults(handler=cmd_cues_fit)

    p = qsub.add_parser("extract", help="retrieve vocabulary cues for one embedding")
    _add_common(p)
    p.add_argument("--projection", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--vocab-terms", dest="vocab_terms", required=True)
    p.add_argument("--vocab-vecs", dest="vocab_vecs", required=True)
    p.add_argument("--cue-count", dest="cue_count", type=int, default=None)
    p.set_defaults(handler=cmd_cues_extract)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.version:
            print(
                f"salgraph {__version__} "
                f"(checkpoint format {CHECKPOINT_VERSION}, arrays NPY v1.0, images PGM/PPM)"
            )
            return 0
        handler = getattr(args, "handler", None)
        if handler is None:
            parser.print_usage(sys.stderr)
            print("error: missing subcommand", file=sys.stderr)
            return 1
        cfg = resolve_config(args)
        return handler(args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
