"""Overfit a small detector on the synthetic disc set and watch the loss.

Uses a reduced hidden width so the whole run takes a few seconds; the
full-size configuration is exercised by the acceptance suite instead.
"""

from pathlib import Path

import numpy as np

from salgraph import (
    GraphConfig,
    TrainConfig,
    build_token_graph,
    forward,
    make_disc_dataset,
    model_from_checkpoint,
    rasterize,
    saliency_report,
    train_on_arrays,
    write_mask,
)

out_dir = Path("demo_out")
out_dir.mkdir(exist_ok=True)

embeddings, masks, _ = make_disc_dataset(n_samples=8, seed=1)
cfg = TrainConfig(variant="sage", hidden=32, epochs=60, seed=1, val_fraction=0.0, patience=1000)
print(f"training {cfg.variant} (hidden {cfg.hidden}) on {len(embeddings)} disc samples ...")
checkpoint, history = train_on_arrays(list(embeddings), list(masks), cfg)

for h in history[:: max(1, len(history) // 8)]:
    print(f"  epoch {h['epoch']:3d}  loss {h['train_loss']:.4f}  F-max {h['val_fmax']:.4f}")
print(f"best F-max {checkpoint.best_val_fmax:.4f} at epoch {checkpoint.epoch}")

# render the trained prediction for the first sample next to its target
model = model_from_checkpoint(checkpoint)
graph = build_token_graph(embeddings[0], GraphConfig())
logits, _ = forward(model, graph, embeddings[0])
smap = rasterize(logits, 64, 64).astype(np.float64)
report = saliency_report(smap, masks[0].astype(np.float64))
print(f"sample 0: MAE {report.mae:.4f}  F-max {report.f_max:.4f}  "
      f"E-max {report.e_max:.4f}  Fbw {report.fbw:.4f}")
print("(threshold metrics converge first; MAE/Fbw keep improving as the "
      "scores saturate toward 0/1 with longer training)")

write_mask(out_dir / "trained_saliency.pgm", smap)
write_mask(out_dir / "trained_target.pgm", masks[0].astype(np.float64))
print(f"wrote {out_dir}/trained_saliency.pgm (compare with trained_target.pgm)")
