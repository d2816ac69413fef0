"""From an embedding tensor to a saliency map, step by step.

Builds a synthetic embedding whose patch tokens carry a disc signature,
wires the token graph, runs an untrained network, rasterizes the node
scores, and writes the map as a PGM you can open with any image viewer.
"""

from pathlib import Path

import numpy as np

from salgraph import (
    GraphConfig,
    build_token_graph,
    forward,
    init_model,
    make_disc_dataset,
    rasterize,
    write_mask,
)

out_dir = Path("demo_out")
out_dir.mkdir(exist_ok=True)

embeddings, masks, discs = make_disc_dataset(n_samples=1, seed=42)
emb = embeddings[0]
cy, cx, radius = discs[0]
print(f"one sample: {emb.shape[0]} tokens x {emb.shape[1]} channels")
print(f"hidden disc: center=({cy:.1f}, {cx:.1f}) radius={radius:.1f} patches")

# the token graph: 16x16 spatial 8-neighborhood + global-token hub
graph = build_token_graph(emb, GraphConfig(use_semantic=False, connect_cls=True))
print(f"\ngraph: {graph.n_nodes} nodes, {len(graph.edges)} undirected edges")
print(f"degrees: corner patch {graph.degrees[1]}, interior patch {graph.degrees[1 + 16 * 8 + 8]},"
      f" global token {graph.degrees[0]}")

# adding semantic k-NN edges densifies the graph
semantic = build_token_graph(emb, GraphConfig(use_semantic=True, k=8))
print(f"with semantic 8-NN union: {len(semantic.edges)} edges")

# an untrained network produces a map centered on 0.5
model = init_model("sage", seed=0)
logits, _ = forward(model, graph, emb)
smap = rasterize(logits, 256, 256)
print(f"\nuntrained map: min {smap.min():.3f}  max {smap.max():.3f} (near 0.5 everywhere)")

write_mask(out_dir / "untrained_saliency.pgm", smap.astype(np.float64))
write_mask(out_dir / "target_mask.pgm", masks[0].astype(np.float64))
print(f"wrote {out_dir}/untrained_saliency.pgm and {out_dir}/target_mask.pgm")
print("next: demos/02_train_on_discs.py trains this model until the disc appears")
