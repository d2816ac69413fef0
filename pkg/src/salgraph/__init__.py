"""Saliency prediction from vision-embedding token grids.

A numpy/scipy library that models embedding tokens as a graph, trains graph
saliency detectors on them with hand-written gradients, rasterizes node
scores into dense maps, extracts text-aligned cues from pooled embeddings,
composes and ranks candidate images against those priors, and evaluates both
saliency and reconstruction quality. Heavy pretrained models stay outside:
embeddings, candidate images, feature vectors, and pseudo-ground-truth masks
all arrive as files.
"""

__version__ = "0.1.0"

from .arrayio import (
    ManifestEntry,
    load_manifest,
    read_array,
    read_image,
    read_mask,
    write_array,
    write_image,
    write_manifest,
    write_mask,
)
from .compose import (
    Candidate,
    RankResult,
    RankWeights,
    dice,
    export_inpaint_mask,
    fallback_saliency,
    iou,
    mask_blend,
    rank,
)
from .errors import DataError
from .gnn import (
    VARIANTS,
    SaliencyModel,
    backward,
    forward,
    grad_check,
    init_model,
)
from .graph import GraphConfig, TokenGraph, build_token_graph, cosine_knn
from .losses import LossValue, total_loss, wbce, weight_map, wiou
from .metrics import (
    ReconReport,
    SaliencyReport,
    correlation_distance,
    e_max,
    f_max,
    fbw,
    mae,
    pearson,
    pixcorr,
    saliency_report,
    ssim,
    two_way_identification,
)
from .saliency import bilinear_resize, binarize, dilate, rasterize, rasterize_vjp
from .semantics import (
    ProjectionMap,
    Vocabulary,
    assemble_prompt,
    extract_cues,
    fit_projection,
    load_vocabulary,
    pool,
    project,
)
from .synthetic import make_disc_dataset
from .train import (
    AdamState,
    Checkpoint,
    TrainConfig,
    adam_step,
    init_adam,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
    train,
    train_on_arrays,
)
