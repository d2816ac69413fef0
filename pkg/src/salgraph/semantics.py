"""Text-aligned cue extraction from pooled embedding tensors.

A linear map, fit by closed-form ridge regression against externally supplied
caption vectors, projects the token mean of an embedding tensor into the
text-vector space. Cues are then retrieved as the nearest vocabulary terms by
cosine similarity. No text encoder runs here: vocabulary vectors and caption
targets arrive as array files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .arrayio import read_array
from .errors import DataError

DEFAULT_RIDGE_LAMBDA = 1e3


@dataclass
class ProjectionMap:
    weight: np.ndarray  # (emb_dim, text_dim)
    ridge_lambda: float
    n_samples: int
    residual_rms: float


@dataclass
class Vocabulary:
    terms: list[str]
    vectors: np.ndarray  # (|V|, text_dim), rows L2-normalized at load


def pool(embedding: np.ndarray) -> np.ndarray:
    """Arithmetic mean over all token rows (float64 accumulation)."""
    e = np.asarray(embedding)
    if e.ndim != 2:
        raise ValueError(f"embedding tensor must be 2-d, got shape {e.shape}")
    return e.mean(axis=0, dtype=np.float64)


def fit_projection(pooled: np.ndarray, targets: np.ndarray, ridge_lambda: float) -> ProjectionMap:
    """Solve (X'X + lambda I) W = X'Y by Cholesky factorization.

    ``pooled`` is (n, emb_dim), ``targets`` (n, text_dim). Reports the RMS of
    the training residual X W - Y.
    """
    x = np.asarray(pooled, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError(f"incompatible design/target shapes {x.shape} vs {y.shape}")
    if x.shape[0] < 1:
        raise ValueError("need at least one sample")
    if ridge_lambda < 0:
        raise ValueError("ridge lambda must be >= 0")
    gram = x.T @ x + ridge_lambda * np.eye(x.shape[1])
    try:
        factor = cho_factor(gram)
    except LinAlgError as exc:
        raise ValueError(
            f"normal equations are singular at lambda={ridge_lambda}; increase lambda"
        ) from exc
    w = cho_solve(factor, x.T @ y)
    residual = x @ w - y
    return ProjectionMap(
        weight=w,
        ridge_lambda=float(ridge_lambda),
        n_samples=x.shape[0],
        residual_rms=float(np.sqrt(np.mean(residual * residual))),
    )


def project(embedding: np.ndarray, projection: ProjectionMap) -> np.ndarray:
    """Text-space vector for one embedding tensor."""
    return pool(embedding) @ projection.weight


def load_vocabulary(terms_path: str | Path, vectors_path: str | Path) -> Vocabulary:
    terms = [
        line.strip()
        for line in Path(terms_path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    vectors = np.asarray(read_array(vectors_path), dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] != len(terms):
        raise DataError(
            f"vocabulary mismatch: {len(terms)} terms but vector array of shape {vectors.shape}"
        )
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0):
        raise DataError(f"{vectors_path}: vocabulary contains zero vectors")
    return Vocabulary(terms=terms, vectors=vectors / norms[:, None])


def extract_cues(
    embedding: np.ndarray,
    projection: ProjectionMap,
    vocabulary: Vocabulary,
    k: int,
) -> list[tuple[str, float]]:
    """Top-k vocabulary terms by cosine similarity to the projected embedding.

    Descending similarity, ties broken toward the lower vocabulary index.
    """
    if not 1 <= k <= len(vocabulary.terms):
        raise ValueError(f"k must lie in [1, {len(vocabulary.terms)}], got {k}")
    t = project(embedding, projection)
    norm = np.linalg.norm(t)
    if norm == 0:
        raise ValueError("projected embedding is the zero vector; no cosine ranking exists")
    sims = vocabulary.vectors @ (t / norm)
    order = np.argsort(-sims, kind="stable")[:k]
    return [(vocabulary.terms[i], float(sims[i])) for i in order]


def assemble_prompt(cues: list[tuple[str, float]] | list[str]) -> str:
    """Join ranked cue terms into the conditioning prompt string."""
    if not cues:
        raise ValueError("cannot assemble a prompt from zero cues")
    terms = [c[0] if isinstance(c, tuple) else c for c in cues]
    return "a photo of " + ", ".join(terms)
