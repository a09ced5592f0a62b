from __future__ import annotations

import logging
import warnings

import numpy as np
import torch
from scipy.cluster import vq

from sanac.model.codec import BaselineCodec, SourceAwareCodec
from sanac.quantizer.vq import QuantMode

logger = logging.getLogger(__name__)


def jitter_scale(vectors: np.ndarray) -> float:
    return 1e-5 * max(1.0, float(np.max(np.abs(vectors))) if vectors.size else 1.0)


def resolve_collisions(centroids: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Jitter any centroid bit-identical (at float32) to an earlier one until all rows differ."""
    centroids = np.array(centroids, dtype=np.float32, copy=True)
    scale = jitter_scale(centroids)
    seen: set[bytes] = set()
    for i in range(centroids.shape[0]):
        while centroids[i].tobytes() in seen:
            centroids[i] = centroids[i] + rng.uniform(-scale, scale, size=centroids.shape[1])
        seen.add(centroids[i].tobytes())
    return centroids


def kmeans_centroids(
    vectors: np.ndarray, num_centroids: int, *, iters: int, rng: np.random.Generator
) -> np.ndarray:
    """k-means++ seeded Lloyd iterations; with too few distinct vectors, fill by jittered copies."""
    vectors = np.asarray(vectors, dtype=np.float64)
    unique = np.unique(vectors, axis=0)
    if unique.shape[0] <= num_centroids:
        if unique.shape[0] < num_centroids:
            logger.warning(
                f"Only {unique.shape[0]} distinct code vectors for {num_centroids} centroids; "
                "filling with jittered duplicates"
            )
        fill = unique[np.arange(num_centroids - unique.shape[0]) % unique.shape[0]]
        return resolve_collisions(np.concatenate([unique, fill]), rng)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        centroids, _ = vq.kmeans2(vectors, num_centroids, iter=iters, minit="++", seed=rng)
    for w in caught:
        logger.warning(f"k-means: {w.message}")
    return resolve_collisions(centroids, rng)


def inertia(vectors: np.ndarray, centroids: np.ndarray) -> float:
    """Sum of squared distances of each vector to its nearest centroid."""
    _, dist = vq.vq(np.asarray(vectors, dtype=np.float64), np.asarray(centroids, dtype=np.float64))
    return float(np.sum(dist**2))


@torch.no_grad()
def collect_code_vectors(
    codec: SourceAwareCodec | BaselineCodec, frames: torch.Tensor, *, batch_size: int = 256
) -> list[np.ndarray]:
    """Per codebook, every L-dim code column produced by the encoder: (n * P, L)."""
    per_source: list[list[np.ndarray]] = [[] for _ in range(codec.num_codebooks)]
    for start in range(0, frames.shape[0], batch_size):
        codes = codec.split(codec.encode(frames[start : start + batch_size]))
        for k, code in enumerate(codes):
            vectors = code.transpose(-1, -2).reshape(-1, code.shape[-2])
            per_source[k].append(vectors.double().numpy())
    return [np.concatenate(chunks) for chunks in per_source]


def init_centroids(
    codec: SourceAwareCodec | BaselineCodec,
    frames: torch.Tensor,
    *,
    iters: int = 20,
    rng: np.random.Generator,
) -> np.ndarray:
    """Fit every codebook to the stage-1 encoder's code distribution and switch on soft VQ.

    Returns the (K, M, L) centroid array loaded into the codec.
    """
    was_training = codec.training
    codec.eval()
    vectors = collect_code_vectors(codec, frames)
    codec.train(was_training)

    m = codec.quantizer.num_centroids
    books = np.stack([kmeans_centroids(v, m, iters=iters, rng=rng) for v in vectors])
    codec.quantizer.load_centroids(books)
    codec.quantizer.set_mode(QuantMode.soft)
    logger.info(
        f"Initialised {books.shape[0]} codebooks of {m} centroids from {frames.shape[0]} frames"
    )
    return books
