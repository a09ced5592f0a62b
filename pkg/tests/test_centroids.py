from __future__ import annotations

import numpy as np
import torch

from sanac.model.codec import SourceAwareCodec
from sanac.quantizer.vq import QuantMode
from sanac.services.centroids import (
    collect_code_vectors,
    inertia,
    init_centroids,
    kmeans_centroids,
    resolve_collisions,
)


def _sorted_rows(a: np.ndarray) -> np.ndarray:
    return a[np.lexsort(a.T[::-1])]


def test_exactly_m_distinct_vectors_become_the_centroids(rng):
    distinct = rng.standard_normal((4, 3))
    vectors = np.repeat(distinct, 25, axis=0)
    centroids = kmeans_centroids(vectors, 4, iters=20, rng=rng)
    np.testing.assert_allclose(
        _sorted_rows(centroids), _sorted_rows(distinct.astype(np.float32)), atol=1e-6
    )


def test_identical_vectors_give_jittered_distinct_copies(rng):
    vectors = np.ones((50, 2))
    centroids = kmeans_centroids(vectors, 8, iters=5, rng=rng)
    assert centroids.shape == (8, 2)
    assert len({row.tobytes() for row in centroids}) == 8
    np.testing.assert_allclose(centroids, 1.0, atol=1e-4)


def test_kmeans_beats_random_subset_init(rng):
    vectors = np.concatenate(
        [rng.normal(loc, 0.1, size=(200, 2)) for loc in ((0, 0), (3, 0), (0, 3), (3, 3))]
    )
    centroids = kmeans_centroids(vectors, 4, iters=20, rng=rng)
    random_subset = vectors[rng.choice(len(vectors), 4, replace=False)]
    assert inertia(vectors, centroids) <= inertia(vectors, random_subset)


def test_resolve_collisions_separates_duplicates(rng):
    books = np.array([[0.5, 0.5], [0.5, 0.5], [1.0, 0.0]])
    out = resolve_collisions(books, rng)
    assert out.dtype == np.float32
    assert len({row.tobytes() for row in out}) == 3
    np.testing.assert_array_equal(out[0], books[0].astype(np.float32))


def test_init_centroids_loads_every_codebook(tiny_cfg, rng):
    torch.manual_seed(0)
    codec = SourceAwareCodec(tiny_cfg)
    frames = torch.randn(20, tiny_cfg.frame_size)
    vectors = collect_code_vectors(codec, frames)
    assert len(vectors) == 2
    assert vectors[0].shape == (20 * tiny_cfg.code_length, tiny_cfg.vq_dim)

    books = init_centroids(codec, frames, iters=5, rng=rng)
    assert books.shape == (2, tiny_cfg.num_centroids, tiny_cfg.vq_dim)
    assert bool(codec.quantizer.initialized)
    assert codec.quantizer.mode is QuantMode.soft
    np.testing.assert_array_equal(codec.quantizer.centroids.detach().numpy(), books)
