"""Deterministic k-means codebook reducer, used as oracle and fallback for the adapter."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch
from scipy.cluster.vq import vq

from holocodec.config import ADAPTER_MIN_FRACTION
from holocodec.errors import RangeError
from holocodec.utils import is_power_of_two
from holocodec.vq.codebook import Codebook, save_codebooks

logger = logging.getLogger("holocodec")

KMEANS_MAX_ITER = 100


def _farthest_point_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    min_dist = ((points - points[chosen[0]]) ** 2).sum(1)
    taken = np.zeros(n, dtype=bool)
    taken[chosen[0]] = True
    while len(chosen) < k:
        if min_dist.max() > 0:
            nxt = int(np.argmax(min_dist))
        else:
            # only duplicates left: take the lowest unused index
            nxt = int(np.flatnonzero(~taken)[0])
        chosen.append(nxt)
        taken[nxt] = True
        min_dist = np.minimum(min_dist, ((points - points[nxt]) ** 2).sum(1))
    return points[chosen].copy()


def kmeans(points: np.ndarray, k: int, seed: int = 0, max_iter: int = KMEANS_MAX_ITER) -> tuple[np.ndarray, list[float]]:
    """Lloyd iterations from a seeded farthest-point start.

    Returns the centroids and the within-cluster SSE after every assignment step.
    Empty clusters keep their previous centroid, so the SSE never increases.
    """
    pts = np.asarray(points, dtype=np.float64)
    if not 1 <= k <= pts.shape[0]:
        raise RangeError(f"k must lie in [1, {pts.shape[0]}], got {k}")
    rng = np.random.default_rng(seed)
    centroids = _farthest_point_init(pts, k, rng)
    trace: list[float] = []
    for _ in range(max_iter):
        codes, dists = vq(pts, centroids, check_finite=False)
        trace.append(float((dists**2).sum()))
        updated = centroids.copy()
        for j in range(k):
            members = pts[codes == j]
            if len(members):
                updated[j] = members.mean(axis=0)
        if np.array_equal(updated, centroids):
            break
        centroids = updated
    else:
        _, dists = vq(pts, centroids, check_finite=False)
        trace.append(float((dists**2).sum()))
    return centroids, trace


def cluster_reduce(book: Codebook, target: int, seed: int = 0, max_iter: int = KMEANS_MAX_ITER) -> Codebook:
    """Reduce *book* to *target* codevectors by k-means over its vectors."""
    if not 1 <= target <= book.size:
        raise RangeError(f"target size must lie in [1, {book.size}], got {target}")
    centroids, trace = kmeans(book.vectors.detach().cpu().numpy(), target, seed=seed, max_iter=max_iter)
    logger.debug("cluster_reduce %d -> %d: SSE %.4g after %d iterations", book.size, target, trace[-1], len(trace))
    vectors = torch.from_numpy(centroids).to(book.vectors.dtype)
    return Codebook.from_vectors(vectors, decay=book.decay, laplace_eps=book.laplace_eps, channel=book.channel)


def export_cluster_books(
    books: tuple[Codebook, Codebook],
    channel: int,
    out_dir: str | Path,
    seed: int = 0,
    min_fraction: int = ADAPTER_MIN_FRACTION,
) -> list[Path]:
    """k-means counterpart of export_books: books/<channel>/<K>.rvqc for power-of-two K in [K/8, K]."""
    bottom, top = books
    paths = []
    for k in range(max(1, bottom.size // min_fraction), bottom.size + 1):
        if not is_power_of_two(k):
            continue
        k_top = max(1, k * top.size // bottom.size)
        pair = [cluster_reduce(bottom, k, seed), cluster_reduce(top, k_top, seed)]
        paths.append(save_codebooks(Path(out_dir) / str(channel) / f"{k}.rvqc", pair, channel=channel))
    logger.info("Exported %d k-means codebook pair(s) for channel %d to %s", len(paths), channel, out_dir)
    return paths
