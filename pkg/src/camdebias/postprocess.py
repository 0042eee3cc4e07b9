"""Feature and ranking postprocessors: alpha query expansion, database-side
augmentation, and k-reciprocal re-ranking.

All top-k selections break ties by ascending index. Expanded features are
returned unit-norm. Re-ranked output blends the original query-gallery cosine
distance with a Jaccard distance over Gaussian-weighted reciprocal-neighbor
membership vectors; lambda = 1 returns the original distances exactly.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import errors
from .store import EmbeddingSet, row_l2_normalize

MATRIX_MAGIC = b"RMTX"


@dataclass(frozen=True)
class RerankParams:
    k1: int = 20
    k2: int = 6
    lam: float = 0.3

    def __post_init__(self):
        if not (self.k1 >= self.k2 >= 1):
            raise errors.InvalidParams("need k1 >= k2 >= 1")
        if not 0.0 <= self.lam <= 1.0:
            raise errors.InvalidParams("lambda must lie in [0, 1]")


def save_distance_matrix(matrix: np.ndarray, path) -> None:
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    try:
        with open(path, "wb") as f:
            f.write(MATRIX_MAGIC)
            f.write(struct.pack("<II", matrix.shape[0], matrix.shape[1]))
            f.write(matrix.tobytes())
    except OSError as e:
        raise errors.IoError(str(e)) from e


def load_distance_matrix(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MATRIX_MAGIC:
        raise errors.BadMagic(f"{path}: bad magic {data[:4]!r}")
    rows, cols = struct.unpack_from("<II", data, 4)
    if len(data) < 12 + 4 * rows * cols:
        raise errors.TruncatedFile(str(path))
    return np.frombuffer(data, dtype="<f4", count=rows * cols,
                         offset=12).reshape(rows, cols).astype(np.float64)


def _top_k_by_similarity(sim_row: np.ndarray, k: int) -> np.ndarray:
    # lexsort: descending similarity, ascending index on ties
    order = np.lexsort((np.arange(sim_row.size), -sim_row))
    return order[:k]


def _expand(targets: np.ndarray, pool: np.ndarray, k: int, alpha: float,
            exclude_self: bool = False) -> np.ndarray:
    out = np.empty_like(targets)
    sims = targets @ pool.T
    k = min(k, pool.shape[0] - (1 if exclude_self else 0))
    for i in range(targets.shape[0]):
        row = sims[i].copy()
        if exclude_self:
            row[i] = -np.inf
        top = _top_k_by_similarity(row, k)
        weights = np.power(np.maximum(row[top], 0.0), alpha)
        agg = targets[i] + weights @ pool[top]
        norm = np.linalg.norm(agg)
        out[i] = targets[i] if norm == 0.0 else agg / norm
    return out


def aqe(query: EmbeddingSet, gallery: EmbeddingSet, k: int = 10,
        alpha: float = 3.0) -> EmbeddingSet:
    """Alpha query expansion: each query becomes the L2-normalized sum of
    itself (weight 1) and its top-k gallery neighbors weighted max(sim,0)^a."""
    if k < 1:
        raise errors.InvalidParams("k must be >= 1")
    if alpha < 0:
        raise errors.InvalidParams("alpha must be >= 0")
    if gallery.n_samples == 0:
        raise errors.EmptyGallery("gallery is empty")
    qf = row_l2_normalize(query).features.astype(np.float64)
    gf = row_l2_normalize(gallery).features.astype(np.float64)
    expanded = _expand(qf, gf, k, alpha)
    return query.with_features(expanded.astype(np.float32))


def dba(gallery: EmbeddingSet, k: int = 10, alpha: float = 3.0) -> EmbeddingSet:
    """Database-side augmentation: same expansion over each gallery item's
    top-k neighbors within the gallery, excluding itself."""
    if k < 1:
        raise errors.InvalidParams("k must be >= 1")
    if alpha < 0:
        raise errors.InvalidParams("alpha must be >= 0")
    if gallery.n_samples <= k:
        raise errors.GalleryTooSmall(f"need more than k={k} gallery items")
    gf = row_l2_normalize(gallery).features.astype(np.float64)
    expanded = _expand(gf, gf, k, alpha, exclude_self=True)
    return gallery.with_features(expanded.astype(np.float32))


def _reciprocal_neighbors(initial_rank: np.ndarray, i: int, k: int) -> np.ndarray:
    forward = initial_rank[i, :k + 1]
    backward = initial_rank[forward, :k + 1]
    return forward[np.any(backward == i, axis=1)]


def k_reciprocal_rerank(query: EmbeddingSet, gallery: EmbeddingSet,
                        params: RerankParams = RerankParams()) -> np.ndarray:
    """Re-ranked N_q x N_g distance matrix (Jaccard over reciprocal-neighbor
    membership vectors, blended with the original cosine distance)."""
    if gallery.n_samples <= params.k1:
        raise errors.GalleryTooSmall(
            f"need more than k1={params.k1} gallery items")
    qf = row_l2_normalize(query).features.astype(np.float64)
    gf = row_l2_normalize(gallery).features.astype(np.float64)
    n_q, n_g = qf.shape[0], gf.shape[0]
    feats = np.vstack([qf, gf])
    n_all = n_q + n_g
    original = 1.0 - feats @ feats.T
    original = (original + original.T) / 2.0
    np.fill_diagonal(original, 0.0)
    orig_qg = original[:n_q, n_q:].copy()
    if params.lam == 1.0:
        return orig_qg

    # ties broken by index: lexsort over (index, distance)
    idx = np.arange(n_all)
    initial_rank = np.vstack([np.lexsort((idx, original[i]))
                              for i in range(n_all)])

    v = np.zeros((n_all, n_all), dtype=np.float64)
    half_k1 = int(round(params.k1 / 2))
    for i in range(n_all):
        recip = _reciprocal_neighbors(initial_rank, i, params.k1)
        expansion = list(recip)
        for cand in recip:
            cand_recip = _reciprocal_neighbors(initial_rank, int(cand), half_k1)
            if np.intersect1d(cand_recip, recip).size > 2 / 3 * cand_recip.size:
                expansion.extend(cand_recip.tolist())
        members = np.unique(np.asarray(expansion, dtype=np.int64))
        weights = np.exp(-original[i, members])
        v[i, members] = weights / weights.sum()

    if params.k2 > 1:
        v = np.vstack([v[initial_rank[i, :params.k2]].mean(axis=0)
                       for i in range(n_all)])

    inv_index = [np.where(v[:, j] != 0)[0] for j in range(n_all)]
    jaccard = np.ones((n_q, n_g), dtype=np.float64)
    for qi in range(n_q):
        min_sum = np.zeros(n_all, dtype=np.float64)
        nonzero = np.where(v[qi] != 0)[0]
        for j in nonzero:
            rows = inv_index[j]
            min_sum[rows] += np.minimum(v[qi, j], v[rows, j])
        # |A u B| = |A| + |B| - |A n B|; membership vectors sum to 1
        jaccard[qi] = 1.0 - min_sum[n_q:] / (2.0 - min_sum[n_q:])
    return params.lam * orig_qg + (1.0 - params.lam) * jaccard
