"""Feature-space diagnostics: identity-camera mean representations,
displacement vectors between cameras, average displacement similarity, and
level-wise transformation-displacement metrics.

A displacement vector is the difference of an identity's mean feature between
two cameras, or of a row-aligned sample's feature between consecutive
transformation levels. Cosine similarities of bitwise-identical vectors are
reported as exactly 1.0; zero-norm vectors are skipped and counted.
"""

from dataclasses import dataclass
from itertools import combinations, permutations

import numpy as np

from . import errors
from .store import EmbeddingSet


@dataclass(frozen=True)
class IdentityCameraMeans:
    means: dict   # (identity, camera) -> float64 D-vector
    counts: dict  # (identity, camera) -> int


@dataclass(frozen=True)
class DisplacementSimilarity:
    value: float | None  # None when every pair was skipped
    n_pairs: int
    n_skipped: int


def identity_camera_means(es: EmbeddingSet) -> IdentityCameraMeans:
    if es.identity_labels is None:
        raise errors.MissingIdentityLabels("identity labels required")
    feats = es.features.astype(np.float64)
    means, counts = {}, {}
    keys = np.stack([es.identity_labels, es.camera_labels], axis=1)
    for ident, cam in np.unique(keys, axis=0):
        mask = (es.identity_labels == ident) & (es.camera_labels == cam)
        means[(int(ident), int(cam))] = feats[mask].mean(axis=0)
        counts[(int(ident), int(cam))] = int(mask.sum())
    return IdentityCameraMeans(means, counts)


def displacement_vectors(means: IdentityCameraMeans, cam_from: int,
                         cam_to: int) -> dict:
    """identity -> mean(cam_to) - mean(cam_from), identities in both cameras."""
    cams = {cam for _, cam in means.means}
    if cam_from not in cams:
        raise errors.UnknownCamera(f"camera {cam_from} not present")
    if cam_to not in cams:
        raise errors.UnknownCamera(f"camera {cam_to} not present")
    out = {}
    for (ident, cam), vec in means.means.items():
        if cam == cam_from and (ident, cam_to) in means.means:
            out[ident] = means.means[(ident, cam_to)] - vec
    return out


def _pairwise_mean_cosine(vectors: np.ndarray):
    """Mean cosine similarity over unordered row pairs; returns
    (sum_of_similarities, n_pairs_used, n_pairs_skipped)."""
    n = vectors.shape[0]
    norms = np.linalg.norm(vectors, axis=1)
    ok = norms > 0.0
    unit = np.zeros_like(vectors)
    unit[ok] = vectors[ok] / norms[ok, None]
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    # bitwise-equal rows are exactly parallel; force their similarity to 1
    _, inverse = np.unique(vectors, axis=0, return_inverse=True)
    same = inverse[:, None] == inverse[None, :]
    sims[same] = 1.0
    total, used, skipped = 0.0, 0, 0
    for i, j in combinations(range(n), 2):
        if ok[i] and ok[j]:
            total += sims[i, j]
            used += 1
        else:
            skipped += 1
    return total, used, skipped


def mean_displacement_similarity(es: EmbeddingSet,
                                 dims=None) -> DisplacementSimilarity:
    """Average, over ordered camera pairs, of the mean cosine similarity
    between the displacement vectors of distinct identity pairs; optionally
    restricted to the given dimensions."""
    cams = np.unique(es.camera_labels)
    if cams.size < 2:
        raise errors.SingleCamera("need >= 2 cameras")
    # a full-range restriction must equal the unrestricted computation
    # bit-exactly, so both paths share one code path
    if dims is None:
        dims = np.arange(es.dim)
    else:
        dims = np.asarray(dims, dtype=np.int64).reshape(-1)
        if dims.size and (dims.min() < 0 or dims.max() >= es.dim):
            raise errors.DimOutOfRange(f"dims must lie in 0..{es.dim - 1}")
    means = identity_camera_means(es)
    per_pair_values = []
    n_pairs = n_skipped = 0
    for p, q in permutations(cams.tolist(), 2):
        disp = displacement_vectors(means, int(p), int(q))
        if len(disp) < 2:
            continue
        mat = np.stack([disp[i] for i in sorted(disp)])[:, dims]
        total, used, skipped = _pairwise_mean_cosine(mat)
        n_pairs += used
        n_skipped += skipped
        if used:
            per_pair_values.append(total / used)
    if not per_pair_values:
        if n_pairs == 0 and n_skipped == 0:
            raise errors.InsufficientOverlap(
                "no camera pair shares >= 2 identities")
        return DisplacementSimilarity(None, 0, n_skipped)
    return DisplacementSimilarity(float(np.mean(per_pair_values)),
                                  n_pairs, n_skipped)


@dataclass(frozen=True)
class LevelFeatureSeries:
    """Row-aligned feature sets at increasing transformation strength;
    level 0 holds the untransformed features."""

    levels: tuple

    def __post_init__(self):
        levels = tuple(self.levels)
        if len(levels) < 2:
            raise errors.TooFewLevels("need >= 2 levels")
        n, d = levels[0].n_samples, levels[0].dim
        for lv in levels[1:]:
            if lv.n_samples != n or lv.dim != d:
                raise errors.DimensionMismatch("levels must share N and D")
        object.__setattr__(self, "levels", levels)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def displacements(self, k: int) -> np.ndarray:
        """Per-sample displacement at level k: f^(k) - f^(k-1), float64."""
        return (self.levels[k].features.astype(np.float64)
                - self.levels[k - 1].features.astype(np.float64))


@dataclass(frozen=True)
class LevelMetricPoint:
    level: int
    value: float | None
    n_skipped: int


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    if np.array_equal(a, b):
        return 1.0
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def level_displacement_metric(series: LevelFeatureSeries,
                              variant: str) -> list:
    """Per-level displacement-similarity curves.

    variant 'a': mean pairwise similarity of sample displacements (i != j)
    variant 'b': mean similarity of sample displacements to their mean
    variant 'c': mean similarity of each sample's displacement at level k
                 to its displacement at level k+1
    variant 'd': similarity of the mean displacement at level k to level k+1
    """
    if variant not in ("a", "b", "c", "d"):
        raise errors.InvalidParams(f"unknown variant '{variant}'")
    min_levels = 3 if variant in ("c", "d") else 2
    if series.n_levels < min_levels:
        raise errors.TooFewLevels(
            f"variant '{variant}' needs >= {min_levels} levels")
    out = []
    last = series.n_levels - (1 if variant in ("c", "d") else 0)
    for k in range(1, last):
        d_k = series.displacements(k)
        skipped = 0
        if variant == "a":
            total, used, skipped = _pairwise_mean_cosine(d_k)
            value = total / used if used else None
        elif variant == "b":
            m = d_k.mean(axis=0)
            sims = []
            if np.linalg.norm(m) == 0.0:
                skipped = d_k.shape[0]
            else:
                for row in d_k:
                    if np.linalg.norm(row) == 0.0:
                        skipped += 1
                    else:
                        sims.append(_cosine(row, m))
            value = float(np.mean(sims)) if sims else None
        elif variant == "c":
            d_next = series.displacements(k + 1)
            sims = []
            for row, nxt in zip(d_k, d_next):
                if np.linalg.norm(row) == 0.0 or np.linalg.norm(nxt) == 0.0:
                    skipped += 1
                else:
                    sims.append(_cosine(row, nxt))
            value = float(np.mean(sims)) if sims else None
        else:
            m_k = d_k.mean(axis=0)
            m_next = series.displacements(k + 1).mean(axis=0)
            if np.linalg.norm(m_k) == 0.0 or np.linalg.norm(m_next) == 0.0:
                value, skipped = None, 1
            else:
                value = _cosine(m_k, m_next)
        out.append(LevelMetricPoint(k, value, skipped))
    return out
