"""Group-specific feature normalization and its variants.

Per-group statistics are the group mean m_c and the population standard
deviation sigma_c (divisor |F_c|). Normalization modes:

* CENTER:        f - m
* SCALE:         f / max(sigma, eps)
* CENTER_SCALE:  (f - m) / max(sigma, eps)

Also provided: global (single-group) normalization, per-group ZCA whitening,
camera-variance dimension ranking, selective-dimension centering, quantile
group construction and label composition. All statistics are accumulated in
float64; outputs are stored back as float32.
"""

import enum
import json
from dataclasses import dataclass

import numpy as np

from . import errors
from .rng import CounterRng
from .store import EmbeddingSet

SIGMA_FLOOR = 1e-12


class NormalizationMode(enum.Enum):
    CENTER = "center"
    SCALE = "scale"
    CENTER_SCALE = "center-scale"


@dataclass(frozen=True)
class NormalizationStats:
    group_name: str
    means: dict    # group id -> float64 D-vector
    stds: dict     # group id -> float64 D-vector (population std)
    counts: dict   # group id -> int

    def to_json(self) -> str:
        groups = [
            {"id": int(g), "count": int(self.counts[g]),
             "mean": self.means[g].tolist(), "std": self.stds[g].tolist()}
            for g in sorted(self.means)
        ]
        return json.dumps({"group_name": self.group_name, "groups": groups})

    @classmethod
    def from_json(cls, text: str) -> "NormalizationStats":
        doc = json.loads(text)
        means, stds, counts = {}, {}, {}
        for g in doc["groups"]:
            gid = int(g["id"])
            means[gid] = np.asarray(g["mean"], dtype=np.float64)
            stds[gid] = np.asarray(g["std"], dtype=np.float64)
            counts[gid] = int(g["count"])
        return cls(doc["group_name"], means, stds, counts)


@dataclass(frozen=True)
class WhiteningStats:
    group_name: str
    means: dict     # group id -> D-vector
    matrices: dict  # group id -> symmetric D x D whitening matrix
    eps_w: float


def compute_group_stats(es: EmbeddingSet, group_name: str) -> NormalizationStats:
    labels = es.labels_for(group_name)
    feats = es.features.astype(np.float64)
    means, stds, counts = {}, {}, {}
    for g in np.unique(labels):
        rows = feats[labels == g]
        m = rows.mean(axis=0)
        means[int(g)] = m
        stds[int(g)] = np.sqrt(np.mean((rows - m) ** 2, axis=0))
        counts[int(g)] = rows.shape[0]
    return NormalizationStats(group_name, means, stds, counts)


def _transform(feats, labels, stats, mode, scale_about_mean=False):
    out = feats.astype(np.float64).copy()
    present = np.unique(labels)
    for g in present:
        if int(g) not in stats.means:
            raise errors.MissingGroupStats(int(g))
    for g in present:
        mask = labels == g
        sigma = np.maximum(stats.stds[int(g)], SIGMA_FLOOR)
        if mode is NormalizationMode.CENTER:
            out[mask] -= stats.means[int(g)]
        elif mode is NormalizationMode.CENTER_SCALE:
            out[mask] = (out[mask] - stats.means[int(g)]) / sigma
        elif scale_about_mean:
            # alternative scaling that keeps the group mean in place
            m = stats.means[int(g)]
            out[mask] = m + (out[mask] - m) / sigma
        else:
            out[mask] /= sigma
    return out


def apply_normalization(es: EmbeddingSet, stats: NormalizationStats,
                        mode=NormalizationMode.CENTER_SCALE,
                        scale_about_mean: bool = False) -> EmbeddingSet:
    labels = es.labels_for(stats.group_name)
    out = _transform(es.features, labels, stats, mode, scale_about_mean)
    return es.with_features(out.astype(np.float32))


def global_normalize(es: EmbeddingSet,
                     mode=NormalizationMode.CENTER_SCALE) -> EmbeddingSet:
    """Normalization with the whole set as a single group."""
    feats = es.features.astype(np.float64)
    m = feats.mean(axis=0)
    s = np.sqrt(np.mean((feats - m) ** 2, axis=0))
    stats = NormalizationStats("__global__", {0: m}, {0: s},
                               {0: es.n_samples})
    out = _transform(es.features, np.zeros(es.n_samples, dtype=np.int32),
                     stats, mode)
    return es.with_features(out.astype(np.float32))


def compute_whitening_stats(es: EmbeddingSet, group_name: str,
                            eps_w: float = 1e-5) -> WhiteningStats:
    if eps_w <= 0:
        raise errors.InvalidParams("eps_w must be > 0")
    labels = es.labels_for(group_name)
    feats = es.features.astype(np.float64)
    means, mats = {}, {}
    for g in np.unique(labels):
        rows = feats[labels == g]
        if rows.shape[0] < 2:
            raise errors.GroupTooSmall(int(g), "(ZCA needs >= 2 samples)")
        m = rows.mean(axis=0)
        centered = rows - m
        cov = centered.T @ centered / rows.shape[0]
        evals, evecs = np.linalg.eigh(cov)
        evals = np.maximum(evals, 0.0)
        w = evecs @ np.diag(1.0 / np.sqrt(evals + eps_w)) @ evecs.T
        means[int(g)] = m
        mats[int(g)] = (w + w.T) / 2.0
    return WhiteningStats(group_name, means, mats, eps_w)


def zca_whiten(es: EmbeddingSet, group_name: str,
               eps_w: float = 1e-5) -> EmbeddingSet:
    """Per-group ZCA whitening: x -> W_c (x - m_c), W = U diag(l+eps)^-1/2 U^T."""
    stats = compute_whitening_stats(es, group_name, eps_w)
    labels = es.labels_for(group_name)
    out = es.features.astype(np.float64).copy()
    for g in np.unique(labels):
        mask = labels == g
        out[mask] = (out[mask] - stats.means[int(g)]) @ stats.matrices[int(g)].T
    return es.with_features(out.astype(np.float32))


def camera_mean_dim_variance(es: EmbeddingSet) -> np.ndarray:
    """Per-dimension population variance across the camera mean vectors."""
    cams = np.unique(es.camera_labels)
    if cams.size < 2:
        raise errors.SingleCamera("need >= 2 cameras")
    feats = es.features.astype(np.float64)
    means = np.stack([feats[es.camera_labels == c].mean(axis=0) for c in cams])
    return means.var(axis=0)


def rank_dims_by_camera_variance(es: EmbeddingSet) -> np.ndarray:
    """Dimension indices by descending camera-mean variance, ties by index."""
    var = camera_mean_dim_variance(es)
    # stable sort on negated variances keeps ascending-index tie-break
    return np.argsort(-var, kind="stable")


def selective_center(es: EmbeddingSet, stats: NormalizationStats,
                     dims) -> EmbeddingSet:
    """Subtract the group mean on the listed dimensions only."""
    dims = np.asarray(dims, dtype=np.int64).reshape(-1)
    if dims.size and (dims.min() < 0 or dims.max() >= es.dim):
        raise errors.DimOutOfRange(f"dims must lie in 0..{es.dim - 1}")
    if np.unique(dims).size != dims.size:
        raise errors.DuplicateDim("duplicate dimension index")
    labels = es.labels_for(stats.group_name)
    out = es.features.astype(np.float64).copy()
    for g in np.unique(labels):
        if int(g) not in stats.means:
            raise errors.MissingGroupStats(int(g))
        mask = labels == g
        out[np.ix_(mask, dims)] -= stats.means[int(g)][dims]
    return es.with_features(out.astype(np.float32))


def assign_quantile_groups(values, n_groups: int) -> np.ndarray:
    """Split samples into n_groups contiguous blocks of (near-)equal size
    after sorting by (value, original index). Deterministic under ties."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    n = values.size
    if n_groups < 2:
        raise errors.InvalidParams("n_groups must be >= 2")
    if n < n_groups:
        raise errors.TooFewSamples(f"{n} samples < {n_groups} groups")
    order = np.argsort(values, kind="stable")
    labels = np.empty(n, dtype=np.int32)
    base, extra = divmod(n, n_groups)
    start = 0
    for g in range(n_groups):
        size = base + (1 if g < extra else 0)
        labels[order[start:start + size]] = g
        start += size
    return labels


def compose_labels(a, b) -> np.ndarray:
    """Dense re-indexing of the label pair (a_i, b_i), first-appearance order."""
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    if a.shape != b.shape:
        raise errors.LengthMismatch("label arrays differ in length")
    mapping = {}
    out = np.empty(a.size, dtype=np.int32)
    for i, pair in enumerate(zip(a.tolist(), b.tolist())):
        if pair not in mapping:
            mapping[pair] = len(mapping)
        out[i] = mapping[pair]
    return out


def subsample_stats(es: EmbeddingSet, group_name: str, m_per_group: int,
                    seed: int) -> NormalizationStats:
    """Group stats from m seeded draws (without replacement) per group."""
    if m_per_group < 2:
        raise errors.InvalidParams("m_per_group must be >= 2")
    labels = es.labels_for(group_name)
    rng = CounterRng(seed)
    keep = np.zeros(es.n_samples, dtype=bool)
    for g in np.unique(labels):
        idx = np.where(labels == g)[0]
        if idx.size < m_per_group:
            raise errors.GroupTooSmall(int(g),
                                       f"(has {idx.size} < {m_per_group})")
        keep[idx[rng.choice_without_replacement(idx.size, m_per_group)]] = True
    sub_feats = es.features[keep]
    sub_labels = labels[keep]
    means, stds, counts = {}, {}, {}
    for g in np.unique(sub_labels):
        rows = sub_feats[sub_labels == g].astype(np.float64)
        m = rows.mean(axis=0)
        means[int(g)] = m
        stds[int(g)] = np.sqrt(np.mean((rows - m) ** 2, axis=0))
        counts[int(g)] = rows.shape[0]
    return NormalizationStats(group_name, means, stds, counts)
