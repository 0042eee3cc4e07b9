"""Scalar evaluation: NMI, camera entropy, mAP/CMC retrieval, bias report.

NMI is normalized by the arithmetic mean of the entropies, 2*I/(H_A + H_B),
with natural logarithms; a geometric-mean variant is available via the
``normalization`` argument. DBSCAN noise labels (-1) are expanded to unique
singleton clusters before any NMI computation so noisy samples still count.

Retrieval follows the standard ReID protocol: gallery candidates sharing both
identity and camera with the query are excluded, as are gallery items with
unknown identity (-1); queries left without any valid positive are skipped
and counted. Equal similarities are broken by ascending gallery index.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import errors
from .clustering import ClusterAssignment, cluster_embeddings
from .normalize import NormalizationMode, apply_normalization, compute_group_stats
from .store import EmbeddingSet, row_l2_normalize


def expand_noise_to_singletons(labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).copy()
    noise = labels == -1
    if noise.any():
        start = labels.max() + 1 if labels.size else 0
        labels[noise] = np.arange(start, start + noise.sum())
    return labels


def _entropy_from_counts(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    # fsum gives the correctly rounded sum regardless of term order
    return -math.fsum(p * np.log(p))


def nmi(a, b, normalization: str = "arithmetic") -> float:
    """Normalized mutual information of two labelings, natural logs."""
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    if a.shape != b.shape:
        raise errors.LengthMismatch("label arrays differ in length")
    n = a.size
    if n == 0:
        return 1.0
    a = expand_noise_to_singletons(a)
    b = expand_noise_to_singletons(b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    ka, kb = ai.max() + 1, bi.max() + 1
    cont = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(cont, (ai, bi), 1)
    row = cont.sum(axis=1)
    col = cont.sum(axis=0)
    h_a = _entropy_from_counts(row, n)
    h_b = _entropy_from_counts(col, n)
    nz = cont > 0
    pij = cont[nz] / n
    pi = row[np.nonzero(nz)[0]] / n
    pj = col[np.nonzero(nz)[1]] / n
    # commutative grouping + fsum keep nmi(a, b) == nmi(b, a) bit-exact
    mi = float(math.fsum(pij * (np.log(pij) - (np.log(pi) + np.log(pj)))))
    if normalization == "arithmetic":
        denom = h_a + h_b
        return 2.0 * mi / denom if denom > 0 else 1.0
    if normalization == "geometric":
        denom = math.sqrt(h_a * h_b)
        return mi / denom if denom > 0 else 1.0
    raise errors.InvalidParams(f"unknown normalization '{normalization}'")


def mean_camera_entropy(assignment: ClusterAssignment, camera_labels) -> float:
    """Unweighted mean, over non-noise clusters, of the Shannon entropy of
    each cluster's camera distribution (nats). Empty cluster set -> 0."""
    cameras = np.asarray(camera_labels)
    labels = assignment.labels
    if cameras.shape != labels.shape:
        raise errors.LengthMismatch("assignment and cameras differ in length")
    entropies = []
    for c in range(assignment.n_clusters):
        cams = cameras[labels == c]
        _, counts = np.unique(cams, return_counts=True)
        entropies.append(_entropy_from_counts(counts, cams.size))
    return float(np.mean(entropies)) if entropies else 0.0


@dataclass(frozen=True)
class EvalReport:
    map: float
    cmc: dict  # rank -> value
    n_queries_evaluated: int
    n_queries_skipped: int

    def to_json(self, config: dict | None = None) -> str:
        doc = {"map": self.map,
               "cmc": {str(r): v for r, v in sorted(self.cmc.items())},
               "n_queries_evaluated": self.n_queries_evaluated,
               "n_queries_skipped": self.n_queries_skipped}
        if config is not None:
            doc["config"] = config
        return json.dumps(doc)


def evaluate_ranking(dist: np.ndarray, query_ids, query_cams, gallery_ids,
                     gallery_cams, ranks=(1, 5, 10)) -> EvalReport:
    """mAP / CMC from a precomputed query x gallery distance matrix."""
    dist = np.asarray(dist, dtype=np.float64)
    q_ids = np.asarray(query_ids)
    q_cams = np.asarray(query_cams)
    g_ids = np.asarray(gallery_ids)
    g_cams = np.asarray(gallery_cams)
    n_q, n_g = dist.shape
    ranks = sorted(set(int(r) for r in ranks))
    aps = []
    cmc_hits = {r: 0 for r in ranks}
    skipped = 0
    g_idx = np.arange(n_g)
    for qi in range(n_q):
        keep = ~(((g_ids == q_ids[qi]) & (g_cams == q_cams[qi]))
                 | (g_ids == -1))
        if q_ids[qi] == -1 or not keep.any():
            skipped += 1
            continue
        d = dist[qi, keep]
        cand_ids = g_ids[keep]
        order = np.lexsort((g_idx[keep], d))  # distance asc, index tie-break
        rel = (cand_ids[order] == q_ids[qi])
        n_pos = int(rel.sum())
        if n_pos == 0:
            skipped += 1
            continue
        hits = np.cumsum(rel)
        precision_at = hits[rel] / (np.nonzero(rel)[0] + 1)
        aps.append(float(precision_at.sum() / n_pos))
        first = int(np.nonzero(rel)[0][0])
        for r in ranks:
            if first < r:
                cmc_hits[r] += 1
    n_eval = len(aps)
    if n_eval == 0:
        return EvalReport(0.0, {r: 0.0 for r in ranks}, 0, skipped)
    return EvalReport(float(np.mean(aps)),
                      {r: cmc_hits[r] / n_eval for r in ranks},
                      n_eval, skipped)


def evaluate_retrieval(query: EmbeddingSet, gallery: EmbeddingSet,
                       ranks=(1, 5, 10)) -> EvalReport:
    if query.identity_labels is None or gallery.identity_labels is None:
        raise errors.MissingIdentityLabels("retrieval needs identity labels")
    if query.dim != gallery.dim:
        raise errors.DimensionMismatch(
            f"query D={query.dim} vs gallery D={gallery.dim}")
    qf = row_l2_normalize(query).features.astype(np.float64)
    gf = row_l2_normalize(gallery).features.astype(np.float64)
    dist = 1.0 - qf @ gf.T
    return evaluate_ranking(dist, query.identity_labels, query.camera_labels,
                            gallery.identity_labels, gallery.camera_labels,
                            ranks)


@dataclass(frozen=True)
class BiasReport:
    bias_nmi: float
    accuracy_nmi: float | None
    mean_camera_entropy: float
    n_clusters: int
    single_camera_cluster_fraction: float
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "bias_nmi": self.bias_nmi,
            "accuracy_nmi": self.accuracy_nmi,
            "mean_camera_entropy": self.mean_camera_entropy,
            "n_clusters": self.n_clusters,
            "single_camera_cluster_fraction":
                self.single_camera_cluster_fraction,
            "config": self.config,
        })


def report_from_assignment(assignment: ClusterAssignment,
                           es: EmbeddingSet, config=None) -> BiasReport:
    labels = assignment.labels
    bias = nmi(labels, es.camera_labels)
    accuracy = (nmi(labels, es.identity_labels)
                if es.identity_labels is not None else None)
    entropy = mean_camera_entropy(assignment, es.camera_labels)
    single = 0
    for c in range(assignment.n_clusters):
        if np.unique(es.camera_labels[labels == c]).size == 1:
            single += 1
    frac = single / assignment.n_clusters if assignment.n_clusters else 0.0
    return BiasReport(bias, accuracy, entropy, assignment.n_clusters, frac,
                      config or {})


def bias_report(es: EmbeddingSet, eps: float = 0.6, min_pts: int = 4,
                debias_first: bool = False) -> BiasReport:
    """Cluster (optionally after camera-specific normalization) and measure
    the camera bias of the resulting pseudo labels."""
    work = es
    if debias_first:
        stats = compute_group_stats(work, "camera")
        work = apply_normalization(work, stats, NormalizationMode.CENTER_SCALE)
    work = row_l2_normalize(work)
    assignment = cluster_embeddings(work, eps, min_pts)
    config = {"eps": eps, "min_pts": min_pts, "debias_first": debias_first}
    return report_from_assignment(assignment, es, config)
