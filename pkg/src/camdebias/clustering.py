"""Deterministic DBSCAN over a dense cosine-distance matrix.

Semantics are pinned down tighter than the textbook algorithm so pseudo
labels are reproducible:

* a core point has >= min_pts neighbors within eps, counting itself;
* clusters are grown breadth-first from core points visited in ascending
  index order, queueing neighbors in ascending index order;
* a border point belongs to the first cluster whose expansion reaches it;
* points reachable from no core point are noise (-1);
* cluster ids are contiguous 0..K-1 in first-appearance order.
"""

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import errors
from .store import EmbeddingSet

DEFAULT_EPS = 0.6
DEFAULT_MIN_PTS = 4


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray  # int32, -1 = noise
    n_clusters: int
    eps: float
    min_pts: int

    def to_json(self) -> str:
        return json.dumps({"eps": self.eps, "min_pts": self.min_pts,
                           "labels": self.labels.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ClusterAssignment":
        doc = json.loads(text)
        labels = np.asarray(doc["labels"], dtype=np.int32)
        k = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 0
        return cls(labels, k, float(doc["eps"]), int(doc["min_pts"]))


def cosine_distance_matrix(es: EmbeddingSet) -> np.ndarray:
    """Dense N x N cosine distances in [0, 2], exact zero diagonal."""
    feats = es.features.astype(np.float64)
    norms = np.linalg.norm(feats, axis=1)
    zero = np.where(norms == 0.0)[0]
    if zero.size:
        raise errors.ZeroNormRow(int(zero[0]))
    unit = feats / norms[:, None]
    dist = 1.0 - unit @ unit.T
    dist = (dist + dist.T) / 2.0  # BLAS output is not exactly symmetric
    np.clip(dist, 0.0, 2.0, out=dist)
    np.fill_diagonal(dist, 0.0)
    return dist


def dbscan(dist: np.ndarray, eps: float = DEFAULT_EPS,
           min_pts: int = DEFAULT_MIN_PTS) -> ClusterAssignment:
    if eps <= 0 or min_pts < 1:
        raise errors.InvalidParams("need eps > 0 and min_pts >= 1")
    dist = np.asarray(dist)
    n = dist.shape[0]
    within = dist <= eps
    core = within.sum(axis=1) >= min_pts
    labels = np.full(n, -1, dtype=np.int32)
    claimed = np.zeros(n, dtype=bool)
    n_clusters = 0
    for seed in range(n):
        if claimed[seed] or not core[seed]:
            continue
        cid = n_clusters
        n_clusters += 1
        labels[seed] = cid
        claimed[seed] = True
        queue = deque([seed])
        while queue:
            p = queue.popleft()
            if not core[p]:
                continue
            for q in np.where(within[p] & ~claimed)[0]:
                claimed[q] = True
                labels[q] = cid
                queue.append(int(q))
    return ClusterAssignment(labels, n_clusters, float(eps), int(min_pts))


def cluster_embeddings(es: EmbeddingSet, eps: float = DEFAULT_EPS,
                       min_pts: int = DEFAULT_MIN_PTS) -> ClusterAssignment:
    """L2-normalize, build the cosine-distance matrix and run DBSCAN."""
    return dbscan(cosine_distance_matrix(es), eps, min_pts)
