"""scikit-learn style wrappers around the functional core.

These operate on plain (n_samples, n_features) arrays plus a per-sample
group array, so debiasing composes with the wider sklearn ecosystem:

    normalizer = GroupNormalizer(mode="center-scale").fit(X, groups=cams)
    X_hat = normalizer.transform(X, groups=cams)

    labels = CosineDBSCAN(eps=0.6, min_pts=4).fit_predict(X)
"""

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array

from . import clustering, normalize
from .store import EmbeddingSet


def _as_set(X, groups) -> EmbeddingSet:
    X = check_array(X, dtype=np.float32)
    groups = np.asarray(groups, dtype=np.int32)
    if groups.shape != (X.shape[0],):
        raise ValueError("groups must have one entry per sample")
    return EmbeddingSet(X, groups)


class GroupNormalizer(BaseEstimator, TransformerMixin):
    """Per-group center/scale normalization (population std)."""

    def __init__(self, mode="center-scale"):
        self.mode = mode

    def fit(self, X, y=None, *, groups):
        self.stats_ = normalize.compute_group_stats(_as_set(X, groups),
                                                    "camera")
        return self

    def transform(self, X, *, groups):
        mode = normalize.NormalizationMode(self.mode)
        out = normalize.apply_normalization(_as_set(X, groups), self.stats_,
                                            mode)
        return out.features.copy()


class GroupZCAWhitener(BaseEstimator, TransformerMixin):
    """Per-group ZCA whitening with eigenvalue regularizer eps_w."""

    def __init__(self, eps_w=1e-5):
        self.eps_w = eps_w

    def fit(self, X, y=None, *, groups):
        self.stats_ = normalize.compute_whitening_stats(_as_set(X, groups),
                                                        "camera", self.eps_w)
        return self

    def transform(self, X, *, groups):
        es = _as_set(X, groups)
        out = es.features.astype(np.float64).copy()
        for g in np.unique(es.camera_labels):
            if int(g) not in self.stats_.means:
                raise ValueError(f"group {int(g)} unseen at fit time")
            mask = es.camera_labels == g
            out[mask] = ((out[mask] - self.stats_.means[int(g)])
                         @ self.stats_.matrices[int(g)].T)
        return out.astype(np.float32)


class CosineDBSCAN(BaseEstimator, ClusterMixin):
    """Deterministic DBSCAN over cosine distance; noise labeled -1."""

    def __init__(self, eps=clustering.DEFAULT_EPS,
                 min_pts=clustering.DEFAULT_MIN_PTS):
        self.eps = eps
        self.min_pts = min_pts

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        dist = clustering.cosine_distance_matrix(
            EmbeddingSet(X.astype(np.float32),
                         np.zeros(X.shape[0], dtype=np.int32)))
        assignment = clustering.dbscan(dist, self.eps, self.min_pts)
        self.labels_ = assignment.labels
        self.n_clusters_ = assignment.n_clusters
        return self
