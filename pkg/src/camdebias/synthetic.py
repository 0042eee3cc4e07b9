"""Synthetic camera-biased embedding generator with known ground truth.

Each sample is f = u_identity + b_camera + noise: identity centroids are
standard normal in all D dimensions, camera offsets live only on a chosen
set of k sensitive dimensions and are mean-centered across cameras so the
global mean carries identity signal only.

Centroids and offsets are snapped to a 2^-12 grid. Their float32 sums are
then exact, so with noise_scale = 0 the closed-form properties (displacement
vectors equal b_to - b_from, retrieval is perfect after centering) hold
bit-exactly. The counter-based generator in :mod:`camdebias.rng` makes the
output byte-identical across platforms for a fixed seed.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import errors
from .rng import CounterRng
from .store import EmbeddingSet

_GRID = 2.0 ** -12


@dataclass(frozen=True)
class SyntheticConfig:
    n_identities: int = 50
    n_cameras: int = 3
    samples_per_id_cam: int = 4
    dim: int = 64
    sensitive_dims: int = 8
    offset_scale: float = 2.0
    noise_scale: float = 1.0
    seed: int = 7

    def __post_init__(self):
        if min(self.n_identities, self.n_cameras,
               self.samples_per_id_cam, self.dim) < 1:
            raise errors.InvalidConfig("all counts must be >= 1")
        if not 0 <= self.sensitive_dims <= self.dim:
            raise errors.InvalidConfig("sensitive_dims must lie in 0..dim")
        if self.offset_scale < 0 or self.noise_scale < 0:
            raise errors.InvalidConfig("scales must be >= 0")


@dataclass(frozen=True)
class SyntheticGroundTruth:
    identity_centroids: np.ndarray  # n_identities x D
    camera_offsets: np.ndarray      # n_cameras x D, zero off sensitive dims
    sensitive_dim_indices: np.ndarray

    def to_json(self) -> str:
        return json.dumps({
            "identity_centroids": self.identity_centroids.tolist(),
            "camera_offsets": self.camera_offsets.tolist(),
            "sensitive_dim_indices": self.sensitive_dim_indices.tolist(),
        })


def _snap(x: np.ndarray) -> np.ndarray:
    return np.round(x / _GRID) * _GRID


def generate(config: SyntheticConfig):
    """Returns (EmbeddingSet, SyntheticGroundTruth), deterministic per seed.

    Draw order within the seed's stream: sensitive-dim choice, identity
    centroids, camera offsets, then per-sample noise.
    """
    rng = CounterRng(config.seed)
    n_id, m, spc, d = (config.n_identities, config.n_cameras,
                       config.samples_per_id_cam, config.dim)
    k = config.sensitive_dims
    sensitive = rng.choice_without_replacement(d, k)

    centroids = _snap(rng.normal(n_id * d).reshape(n_id, d))

    offsets = np.zeros((m, d), dtype=np.float64)
    if k:
        raw = config.offset_scale * rng.normal(m * k).reshape(m, k)
        raw -= raw.mean(axis=0)
        # center exactly on the grid: last camera balances the integer sum,
        # so the offsets sum to zero and the global mean stays identity-only
        grid_int = np.round(raw / _GRID)
        grid_int[m - 1] = -grid_int[:m - 1].sum(axis=0)
        offsets[:, sensitive] = grid_int * _GRID

    n = n_id * m * spc
    identity = np.repeat(np.arange(n_id, dtype=np.int32), m * spc)
    camera = np.tile(np.repeat(np.arange(m, dtype=np.int32), spc), n_id)
    feats = centroids[identity] + offsets[camera]
    if config.noise_scale > 0:
        feats = feats + config.noise_scale * rng.normal(n * d).reshape(n, d)
    es = EmbeddingSet(feats.astype(np.float32), camera, identity)
    truth = SyntheticGroundTruth(centroids, offsets, sensitive)
    return es, truth


def query_gallery_split(es: EmbeddingSet, per_pair: int = 1):
    """Deterministic retrieval split: the first per_pair samples of every
    (identity, camera) pair become queries, the rest gallery.
    Returns (query_mask, gallery_mask)."""
    if es.identity_labels is None:
        raise errors.MissingIdentityLabels("identity labels required")
    query = np.zeros(es.n_samples, dtype=bool)
    seen = {}
    for i in range(es.n_samples):
        key = (int(es.identity_labels[i]), int(es.camera_labels[i]))
        seen[key] = seen.get(key, 0) + 1
        if seen[key] <= per_pair:
            query[i] = True
    return query, ~query
