"""Debiased pseudo-labeling pipeline and toy-experiment constructors.

The pipeline is a single pass over provided features: optionally debias with
camera-specific normalization, cluster with DBSCAN, then optionally discard
clusters whose members all come from one camera. An external trainer can
rerun it per epoch on freshly extracted features.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import errors
from .clustering import ClusterAssignment, cluster_embeddings
from .metrics import mean_camera_entropy
from .normalize import NormalizationMode, NormalizationStats, \
    apply_normalization, compute_group_stats
from .rng import CounterRng
from .store import EmbeddingSet, row_l2_normalize


@dataclass(frozen=True)
class PseudoLabelBatch:
    assignment: ClusterAssignment
    kept_mask: np.ndarray
    stats_used: NormalizationStats | None
    provenance: dict

    def to_json(self) -> str:
        return json.dumps({
            "labels": self.assignment.labels.tolist(),
            "kept": self.kept_mask.astype(int).tolist(),
            "provenance": self.provenance,
        })

    def training_list(self) -> str:
        """One line per kept sample: '<index> <cluster id>'."""
        lines = [f"{i} {int(lbl)}"
                 for i, (lbl, kept) in enumerate(
                     zip(self.assignment.labels, self.kept_mask)) if kept]
        return "\n".join(lines) + ("\n" if lines else "")


def generate_pseudo_labels(es: EmbeddingSet, eps: float = 0.6,
                           min_pts: int = 4,
                           debias: bool = False) -> PseudoLabelBatch:
    """Cluster (optionally debiased) features; kept_mask marks non-noise.
    Single-camera-cluster discarding is a separate, second step."""
    work = es
    stats = None
    if debias:
        stats = compute_group_stats(es, "camera")
        work = apply_normalization(es, stats, NormalizationMode.CENTER_SCALE)
    work = row_l2_normalize(work)
    assignment = cluster_embeddings(work, eps, min_pts)
    kept = assignment.labels != -1
    provenance = {"debias": debias, "discard_single_camera": False,
                  "eps": eps, "min_pts": min_pts}
    return PseudoLabelBatch(assignment, kept, stats, provenance)


def discard_single_camera_clusters(batch: PseudoLabelBatch,
                                   camera_labels) -> PseudoLabelBatch:
    """Drop clusters spanning exactly one camera; renumber survivors
    contiguously in first-appearance order."""
    cameras = np.asarray(camera_labels)
    labels = batch.assignment.labels
    if cameras.shape != labels.shape:
        raise errors.LengthMismatch("camera labels not aligned with batch")
    keep_cluster = np.zeros(batch.assignment.n_clusters, dtype=bool)
    for c in range(batch.assignment.n_clusters):
        keep_cluster[c] = np.unique(cameras[labels == c]).size >= 2
    new_labels = np.full(labels.shape, -1, dtype=np.int32)
    mapping = {}
    for i, lbl in enumerate(labels):
        if lbl >= 0 and keep_cluster[lbl]:
            if lbl not in mapping:
                mapping[int(lbl)] = len(mapping)
            new_labels[i] = mapping[int(lbl)]
    assignment = ClusterAssignment(new_labels, len(mapping),
                                   batch.assignment.eps,
                                   batch.assignment.min_pts)
    provenance = dict(batch.provenance, discard_single_camera=True)
    return PseudoLabelBatch(assignment, new_labels != -1,
                            batch.stats_used, provenance)


def run_pipeline(es: EmbeddingSet, eps: float = 0.6, min_pts: int = 4,
                 debias: bool = False,
                 discard_single_camera: bool = False) -> PseudoLabelBatch:
    batch = generate_pseudo_labels(es, eps, min_pts, debias)
    if discard_single_camera:
        batch = discard_single_camera_clusters(batch, es.camera_labels)
    return batch


def corrupt_labels(es: EmbeddingSet, split_ratio: float, mode: str,
                   seed: int):
    """Toy pseudo-label corruption: a seeded fraction of identities is split
    into three clusters each, either grouped by camera ('camera') or at
    random ('random'). Returns (labels, mean camera entropy, n_skipped)."""
    if es.identity_labels is None:
        raise errors.MissingIdentityLabels("identity labels required")
    if mode not in ("camera", "random"):
        raise errors.InvalidParams(f"unknown corruption mode '{mode}'")
    if not 0.0 <= split_ratio <= 1.0:
        raise errors.InvalidParams("split_ratio must lie in [0, 1]")
    rng = CounterRng(seed)
    identities = np.unique(es.identity_labels)
    n_split = int(split_ratio * identities.size)
    order = rng.shuffle(identities.size)
    selected = set(identities[order[:n_split]].tolist())
    labels = np.full(es.n_samples, -1, dtype=np.int32)
    next_label = 0
    n_skipped = 0
    for ident in identities.tolist():
        idx = np.where(es.identity_labels == ident)[0]
        parts = None
        if ident in selected:
            if mode == "camera":
                cams = np.unique(es.camera_labels[idx])
                if cams.size < 3:
                    n_skipped += 1
                else:
                    # seeded round-robin of cameras into 3 buckets
                    cam_order = rng.shuffle(cams.size)
                    buckets = [cams[cam_order[b::3]] for b in range(3)]
                    parts = [idx[np.isin(es.camera_labels[idx], bucket)]
                             for bucket in buckets]
            else:
                perm = rng.shuffle(idx.size)
                base, extra = divmod(idx.size, 3)
                sizes = [base + (1 if b < extra else 0) for b in range(3)]
                parts, start = [], 0
                for size in sizes:
                    parts.append(idx[perm[start:start + size]])
                    start += size
        if parts is None:
            parts = [idx]
        for part in parts:
            if len(part):
                labels[part] = next_label
                next_label += 1
    k = next_label
    assignment = ClusterAssignment(labels, k, 0.0, 0)
    entropy = mean_camera_entropy(assignment, es.camera_labels)
    return labels, entropy, n_skipped


def cap_cameras_per_identity(es: EmbeddingSet, max_cams: int,
                             target_size: int | None = None,
                             seed: int = 0) -> EmbeddingSet:
    """Keep a seeded choice of at most max_cams cameras per identity;
    optionally downsample the survivors to exactly target_size rows."""
    if es.identity_labels is None:
        raise errors.MissingIdentityLabels("identity labels required")
    if max_cams < 1:
        raise errors.InvalidParams("max_cams must be >= 1")
    rng = CounterRng(seed)
    keep = np.zeros(es.n_samples, dtype=bool)
    for ident in np.unique(es.identity_labels).tolist():
        idx = np.where(es.identity_labels == ident)[0]
        cams = np.unique(es.camera_labels[idx])
        chosen = cams[rng.choice_without_replacement(
            cams.size, min(max_cams, cams.size))]
        keep[idx[np.isin(es.camera_labels[idx], chosen)]] = True
    survivors = np.where(keep)[0]
    if target_size is not None:
        if survivors.size < target_size:
            raise errors.TargetTooLarge(
                f"only {survivors.size} samples survive, need {target_size}")
        picked = survivors[rng.choice_without_replacement(
            survivors.size, target_size)]
        keep = np.zeros(es.n_samples, dtype=bool)
        keep[picked] = True
    from .store import subset
    return subset(es, keep)
