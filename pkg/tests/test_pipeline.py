import json

import numpy as np
import pytest

import camdebias as cd
from camdebias import errors
from camdebias.clustering import ClusterAssignment
from camdebias.pipeline import PseudoLabelBatch


def test_no_debias_equals_clustering_module(default_synthetic):
    es, _ = default_synthetic
    batch = cd.generate_pseudo_labels(es, eps=0.5, min_pts=4, debias=False)
    direct = cd.cluster_embeddings(cd.row_l2_normalize(es), 0.5, 4)
    np.testing.assert_array_equal(batch.assignment.labels, direct.labels)
    np.testing.assert_array_equal(batch.kept_mask, direct.labels != -1)


def test_debias_reduces_bias_nmi(default_synthetic):
    es, _ = default_synthetic
    raw = cd.generate_pseudo_labels(es, eps=0.5, debias=False)
    deb = cd.generate_pseudo_labels(es, eps=0.5, debias=True)
    assert cd.nmi(deb.assignment.labels, es.camera_labels) < \
        cd.nmi(raw.assignment.labels, es.camera_labels)


def test_single_sample_set():
    es = cd.EmbeddingSet(np.ones((1, 3), dtype=np.float32), np.array([0]))
    batch = cd.generate_pseudo_labels(es, eps=0.5, min_pts=4)
    assert batch.assignment.labels.tolist() == [-1]
    assert not batch.kept_mask.any()


def test_unbiased_data_partitions_agree():
    es, _ = cd.generate(cd.SyntheticConfig(offset_scale=0.0, seed=5))
    raw = cd.generate_pseudo_labels(es, eps=0.5, debias=False)
    deb = cd.generate_pseudo_labels(es, eps=0.5, debias=True)
    assert cd.nmi(raw.assignment.labels, deb.assignment.labels) > 0.95


def _batch(labels, eps=0.5, min_pts=2):
    labels = np.asarray(labels, dtype=np.int32)
    k = int(labels.max()) + 1 if labels.max() >= 0 else 0
    a = ClusterAssignment(labels, k, eps, min_pts)
    return PseudoLabelBatch(a, labels != -1, None,
                            {"debias": False, "discard_single_camera": False,
                             "eps": eps, "min_pts": min_pts})


def test_discard_single_camera_clusters_basic():
    batch = _batch([0, 0, 1, 1])
    cams = [0, 0, 0, 1]
    out = cd.discard_single_camera_clusters(batch, cams)
    assert out.assignment.labels.tolist() == [-1, -1, 0, 0]
    assert out.kept_mask.tolist() == [False, False, True, True]
    assert out.assignment.n_clusters == 1


def test_discard_noop_when_all_multi_camera():
    batch = _batch([0, 0, 1, 1])
    cams = [0, 1, 0, 1]
    out = cd.discard_single_camera_clusters(batch, cams)
    np.testing.assert_array_equal(out.kept_mask, batch.kept_mask)
    np.testing.assert_array_equal(out.assignment.labels,
                                  batch.assignment.labels)


def test_discard_renumbers_in_first_appearance_order():
    batch = _batch([0, 1, 1, 2, 2])
    cams = [0, 0, 1, 1, 2]
    out = cd.discard_single_camera_clusters(batch, cams)
    assert out.assignment.labels.tolist() == [-1, 0, 0, 1, 1]


def test_discard_length_mismatch():
    with pytest.raises(errors.LengthMismatch):
        cd.discard_single_camera_clusters(_batch([0, 0]), [0])


def test_post_discard_invariant_random_runs():
    rng = np.random.default_rng(0)
    for _ in range(25):
        n = int(rng.integers(10, 80))
        labels = rng.integers(-1, 6, n)
        cams = rng.integers(0, 4, n)
        out = cd.discard_single_camera_clusters(_batch(labels), cams)
        for c in range(out.assignment.n_clusters):
            assert np.unique(cams[out.assignment.labels == c]).size >= 2


def test_run_pipeline_joint_improvement(default_synthetic):
    es, _ = default_synthetic
    neither = cd.run_pipeline(es, eps=0.5)
    both = cd.run_pipeline(es, eps=0.5, debias=True,
                           discard_single_camera=True)
    assert cd.nmi(both.assignment.labels, es.camera_labels) < \
        cd.nmi(neither.assignment.labels, es.camera_labels)
    assert cd.nmi(both.assignment.labels, es.identity_labels) > \
        cd.nmi(neither.assignment.labels, es.identity_labels)


def test_batch_json_and_training_list(default_synthetic):
    es, _ = default_synthetic
    batch = cd.run_pipeline(es, eps=0.5, debias=True,
                            discard_single_camera=True)
    doc = json.loads(batch.to_json())
    assert doc["provenance"]["debias"] is True
    assert len(doc["labels"]) == es.n_samples
    lines = batch.training_list().strip().splitlines()
    assert len(lines) == int(batch.kept_mask.sum())
    idx, lbl = lines[0].split()
    assert batch.assignment.labels[int(idx)] == int(lbl)


def test_corrupt_labels_ratio_zero_is_identity_partition(default_synthetic):
    es, _ = default_synthetic
    labels, _, _ = cd.corrupt_labels(es, 0.0, "random", seed=1)
    assert cd.nmi(labels, es.identity_labels) == pytest.approx(1.0)


def test_corrupt_labels_camera_mode_entropy_zero(default_synthetic):
    es, _ = default_synthetic  # every identity spans exactly 3 cameras
    labels, entropy, skipped = cd.corrupt_labels(es, 1.0, "camera", seed=1)
    assert entropy == 0.0
    assert skipped == 0


def test_corrupt_labels_same_accuracy_different_entropy(default_synthetic):
    es, _ = default_synthetic
    for ratio in (0.25, 0.5, 1.0):
        lc, ec, _ = cd.corrupt_labels(es, ratio, "camera", seed=2)
        lr, er, _ = cd.corrupt_labels(es, ratio, "random", seed=2)
        acc_c = cd.nmi(lc, es.identity_labels)
        acc_r = cd.nmi(lr, es.identity_labels)
        assert abs(acc_c - acc_r) < 1e-9
        assert er > ec


def test_corrupt_labels_validation(default_synthetic):
    es, _ = default_synthetic
    with pytest.raises(errors.InvalidParams):
        cd.corrupt_labels(es, 0.5, "bogus", seed=0)
    no_ids = cd.EmbeddingSet(es.features, es.camera_labels)
    with pytest.raises(errors.MissingIdentityLabels):
        cd.corrupt_labels(no_ids, 0.5, "camera", seed=0)


def test_cap_cameras_no_change_when_max_large(default_synthetic):
    es, _ = default_synthetic
    out = cd.cap_cameras_per_identity(es, max_cams=10, seed=0)
    assert out.n_samples == es.n_samples


def test_cap_cameras_one_forces_single_camera_identities(default_synthetic):
    es, _ = default_synthetic
    out = cd.cap_cameras_per_identity(es, max_cams=1, seed=0)
    for ident in np.unique(out.identity_labels):
        cams = out.camera_labels[out.identity_labels == ident]
        assert np.unique(cams).size == 1
    # ground-truth identities as pseudo labels -> entropy 0
    k = int(out.identity_labels.max()) + 1
    a = ClusterAssignment(out.identity_labels.astype(np.int32), k, 0.5, 2)
    assert cd.mean_camera_entropy(a, out.camera_labels) == 0.0


def test_cap_cameras_target_size(default_synthetic):
    es, _ = default_synthetic
    out = cd.cap_cameras_per_identity(es, max_cams=2, target_size=200, seed=3)
    assert out.n_samples == 200
    with pytest.raises(errors.TargetTooLarge):
        cd.cap_cameras_per_identity(es, max_cams=1, target_size=10**6, seed=3)


def test_cap_cameras_deterministic(default_synthetic):
    es, _ = default_synthetic
    a = cd.cap_cameras_per_identity(es, max_cams=2, target_size=150, seed=9)
    b = cd.cap_cameras_per_identity(es, max_cams=2, target_size=150, seed=9)
    assert a.features.tobytes() == b.features.tobytes()
    np.testing.assert_array_equal(a.camera_labels, b.camera_labels)
