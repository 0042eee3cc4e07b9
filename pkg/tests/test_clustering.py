import numpy as np
import pytest

import camdebias as cd
from camdebias import errors
from camdebias.clustering import ClusterAssignment, cosine_distance_matrix, dbscan
from reference import cosine_distance_reference, dbscan_reference, \
    partition_as_sets


def unit_set(feats):
    feats = np.asarray(feats, dtype=np.float32)
    return cd.EmbeddingSet(feats, np.zeros(feats.shape[0], dtype=np.int32))


def test_orthogonal_and_antipodal_distances():
    es = unit_set([[1, 0], [0, 1], [-1, 0]])
    d = cosine_distance_matrix(es)
    assert d[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert d[0, 2] == pytest.approx(2.0, abs=1e-12)
    assert np.all(np.diag(d) == 0.0)


def test_distance_matrix_matches_scalar_oracle():
    rng = np.random.default_rng(0)
    feats = rng.standard_normal((10, 4)).astype(np.float32)
    es = unit_set(feats)
    d = cosine_distance_matrix(es)
    ref = cosine_distance_reference(es.features)
    np.testing.assert_allclose(d, ref, atol=1e-7)
    assert np.abs(d - d.T).max() < 1e-7


def test_distance_zero_norm_row():
    with pytest.raises(errors.ZeroNormRow):
        cosine_distance_matrix(unit_set([[1, 0], [0, 0]]))


def test_three_close_points_one_cluster():
    d = np.zeros((3, 3))
    d[0, 1] = d[1, 0] = d[0, 2] = d[2, 0] = d[1, 2] = d[2, 1] = 0.1
    out = dbscan(d, eps=0.2, min_pts=3)
    assert out.labels.tolist() == [0, 0, 0]
    assert out.n_clusters == 1


def test_all_far_all_noise():
    d = np.ones((4, 4)) - np.eye(4)
    out = dbscan(d, eps=0.5, min_pts=2)
    assert out.labels.tolist() == [-1, -1, -1, -1]
    assert out.n_clusters == 0


def test_invalid_params():
    d = np.zeros((2, 2))
    with pytest.raises(errors.InvalidParams):
        dbscan(d, eps=0.0, min_pts=2)
    with pytest.raises(errors.InvalidParams):
        dbscan(d, eps=0.5, min_pts=0)


@pytest.mark.parametrize("seed", range(10))
def test_matches_reference_on_random_instances(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 200))
    feats = rng.standard_normal((n, 6)).astype(np.float32)
    d = cosine_distance_matrix(unit_set(feats))
    eps = float(rng.uniform(0.2, 0.9))
    min_pts = int(rng.integers(2, 8))
    ours = dbscan(d, eps, min_pts)
    ref = dbscan_reference(d, eps, min_pts)
    assert partition_as_sets(ours.labels) == partition_as_sets(ref)


def test_permutation_covariance():
    rng = np.random.default_rng(11)
    feats = rng.standard_normal((60, 5)).astype(np.float32)
    d = cosine_distance_matrix(unit_set(feats))
    base = dbscan(d, 0.5, 3)
    perm = rng.permutation(60)
    d_perm = d[np.ix_(perm, perm)]
    permuted = dbscan(d_perm, 0.5, 3)
    # map permuted partition back through perm and compare as sets
    back = {frozenset(perm[i] for i in part)
            for part in partition_as_sets(permuted.labels)}
    assert frozenset(back) == partition_as_sets(base.labels)


def test_every_cluster_has_a_core_point():
    rng = np.random.default_rng(12)
    feats = rng.standard_normal((80, 4)).astype(np.float32)
    d = cosine_distance_matrix(unit_set(feats))
    eps, min_pts = 0.4, 4
    out = dbscan(d, eps, min_pts)
    core = (d <= eps).sum(axis=1) >= min_pts
    assert np.all(out.labels[core] != -1)
    for c in range(out.n_clusters):
        assert core[out.labels == c].any()


def test_raising_eps_never_adds_noise():
    rng = np.random.default_rng(13)
    feats = rng.standard_normal((100, 4)).astype(np.float32)
    d = cosine_distance_matrix(unit_set(feats))
    prev_noise = None
    for eps in [0.2, 0.4, 0.6, 0.8]:
        noise = int((dbscan(d, eps, 3).labels == -1).sum())
        if prev_noise is not None:
            assert noise <= prev_noise
        prev_noise = noise


def test_determinism():
    rng = np.random.default_rng(14)
    feats = rng.standard_normal((50, 4)).astype(np.float32)
    es = unit_set(feats)
    a = cd.cluster_embeddings(es, 0.5, 3)
    b = cd.cluster_embeddings(es, 0.5, 3)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_assignment_json_round_trip():
    a = ClusterAssignment(np.array([0, 0, -1, 1], dtype=np.int32), 2, 0.5, 3)
    b = ClusterAssignment.from_json(a.to_json())
    np.testing.assert_array_equal(a.labels, b.labels)
    assert (b.eps, b.min_pts, b.n_clusters) == (0.5, 3, 2)
