import numpy as np
import pytest

import camdebias as cd
from camdebias import errors
from camdebias.analysis import LevelFeatureSeries
from reference import level_metric_reference


def labeled_set(feats, cams, ids):
    return cd.EmbeddingSet(np.asarray(feats, dtype=np.float32),
                           np.asarray(cams), np.asarray(ids))


def test_identity_camera_means_basic():
    es = labeled_set([[0, 0], [2, 2], [5, 5]], [0, 0, 1], [0, 0, 0])
    means = cd.identity_camera_means(es)
    np.testing.assert_allclose(means.means[(0, 0)], [1, 1])
    np.testing.assert_allclose(means.means[(0, 1)], [5, 5])
    assert means.counts[(0, 0)] == 2


def test_identity_camera_means_conservation(default_synthetic):
    es, _ = default_synthetic
    means = cd.identity_camera_means(es)
    total = sum(means.counts[k] * means.means[k] for k in means.means)
    np.testing.assert_allclose(total, es.features.astype(np.float64).sum(axis=0),
                               atol=1e-6)


def test_identity_camera_means_requires_ids():
    es = cd.EmbeddingSet(np.ones((2, 2), dtype=np.float32), np.array([0, 1]))
    with pytest.raises(errors.MissingIdentityLabels):
        cd.identity_camera_means(es)


def test_displacement_vectors_basic_and_antisymmetry():
    es = labeled_set([[1, 1], [3, 1], [0, 5], [2, 9]],
                     [0, 1, 0, 1], [0, 0, 1, 1])
    means = cd.identity_camera_means(es)
    fwd = cd.displacement_vectors(means, 0, 1)
    np.testing.assert_allclose(fwd[0], [2, 0])
    bwd = cd.displacement_vectors(means, 1, 0)
    for ident in fwd:
        np.testing.assert_array_equal(fwd[ident], -bwd[ident])


def test_displacement_vectors_missing_identity_omitted():
    es = labeled_set([[1, 1], [3, 1], [0, 5]], [0, 1, 0], [0, 0, 1])
    means = cd.identity_camera_means(es)
    disp = cd.displacement_vectors(means, 0, 1)
    assert set(disp) == {0}


def test_displacement_vectors_unknown_camera():
    es = labeled_set([[1, 1]], [0], [0])
    means = cd.identity_camera_means(es)
    with pytest.raises(errors.UnknownCamera):
        cd.displacement_vectors(means, 0, 3)


def test_mean_displacement_similarity_identical_displacements():
    # both identities move by exactly [1, 0] between cameras
    es = labeled_set([[0, 0], [1, 0], [5, 5], [6, 5]],
                     [0, 1, 0, 1], [0, 0, 1, 1])
    sim = cd.mean_displacement_similarity(es)
    assert sim.value == 1.0


def test_mean_displacement_similarity_opposed():
    es = labeled_set([[0, 0], [1, 0], [5, 5], [4, 5]],
                     [0, 1, 0, 1], [0, 0, 1, 1])
    sim = cd.mean_displacement_similarity(es)
    assert sim.value == pytest.approx(-1.0, abs=1e-12)


def test_mean_displacement_similarity_translation_invariance(
        default_synthetic):
    es, _ = default_synthetic
    base = cd.mean_displacement_similarity(es)
    shifted = es.with_features(es.features + np.float32(2.5))
    after = cd.mean_displacement_similarity(shifted)
    assert after.value == pytest.approx(base.value, abs=1e-5)


def test_mean_displacement_similarity_all_dims_equals_unrestricted(
        default_synthetic):
    es, _ = default_synthetic
    base = cd.mean_displacement_similarity(es)
    restricted = cd.mean_displacement_similarity(es, list(range(es.dim)))
    assert restricted.value == base.value


def test_sensitive_dims_more_consistent_than_insensitive(default_synthetic):
    es, truth = default_synthetic
    sens = truth.sensitive_dim_indices.tolist()
    insens = [d for d in range(es.dim) if d not in set(sens)][:len(sens)]
    s_sens = cd.mean_displacement_similarity(es, sens)
    s_ins = cd.mean_displacement_similarity(es, insens)
    assert s_sens.value > s_ins.value


def test_insufficient_overlap():
    es = labeled_set([[1, 1], [2, 2]], [0, 1], [0, 1])
    with pytest.raises(errors.InsufficientOverlap):
        cd.mean_displacement_similarity(es)


def _series(arrays):
    sets = [cd.EmbeddingSet(np.asarray(a, dtype=np.float32),
                            np.zeros(len(a), dtype=np.int32))
            for a in arrays]
    return LevelFeatureSeries(tuple(sets))


def test_level_variant_a_identical_translation():
    level0 = np.zeros((4, 3))
    level1 = level0 + [1.0, 0.0, 0.0]
    level2 = level1 + [0.0, 2.0, 0.0]
    series = _series([level0, level1, level2])
    for point in cd.level_displacement_metric(series, "a"):
        assert point.value == 1.0
        assert point.n_skipped == 0


def test_level_zero_displacement_reported_null():
    level0 = np.ones((5, 2))
    series = _series([level0, level0])
    points = cd.level_displacement_metric(series, "a")
    assert points[0].value is None
    assert points[0].n_skipped == 10  # all C(5,2) pairs skipped


def test_level_variants_match_bruteforce_oracle():
    rng = np.random.default_rng(7)
    arrays = [rng.standard_normal((6, 4)).astype(np.float32)
              for _ in range(4)]
    series = _series(arrays)
    levels64 = [a.features.astype(np.float64) for a in series.levels]
    for variant in "abcd":
        ours = cd.level_displacement_metric(series, variant)
        ref = level_metric_reference(levels64, variant)
        assert len(ours) == len(ref)
        for point, expected in zip(ours, ref):
            assert point.value == pytest.approx(expected, abs=1e-7)


def test_level_too_few_levels():
    series = _series([np.zeros((2, 2)), np.ones((2, 2))])
    with pytest.raises(errors.TooFewLevels):
        cd.level_displacement_metric(series, "c")
    with pytest.raises(errors.TooFewLevels):
        LevelFeatureSeries((series.levels[0],))


def test_level_mismatched_shapes():
    a = cd.EmbeddingSet(np.zeros((2, 2), dtype=np.float32), np.zeros(2, int))
    b = cd.EmbeddingSet(np.zeros((3, 2), dtype=np.float32), np.zeros(3, int))
    with pytest.raises(errors.DimensionMismatch):
        LevelFeatureSeries((a, b))


def test_camera_mean_dim_variance_shared_kernel(default_synthetic):
    es, _ = default_synthetic
    var = cd.rank_dims_by_camera_variance(es)
    from camdebias.normalize import camera_mean_dim_variance
    v = camera_mean_dim_variance(es)
    assert v.shape == (es.dim,)
    assert sorted(var.tolist()) == list(range(es.dim))  # permutation
