"""camdebias: measure and remove camera bias in re-identification embeddings.

Core workflow: load an embedding set, compute per-camera statistics, apply
group-specific normalization, then cluster / evaluate / analyze. Everything
is a pure function over immutable :class:`EmbeddingSet` values; the CLI in
:mod:`camdebias.cli` chains the stages through files.
"""

from .analysis import (DisplacementSimilarity, LevelFeatureSeries,
                       displacement_vectors, identity_camera_means,
                       level_displacement_metric,
                       mean_displacement_similarity)
from .clustering import (ClusterAssignment, cluster_embeddings,
                         cosine_distance_matrix, dbscan)
from .metrics import (BiasReport, EvalReport, bias_report,
                      evaluate_retrieval, mean_camera_entropy, nmi)
from .normalize import (NormalizationMode, NormalizationStats,
                        apply_normalization, assign_quantile_groups,
                        compose_labels, compute_group_stats,
                        global_normalize, rank_dims_by_camera_variance,
                        selective_center, subsample_stats, zca_whiten)
from .pipeline import (PseudoLabelBatch, cap_cameras_per_identity,
                       corrupt_labels, discard_single_camera_clusters,
                       generate_pseudo_labels, run_pipeline)
from .postprocess import RerankParams, aqe, dba, k_reciprocal_rerank
from .store import (DatasetManifest, EmbeddingSet, load_binary, load_csv,
                    row_l2_normalize, save_binary, save_csv, subset)
from .synthetic import (SyntheticConfig, SyntheticGroundTruth, generate,
                        query_gallery_split)

__version__ = "0.1.0"

__all__ = [
    "BiasReport", "ClusterAssignment", "DatasetManifest",
    "DisplacementSimilarity", "EmbeddingSet", "EvalReport",
    "LevelFeatureSeries", "NormalizationMode", "NormalizationStats",
    "PseudoLabelBatch", "RerankParams", "SyntheticConfig",
    "SyntheticGroundTruth", "apply_normalization", "aqe",
    "assign_quantile_groups", "bias_report", "cap_cameras_per_identity",
    "cluster_embeddings", "compose_labels", "compute_group_stats",
    "corrupt_labels", "cosine_distance_matrix", "dba", "dbscan",
    "discard_single_camera_clusters", "displacement_vectors",
    "evaluate_retrieval", "generate", "generate_pseudo_labels",
    "global_normalize", "identity_camera_means", "k_reciprocal_rerank",
    "level_displacement_metric", "load_binary", "load_csv",
    "mean_camera_entropy", "mean_displacement_similarity", "nmi",
    "query_gallery_split", "rank_dims_by_camera_variance",
    "row_l2_normalize", "run_pipeline", "save_binary", "save_csv",
    "selective_center", "subsample_stats", "subset", "zca_whiten",
]
