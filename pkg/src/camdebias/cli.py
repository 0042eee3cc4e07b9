"""Command-line interface: one subcommand per pipeline stage.

Stages communicate through files (the .redb embedding format, the .rmtx
distance-matrix format, and JSON reports), so external trainers can replay
per-epoch workflows. Exit codes: 0 success, 1 data/validation error,
2 usage error. JSON reports carry schema_version and, unless --no-timestamp
is given, a UTC timestamp.
"""

import argparse
import datetime
import json
import sys

import numpy as np

from . import analysis, clustering, errors, metrics, normalize, pipeline, \
    postprocess, store, synthetic

SCHEMA_VERSION = 1


def _report(args, payload: dict) -> dict:
    doc = {"schema_version": SCHEMA_VERSION}
    if not getattr(args, "no_timestamp", False):
        doc["timestamp"] = datetime.datetime.now(
            datetime.timezone.utc).isoformat()
    doc.update(payload)
    return doc


def _emit(args, payload: dict) -> None:
    text = json.dumps(_report(args, payload), indent=2, sort_keys=True)
    if getattr(args, "out", None):
        with open(args.out, "w") as f:
            f.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _load(path) -> store.EmbeddingSet:
    if str(path).endswith(".csv"):
        return store.load_csv(path)
    return store.load_binary(path)


def _read_dims(path):
    with open(path) as f:
        return [int(line) for line in f.read().split() if line.strip()]


def _add_common(p, seed=False):
    p.add_argument("--out", default=None)
    p.add_argument("--no-timestamp", action="store_true")
    if seed:
        p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="camdebias",
                                 description="camera-bias toolkit for "
                                             "re-identification embeddings")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic biased embeddings")
    p.add_argument("--n-identities", type=int, default=50)
    p.add_argument("--n-cameras", type=int, default=3)
    p.add_argument("--samples-per-id-cam", type=int, default=4)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--sensitive-dims", type=int, default=8)
    p.add_argument("--offset-scale", type=float, default=2.0)
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", default=None)
    p.add_argument("--no-timestamp", action="store_true")

    p = sub.add_parser("convert", help="convert between .csv and .redb")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-timestamp", action="store_true")

    p = sub.add_parser("normalize", help="group-specific normalization")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--group", default="camera")
    p.add_argument("--mode", default="center-scale",
                   choices=["center", "scale", "center-scale"])
    p.add_argument("--stats-in", default=None)
    p.add_argument("--stats-out", default=None)
    p.add_argument("--subsample", type=int, default=None,
                   help="samples per group used for the statistics")
    p.add_argument("--dims", default=None,
                   help="newline-separated dims: selective centering")
    p.add_argument("--global", dest="use_global", action="store_true")
    _add_common(p, seed=True)

    p = sub.add_parser("whiten", help="per-group ZCA whitening")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--group", default="camera")
    p.add_argument("--eps-w", type=float, default=1e-5)
    _add_common(p)

    p = sub.add_parser("cluster", help="DBSCAN over cosine distance")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--eps", type=float, default=clustering.DEFAULT_EPS)
    p.add_argument("--min-pts", type=int, default=clustering.DEFAULT_MIN_PTS)
    _add_common(p)

    p = sub.add_parser("eval", help="mAP / CMC retrieval evaluation")
    p.add_argument("--query", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--ranks", default="1,5,10")
    p.add_argument("--dist", default=None,
                   help="precomputed .rmtx query x gallery distances")
    _add_common(p)

    p = sub.add_parser("bias", help="clustering-based camera-bias report")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--eps", type=float, default=clustering.DEFAULT_EPS)
    p.add_argument("--min-pts", type=int, default=clustering.DEFAULT_MIN_PTS)
    p.add_argument("--debias", action="store_true")
    _add_common(p)

    p = sub.add_parser("rerank", help="k-reciprocal re-ranking")
    p.add_argument("--query", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--k1", type=int, default=20)
    p.add_argument("--k2", type=int, default=6)
    p.add_argument("--lambda", dest="lam", type=float, default=0.3)
    p.add_argument("--out", required=True)
    p.add_argument("--no-timestamp", action="store_true")

    p = sub.add_parser("aqe", help="alpha query expansion")
    p.add_argument("--query", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--alpha", type=float, default=3.0)
    p.add_argument("--out", required=True)
    p.add_argument("--no-timestamp", action="store_true")

    p = sub.add_parser("dba", help="database-side augmentation")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--alpha", type=float, default=3.0)
    p.add_argument("--out", required=True)
    p.add_argument("--no-timestamp", action="store_true")

    p = sub.add_parser("pseudo-labels", help="debiased pseudo labeling")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--eps", type=float, default=clustering.DEFAULT_EPS)
    p.add_argument("--min-pts", type=int, default=clustering.DEFAULT_MIN_PTS)
    p.add_argument("--debias", action="store_true")
    p.add_argument("--discard-single-camera", action="store_true")
    p.add_argument("--train-list", default=None)
    _add_common(p)

    p = sub.add_parser("corrupt", help="toy pseudo-label corruption")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--split-ratio", type=float, required=True)
    p.add_argument("--corrupt-mode", choices=["camera", "random"],
                   required=True)
    _add_common(p, seed=True)

    p = sub.add_parser("cap", help="cap cameras per identity")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--max-cams", type=int, required=True)
    p.add_argument("--target-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--no-timestamp", action="store_true")

    p = sub.add_parser("analyze-dims",
                       help="camera-mean variance per dimension")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--csv", default=None, help="also write variances as CSV")
    _add_common(p)

    p = sub.add_parser("analyze-displacement",
                       help="mean displacement similarity between cameras")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--dims", default=None)
    _add_common(p)

    p = sub.add_parser("analyze-levels",
                       help="level-wise displacement metrics")
    p.add_argument("--levels", nargs="+", required=True,
                   help="per-level feature files, level 0 first")
    p.add_argument("--variant", choices=["a", "b", "c", "d"], required=True)
    _add_common(p)

    return ap


def _cmd_synth(args):
    config = synthetic.SyntheticConfig(
        args.n_identities, args.n_cameras, args.samples_per_id_cam,
        args.dim, args.sensitive_dims, args.offset_scale, args.noise_scale,
        args.seed)
    es, truth = synthetic.generate(config)
    manifest = store.save_binary(es, args.out)
    if args.truth_out:
        with open(args.truth_out, "w") as f:
            f.write(truth.to_json() + "\n")
    doc = {"schema_version": SCHEMA_VERSION,
           "n_samples": manifest.n_samples, "dim": manifest.dim,
           "checksum": manifest.checksum, "out": args.out}
    if not args.no_timestamp:
        doc["timestamp"] = datetime.datetime.now(
            datetime.timezone.utc).isoformat()
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _cmd_convert(args):
    es = _load(args.inp)
    if str(args.out).endswith(".csv"):
        store.save_csv(es, args.out)
    else:
        store.save_binary(es, args.out)


def _cmd_normalize(args):
    es = _load(args.inp)
    mode = normalize.NormalizationMode(args.mode)
    if args.use_global:
        out = normalize.global_normalize(es, mode)
        stats = None
    else:
        if args.stats_in:
            with open(args.stats_in) as f:
                stats = normalize.NormalizationStats.from_json(f.read())
        elif args.subsample:
            stats = normalize.subsample_stats(es, args.group, args.subsample,
                                              args.seed)
        else:
            stats = normalize.compute_group_stats(es, args.group)
        if args.dims:
            out = normalize.selective_center(es, stats, _read_dims(args.dims))
        else:
            out = normalize.apply_normalization(es, stats, mode)
    if args.stats_out and stats is not None:
        with open(args.stats_out, "w") as f:
            f.write(stats.to_json() + "\n")
    store.save_binary(out, args.out or (args.inp + ".norm.redb"))


def _cmd_whiten(args):
    es = _load(args.inp)
    out = normalize.zca_whiten(es, args.group, args.eps_w)
    store.save_binary(out, args.out or (args.inp + ".zca.redb"))


def _cmd_cluster(args):
    es = store.row_l2_normalize(_load(args.inp))
    assignment = clustering.cluster_embeddings(es, args.eps, args.min_pts)
    _emit(args, {"eps": assignment.eps, "min_pts": assignment.min_pts,
                 "n_clusters": assignment.n_clusters,
                 "labels": assignment.labels.tolist()})


def _cmd_eval(args):
    query = _load(args.query)
    gallery = _load(args.gallery)
    ranks = [int(r) for r in args.ranks.split(",")]
    if args.dist:
        dist = postprocess.load_distance_matrix(args.dist)
        report = metrics.evaluate_ranking(
            dist, query.identity_labels, query.camera_labels,
            gallery.identity_labels, gallery.camera_labels, ranks)
    else:
        report = metrics.evaluate_retrieval(query, gallery, ranks)
    _emit(args, json.loads(report.to_json(
        {"ranks": ranks, "query": args.query, "gallery": args.gallery})))


def _cmd_bias(args):
    es = _load(args.inp)
    report = metrics.bias_report(es, args.eps, args.min_pts, args.debias)
    _emit(args, json.loads(report.to_json()))


def _cmd_rerank(args):
    query = _load(args.query)
    gallery = _load(args.gallery)
    params = postprocess.RerankParams(args.k1, args.k2, args.lam)
    dist = postprocess.k_reciprocal_rerank(query, gallery, params)
    postprocess.save_distance_matrix(dist, args.out)


def _cmd_aqe(args):
    query = _load(args.query)
    gallery = _load(args.gallery)
    out = postprocess.aqe(query, gallery, args.k, args.alpha)
    store.save_binary(out, args.out)


def _cmd_dba(args):
    gallery = _load(args.inp)
    out = postprocess.dba(gallery, args.k, args.alpha)
    store.save_binary(out, args.out)


def _cmd_pseudo_labels(args):
    es = _load(args.inp)
    batch = pipeline.run_pipeline(es, args.eps, args.min_pts, args.debias,
                                  args.discard_single_camera)
    if args.train_list:
        with open(args.train_list, "w") as f:
            f.write(batch.training_list())
    _emit(args, json.loads(batch.to_json()))


def _cmd_corrupt(args):
    es = _load(args.inp)
    labels, entropy, skipped = pipeline.corrupt_labels(
        es, args.split_ratio, args.corrupt_mode, args.seed)
    _emit(args, {"labels": labels.tolist(),
                 "mean_camera_entropy": entropy,
                 "n_identities_skipped": skipped,
                 "config": {"split_ratio": args.split_ratio,
                            "mode": args.corrupt_mode, "seed": args.seed}})


def _cmd_cap(args):
    es = _load(args.inp)
    out = pipeline.cap_cameras_per_identity(es, args.max_cams,
                                            args.target_size, args.seed)
    store.save_binary(out, args.out)


def _cmd_analyze_dims(args):
    es = _load(args.inp)
    var = normalize.camera_mean_dim_variance(es)
    order = normalize.rank_dims_by_camera_variance(es)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write("dim,variance\n")
            for i, v in enumerate(var):
                f.write(f"{i},{v!r}\n")
    _emit(args, {"variance": var.tolist(), "descending_order": order.tolist()})


def _cmd_analyze_displacement(args):
    es = _load(args.inp)
    dims = _read_dims(args.dims) if args.dims else None
    sim = analysis.mean_displacement_similarity(es, dims)
    _emit(args, {"value": sim.value, "n_pairs": sim.n_pairs,
                 "n_skipped": sim.n_skipped})


def _cmd_analyze_levels(args):
    series = analysis.LevelFeatureSeries(tuple(_load(p)
                                               for p in args.levels))
    points = analysis.level_displacement_metric(series, args.variant)
    _emit(args, {"variant": args.variant,
                 "levels": [{"level": pt.level, "value": pt.value,
                             "n_skipped": pt.n_skipped} for pt in points]})


_COMMANDS = {
    "synth": _cmd_synth,
    "convert": _cmd_convert,
    "normalize": _cmd_normalize,
    "whiten": _cmd_whiten,
    "cluster": _cmd_cluster,
    "eval": _cmd_eval,
    "bias": _cmd_bias,
    "rerank": _cmd_rerank,
    "aqe": _cmd_aqe,
    "dba": _cmd_dba,
    "pseudo-labels": _cmd_pseudo_labels,
    "corrupt": _cmd_corrupt,
    "cap": _cmd_cap,
    "analyze-dims": _cmd_analyze_dims,
    "analyze-displacement": _cmd_analyze_displacement,
    "analyze-levels": _cmd_analyze_levels,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        _COMMANDS[args.command](args)
    except errors.CamDebiasError as e:
        sys.stderr.write(f"error: {type(e).__name__}: {e}\n")
        return 1
    except OSError as e:
        sys.stderr.write(f"error: IoError: {e}\n")
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
