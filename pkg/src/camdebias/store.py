"""Embedding data model and its file formats.

An :class:`EmbeddingSet` is an immutable bundle of an N x D float32 feature
matrix with aligned label arrays: mandatory camera labels, optional identity
labels (-1 = unknown/junk) and any number of named group label arrays.

Binary format (little-endian), extension ``.redb``:
magic ``REDB``, u16 version=1, u8 dtype=1 (f32), u8 reserved=0, u32 N, u32 D,
N*D f32 features row-major, u32 block_count, then per label block:
u8 name_len, UTF-8 name, N i32 labels. The block named ``camera`` is
mandatory, ``identity`` is optional, every other name becomes a group label.
"""

import csv as _csv
import struct
from dataclasses import dataclass, field

import numpy as np

from . import errors

MAGIC = b"REDB"
VERSION = 1
_DTYPE_F32 = 1


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class EmbeddingSet:
    """Immutable N x D feature matrix plus aligned label arrays."""

    features: np.ndarray
    camera_labels: np.ndarray
    identity_labels: np.ndarray | None = None
    group_labels: dict = field(default_factory=dict)

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float32)
        if feats.ndim != 2:
            raise errors.LabelLengthMismatch("features must be 2-D")
        n = feats.shape[0]
        bad = ~np.isfinite(feats)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise errors.NonFiniteFeature(int(row), int(col))
        cams = np.ascontiguousarray(self.camera_labels, dtype=np.int32)
        if cams.shape != (n,):
            raise errors.LabelLengthMismatch("camera labels must have N entries")
        if n and cams.min() < 0:
            raise errors.LabelLengthMismatch("camera labels must be >= 0")
        object.__setattr__(self, "features", _freeze(feats))
        object.__setattr__(self, "camera_labels", _freeze(cams))
        if self.identity_labels is not None:
            ids = np.ascontiguousarray(self.identity_labels, dtype=np.int32)
            if ids.shape != (n,):
                raise errors.LabelLengthMismatch("identity labels must have N entries")
            if n and ids.min() < -1:
                raise errors.LabelLengthMismatch("identity labels must be >= -1")
            object.__setattr__(self, "identity_labels", _freeze(ids))
        groups = {}
        for name, arr in self.group_labels.items():
            g = np.ascontiguousarray(arr, dtype=np.int32)
            if g.shape != (n,):
                raise errors.LabelLengthMismatch(f"group '{name}' must have N entries")
            if n and g.min() < 0:
                raise errors.LabelLengthMismatch(f"group '{name}' labels must be >= 0")
            groups[name] = _freeze(g)
        object.__setattr__(self, "group_labels", groups)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def labels_for(self, group_name: str) -> np.ndarray:
        """Label array by name: 'camera', 'identity' or a group name."""
        if group_name == "camera":
            return self.camera_labels
        if group_name == "identity":
            if self.identity_labels is None:
                raise errors.UnknownGroupName("identity labels not present")
            return self.identity_labels
        if group_name in self.group_labels:
            return self.group_labels[group_name]
        raise errors.UnknownGroupName(group_name)

    def with_features(self, features: np.ndarray) -> "EmbeddingSet":
        """Same labels, new feature matrix (must keep N and D consistent)."""
        return EmbeddingSet(features, self.camera_labels, self.identity_labels,
                            dict(self.group_labels))


@dataclass(frozen=True)
class DatasetManifest:
    n_samples: int
    dim: int
    label_block_names: tuple
    source_path: str
    checksum: int


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def remap_first_appearance(labels: np.ndarray) -> np.ndarray:
    """Remap labels to 0..K-1 in order of first appearance."""
    mapping = {}
    out = np.empty(len(labels), dtype=np.int32)
    for i, v in enumerate(labels):
        v = int(v)
        if v not in mapping:
            mapping[v] = len(mapping)
        out[i] = mapping[v]
    return out


def _build_set(features, blocks) -> EmbeddingSet:
    if "camera" not in blocks:
        raise errors.HeaderMismatch("mandatory 'camera' label block missing")
    cameras = remap_first_appearance(blocks.pop("camera"))
    identity = blocks.pop("identity", None)
    return EmbeddingSet(features, cameras, identity, blocks)


def load_binary(path) -> EmbeddingSet:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise errors.BadMagic(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 16:
        raise errors.TruncatedFile(str(path))
    version, dtype, _reserved, n, d = struct.unpack_from("<HBBII", data, 4)
    if version != VERSION:
        raise errors.UnsupportedVersion(f"version {version}")
    if dtype != _DTYPE_F32:
        raise errors.UnsupportedVersion(f"dtype {dtype}")
    off = 16
    feat_bytes = n * d * 4
    if len(data) < off + feat_bytes + 4:
        raise errors.TruncatedFile(str(path))
    features = np.frombuffer(data, dtype="<f4", count=n * d, offset=off).reshape(n, d)
    off += feat_bytes
    (block_count,) = struct.unpack_from("<I", data, off)
    off += 4
    blocks = {}
    for _ in range(block_count):
        if len(data) < off + 1:
            raise errors.TruncatedFile(str(path))
        name_len = data[off]
        off += 1
        name = data[off:off + name_len].decode("utf-8")
        off += name_len
        if len(data) < off + 4 * n:
            raise errors.TruncatedFile(str(path))
        blocks[name] = np.frombuffer(data, dtype="<i4", count=n, offset=off).copy()
        off += 4 * n
    return _build_set(features.copy(), blocks)


def save_binary(es: EmbeddingSet, path) -> DatasetManifest:
    blocks = [("camera", es.camera_labels)]
    if es.identity_labels is not None:
        blocks.append(("identity", es.identity_labels))
    blocks.extend(sorted(es.group_labels.items()))
    feat_bytes = np.ascontiguousarray(es.features, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<HBBII", VERSION, _DTYPE_F32, 0,
                                es.n_samples, es.dim))
            f.write(feat_bytes)
            f.write(struct.pack("<I", len(blocks)))
            for name, arr in blocks:
                raw = name.encode("utf-8")
                f.write(struct.pack("<B", len(raw)))
                f.write(raw)
                f.write(np.ascontiguousarray(arr, dtype="<i4").tobytes())
    except OSError as e:
        raise errors.IoError(str(e)) from e
    return DatasetManifest(es.n_samples, es.dim,
                           tuple(name for name, _ in blocks),
                           str(path), fnv1a64(feat_bytes))


def load_csv(path) -> EmbeddingSet:
    with open(path, newline="") as f:
        reader = _csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise errors.HeaderMismatch("empty file") from None
        d = 0
        while d < len(header) and header[d] == f"dim_{d}":
            d += 1
        if d == 0:
            raise errors.HeaderMismatch("expected leading dim_0.. columns")
        rest = header[d:]
        if not rest or rest[0] != "camera":
            raise errors.HeaderMismatch("expected 'camera' column after dims")
        names = ["camera"]
        for col in rest[1:]:
            if col == "identity" and len(names) == 1:
                names.append("identity")
            elif col.startswith("group_"):
                names.append(col[len("group_"):])
            else:
                raise errors.HeaderMismatch(f"unexpected column '{col}'")
        feats, cols = [], [[] for _ in names]
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + len(names):
                raise errors.ParseError(lineno, "wrong field count")
            try:
                feats.append([float(v) for v in row[:d]])
                for j, v in enumerate(row[d:]):
                    cols[j].append(int(v))
            except ValueError as e:
                raise errors.ParseError(lineno, str(e)) from None
    features = np.asarray(feats, dtype=np.float32).reshape(len(feats), d)
    blocks = {name: np.asarray(col, dtype=np.int32)
              for name, col in zip(names, cols)}
    return _build_set(features, blocks)


def save_csv(es: EmbeddingSet, path) -> None:
    names = ["camera"] + (["identity"] if es.identity_labels is not None else [])
    group_names = sorted(es.group_labels)
    header = ([f"dim_{i}" for i in range(es.dim)] + names
              + [f"group_{g}" for g in group_names])
    cols = [es.camera_labels]
    if es.identity_labels is not None:
        cols.append(es.identity_labels)
    cols.extend(es.group_labels[g] for g in group_names)
    try:
        with open(path, "w", newline="") as f:
            w = _csv.writer(f)
            w.writerow(header)
            for i in range(es.n_samples):
                w.writerow([repr(float(v)) for v in es.features[i]]
                           + [int(c[i]) for c in cols])
    except OSError as e:
        raise errors.IoError(str(e)) from e


def row_l2_normalize(es: EmbeddingSet) -> EmbeddingSet:
    feats = es.features.astype(np.float64)
    norms = np.linalg.norm(feats, axis=1)
    zero = np.where(norms == 0.0)[0]
    if zero.size:
        raise errors.ZeroNormRow(int(zero[0]))
    return es.with_features((feats / norms[:, None]).astype(np.float32))


def subset(es: EmbeddingSet, mask) -> EmbeddingSet:
    """Filter rows by boolean mask. Camera labels are NOT remapped, so group
    statistics on the subset still refer to the original cameras."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (es.n_samples,):
        raise errors.MaskLengthMismatch(
            f"mask length {mask.shape} != {es.n_samples}")
    return EmbeddingSet(
        es.features[mask],
        es.camera_labels[mask],
        None if es.identity_labels is None else es.identity_labels[mask],
        {name: arr[mask] for name, arr in es.group_labels.items()},
    )
