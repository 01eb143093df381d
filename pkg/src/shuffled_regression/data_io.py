"""Dataset ingestion, k-mer features, grouping and train/test splitting.

CSV dialect: comma separated, UTF-8, header row, '.' decimal point.
"""
from dataclasses import dataclass
import csv
import hashlib
import itertools
import json
import math
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .errors import DegenerateLabels, DimensionMismatch, IngestError, InvalidAlphabet, InvalidG
from .estimators import GroupedDataset, rng_stream
from .linalg import as_design, as_labels

ALPHABET = "ACGT"


@dataclass
class RawTable:
    columns: List[str]
    X: np.ndarray
    y: np.ndarray
    label: str
    sequences: Optional[List[str]] = None

    @property
    def feature_names(self) -> List[str]:
        return [c for c in self.columns if c != self.label and c != "sequence"]


def _parse_float(text, path, row, col):
    try:
        v = float(text)
    except ValueError:
        raise IngestError(f"{path}: row {row}, column {col!r}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise IngestError(f"{path}: row {row}, column {col!r}: non-finite value {text!r}")
    return v


def _read_rows(path):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}: empty file, header row required") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestError(f"{path}: row {lineno}: expected {len(header)} cells, found {len(row)}")
            rows.append((lineno, row))
    if not rows:
        raise IngestError(f"{path}: no data rows")
    return header, rows


def read_table(path, label: str, features: Optional[Sequence[str]] = None) -> RawTable:
    """Numeric CSV; ``label`` names the label column, every other column is a feature
    unless ``features`` selects a subset."""
    header, rows = _read_rows(path)
    if label not in header:
        raise IngestError(f"{path}: label column {label!r} not in header {header}")
    if features is None:
        features = [c for c in header if c != label]
    missing = [c for c in features if c not in header]
    if missing:
        raise IngestError(f"{path}: feature columns {missing} not in header {header}")
    fidx = [header.index(c) for c in features]
    lidx = header.index(label)
    X = np.array([[_parse_float(row[j], path, ln, header[j]) for j in fidx] for ln, row in rows])
    y = np.array([_parse_float(row[lidx], path, ln, label) for ln, row in rows])
    return RawTable(list(features) + [label], X, y, label)


def read_sequences(path, max_k: int = 3) -> RawTable:
    """Sequence CSV with columns ``sequence,label``; features are k-mer counts."""
    header, rows = _read_rows(path)
    for col in ("sequence", "label"):
        if col not in header:
            raise IngestError(f"{path}: required column {col!r} not in header {header}")
    sidx, lidx = header.index("sequence"), header.index("label")
    seqs = [row[sidx].strip() for _, row in rows]
    y = np.array([_parse_float(row[lidx], path, ln, "label") for ln, row in rows])
    try:
        X = featurize_kmers(seqs, max_k)
    except InvalidAlphabet as e:
        raise InvalidAlphabet(f"{path}: {e}") from None
    return RawTable(kmer_names(max_k) + ["label"], X, y, "label", sequences=seqs)


def kmer_names(max_k: int) -> List[str]:
    return ["".join(t) for k in range(1, max_k + 1) for t in itertools.product(ALPHABET, repeat=k)]


def featurize_kmers(sequences: Sequence[str], max_k: int = 3) -> np.ndarray:
    """Overlapping k-mer counts for k = 1..max_k, k-mers in lexicographic ACGT order.

    >>> featurize_kmers(["ACG"], 1).tolist()
    [[1.0, 1.0, 1.0, 0.0]]
    """
    if max_k < 1:
        raise DimensionMismatch(f"max_k must be >= 1, got {max_k}")
    code = {c: i for i, c in enumerate(ALPHABET)}
    offsets = np.cumsum([0] + [4**k for k in range(1, max_k + 1)])
    out = np.zeros((len(sequences), offsets[-1]))
    for row, seq in enumerate(sequences):
        try:
            digits = np.array([code[c] for c in seq.upper()], dtype=np.int64)
        except KeyError:
            bad = next(c for c in seq if c.upper() not in code)
            raise InvalidAlphabet(f"row {row}: invalid character {bad!r} in sequence {seq!r}") from None
        for k in range(1, max_k + 1):
            if digits.shape[0] < k:
                break
            idx = np.zeros(digits.shape[0] - k + 1, dtype=np.int64)
            for t in range(k):
                idx = idx * 4 + digits[t : digits.shape[0] - k + 1 + t]
            out[row, offsets[k - 1] : offsets[k]] = np.bincount(idx, minlength=4**k)
    return out


@dataclass(frozen=True)
class AffineParams:
    offset: float
    scale: float

    def inverse(self, y_norm):
        return np.asarray(y_norm) * self.scale + self.offset


def normalize_labels(y):
    """Map labels affinely onto [0, 1]; returns ``(y_norm, params)``."""
    y = as_labels(y)
    lo, hi = float(y.min()), float(y.max())
    if not hi > lo:
        raise DegenerateLabels("labels are all equal; cannot rescale to [0, 1]")
    params = AffineParams(lo, hi - lo)
    return (y - lo) / params.scale, params


def equal_group_bounds(n: int, G: int) -> np.ndarray:
    """Contiguous sizes differing by at most one, larger groups first."""
    if G < 1 or n < G:
        raise InvalidG(f"need 1 <= G <= n, got G={G}, n={n}")
    q, r = divmod(n, G)
    sizes = [q + 1] * r + [q] * (G - r)
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


def _group_by(X, y, key, G) -> GroupedDataset:
    X = as_design(X)
    y = as_labels(y, X.shape[0])
    bounds = equal_group_bounds(X.shape[0], G)
    order = np.argsort(key, kind="stable")
    return GroupedDataset(X[order], y[order], bounds, row_ids=order)


def group_by_label_quantiles(X, y, G: int) -> GroupedDataset:
    """Sort rows by label and cut into ``G`` contiguous near-equal groups.

    ``row_ids`` of the result maps rows back to the input order.
    """
    return _group_by(X, y, np.asarray(y, dtype=float), G)


def group_by_feature(X, y, feature_index: int, G: int) -> GroupedDataset:
    X = as_design(X)
    if not 0 <= feature_index < X.shape[1]:
        raise InvalidG(f"feature index {feature_index} outside 0..{X.shape[1] - 1}")
    return _group_by(X, y, X[:, feature_index], G)


@dataclass
class SplitDataset:
    """``train.y`` are the (possibly shuffled) training labels; ``train_y_true``
    and ``test_y`` are the true ones."""

    train: GroupedDataset
    train_y_true: np.ndarray
    test_X: np.ndarray
    test_y: np.ndarray
    train_rows: np.ndarray
    test_rows: np.ndarray
    split_seed: int


def split_train_test(data: GroupedDataset, test_fraction: float, seed: int, y_true=None) -> SplitDataset:
    """Uniform random row split; training rows keep their group and stay contiguous.

    Row indices refer to the order of ``data``. ``y_true`` (default
    ``data.y``) supplies the test labels and the training ground truth.
    """
    n = data.X.shape[0]
    if not 0.0 < test_fraction < 1.0:
        raise DimensionMismatch(f"test_fraction must lie strictly in (0, 1), got {test_fraction}")
    n_test = int(round(test_fraction * n))
    if n_test < 1 or n_test >= n:
        raise DimensionMismatch(f"test_fraction={test_fraction} leaves an empty side for n={n}")
    y_true = data.y if y_true is None else as_labels(y_true, n)
    perm = rng_stream(seed).permutation(n)
    test_rows = np.sort(perm[:n_test])
    train_rows = np.sort(perm[n_test:])
    groups = data.group_of_rows()[train_rows]
    counts = np.bincount(groups, minlength=data.n_groups)
    # groups that lost every row in the split disappear
    bounds = np.concatenate([[0], np.cumsum(counts[counts > 0])])
    train = GroupedDataset(data.X[train_rows], data.y[train_rows], bounds)
    return SplitDataset(
        train, y_true[train_rows], data.X[test_rows], y_true[test_rows], train_rows, test_rows, seed
    )


def add_intercept(X) -> np.ndarray:
    X = as_design(X)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def write_dataset_csv(path, X, y, feature_names=None, label="y"):
    """Write features and label with round-trip exact float formatting."""
    X = as_design(X)
    y = as_labels(y, X.shape[0])
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(X.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(list(feature_names) + [label])
        for row, v in zip(X, y):
            w.writerow([repr(float(a)) for a in row] + [repr(float(v))])


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, **fields):
    """JSON run manifest; ``inputs`` paths are replaced by their sha256 digests."""
    inputs = fields.pop("inputs", {}) or {}
    fields["inputs"] = {name: {"path": str(p), "sha256": file_digest(p)} for name, p in sorted(inputs.items())}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(fields, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")
