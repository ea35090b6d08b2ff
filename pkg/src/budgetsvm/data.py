"""svmlight/libsvm input, label normalization and shuffling.

All randomness comes from numpy's PCG64 generator seeded through a
``SeedSequence`` built from the root seed (plus the epoch for shuffles).
"""

import gzip
import io
import os
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidFraction, ParseError
from .kernel import SparseVector

GZIP_MAGIC = b"\x1f\x8b"


@dataclass(frozen=True, eq=False)
class Dataset:
    points: tuple
    labels: np.ndarray
    max_feature_index: int

    def __post_init__(self):
        if len(self.points) == 0:
            raise ValueError("dataset is empty")
        if len(self.points) != len(self.labels):
            raise ValueError("points and labels differ in length")
        if not np.all(np.abs(self.labels) == 1):
            raise ValueError("labels must be -1 or +1")

    @property
    def n(self):
        return len(self.points)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.max_feature_index == other.max_feature_index
            and np.array_equal(self.labels, other.labels)
            and all(a == b for a, b in zip(self.points, other.points))
        )

    @classmethod
    def from_arrays(cls, X, y):
        X = np.asarray(X, dtype=np.float64)
        points = tuple(SparseVector.from_dense(row) for row in X)
        return cls(points, np.asarray(y, dtype=np.int8), X.shape[1])

    def to_arrays(self, n_features=None):
        """Dense ``(X, y)``; ``n_features`` pads beyond the largest index."""
        d = self.max_feature_index if n_features is None else n_features
        if d < self.max_feature_index:
            raise ValueError(f"n_features={d} is smaller than max index {self.max_feature_index}")
        X = np.zeros((self.n, d))
        lengths = np.fromiter((len(p) for p in self.points), dtype=np.int64, count=self.n)
        if lengths.sum():
            rows = np.repeat(np.arange(self.n), lengths)
            cols = np.concatenate([p.indices for p in self.points]) - 1
            X[rows, cols] = np.concatenate([p.values for p in self.points])
        return X, self.labels.astype(np.float64)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        points = tuple(self.points[i] for i in idx)
        return Dataset(points, self.labels[idx], self.max_feature_index)


def _map_labels(raw, raw_lines):
    distinct = sorted(set(raw))
    if set(distinct) <= {-1.0, 1.0}:
        return np.asarray(raw, dtype=np.int8)
    if len(distinct) == 1:
        raise ParseError(raw_lines[0], f"cannot map single label {distinct[0]!r} to +1/-1")
    low, high = distinct
    return np.where(np.asarray(raw) == high, 1, -1).astype(np.int8)


def parse_svmlight(stream):
    """Parse svmlight text from a binary or text stream into a Dataset.

    Labels already in {-1, +1} are kept; otherwise the larger of exactly two
    distinct raw labels becomes +1. ``qid:`` tokens are ignored.
    """
    points, raw, raw_lines, seen = [], [], [], set()
    max_index = 0
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(lineno, f"bad label {tokens[0]!r}") from None
        if label not in seen:
            seen.add(label)
            if len(seen) > 2:
                raise ParseError(lineno, "more than two distinct labels")
        indices, values = [], []
        prev = 0
        for tok in tokens[1:]:
            key, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(lineno, f"malformed token {tok!r}")
            if key == "qid":
                continue
            try:
                idx, v = int(key), float(val)
            except ValueError:
                raise ParseError(lineno, f"malformed token {tok!r}") from None
            if idx <= prev:
                raise ParseError(lineno, f"index {idx} not increasing")
            prev = idx
            indices.append(idx)
            values.append(v)
        points.append(SparseVector(indices, values, check=False))
        raw.append(label)
        raw_lines.append(lineno)
        if prev > max_index:
            max_index = prev
    if not points:
        raise ParseError(0, "no data")
    return Dataset(tuple(points), _map_labels(raw, raw_lines), max(max_index, 1))


def load_svmlight(path):
    """Load a plain or gzip-compressed svmlight file."""
    with open(path, "rb") as fh:
        head = fh.read(2)
        fh.seek(0)
        if head == GZIP_MAGIC:
            with gzip.open(fh, "rb") as gz:
                return parse_svmlight(io.BufferedReader(gz))
        return parse_svmlight(fh)


def dump_svmlight(dataset, stream):
    for p, y in zip(dataset.points, dataset.labels):
        feats = " ".join(f"{i}:{v!r}" for i, v in p.items())
        stream.write(f"{int(y):+d} {feats}".rstrip() + "\n")


def resolve_path(path):
    """Prefix relative paths with ``$BUDGETSVM_DATA_DIR`` when it is set."""
    base = os.environ.get("BUDGETSVM_DATA_DIR")
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def rng_for(seed, *stream):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *stream])))


def shuffled_indices(n, epoch, seed):
    """Deterministic uniform permutation of ``0..n-1`` for one epoch."""
    if n < 1:
        raise ValueError("n must be positive")
    return rng_for(seed, 0, epoch).permutation(n)


def split(dataset, fraction, seed):
    """Random train/test split with ``floor(fraction * n)`` training points."""
    if not 0.0 < fraction < 1.0:
        raise InvalidFraction(f"fraction {fraction} not in (0, 1)")
    n_train = int(np.floor(fraction * dataset.n))
    if n_train == 0 or n_train == dataset.n:
        raise InvalidFraction(f"fraction {fraction} leaves an empty part of {dataset.n} points")
    perm = rng_for(seed, 1).permutation(dataset.n)
    return dataset.subset(np.sort(perm[:n_train])), dataset.subset(np.sort(perm[n_train:]))


def minmax_scale(X_train, *others):
    """Scale columns to [0, 1] using the training range (constant columns left at 0)."""
    lo = X_train.min(axis=0)
    span = X_train.max(axis=0) - lo
    span[span == 0] = 1.0
    return tuple((X - lo) / span for X in (X_train, *others))
