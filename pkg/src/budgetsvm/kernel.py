"""Sparse vectors and the Gaussian kernel.

``SparseVector`` is the public point type (1-based feature indices, as in
svmlight files). The training loop works on dense rows for speed; the
``*_rows`` helpers at the bottom are the vectorized counterparts used there.
"""

import math

import numpy as np

from .exceptions import DegenerateWeights

DENOM_EPSILON = 1e-10


class SparseVector:
    """Immutable sparse vector with strictly increasing 1-based indices.

    Zero values are dropped at construction and the squared norm is cached.
    """

    __slots__ = ("indices", "values", "norm_sq")

    def __init__(self, indices=(), values=(), *, check=True):
        idx = np.asarray(indices, dtype=np.int64).ravel()
        val = np.asarray(values, dtype=np.float64).ravel()
        if idx.shape != val.shape:
            raise ValueError("indices and values differ in length")
        if check and idx.size:
            if idx[0] < 1:
                raise ValueError("feature indices must be positive")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("feature indices must be strictly increasing")
        keep = val != 0.0
        if not keep.all():
            idx, val = idx[keep], val[keep]
        idx.flags.writeable = False
        val.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "norm_sq", float(np.dot(val, val)))

    def __setattr__(self, name, value):
        raise AttributeError("SparseVector is immutable")

    @classmethod
    def from_dict(cls, mapping):
        items = sorted(mapping.items())
        return cls([k for k, _ in items], [v for _, v in items])

    @classmethod
    def from_dense(cls, row):
        row = np.asarray(row, dtype=np.float64).ravel()
        nz = np.flatnonzero(row)
        return cls(nz + 1, row[nz], check=False)

    def to_dense(self, n_features=None):
        if n_features is None:
            n_features = self.max_index
        if self.max_index > n_features:
            raise ValueError(f"vector has index {self.max_index} > n_features={n_features}")
        out = np.zeros(n_features)
        out[self.indices - 1] = self.values
        return out

    @property
    def max_index(self):
        return int(self.indices[-1]) if self.indices.size else 0

    def items(self):
        return zip(self.indices.tolist(), self.values.tolist())

    def __len__(self):
        return int(self.indices.size)

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.indices, other.indices) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.indices.tobytes(), self.values.tobytes()))

    def __repr__(self):
        body = ", ".join(f"{i}:{v!r}" for i, v in self.items())
        return f"SparseVector({{{body}}})"


def dot(a, b):
    _, ia, ib = np.intersect1d(a.indices, b.indices, assume_unique=True, return_indices=True)
    return float(np.dot(a.values[ia], b.values[ib]))


def squared_distance(a, b):
    return max(a.norm_sq + b.norm_sq - 2.0 * dot(a, b), 0.0)


def gaussian_kernel(a, b, gamma):
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return math.exp(-gamma * squared_distance(a, b))


def line_point(a, b, h):
    """Return ``h*a + (1-h)*b`` over the union of both index sets."""
    union = np.union1d(a.indices, b.indices)
    vals = np.zeros(union.size)
    vals[np.searchsorted(union, a.indices)] += h * a.values
    vals[np.searchsorted(union, b.indices)] += (1.0 - h) * b.values
    return SparseVector(union, vals, check=False)


def weighted_mean(points, weights):
    """Return ``sum(w_i x_i) / sum(w_i)``.

    Raises DegenerateWeights when the weight sum is within
    ``1e-10 * max|w|`` of zero.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if len(points) != weights.size or weights.size == 0:
        raise ValueError("need one weight per point")
    total = float(weights.sum())
    if abs(total) <= DENOM_EPSILON * float(np.abs(weights).max()):
        raise DegenerateWeights(f"weight sum {total!r} is numerically zero")
    union = np.unique(np.concatenate([p.indices for p in points]))
    vals = np.zeros(union.size)
    for p, w in zip(points, weights):
        vals[np.searchsorted(union, p.indices)] += w * p.values
    return SparseVector(union, vals / total, check=False)


# dense, vectorized counterparts -------------------------------------------

def squared_distance_rows(rows, row_sq, x, x_sq):
    """Squared distances between each row of ``rows`` and ``x``, clamped at 0."""
    d = row_sq + x_sq - 2.0 * (rows @ x)
    np.maximum(d, 0.0, out=d)
    return d


def gaussian_rows(rows, row_sq, x, x_sq, gamma):
    d = squared_distance_rows(rows, row_sq, x, x_sq)
    d *= -gamma
    return np.exp(d, out=d)


def gaussian_matrix(A, B, gamma, A_sq=None, B_sq=None):
    """Kernel matrix ``K[i, j] = exp(-gamma ||A_i - B_j||^2)`` for dense rows."""
    if A_sq is None:
        A_sq = np.einsum("ij,ij->i", A, A)
    if B_sq is None:
        B_sq = np.einsum("ij,ij->i", B, B)
    D = A_sq[:, None] + B_sq[None, :] - 2.0 * (A @ B.T)
    np.maximum(D, 0.0, out=D)
    D *= -gamma
    return np.exp(D, out=D)
