"""The budgeted kernel expansion ``w = scale * sum_j alpha_j phi(c_j)``.

Centers live in a dense ``(B + 1, n_features)`` buffer so that a margin is a
single matrix-vector product. The per-step shrink of all coefficients is
folded into one global ``scale``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ModelFormatError, ZeroCoefficient
from .kernel import SparseVector, gaussian_matrix, gaussian_rows

SCALE_FLOOR = 1e-100
HEADER = "budgetsvm v1"


@dataclass(frozen=True)
class SupportVector:
    center: SparseVector
    alpha: float


class BudgetedModel:
    def __init__(self, n_features, budget, gamma):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        if budget < 1:
            raise ValueError("budget must be positive")
        self.n_features = int(n_features)
        self.budget = int(budget)
        self.gamma = float(gamma)
        self.scale = 1.0
        self.bias = 0.0
        self.size = 0
        cap = self.budget + 1
        self._centers = np.zeros((cap, self.n_features))
        self._sq = np.zeros(cap)
        self._alpha = np.zeros(cap)
        # training index behind each slot (-1 for merged centers) and its inverse
        self._source = np.full(cap, -1, dtype=np.int64)
        self._slot_of = {}

    # views over the live part of the buffers
    @property
    def centers(self):
        return self._centers[: self.size]

    @property
    def center_sq(self):
        return self._sq[: self.size]

    @property
    def alpha(self):
        return self._alpha[: self.size]

    @property
    def effective_alpha(self):
        return self.scale * self._alpha[: self.size]

    def __len__(self):
        return self.size

    @property
    def svs(self):
        return [
            SupportVector(SparseVector.from_dense(c), float(a))
            for c, a in zip(self.centers, self.effective_alpha)
        ]

    def _as_row(self, x):
        if isinstance(x, SparseVector):
            return x.to_dense(self.n_features)
        return np.asarray(x, dtype=np.float64)

    def kernel_row(self, x, x_sq=None):
        x = self._as_row(x)
        if x_sq is None:
            x_sq = float(x @ x)
        return gaussian_rows(self.centers, self.center_sq, x, x_sq, self.gamma)

    def margin(self, x, x_sq=None):
        if self.size == 0:
            return self.bias
        return self.scale * float(self.alpha @ self.kernel_row(x, x_sq)) + self.bias

    def predict_one(self, x):
        return 1 if self.margin(x) >= 0 else -1

    def decision_function(self, X, chunk=2048):
        X = np.asarray(X, dtype=np.float64)
        out = np.full(X.shape[0], self.bias)
        if self.size == 0:
            return out
        alpha = self.effective_alpha
        for start in range(0, X.shape[0], chunk):
            K = gaussian_matrix(X[start:start + chunk], self.centers, self.gamma, B_sq=self.center_sq)
            out[start:start + chunk] += K @ alpha
        return out

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0, 1, -1)

    # mutation ----------------------------------------------------------

    def add_sv(self, x, alpha_effective, x_sq=None, source=None):
        """Append a support vector; returns its slot.

        ``source`` identifies the training point behind ``x``. While that
        point is still an unmerged SV the coefficient is added to it instead
        of creating a duplicate center.
        """
        if alpha_effective == 0:
            raise ZeroCoefficient("support vector coefficient must be nonzero")
        if source is not None and source in self._slot_of:
            j = self._slot_of[source]
            self._alpha[j] += alpha_effective / self.scale
            return j
        if self.size > self.budget:
            raise AssertionError(f"budget overflow: {self.size} > B + 1 = {self.budget + 1}")
        x = self._as_row(x)
        j = self.size
        self._centers[j] = x
        self._sq[j] = float(x @ x) if x_sq is None else x_sq
        self._alpha[j] = alpha_effective / self.scale
        self._source[j] = -1 if source is None else source
        if source is not None:
            self._slot_of[source] = j
        self.size += 1
        return j

    def rescale(self, factor):
        if factor <= 0:
            raise ValueError("rescale factor must be positive")
        self.scale *= factor
        if self.scale < SCALE_FLOOR:
            self._alpha[: self.size] *= self.scale
            self.scale = 1.0

    def clear(self):
        self.size = 0
        self.scale = 1.0
        self._slot_of.clear()

    def remove(self, indices):
        """Delete support vectors; the last rows move into the freed slots."""
        for j in sorted(set(int(i) for i in indices), reverse=True):
            last = self.size - 1
            self._slot_of.pop(int(self._source[j]), None)
            if j != last:
                self._centers[j] = self._centers[last]
                self._sq[j] = self._sq[last]
                self._alpha[j] = self._alpha[last]
                self._source[j] = self._source[last]
                if self._source[j] >= 0:
                    self._slot_of[int(self._source[j])] = j
            self.size -= 1

    def prune_zeros(self):
        zero = np.flatnonzero(self.alpha == 0)
        if zero.size:
            self.remove(zero)
        return int(zero.size)

    def copy(self):
        other = BudgetedModel(self.n_features, self.budget, self.gamma)
        other.scale, other.bias, other.size = self.scale, self.bias, self.size
        other._centers[:] = self._centers
        other._sq[:] = self._sq
        other._alpha[:] = self._alpha
        other._source[:] = self._source
        other._slot_of = dict(self._slot_of)
        return other

    def with_n_features(self, n_features):
        """Copy widened to ``n_features`` (extra coordinates are zero)."""
        if n_features < self.n_features:
            raise ValueError("cannot shrink the feature space")
        other = BudgetedModel(n_features, self.budget, self.gamma)
        other.scale, other.bias, other.size = self.scale, self.bias, self.size
        other._centers[:, : self.n_features] = self._centers
        other._sq[:] = self._sq
        other._alpha[:] = self._alpha
        other._source[:] = self._source
        other._slot_of = dict(self._slot_of)
        return other

    # diagnostics ---------------------------------------------------------

    def weight_norm_sq(self):
        if self.size == 0:
            return 0.0
        a = self.effective_alpha
        K = gaussian_matrix(self.centers, self.centers, self.gamma, self.center_sq, self.center_sq)
        return float(a @ K @ a)

    def primal_objective(self, X, y, lam):
        """``lam/2 ||w||^2 + mean hinge loss`` over ``(X, y)``."""
        m = self.decision_function(X)
        hinge = np.maximum(0.0, 1.0 - np.asarray(y) * m)
        return 0.5 * lam * self.weight_norm_sq() + float(hinge.mean())

    # text format ---------------------------------------------------------

    def dumps(self):
        lines = [f"{HEADER} gamma={self.gamma:.17g} bias={self.bias:.17g} B={self.budget}"]
        for c, a in zip(self.centers, self.effective_alpha):
            nz = np.flatnonzero(c)
            feats = "".join(f" {i + 1}:{c[i]:.17g}" for i in nz)
            lines.append(f"{a:.17g}{feats}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text, n_features=None):
        lines = text.splitlines()
        if not lines:
            raise ModelFormatError("empty model file")
        head = lines[0].split()
        if head[:2] != HEADER.split() or len(head) != 5:
            raise ModelFormatError(f"bad header {lines[0]!r}")
        try:
            fields = dict(tok.split("=", 1) for tok in head[2:])
            gamma, bias, budget = float(fields["gamma"]), float(fields["bias"]), int(fields["B"])
        except (KeyError, ValueError) as exc:
            raise ModelFormatError(f"bad header {lines[0]!r}") from exc
        rows = []
        for lineno, line in enumerate(lines[1:], start=2):
            tokens = line.split()
            if not tokens:
                continue
            try:
                alpha = float(tokens[0])
                feats = [(int(k), float(v)) for k, v in (t.split(":", 1) for t in tokens[1:])]
            except ValueError as exc:
                raise ModelFormatError(f"line {lineno}: {exc}") from exc
            if alpha == 0 or not math.isfinite(alpha) or any(k < 1 for k, _ in feats):
                raise ModelFormatError(f"line {lineno}: invalid support vector")
            rows.append((alpha, feats))
        if len(rows) > budget + 1 or gamma <= 0 or budget < 1:
            raise ModelFormatError("header inconsistent with contents")
        dim = max((k for _, feats in rows for k, _ in feats), default=1)
        model = cls(max(dim, n_features or 0), budget, gamma)
        model.bias = bias
        for alpha, feats in rows:
            x = np.zeros(model.n_features)
            for k, v in feats:
                x[k - 1] = v
            model.add_sv(x, alpha)
        return model

    @classmethod
    def load(cls, path, n_features=None):
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read(), n_features)


def margin(model, x):
    return model.margin(x)


def predict(model, x):
    """Sign of the margin; a margin of exactly zero maps to +1."""
    return model.predict_one(x)
