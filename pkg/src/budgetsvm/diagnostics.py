"""Run reports: timing breakdown, degradation log, gradient error, accuracy."""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

# flat CSV layout of a single run report
CSV_COLUMNS = (
    "strategy", "budget", "mergees", "seed", "epochs", "gamma", "C", "lambda",
    "n_train", "steps", "sv_insertions", "maintenance_calls", "final_sv_count",
    "total_train_seconds", "merge_seconds", "merge_fraction",
    "mean_degradation_sq", "avg_gradient_error", "max_gradient_error", "test_accuracy",
)
TIMING_COLUMNS = ("total_train_seconds", "merge_seconds", "merge_fraction")


@dataclass
class RunReport:
    config: dict = field(default_factory=dict)
    lam: float = float("nan")
    n_train: int = 0
    steps: int = 0
    total_train_seconds: float = 0.0
    merge_seconds: float = 0.0
    maintenance_calls: int = 0
    sv_insertions: int = 0
    # one entry per maintenance event
    maintenance_steps: list = field(default_factory=list)
    degradation_log: list = field(default_factory=list)
    gradient_error_log: list = field(default_factory=list)
    avg_gradient_error: float = 0.0
    test_accuracy: float = float("nan")
    final_sv_count: int = 0
    # filled only when training with trace=True
    sv_count_trace: list = field(default_factory=list)
    max_sv_count: int = 0
    gd_traces: list = field(default_factory=list)

    def record_maintenance(self, t, degradation_sq, eta):
        self.maintenance_calls += 1
        self.maintenance_steps.append(int(t))
        self.degradation_log.append(float(degradation_sq))
        self.gradient_error_log.append(math.sqrt(degradation_sq) / float(eta))

    def finalize(self):
        # steps without maintenance have zero gradient error
        self.avg_gradient_error = sum(self.gradient_error_log) / self.steps if self.steps else 0.0

    @property
    def merge_fraction(self):
        return merge_fraction(self)

    @property
    def gradient_error_bounded(self):
        """Whether every gradient error has norm at most one."""
        return all(e <= 1.0 for e in self.gradient_error_log)

    # serialization ---------------------------------------------------------

    def to_json(self):
        return json.dumps(asdict(self), allow_nan=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

    def csv_row(self):
        cfg = self.config
        deg = self.degradation_log
        return {
            "strategy": cfg.get("strategy"),
            "budget": cfg.get("budget"),
            "mergees": cfg.get("mergees"),
            "seed": cfg.get("seed"),
            "epochs": cfg.get("epochs"),
            "gamma": cfg.get("gamma"),
            "C": cfg.get("C"),
            "lambda": self.lam,
            "n_train": self.n_train,
            "steps": self.steps,
            "sv_insertions": self.sv_insertions,
            "maintenance_calls": self.maintenance_calls,
            "final_sv_count": self.final_sv_count,
            "total_train_seconds": self.total_train_seconds,
            "merge_seconds": self.merge_seconds,
            "merge_fraction": merge_fraction(self) if self.total_train_seconds > 0 else 0.0,
            "mean_degradation_sq": sum(deg) / len(deg) if deg else 0.0,
            "avg_gradient_error": self.avg_gradient_error,
            "max_gradient_error": max(self.gradient_error_log, default=0.0),
            "test_accuracy": self.test_accuracy,
        }

    def to_csv(self, header=True):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        if header:
            writer.writeheader()
        writer.writerow({k: _fmt(v) for k, v in self.csv_row().items()})
        return buf.getvalue()

    def pretty(self):
        cfg = self.config
        lines = [
            f"strategy            {cfg.get('strategy')}  B={cfg.get('budget')}  M={cfg.get('mergees')}  seed={cfg.get('seed')}",
            f"lambda              {self.lam:.6g}  (gamma={cfg.get('gamma')}, C={cfg.get('C')})",
            f"steps               {self.steps}",
            f"sv insertions       {self.sv_insertions}",
            f"maintenance calls   {self.maintenance_calls}",
            f"final #SV           {self.final_sv_count}",
            f"train time [s]      {self.total_train_seconds:.3f}",
            f"merge time [s]      {self.merge_seconds:.3f}  ({100 * (merge_fraction(self) if self.total_train_seconds > 0 else 0):.1f}%)",
            f"avg gradient error  {self.avg_gradient_error:.6g}",
        ]
        if not math.isnan(self.test_accuracy):
            lines.append(f"test accuracy       {100 * self.test_accuracy:.2f}%")
        return "\n".join(lines)


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return "" if value is None else value


def merge_fraction(report):
    """Share of the training time spent inside budget maintenance."""
    if report.total_train_seconds <= 0:
        raise ValueError("total training time must be positive")
    return min(report.merge_seconds / report.total_train_seconds, 1.0)


def regret_bound(avg_gradient_error, lam, N):
    """Right-hand side of the averaged-regret bound for budgeted SGD.

    ``(lam U + 2)^2 (ln N + 1) / (2 lam N) + 2 U avg_gradient_error`` with
    ``U = 2 / lam`` for ``lam <= 4`` and ``U = 1 / sqrt(lam)`` otherwise.
    """
    if N < 1 or lam <= 0:
        raise ValueError("need N >= 1 and lam > 0")
    U = 2.0 / lam if lam <= 4 else 1.0 / math.sqrt(lam)
    return (lam * U + 2.0) ** 2 * (math.log(N) + 1.0) / (2.0 * lam * N) + 2.0 * U * avg_gradient_error


def _aligned_predict(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("empty evaluation set")
    if X.shape[1] < model.n_features:
        X = np.hstack([X, np.zeros((X.shape[0], model.n_features - X.shape[1]))])
    elif X.shape[1] > model.n_features:
        model = model.with_n_features(X.shape[1])
    return model.predict(X)


def evaluate_accuracy(model, X, y):
    """Fraction of rows whose predicted label equals ``y``."""
    return float(np.mean(_aligned_predict(model, X) == np.asarray(y)))


def confusion_counts(model, X, y):
    pred = _aligned_predict(model, X)
    y = np.asarray(y)
    return {
        "tp": int(np.sum((pred == 1) & (y == 1))),
        "fp": int(np.sum((pred == 1) & (y == -1))),
        "tn": int(np.sum((pred == -1) & (y == -1))),
        "fn": int(np.sum((pred == -1) & (y == 1))),
    }
