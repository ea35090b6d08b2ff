"""Budgeted stochastic gradient descent on the hinge-loss SVM primal."""

import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import merge
from .data import Dataset, shuffled_indices
from .diagnostics import RunReport
from .exceptions import ConfigError
from .model import BudgetedModel

SCHEDULES = ("pegasos",)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run.

    Exactly one of ``lam`` and ``C`` is given; ``C`` is converted to
    ``lam = 1 / (n C)`` once the training set size is known.
    """

    gamma: float
    budget: int
    lam: float = None
    C: float = None
    mergees: int = 2
    strategy: str = "mm-bsgd"
    epochs: int = 1
    seed: int = 0
    schedule: str = "pegasos"
    gs_tol: float = merge.GS_TOL
    gs_max_iter: int = merge.GS_MAX_ITER
    gd_tol: float = merge.GD_TOL
    gd_max_iter: int = merge.GD_MAX_ITER
    gd_refine: bool = False
    trace: bool = False

    def validate(self):
        if (self.lam is None) == (self.C is None):
            raise ConfigError("give exactly one of lambda and C")
        if self.lam is not None and not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if self.C is not None and not self.C > 0:
            raise ConfigError("C must be positive")
        if not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        if self.budget < 2:
            raise ConfigError("budget must be at least 2")
        if self.mergees < 2:
            raise ConfigError("mergees must be at least 2")
        if self.mergees > self.budget:
            raise ConfigError(f"mergees ({self.mergees}) exceeds budget ({self.budget})")
        if self.strategy not in merge.STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; choose from {', '.join(merge.STRATEGIES)}")
        if self.strategy in ("merge", "removal") and self.mergees != 2:
            raise ConfigError(f"strategy {self.strategy!r} works on pairs; mergees must be 2")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if not (self.gs_tol > 0 and self.gd_tol > 0 and self.gs_max_iter >= 1 and self.gd_max_iter >= 1):
            raise ConfigError("search tolerances and iteration caps must be positive")
        return self

    def resolve_lambda(self, n):
        return self.lam if self.lam is not None else 1.0 / (n * self.C)

    def as_dict(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class StepOutcome:
    margin_violated: bool = False
    sv_added: bool = False
    coalesced: bool = False
    maintenance_triggered: bool = False
    degradation_sq: float = None
    maintenance: merge.MaintenanceResult = None


def learning_rate(t, lam, schedule="pegasos"):
    if t < 1:
        raise ValueError("step counter starts at 1")
    return 1.0 / (lam * t)


def sgd_step(model, x, y, t, lam, config, x_sq=None, maintain=None, source=None):
    """One stochastic subgradient step on the point ``(x, y)``.

    The margin is taken before the step's shrink. ``source`` is the training
    index of ``x``; a repeated violation by a point that is still its own SV
    grows that SV's coefficient. ``maintain`` replaces the default
    ``merge.budget_maintain(model, config)`` call (used for timing).
    """
    if x_sq is None:
        x_sq = float(x @ x)
    eta = learning_rate(t, lam, config.schedule)
    m = model.margin(x, x_sq)
    factor = 1.0 - lam * eta
    if factor > 0.0:
        model.rescale(factor)
    else:
        model.clear()
    out = StepOutcome()
    if y * m < 1.0:
        out.margin_violated = True
        before = model.size
        model.add_sv(x, eta * y, x_sq, source)
        out.sv_added = model.size > before
        out.coalesced = not out.sv_added
        if model.size > model.budget:
            result = (maintain or merge.budget_maintain)(model, config)
            model.prune_zeros()
            out.maintenance_triggered = True
            out.degradation_sq = result.degradation_sq
            out.maintenance = result
    return out


def _as_arrays(data, y):
    if isinstance(data, Dataset):
        return data.to_arrays()
    X = np.ascontiguousarray(data, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ConfigError("need a nonempty 2-D X with one label per row")
    if not np.all(np.abs(y) == 1):
        raise ConfigError("labels must be -1 or +1")
    return X, y


def train(X, y=None, config=None):
    """Train a budgeted model; returns ``(model, report)``.

    ``X`` is a dense array with labels ``y`` in {-1, +1}, or a Dataset (then
    ``y`` is ignored). Fully deterministic given ``config.seed``.
    """
    config = config.validate()
    X, y = _as_arrays(X, y)
    n, d = X.shape
    lam = config.resolve_lambda(n)
    X_sq = np.einsum("ij,ij->i", X, X)
    model = BudgetedModel(d, config.budget, config.gamma)
    report = RunReport(config=config.as_dict(), lam=lam, n_train=n)
    merge_seconds = 0.0
    perf = time.perf_counter

    def maintain(m, cfg):
        nonlocal merge_seconds
        start = perf()
        result = merge.budget_maintain(m, cfg)
        merge_seconds += perf() - start
        return result

    t = 0
    started = perf()
    for epoch in range(config.epochs):
        for i in shuffled_indices(n, epoch, config.seed):
            t += 1
            out = sgd_step(model, X[i], y[i], t, lam, config, X_sq[i], maintain, int(i))
            if out.sv_added:
                report.sv_insertions += 1
            if out.maintenance_triggered:
                res = out.maintenance
                report.record_maintenance(t, res.degradation_sq, learning_rate(t, lam, config.schedule))
                if config.trace:
                    report.sv_count_trace.append(model.size)
                    if res.gd_trace:
                        report.gd_traces.append(res.gd_trace)
            if config.trace:
                peak = model.size + (out.maintenance.removed if out.maintenance_triggered else 0)
                report.max_sv_count = max(report.max_sv_count, peak)
    report.total_train_seconds = perf() - started
    report.merge_seconds = merge_seconds
    report.steps = t
    report.final_sv_count = model.size
    report.finalize()
    return model, report
