"""Budgeted kernel SVM training with multi-merge budget maintenance."""

from .data import Dataset, dump_svmlight, load_svmlight, parse_svmlight, shuffled_indices, split
from .diagnostics import RunReport, evaluate_accuracy, merge_fraction, regret_bound
from .estimator import BudgetedSVC
from .exceptions import (
    BudgetSVMError,
    ConfigError,
    DegenerateWeights,
    InsufficientSVs,
    InvalidFraction,
    ModelFormatError,
    ParseError,
    UnknownPreset,
    ZeroCoefficient,
)
from .kernel import SparseVector, dot, gaussian_kernel, line_point, squared_distance, weighted_mean
from .model import BudgetedModel, SupportVector
from .presets import LIBSVM_ACCURACY, PRESETS, preset
from .sgd import TrainConfig, learning_rate, sgd_step, train

__version__ = "0.1.0"
