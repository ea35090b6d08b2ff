"""scikit-learn compatible front end."""

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from . import merge
from .sgd import TrainConfig, train


class BudgetedSVC(ClassifierMixin, BaseEstimator):
    """Binary kernel SVM trained by budgeted SGD with multi-merge maintenance.

    Parameters
    ----------
    C : float
        Complexity parameter; converted to ``lam = 1 / (n_samples * C)``.
        Ignored when ``lam`` is given.
    gamma : float
        Width of the Gaussian kernel ``exp(-gamma ||x - x'||^2)``.
    budget : int
        Maximal number of support vectors.
    mergees : int
        Support vectors combined per maintenance event.
    strategy : {"mm-bsgd", "mm-gd", "merge", "removal"}
    lam : float or None
        Regularization strength; overrides ``C``.

    Attributes
    ----------
    model_ : BudgetedModel
    report_ : RunReport
    classes_ : ndarray of shape (2,)
    """

    def __init__(
        self,
        C=1.0,
        gamma=1.0,
        budget=100,
        mergees=2,
        strategy="mm-bsgd",
        epochs=1,
        lam=None,
        random_state=0,
        gs_tol=merge.GS_TOL,
        gs_max_iter=merge.GS_MAX_ITER,
        gd_tol=merge.GD_TOL,
        gd_max_iter=merge.GD_MAX_ITER,
        gd_refine=False,
        trace=False,
    ):
        self.C = C
        self.gamma = gamma
        self.budget = budget
        self.mergees = mergees
        self.strategy = strategy
        self.epochs = epochs
        self.lam = lam
        self.random_state = random_state
        self.gs_tol = gs_tol
        self.gs_max_iter = gs_max_iter
        self.gd_tol = gd_tol
        self.gd_max_iter = gd_max_iter
        self.gd_refine = gd_refine
        self.trace = trace

    def _config(self):
        return TrainConfig(
            gamma=self.gamma,
            budget=self.budget,
            lam=self.lam,
            C=None if self.lam is not None else self.C,
            mergees=self.mergees,
            strategy=self.strategy,
            epochs=self.epochs,
            seed=0 if self.random_state is None else int(self.random_state),
            gs_tol=self.gs_tol,
            gs_max_iter=self.gs_max_iter,
            gd_tol=self.gd_tol,
            gd_max_iter=self.gd_max_iter,
            gd_refine=self.gd_refine,
            trace=self.trace,
        )

    @staticmethod
    def _dense(X):
        return X.toarray() if sp.issparse(X) else X

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.sparse = True
        tags.classifier_tags.multi_class = False
        return tags

    def fit(self, X, y):
        X, y = validate_data(self, X, y, accept_sparse="csr", dtype=np.float64)
        check_classification_targets(y)
        classes = np.unique(y)
        if classes.size != 2:
            raise ValueError(f"Only binary classification is supported; got {classes.size} classes")
        self.classes_ = classes
        signed = np.where(y == classes[1], 1.0, -1.0)
        self.model_, self.report_ = train(self._dense(X), signed, self._config())
        self.lambda_ = self.report_.lam
        return self

    def decision_function(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, accept_sparse="csr", dtype=np.float64, reset=False)
        return self.model_.decision_function(self._dense(X))

    def predict(self, X):
        check_is_fitted(self)
        return self.classes_[(self.decision_function(X) >= 0).astype(int)]
