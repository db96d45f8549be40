"""Regression learners used for nuisance and second-stage fits.

Everything goes through :func:`fit` and :func:`predict`::

    model = fit(LearnerSpec("tree", prune=True), X, y)
    yhat = predict(model, X_new)
"""

from drml_iv.learners.api import CellMeansFit, fit, predict
from drml_iv.learners.glm import LinearFit, LogisticFit
from drml_iv.learners.spec import (
    PRESETS,
    ConstantFit,
    FittedLearner,
    LearnerSpec,
    cv_assignment,
    resolve_spec,
    superlearner,
)
from drml_iv.learners.stack import StackFit, nnls_weights
from drml_iv.learners.tree import TreeFit

__all__ = [
    "fit",
    "predict",
    "LearnerSpec",
    "FittedLearner",
    "ConstantFit",
    "LinearFit",
    "LogisticFit",
    "TreeFit",
    "StackFit",
    "CellMeansFit",
    "PRESETS",
    "resolve_spec",
    "superlearner",
    "cv_assignment",
    "nnls_weights",
]
