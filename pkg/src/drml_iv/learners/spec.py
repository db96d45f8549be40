from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from drml_iv.errors import InputError

KINDS = ("linear", "logistic", "glm", "tree", "stack", "mean", "cell_means")


@dataclass(frozen=True)
class LearnerSpec:
    """What to fit.

    ``glm`` resolves at fit time to ``logistic`` for probability targets and
    ``linear`` otherwise. ``mean`` and ``cell_means`` are the constant and
    per-cell-average regressions used as DR-Learner second stages.
    """

    kind: str
    max_depth: int = 6
    min_leaf: int = 20
    prune: bool = False
    members: tuple["LearnerSpec", ...] = ()
    cv_folds: int = 5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown learner kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "members", tuple(self.members))
        if self.kind == "stack":
            if not self.members:
                raise InputError("stack needs at least one member")
            if any(m.kind == "stack" for m in self.members):
                raise InputError("stack members may not be stacks")
        if self.max_depth < 0 or self.min_leaf < 1:
            raise InputError("tree needs max_depth >= 0 and min_leaf >= 1")
        if self.cv_folds < 2:
            raise InputError("cv_folds must be at least 2")

    @property
    def label(self) -> str:
        if self.kind == "tree":
            return f"tree(depth={self.max_depth},leaf={self.min_leaf}{',pruned' if self.prune else ''})"
        if self.kind == "stack":
            return "stack[" + ",".join(m.label for m in self.members) + "]"
        return self.kind


def superlearner(cv_folds: int = 5) -> LearnerSpec:
    """Pruned tree + unpruned tree + GLM, combined by convex stacking."""
    return LearnerSpec(
        "stack",
        members=(LearnerSpec("tree", prune=True), LearnerSpec("tree"), LearnerSpec("glm")),
        cv_folds=cv_folds,
    )


PRESETS = {
    "linear": LearnerSpec("linear"),
    "logistic": LearnerSpec("logistic"),
    "glm": LearnerSpec("glm"),
    "parametric": LearnerSpec("glm"),
    "tree": LearnerSpec("tree"),
    "pruned_tree": LearnerSpec("tree", prune=True),
    "superlearner": superlearner(),
    "mean": LearnerSpec("mean"),
    "cell_means": LearnerSpec("cell_means"),
}


def resolve_spec(spec) -> LearnerSpec:
    """Accept a LearnerSpec, a preset name, or a mapping with LearnerSpec keys."""
    if isinstance(spec, LearnerSpec):
        return spec
    if isinstance(spec, str):
        try:
            return PRESETS[spec]
        except KeyError:
            raise InputError(f"unknown learner preset {spec!r}; choose from {sorted(PRESETS)}") from None
    if isinstance(spec, dict):
        spec = dict(spec)
        members = tuple(resolve_spec(m) for m in spec.pop("members", ()))
        return LearnerSpec(members=members, **spec)
    raise InputError(f"cannot interpret learner spec {spec!r}")


def cv_assignment(X: np.ndarray, y: np.ndarray, k: int) -> np.ndarray:
    """Deterministic fold labels that do not depend on row order.

    Rows are ranked by (target, features) and dealt round-robin, which also
    spreads the target evenly across folds.
    """
    n = y.shape[0]
    keys = [X[:, j] for j in range(X.shape[1] - 1, -1, -1)] + [y]
    rank = np.empty(n, dtype=np.int64)
    rank[np.lexsort(keys)] = np.arange(n)
    return rank % min(k, n)


@dataclass(frozen=True, eq=False)
class FittedLearner:
    kind: str
    n_features: int
    is_probability: bool = field(default=False, kw_only=True)

    def _predict(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.n_features) if self.n_features else X.reshape(-1, 0)
        if X.shape[1] != self.n_features:
            raise InputError(
                f"dimension mismatch: model fit on {self.n_features} features, got {X.shape[1]}"
            )
        return self._predict(X)


@dataclass(frozen=True, eq=False)
class ConstantFit(FittedLearner):
    value: float = 0.0

    def _predict(self, X):
        return np.full(X.shape[0], self.value)
