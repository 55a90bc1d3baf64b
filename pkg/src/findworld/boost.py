"""Gradient-boosted trees on Bernoulli loss plus a demographic-parity penalty.

The training objective is

    R(f) = sum_i L(y_i, f_i) + lambda_fair * |mean(pi | a) - mean(pi | a')|

with ``pi = sigmoid(f)``. Trees are grown by second-order boosting; the
penalty enters through the gradient only.

Without a penalty Hessian the Newton step on the penalty term is about
``eta * lambda_fair / N_a`` in log-odds, so once the constraint binds the
group means jump across the kink of ``|.|`` from round to round. Setting
``line_search`` halves each tree's step until the penalised risk does not
increase, which restores monotone descent at the cost of extra risk
evaluations.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from ._kernels import grow_tree, predict_ensemble
from .dataset import Dataset
from .errors import ConfigError, DegenerateTarget, EmptyGroup, SchemaMismatch


@dataclass(frozen=True)
class BoostParams:
    eta: float = 0.1
    depth: int = 4
    rounds: int = 200
    lambda_fair: float = 0.0
    min_leaf_weight: float = 1.0
    seed: int = 0
    line_search: bool = False
    max_halvings: int = 30

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("eta must lie in (0, 1]", field="eta")
        if self.depth < 1:
            raise ConfigError("depth must be >= 1", field="depth")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1", field="rounds")
        if self.lambda_fair < 0:
            raise ConfigError("lambda_fair must be >= 0", field="lambda_fair")
        if self.min_leaf_weight < 0:
            raise ConfigError("min_leaf_weight must be >= 0", field="min_leaf_weight")
        if self.max_halvings < 0:
            raise ConfigError("max_halvings must be >= 0", field="max_halvings")

    def replace(self, **kw) -> "BoostParams":
        return BoostParams(**(asdict(self) | kw))


@dataclass
class ObjectiveState:
    probs: np.ndarray
    n_a: int
    n_b: int
    mean_a: float
    mean_b: float

    @property
    def disparity(self) -> float:
        """Signed gap mean_a - mean_a'."""
        return self.mean_a - self.mean_b

    @classmethod
    def from_scores(cls, scores, groups, protected=1):
        probs = special.expit(np.asarray(scores, dtype=float))
        mask_a = np.asarray(groups) == protected
        n_a = int(mask_a.sum())
        n_b = mask_a.size - n_a
        if n_a == 0 or n_b == 0:
            raise EmptyGroup("both protected-attribute groups must be non-empty")
        return cls(probs, n_a, n_b, float(probs[mask_a].mean()), float(probs[~mask_a].mean()))


def objective_grad(state: ObjectiveState, labels, groups, lambda_fair, protected=1):
    """Per-row gradient and loss Hessian of the penalised risk w.r.t. the log-odds."""
    pi = state.probs
    grad = pi - np.asarray(labels, dtype=float)
    hess = pi * (1.0 - pi)
    if lambda_fair > 0:
        if state.n_a == 0 or state.n_b == 0:
            raise EmptyGroup("penalty needs both groups")
        s = np.sign(state.disparity)
        if s != 0.0:
            mask_a = np.asarray(groups) == protected
            c = np.where(mask_a, 1.0 / state.n_a, -1.0 / state.n_b)
            grad = grad + lambda_fair * s * c * hess
    return grad, hess


def bernoulli_loss(scores, labels) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    return np.logaddexp(0.0, scores) - np.asarray(labels, dtype=float) * scores


def penalized_risk(scores, labels, groups, lambda_fair, protected=1) -> float:
    state = ObjectiveState.from_scores(scores, groups, protected)
    return float(bernoulli_loss(scores, labels).sum() + lambda_fair * abs(state.disparity))


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def to_dict(self, names, node=0) -> dict:
        if self.feature[node] < 0:
            return {"leaf": float(self.value[node])}
        return {
            "split_feature": names[self.feature[node]],
            "threshold": float(self.threshold[node]),
            "children": [self.to_dict(names, self.left[node]), self.to_dict(names, self.right[node])],
        }

    @classmethod
    def from_dict(cls, d, names) -> "Tree":
        feat, thr, left, right, value = [], [], [], [], []
        index = {n: i for i, n in enumerate(names)}

        def add(nd):
            k = len(feat)
            feat.append(-1), thr.append(0.0), left.append(-1), right.append(-1), value.append(0.0)
            if "leaf" in nd:
                value[k] = float(nd["leaf"])
            else:
                feat[k] = index[nd["split_feature"]]
                thr[k] = float(nd["threshold"])
                left[k] = add(nd["children"][0])
                right[k] = add(nd["children"][1])
            return k

        add(d)
        return cls(np.array(feat, np.int64), np.array(thr), np.array(left, np.int64),
                   np.array(right, np.int64), np.array(value))


@dataclass
class BoostModel:
    trees: list
    base_score: float
    feature_names: list
    params: BoostParams | None = None
    objective_trace: list = field(default_factory=list)

    def __post_init__(self):
        self._flat = None

    def _flatten(self):
        if self._flat is None:
            roots, parts, offset = [], [[], [], [], [], []], 0
            for t in self.trees:
                roots.append(offset)
                parts[0].append(t.feature)
                parts[1].append(t.threshold)
                parts[2].append(np.where(t.left >= 0, t.left + offset, -1))
                parts[3].append(np.where(t.right >= 0, t.right + offset, -1))
                parts[4].append(t.value)
                offset += t.feature.size
            if not self.trees:
                self._flat = (np.zeros(0, np.int64),) + tuple(
                    np.zeros(0, dt) for dt in (np.int64, float, np.int64, np.int64, float))
            else:
                self._flat = (np.array(roots, np.int64),) + tuple(np.concatenate(p) for p in parts)
        return self._flat

    def _matrix(self, features) -> np.ndarray:
        if isinstance(features, Dataset):
            missing = [n for n in self.feature_names if n not in features.columns]
            if missing:
                raise SchemaMismatch(f"dataset lacks model features {missing}")
            return features.features(self.feature_names)
        X = np.asarray(features, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.feature_names):
            raise SchemaMismatch(
                f"expected {len(self.feature_names)} feature columns, got {X.shape[1]}")
        return X

    def decision_function(self, features) -> np.ndarray:
        X = np.ascontiguousarray(self._matrix(features))
        roots, feat, thr, left, right, value = self._flatten()
        return self.base_score + predict_ensemble(X, roots, feat, thr, left, right, value)

    def predict_proba(self, features) -> np.ndarray:
        return special.expit(self.decision_function(features))

    def to_dict(self) -> dict:
        return {
            "base_score": self.base_score,
            "feature_names": list(self.feature_names),
            "params": asdict(self.params) if self.params else None,
            "trees": [t.to_dict(self.feature_names) for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d) -> "BoostModel":
        names = list(d["feature_names"])
        params = BoostParams(**d["params"]) if d.get("params") else None
        return cls([Tree.from_dict(t, names) for t in d["trees"]], float(d["base_score"]), names, params)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "BoostModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def predict_proba(model: BoostModel, features) -> np.ndarray:
    return model.predict_proba(features)


def train(data: Dataset, params: BoostParams, features=None, record_objective=False) -> BoostModel:
    """Fit ``params.rounds`` trees on ``data``.

    ``features`` defaults to every column except the target, the protected
    attribute included.
    """
    names = list(features) if features is not None else data.feature_names
    X = np.ascontiguousarray(data.features(names))
    y = data.target
    groups = data.pa
    if y.min() == y.max():
        raise DegenerateTarget("target has a single class")
    if params.lambda_fair > 0 and (groups.min() == groups.max()):
        raise EmptyGroup("fairness penalty needs both protected-attribute groups")
    return _fit(X, y, groups, names, params, record_objective)


def _fit(X, y, groups, names, params, record_objective=False) -> BoostModel:
    p0 = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
    base = float(np.log(p0 / (1 - p0)))
    scores = np.full(y.shape[0], base)
    order = np.ascontiguousarray(np.stack([np.argsort(X[:, j], kind="stable") for j in range(X.shape[1])]))
    sorted_x = np.ascontiguousarray(np.take_along_axis(X.T, order, axis=1))
    trees = []
    trace = []
    search = params.line_search and params.lambda_fair > 0
    risk = penalized_risk(scores, y, groups, params.lambda_fair) if (search or record_objective) else None
    for _ in range(params.rounds):
        state = ObjectiveState.from_scores(scores, groups) if params.lambda_fair > 0 else \
            ObjectiveState(special.expit(scores), 0, 0, 0.0, 0.0)
        if record_objective:
            trace.append(risk)
        g, h = objective_grad(state, y, groups, params.lambda_fair)
        feat, thr, left, right, value, row_value = grow_tree(
            X, order, sorted_x, g, h, params.depth, params.min_leaf_weight, params.min_leaf_weight, params.eta)
        if search:
            step = 1.0
            new_risk = penalized_risk(scores + row_value, y, groups, params.lambda_fair)
            for _ in range(params.max_halvings):
                if new_risk <= risk:
                    break
                step *= 0.5
                new_risk = penalized_risk(scores + step * row_value, y, groups, params.lambda_fair)
            else:
                if new_risk > risk:
                    step, new_risk = 0.0, risk
            value, row_value = value * step, row_value * step
            risk = new_risk
        elif record_objective:
            risk = penalized_risk(scores + row_value, y, groups, params.lambda_fair)
        trees.append(Tree(feat, thr, left, right, value))
        scores = scores + row_value
    if record_objective:
        trace.append(risk)
    return BoostModel(trees, base, list(names), params, trace)
