"""Random search over (depth, eta) with k-fold cross-validated AUC."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boost import BoostParams, _fit
from .errors import ConfigError, DegenerateTarget
from .metrics import auc


@dataclass(frozen=True)
class SearchSpace:
    depth_min: int = 2
    depth_max: int = 8
    eta_min: float = 0.01
    eta_max: float = 0.3

    def sample(self, rng):
        depth = int(rng.integers(self.depth_min, self.depth_max + 1))
        eta = float(math.exp(rng.uniform(math.log(self.eta_min), math.log(self.eta_max))))
        return depth, eta


@dataclass
class TuneResult:
    depth: int
    eta: float
    score: float
    trials: list = field(default_factory=list)  # [(depth, eta, mean cv auc)]

    def to_dict(self):
        return {"depth": self.depth, "eta": self.eta, "score": self.score,
                "trials": [list(t) for t in self.trials]}


def fold_ids(n, folds, seed) -> np.ndarray:
    ids = np.arange(n) % folds
    return np.random.default_rng(seed).permutation(ids)


def cv_auc(X, y, groups, names, params, folds) -> float:
    scores = []
    for k in range(folds.max() + 1):
        tr, va = folds != k, folds == k
        if y[tr].min() == y[tr].max() or y[va].min() == y[va].max():
            raise DegenerateTarget(f"fold {k} has a single class")
        model = _fit(X[tr], y[tr], groups[tr], names, params)
        scores.append(auc(model.predict_proba(X[va]), y[va]))
    return float(np.mean(scores))


def tune(train_ds, space: SearchSpace | None = None, budget=20, folds=3, seed=0,
         base: BoostParams | None = None, features=None) -> TuneResult:
    """Sample ``budget`` configurations and keep the best mean validation AUC (ties: first)."""
    if budget < 1:
        raise ConfigError("budget must be >= 1", field="budget")
    if folds < 2:
        raise ConfigError("folds must be >= 2", field="folds")
    space = space or SearchSpace()
    base = (base or BoostParams()).replace(lambda_fair=0.0)
    names = list(features) if features is not None else train_ds.feature_names
    X = np.ascontiguousarray(train_ds.features(names))
    y, groups = train_ds.target, train_ds.pa
    rng = np.random.default_rng(seed)
    fid = fold_ids(train_ds.n_rows, folds, seed)
    trials = []
    best = None
    for _ in range(budget):
        depth, eta = space.sample(rng)
        score = cv_auc(X, y, groups, names, base.replace(depth=depth, eta=eta), fid)
        trials.append((depth, eta, score))
        if best is None or score > best[2]:
            best = (depth, eta, score)
    return TuneResult(best[0], best[1], best[2], trials)
