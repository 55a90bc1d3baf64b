"""Residual-based warping.

Each descendant of the protected attribute gets a location model per group.
A source-group row's residual gives its probability rank within the source
group; the warped value is the value at the same rank under the target
group's model, evaluated at the row's (already warped) parents.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import GammaRegressor, LinearRegression, LogisticRegression

from ..dataset import BINARY, Dataset
from ..errors import DegenerateGroup, SchemaMismatch
from ._ranks import binary_rank, binary_value, quantile_grid, rank_of, value_at
from .graph import AdjacencyInfo

GAMMA, GAUSSIAN, LOGISTIC = "gamma", "gaussian", "logistic"


@dataclass
class LocationModel:
    """Linear predictor with an inverse link; ``coef`` follows ``parents``."""

    family: str
    intercept: float
    coef: list
    residual_grid: list | None = None

    def mean(self, X) -> np.ndarray:
        eta = self.intercept + (X @ np.asarray(self.coef) if len(self.coef) else 0.0)
        eta = np.broadcast_to(eta, (X.shape[0],)).astype(float)
        if self.family == GAMMA:
            return np.exp(eta)
        if self.family == LOGISTIC:
            return special.expit(eta)
        return eta

    def residual(self, x, mu):
        return x / mu if self.family == GAMMA else x - mu

    def combine(self, mu, r):
        return mu * r if self.family == GAMMA else mu + r

    def to_dict(self):
        return {"family": self.family, "intercept": self.intercept, "coef": list(self.coef),
                "residual_grid": self.residual_grid}


def fit_location(family: str, X: np.ndarray, y: np.ndarray) -> LocationModel:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        if X.shape[1] == 0:
            m = float(y.mean())
            if family == GAMMA:
                return LocationModel(family, float(np.log(m)), [])
            if family == LOGISTIC:
                return LocationModel(family, float(special.logit(m)), [])
            return LocationModel(family, m, [])
        if family == GAMMA:
            est = GammaRegressor(alpha=0.0, max_iter=1000, tol=1e-8).fit(X, y)
        elif family == LOGISTIC:
            est = LogisticRegression(penalty=None, max_iter=1000, tol=1e-8).fit(X, y)
        else:
            est = LinearRegression().fit(X, y)
    coef = np.ravel(est.coef_)
    return LocationModel(family, float(np.ravel(est.intercept_)[0]), [float(c) for c in coef])


def _family_for(ds: Dataset, node: str, continuous_family: str | None) -> str:
    if ds.kinds[node] == BINARY:
        return LOGISTIC
    if continuous_family:
        return continuous_family
    return GAMMA if (ds[node] > 0).all() else GAUSSIAN


@dataclass
class WarpModel:
    adjacency: AdjacencyInfo
    nodes: dict
    source: float = 1.0
    target: float = 0.0
    seed: int = 0
    columns: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method": "warp",
            "adjacency": self.adjacency.to_dict(),
            "source": self.source,
            "target": self.target,
            "seed": self.seed,
            "columns": self.columns,
            "nodes": {v: {"parents": m["parents"], "source": m["source"].to_dict(),
                          "target": m["target"].to_dict()} for v, m in self.nodes.items()},
        }

    @classmethod
    def from_dict(cls, d) -> "WarpModel":
        nodes = {v: {"parents": m["parents"],
                     "source": LocationModel(**m["source"]),
                     "target": LocationModel(**m["target"])} for v, m in d["nodes"].items()}
        return cls(AdjacencyInfo.from_dict(d["adjacency"]), nodes, d["source"], d["target"],
                   d["seed"], d["columns"])

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def warp_fit(train: Dataset, adj: AdjacencyInfo, reverse=False, seed=0,
             continuous_family=None) -> WarpModel:
    """Fit per-group location models for every descendant of the protected attribute.

    By default the protected group (PA = 1) is warped onto the reference group
    (PA = 0); ``reverse`` swaps the direction.
    """
    adj.check(train)
    source, target = (0.0, 1.0) if reverse else (1.0, 0.0)
    pa = train.pa
    nodes = {}
    for v in adj.transformed:
        parents = adj.model_parents(v)
        family = _family_for(train, v, continuous_family)
        fitted = {}
        for role, g in (("source", source), ("target", target)):
            rows = pa == g
            if not rows.any():
                raise DegenerateGroup(f"group PA={g:g} is empty")
            y = train[v][rows]
            if family == LOGISTIC and y.min() == y.max():
                raise DegenerateGroup(f"{v!r} is constant within group PA={g:g}")
            X = train.features(parents)[rows] if parents else np.zeros((rows.sum(), 0))
            m = fit_location(family, X, y)
            if family != LOGISTIC:
                m.residual_grid = quantile_grid(m.residual(y, m.mean(X))).tolist()
            fitted[role] = m
        nodes[v] = {"parents": parents, **fitted}
    return WarpModel(adj, nodes, source, target, seed, list(train.names))


def warp_apply(model: WarpModel, ds: Dataset) -> Dataset:
    if list(ds.names) != model.columns:
        raise SchemaMismatch(f"columns {list(ds.names)} differ from fit-time {model.columns}")
    rows = ds.pa == model.source
    rng = np.random.default_rng(model.seed)
    out = {k: np.array(v) for k, v in ds.columns.items()}
    for v, spec in model.nodes.items():
        parents = spec["parents"]
        src, tgt = spec["source"], spec["target"]
        draws = rng.random(ds.n_rows)[rows]
        if not rows.any():
            continue
        X_orig = ds.features(parents)[rows] if parents else np.zeros((rows.sum(), 0))
        X_new = np.column_stack([out[p][rows] for p in parents]) if parents else X_orig
        x = ds[v][rows]
        if src.family == LOGISTIC:
            u = binary_rank(x, src.mean(X_orig), draws)
            out[v][rows] = binary_value(u, tgt.mean(X_new))
        else:
            u = rank_of(src.residual(x, src.mean(X_orig)), src.residual_grid)
            out[v][rows] = tgt.combine(tgt.mean(X_new), value_at(u, tgt.residual_grid))
    return ds.replace(out)
