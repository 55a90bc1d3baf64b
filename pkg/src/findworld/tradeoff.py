"""Fairness/performance trade-off curves.

Models are trained on one (real-world) training set with penalty
``w * lambda_star`` for ``w`` in ``{0, 1/(S+1), ..., 1}`` and each model is
scored on every supplied test world.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .boost import BoostParams, train
from .errors import ConfigError, GridExhausted, TooFewPoints
from .metrics import auc, auc_ci, disparity

DEFAULT_GRID = (0.0,) + tuple(10.0 ** k for k in range(-2, 5))
CURVE_FIELDS = ("world", "w", "lambda", "fairness", "auc", "ci_lo", "ci_hi")


@dataclass
class LambdaStarResult:
    lambda_star: float
    disparity: float
    evaluated: list = field(default_factory=list)  # [(lambda, test disparity)] in evaluation order

    def to_dict(self):
        return asdict(self)


def _geometric_between(lo, hi, points):
    if lo <= 0:
        lo = hi / 10.0 ** 1
    ratio = (hi / lo) ** (1.0 / (points + 1))
    return [lo * ratio ** k for k in range(1, points + 1)]


def find_lambda_star(train_ds, test_ds, params: BoostParams, eps=0.01, grid=DEFAULT_GRID,
                     refine_points=15, extend_to=1e5, features=None) -> LambdaStarResult:
    """Smallest penalty whose model has test disparity below ``eps``.

    The coarse grid is scanned in ascending order (extended by factors of 10
    up to ``extend_to``). The bracket between the first satisfying value and
    its predecessor is then rescanned on ``refine_points`` interior geometric
    points, and the first satisfying one wins. When no coarse value
    satisfies the bound, every bracket above the point where the penalty
    starts to bite (test disparity at most half the unpenalised one) is
    rescanned the same way.
    """
    grid = [float(g) for g in grid]
    if eps <= 0:
        raise ConfigError("eps must be positive", field="eps")
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 0:
        raise ConfigError("grid must be non-negative and strictly ascending", field="grid")
    while grid[-1] > 0 and grid[-1] * 10.0 <= extend_to * (1 + 1e-12):
        grid.append(grid[-1] * 10.0)
    evaluated = []

    def test_disparity(lam):
        model = train(train_ds, params.replace(lambda_fair=lam), features=features)
        c = disparity(model.predict_proba(test_ds), test_ds.pa)
        evaluated.append((lam, c))
        return c

    coarse = []
    for lam in grid:
        c = test_disparity(lam)
        coarse.append(c)
        if c < eps:
            break
    hit = len(coarse) - 1 if coarse[-1] < eps else None
    if hit == 0:
        return LambdaStarResult(grid[0], coarse[0], evaluated)
    if hit is not None:
        brackets = [(grid[hit - 1], grid[hit])]
    else:
        start = next((i for i, c in enumerate(coarse) if c <= 0.5 * coarse[0]), len(coarse) - 1)
        brackets = list(zip(grid[max(start - 1, 0):-1], grid[max(start, 1):]))
    for lo, hi in brackets:
        for lam in _geometric_between(lo, hi, refine_points):
            c = test_disparity(lam)
            if c < eps:
                return LambdaStarResult(lam, c, evaluated)
    if hit is not None:
        return LambdaStarResult(grid[hit], coarse[hit], evaluated)
    best_lam, best_c = min(evaluated, key=lambda t: t[1])
    raise GridExhausted(best_lam, best_c)


@dataclass
class CurvePoint:
    w: float
    lam: float
    fairness: float
    disparity: float
    auc: float
    ci_lo: float
    ci_hi: float


@dataclass
class TradeoffCurve:
    world: str
    points: list

    def column(self, name) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])

    def rows(self):
        for p in self.points:
            yield {"world": self.world, "w": p.w, "lambda": p.lam, "fairness": p.fairness,
                   "auc": p.auc, "ci_lo": p.ci_lo, "ci_hi": p.ci_hi}

    def to_dict(self):
        return {"world": self.world, "points": [asdict(p) for p in self.points]}


def interpolation_weights(steps: int) -> list:
    return [n / (steps + 1) for n in range(steps + 2)]


def tradeoff_curve(train_ds, test_worlds: dict, lambda_star: float, params: BoostParams,
                   steps=9, features=None, n_boot=1000, seed=0) -> list:
    """One :class:`TradeoffCurve` per test world, sharing a single model per weight."""
    reference = train_ds.names
    for name, ds in test_worlds.items():
        if ds.names != reference:
            raise ConfigError(f"test world {name!r} does not share the training schema",
                              field="test_worlds")
    points = {name: [] for name in test_worlds}
    for k, w in enumerate(interpolation_weights(steps)):
        lam = w * lambda_star
        model = train(train_ds, params.replace(lambda_fair=lam), features=features)
        for j, (name, ds) in enumerate(test_worlds.items()):
            probs = model.predict_proba(ds)
            c = disparity(probs, ds.pa)
            score = auc(probs, ds.target)
            lo, hi = auc_ci(probs, ds.target, n_boot=n_boot, seed=seed + 1000 * k + j)
            points[name].append(CurvePoint(w, lam, 1.0 - c, c, score, lo, hi))
    return [TradeoffCurve(name, pts) for name, pts in points.items()]


def relation_direction(curve: TradeoffCurve, threshold=0.5):
    """Classify the fairness/AUC relation along a curve by Spearman correlation.

    Returns ``(label, rho)`` with label ``aligned`` (rho >= threshold),
    ``tradeoff`` (rho <= -threshold) or ``flat``.
    """
    if len(curve.points) < 3:
        raise TooFewPoints("need at least three curve points")
    fair, perf = curve.column("fairness"), curve.column("auc")
    if np.ptp(fair) == 0 or np.ptp(perf) == 0:
        return "flat", 0.0
    rho = float(stats.spearmanr(fair, perf).statistic)
    if rho >= threshold:
        return "aligned", rho
    if rho <= -threshold:
        return "tradeoff", rho
    return "flat", rho


def write_curves_csv(curves, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CURVE_FIELDS, lineterminator="\n")
        writer.writeheader()
        for c in curves:
            writer.writerows(c.rows())


def write_curves_json(curves, path) -> None:
    Path(path).write_text(json.dumps([c.to_dict() for c in curves], indent=2) + "\n")


def read_curves_csv(path) -> list:
    curves = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            curves.setdefault(row["world"], []).append(CurvePoint(
                float(row["w"]), float(row["lambda"]), float(row["fairness"]),
                1.0 - float(row["fairness"]), float(row["auc"]), float(row["ci_lo"]), float(row["ci_hi"])))
    return [TradeoffCurve(k, v) for k, v in curves.items()]
