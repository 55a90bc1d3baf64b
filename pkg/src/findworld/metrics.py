"""Group fairness panel, the disparity functional C, AUC and its bootstrap CI.

Fairness entries are reported as *fulfillment* values, ``1 - |gap|``, so
higher is better and 1.0 means the two groups are indistinguishable.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from ._kernels import bootstrap_auc
from .errors import EmptyGroup, SingleClass

PANEL_KEYS = ("dp", "fpr_balance", "fnr_balance", "ppv_parity")


def _groups(groups, protected=1):
    groups = np.asarray(groups)
    mask_a = groups == protected
    if not mask_a.any() or mask_a.all():
        raise EmptyGroup("both protected-attribute groups must be non-empty")
    return mask_a, ~mask_a


def signed_disparity(probs, groups, protected=1) -> float:
    """mean(probs | a) - mean(probs | a')."""
    probs = np.asarray(probs, dtype=float)
    mask_a, mask_b = _groups(groups, protected)
    return float(probs[mask_a].mean() - probs[mask_b].mean())


def disparity(probs, groups, protected=1) -> float:
    """C: absolute gap between the group means of the predicted probabilities."""
    return abs(signed_disparity(probs, groups, protected))


def auc(probs, labels) -> float:
    """ROC AUC as the normalised Mann-Whitney U statistic (ties count 1/2)."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels) == 1
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes")
    ranks = stats.rankdata(probs)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _bootstrap_aucs(probs, labels, n_boot, rng):
    n = probs.size
    _, tie_group = np.unique(probs, return_inverse=True)
    idx = rng.integers(0, n, size=(n_boot, n))
    reps = bootstrap_auc(tie_group.astype(np.int64), labels == 1, int(tie_group.max()) + 1, idx)
    return reps[~np.isnan(reps)]


def auc_ci(probs, labels, level=0.95, n_boot=1000, seed=0):
    """Percentile bootstrap interval for the AUC, widened if needed to contain the point estimate."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels)
    point = auc(probs, labels)
    rng = np.random.default_rng(seed)
    reps = _bootstrap_aucs(probs, labels, n_boot, rng)
    if reps.size == 0:
        return point, point
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(reps, [alpha, 1.0 - alpha])
    return float(min(lo, point)), float(max(hi, point))


@dataclass
class FairnessReport:
    dp: float | None
    fpr_balance: float | None
    fnr_balance: float | None
    ppv_parity: float | None
    auc: float | None
    auc_ci: tuple | None
    base_rates: dict
    threshold: float
    undefined: list = field(default_factory=list)
    rates: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["auc_ci"] = list(self.auc_ci) if self.auc_ci is not None else None
        return d

    def csv_row(self) -> dict:
        lo, hi = self.auc_ci if self.auc_ci is not None else (None, None)
        return {k: getattr(self, k) for k in PANEL_KEYS} | {"auc": self.auc, "auc_lo": lo, "auc_hi": hi}


def _rate(num, den):
    return num / den if den else None


def group_rates(pred, labels) -> dict:
    """Confusion-table rates for one group from a single tabulation."""
    pred = np.asarray(pred, dtype=bool)
    labels = np.asarray(labels) == 1
    tp = int((pred & labels).sum())
    fp = int((pred & ~labels).sum())
    fn = int((~pred & labels).sum())
    tn = int((~pred & ~labels).sum())
    n = tp + fp + fn + tn
    return {
        "n": n, "tp": tp, "fp": fp, "fn": fn, "tn": tn,
        "positive_rate": _rate(tp + fp, n),
        "tpr": _rate(tp, tp + fn),
        "fnr": _rate(fn, tp + fn),
        "fpr": _rate(fp, fp + tn),
        "ppv": _rate(tp, tp + fp),
        "base_rate": _rate(tp + fn, n),
    }


def fairness_panel(probs, labels, groups, threshold=0.5, protected=1,
                   with_auc=True, n_boot=1000, seed=0) -> FairnessReport:
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels)
    mask_a, mask_b = _groups(groups, protected)
    pred = probs >= threshold
    ra = group_rates(pred[mask_a], labels[mask_a])
    rb = group_rates(pred[mask_b], labels[mask_b])
    undefined = []

    def fulfil(key, name):
        va, vb = ra[key], rb[key]
        if va is None or vb is None:
            undefined.append(name)
            return None
        return 1.0 - abs(va - vb)

    dp = fulfil("positive_rate", "dp")
    fpr = fulfil("fpr", "fpr_balance")
    fnr = fulfil("fnr", "fnr_balance")
    ppv = fulfil("ppv", "ppv_parity")
    score = ci = None
    if with_auc:
        try:
            score = auc(probs, labels)
            ci = auc_ci(probs, labels, n_boot=n_boot, seed=seed)
        except SingleClass:
            undefined.append("auc")
    return FairnessReport(
        dp=dp, fpr_balance=fpr, fnr_balance=fnr, ppv_parity=ppv,
        auc=score, auc_ci=ci,
        base_rates={"a": ra["base_rate"], "a_prime": rb["base_rate"]},
        threshold=float(threshold), undefined=undefined,
        rates={"a": ra, "a_prime": rb},
    )


def base_rate_gap(ds) -> float:
    """|P(Y=1 | a) - P(Y=1 | a')| for a :class:`~findworld.dataset.Dataset`."""
    mask_a, mask_b = _groups(ds.pa)
    y = ds.target
    return float(abs(y[mask_a].mean() - y[mask_b].mean()))


def ks_critical(n1: int, n2: int, alpha=0.01) -> float:
    """Asymptotic two-sample Kolmogorov-Smirnov critical value."""
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((n1 + n2) / (n1 * n2))
