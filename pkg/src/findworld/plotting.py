"""Matplotlib figures written next to the delimited outputs (Agg backend, no display)."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

WORLD_COLORS = {"real": "tab:red", "find": "tab:green", "adapted": "tab:blue", "warped": "tab:orange"}
PANEL_LABELS = (("dp", "DP"), ("fpr_balance", "FPR"), ("fnr_balance", "FNR"), ("ppv_parity", "PPV"))


def _color(world):
    return WORLD_COLORS.get(world, "tab:gray")


def plot_curves(curves, path, title=None) -> Path:
    """Fairness (x) against AUC (y) for each world, with bootstrap interval bars."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for c in curves:
        fair, perf = c.column("fairness"), c.column("auc")
        err = [perf - c.column("ci_lo"), c.column("ci_hi") - perf]
        ax.errorbar(fair, perf, yerr=err, marker="o", ms=3, lw=1, capsize=2,
                    color=_color(c.world), label=c.world)
    ax.set_xlabel("fairness (1 - DP gap)")
    ax.set_ylabel("AUC")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _read_study_curves(path):
    pts = defaultdict(lambda: defaultdict(list))  # world -> w -> [(fairness, auc)]
    runs = defaultdict(lambda: defaultdict(list))  # world -> iteration -> [(fairness, auc)]
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            f, a = float(row["fairness"]), float(row["auc"])
            pts[row["world"]][float(row["w"])].append((f, a))
            runs[row["world"]][row["iteration"]].append((f, a))
    return pts, runs


def plot_study(out, summary) -> list:
    """Write ``curves.png`` (per-iteration and mean curves) and ``panel.png``."""
    out = Path(out)
    written = []
    curves_csv = out / "curves.csv"
    if curves_csv.exists():
        pts, runs = _read_study_curves(curves_csv)
        if pts:
            worlds = list(pts)
            fig, axes = plt.subplots(1, len(worlds), figsize=(3.6 * len(worlds), 3.4), squeeze=False)
            for ax, world in zip(axes[0], worlds):
                for series in runs[world].values():
                    ax.plot([p[0] for p in series], [p[1] for p in series], lw=0.5, alpha=0.3,
                            color=_color(world))
                ws = sorted(pts[world])
                mf = [sum(p[0] for p in pts[world][w]) / len(pts[world][w]) for w in ws]
                ma = [sum(p[1] for p in pts[world][w]) / len(pts[world][w]) for w in ws]
                ax.plot(mf, ma, marker="o", ms=3, color="black", lw=1.2)
                ax.set_title(world)
                ax.set_xlabel("fairness")
            axes[0][0].set_ylabel("AUC")
            fig.tight_layout()
            fig.savefig(out / "curves.png", dpi=120)
            plt.close(fig)
            written.append(out / "curves.png")
    worlds = summary.get("worlds", [])
    if worlds and summary.get("panel"):
        fig, ax = plt.subplots(figsize=(6.5, 3.6))
        width = 0.8 / len(worlds)
        for i, world in enumerate(worlds):
            stats = [summary["panel"][world][k] for k, _ in PANEL_LABELS]
            means = [s["mean"] if s["mean"] is not None else 0.0 for s in stats]
            sds = [s["sd"] or 0.0 for s in stats]
            xs = [j + (i - (len(worlds) - 1) / 2) * width for j in range(len(PANEL_LABELS))]
            ax.bar(xs, means, width, yerr=sds, color=_color(world), label=world, capsize=2)
        ax.set_xticks(range(len(PANEL_LABELS)), [lab for _, lab in PANEL_LABELS])
        ax.set_ylim(0.5, 1.02)
        ax.axhline(0.95, color="gray", lw=0.6, ls="--")
        ax.set_ylabel("fulfilment (1 - |gap|)")
        ax.legend(frameon=False, ncol=len(worlds), fontsize=8)
        fig.tight_layout()
        fig.savefig(out / "panel.png", dpi=120)
        plt.close(fig)
        written.append(out / "panel.png")
    return written
