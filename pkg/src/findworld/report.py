"""Table renderings of a study summary."""

from __future__ import annotations

import csv
import io

from .study import STAT_KEYS, TABLE_FIELDS, table_rows

HEADERS = {"dp": "DP", "fpr_balance": "FPR", "fnr_balance": "FNR", "ppv_parity": "PPV", "auc": "AUC"}
WORLD_LABELS = {"real": "Real", "find": "FiND", "adapted": "Adapted", "warped": "Warped"}


def _cell(stat, digits=3):
    if stat["mean"] is None:
        return "n/a"
    return (f"{stat['mean']:.{digits}f} ({stat['sd']:.{digits}f}) "
            f"[{stat['lo']:.{digits}f}, {stat['hi']:.{digits}f}]")


def render_markdown(summary: dict) -> str:
    lines = [f"Iterations: {summary['iterations']}", ""]
    lines.append("| World | " + " | ".join(HEADERS[k] for k in STAT_KEYS) + " |")
    lines.append("|---" * (len(STAT_KEYS) + 1) + "|")
    for w in summary["worlds"]:
        cells = [_cell(summary["panel"][w][k]) for k in STAT_KEYS]
        lines.append(f"| {WORLD_LABELS.get(w, w)} | " + " | ".join(cells) + " |")
    lines += ["", "Cells: mean (sd) [2.5%, 97.5%] over iterations.", ""]
    rel = summary.get("relations") or {}
    if any(sum(v.values()) for v in rel.values()):
        lines.append("| World | aligned | tradeoff | flat | mean rho |")
        lines.append("|---|---|---|---|---|")
        for w in summary["worlds"]:
            r = rel[w]
            rho = summary["rho"][w]["mean"]
            rho_s = "n/a" if rho is None else f"{rho:.2f}"
            lines.append(f"| {WORLD_LABELS.get(w, w)} | {r['aligned']} | {r['tradeoff']} | "
                         f"{r['flat']} | {rho_s} |")
        lines.append("")
    gaps = summary.get("base_rate_gap") or {}
    if gaps:
        lines.append("Base-rate gap: " + ", ".join(
            f"{WORLD_LABELS.get(w, w)} {gaps[w]['mean']:.3f}" for w in summary["worlds"]
            if w in gaps and gaps[w]["mean"] is not None))
        lines.append("")
    if summary.get("failures"):
        lines.append(f"Failures: {len(summary['failures'])}")
        for f in summary["failures"]:
            lines.append(f"- iteration {f['iteration']} ({f['stage']}): {f['error']}: {f['message']}")
        lines.append("")
    return "\n".join(lines)


def render_csv(summary: dict) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(table_rows(summary))
    return buf.getvalue()


def render(summary: dict, fmt="md") -> str:
    if fmt == "md":
        return render_markdown(summary)
    if fmt == "csv":
        return render_csv(summary)
    raise ValueError(f"unknown format {fmt!r}")
