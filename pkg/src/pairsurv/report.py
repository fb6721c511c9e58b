"""Rendering of run artifacts: the summary table and figures.

The run directory produced by training holds delimited outputs
(`report.csv`, `history.csv`); this module formats the per-cause summary
table in `point [lo-hi]` style and renders static figures next to them.
"""
from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import DataError

REQUIRED_FILES = ("config.json", "history.csv", "report.csv", "checkpoints")

# keep figure output reproducible across runs
_PNG_METADATA = {"Software": "pairsurv"}


def check_run_dir(run_dir) -> None:
    missing = [
        name for name in REQUIRED_FILES
        if not os.path.exists(os.path.join(run_dir, name))
    ]
    if missing:
        raise DataError(
            f"run directory {run_dir} is incomplete, missing: {', '.join(missing)}"
        )


def format_point_interval(point: float, lower: float, upper: float) -> str:
    return f"{point:.3f} [{lower:.3f}-{upper:.3f}]"


def read_report_rows(path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def summary_table(report_rows: list[dict]) -> str:
    """One line per cause: the across-fold mean point and mean interval."""
    mean_rows = [r for r in report_rows if r["fold"] == "mean"]
    if not mean_rows:  # single-fold runs have no aggregate rows
        mean_rows = [r for r in report_rows if r["fold"] == "0"]
    lines = ["cause  c_index"]
    for row in sorted(mean_rows, key=lambda r: int(r["cause"])):
        cell = format_point_interval(
            float(row["point"]), float(row["lo"]), float(row["hi"])
        )
        lines.append(f"{row['cause']:<5}  {cell}")
    return "\n".join(lines)


def read_history_rows(path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def render_history_figure(history_rows: list[dict], path) -> None:
    """Training-loss and validation-index curves, one line per fold."""
    folds = sorted({r["fold"] for r in history_rows}, key=int)
    fig, (ax_loss, ax_val) = plt.subplots(1, 2, figsize=(10, 4))
    for fold in folds:
        rows = [r for r in history_rows if r["fold"] == fold]
        its = [int(r["iteration"]) for r in rows]
        ax_loss.plot(its, [float(r["loss_total"]) for r in rows], label=f"fold {fold}")
        ax_val.plot(its, [float(r["mean_val_c"]) for r in rows], label=f"fold {fold}")
    ax_loss.set_xlabel("iteration")
    ax_loss.set_ylabel("training loss (batch)")
    ax_val.set_xlabel("iteration")
    ax_val.set_ylabel("mean validation c-index")
    ax_val.axhline(0.5, color="grey", lw=0.8, ls=":")
    ax_val.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def render_cindex_figure(report_rows: list[dict], path) -> None:
    """Per-fold test points with interval whiskers, grouped by cause."""
    fold_rows = [r for r in report_rows if r["fold"].isdigit()]
    causes = sorted({int(r["cause"]) for r in fold_rows})
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.8 / max(len(causes), 1)
    for ci, cause in enumerate(causes):
        rows = sorted(
            (r for r in fold_rows if int(r["cause"]) == cause),
            key=lambda r: int(r["fold"]),
        )
        xs = [int(r["fold"]) + (ci - (len(causes) - 1) / 2) * width for r in rows]
        pts = [float(r["point"]) for r in rows]
        lo = [float(r["point"]) - float(r["lo"]) for r in rows]
        hi = [float(r["hi"]) - float(r["point"]) for r in rows]
        ax.errorbar(xs, pts, yerr=[lo, hi], fmt="o", capsize=3, label=f"cause {cause}")
    ax.set_xlabel("fold")
    ax.set_ylabel("test c-index")
    ax.axhline(0.5, color="grey", lw=0.8, ls=":")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def render_figures(run_dir) -> list[str]:
    """Render all figures into ``<run_dir>/figures`` and return their paths."""
    check_run_dir(run_dir)
    fig_dir = os.path.join(run_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    history = read_history_rows(os.path.join(run_dir, "history.csv"))
    report_rows = read_report_rows(os.path.join(run_dir, "report.csv"))
    out = []
    hist_path = os.path.join(fig_dir, "training.png")
    render_history_figure(history, hist_path)
    out.append(hist_path)
    ci_path = os.path.join(fig_dir, "concordance.png")
    render_cindex_figure(report_rows, ci_path)
    out.append(ci_path)
    return out
