"""Writers for evaluation reports, curves, histories and predictions, plus PNG figures.

File layouts (all CSV files are UTF-8 with a header row):

``report.json``      EvalReport fields; absent metrics are omitted
``roc.csv``          fpr, tpr, threshold (first row threshold = inf)
``pr.csv``           recall, precision, threshold (first row threshold = inf)
``confusion.csv``    true_bin, then one column per predicted bin; bins labelled ``[lo,hi)``
``history.csv``      HISTORY_COLUMNS; empty cells where a term does not apply
``predictions.csv``  PREDICTION_COLUMNS; lam/k empty for non-Weibull models,
                     rul_hat empty for the failure-only network
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from rulfp.metrics import EvalReport  # noqa: E402

HISTORY_COLUMNS = ("phase", "epoch", "loss", "L_c", "L_r", "l2", "nll", "val_metric",
                   "val_value", "best")
PREDICTION_COLUMNS = ("device_id", "end_time", "fp_prob", "rul_hat", "lam", "k")


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer, str)):
        return str(x)
    return repr(float(x))


def write_json(path, obj) -> None:
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def write_history(path, history: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(HISTORY_COLUMNS)
        for row in history:
            wr.writerow([_num(row.get(c)) for c in HISTORY_COLUMNS])


def read_history(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_predictions(path, records) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(PREDICTION_COLUMNS)
        for r in records:
            lam = r.weibull.lam if r.weibull is not None else None
            k = r.weibull.k if r.weibull is not None else None
            wr.writerow([r.device_id, r.end_time, _num(r.fp_prob), _num(r.rul_hat),
                         _num(lam), _num(k)])


def _bin_labels(edges) -> list[str]:
    return [f"[{edges[i]:g},{edges[i + 1]:g})" for i in range(len(edges) - 1)]


def write_report(directory, report: EvalReport, curves: dict, figures: bool = True) -> list[Path]:
    """Write the JSON report, curve and confusion CSVs and (optionally) PNG figures."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = [directory / "report.json"]
    write_json(written[0], report.to_dict())
    heads = {"roc": ("fpr", "tpr", "threshold"), "pr": ("recall", "precision", "threshold")}
    for name, cols in heads.items():
        if name in curves:
            path = directory / f"{name}.csv"
            with open(path, "w", newline="") as fh:
                wr = csv.writer(fh, lineterminator="\n")
                wr.writerow(cols)
                for row in curves[name]:
                    wr.writerow([_num(v) for v in row])
            written.append(path)
    if report.confusion is not None:
        labels = _bin_labels(report.confusion_edges)
        path = directory / "confusion.csv"
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["true_bin"] + labels)
            for lab, row in zip(labels, report.confusion):
                wr.writerow([lab] + [str(v) for v in row])
        written.append(path)
    if figures:
        written += plot_report(directory, report, curves)
    return written


def plot_report(directory, report: EvalReport, curves: dict) -> list[Path]:
    directory = Path(directory)
    out = []
    if "roc" in curves:
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        c = curves["roc"]
        ax.plot(c[:, 0], c[:, 1], drawstyle="default", label=f"AUC = {report.auc_roc:.4f}")
        ax.plot([0, 1], [0, 1], color="0.7", lw=0.8, ls="--")
        ax.set(xlabel="false positive rate", ylabel="true positive rate",
               title=f"ROC ({report.model_kind})", xlim=(0, 1), ylim=(0, 1.01))
        ax.legend(loc="lower right")
        out.append(_save(fig, directory / "roc.png"))
    if "pr" in curves:
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        c = curves["pr"]
        ax.step(c[:, 0], c[:, 1], where="post", label=f"AP = {report.auc_pr:.4f}")
        ax.set(xlabel="recall", ylabel="precision", title=f"Precision-recall ({report.model_kind})",
               xlim=(0, 1), ylim=(0, 1.01))
        ax.legend(loc="upper right")
        out.append(_save(fig, directory / "pr.png"))
    if report.confusion is not None:
        mat = np.asarray(report.confusion, dtype=float)
        row_sums = mat.sum(axis=1, keepdims=True)
        frac = np.divide(mat, row_sums, out=np.zeros_like(mat), where=row_sums > 0)
        labels = _bin_labels(report.confusion_edges)
        fig, ax = plt.subplots(figsize=(5.5, 4.8))
        im = ax.imshow(frac, cmap="Blues", vmin=0, vmax=1)
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                ax.text(j, i, f"{int(mat[i, j])}", ha="center", va="center", fontsize=7,
                        color="white" if frac[i, j] > 0.5 else "black")
        ax.set_xticks(range(len(labels)), labels, rotation=45, ha="right", fontsize=7)
        ax.set_yticks(range(len(labels)), labels, fontsize=7)
        ax.set(xlabel="predicted RUL", ylabel="true RUL", title=f"RUL bins ({report.model_kind})")
        fig.colorbar(im, ax=ax, label="row fraction")
        out.append(_save(fig, directory / "confusion.png"))
    return out


def plot_history(path, history: Sequence[dict]) -> Path:
    phases = list(dict.fromkeys(r["phase"] for r in history))
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    step = 0
    for phase in phases:
        rows = [r for r in history if r["phase"] == phase]
        x = np.arange(step, step + len(rows)) + 1
        axes[0].plot(x, [r["loss"] for r in rows], label=phase)
        if rows and "val_value" in rows[0]:
            axes[1].plot(x, [r["val_value"] for r in rows], label=f"{phase}: {rows[0]['val_metric']}")
        step += len(rows)
    axes[0].set(xlabel="epoch", ylabel="training loss", yscale="symlog")
    axes[1].set(xlabel="epoch", ylabel="validation metric")
    for ax in axes:
        if ax.lines:
            ax.legend(fontsize=8)
    return _save(fig, Path(path))


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
