"""Report serialization: JSON, aligned text tables, curve CSVs and PNG figures."""

import csv
import io
import json

import numpy as np

from .crossval import METRIC_NAMES
from .metrics import precision_recall_curve, roc_curve

TABLE_HEADERS = ("Model", "Accuracy", "Precision", "Recall", "F1-score", "ROC-AUC", "PR-REC AUC")


def dumps_json(obj):
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def comparison_table(reports):
    """Aligned text table with one row per model, metric columns in the usual order."""
    rows = [TABLE_HEADERS]
    for r in reports:
        mean = r.mean
        rows.append((r.model_id, *(f"{mean[k]:.4f}" for k in METRIC_NAMES)))
    widths = [max(len(row[i]) for row in rows) for i in range(len(TABLE_HEADERS))]
    lines = []
    for j, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def curves_csv(reports):
    """Long-format CSV of ROC and PR points: model, curve, x, y, threshold."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "curve", "x", "y", "threshold"])
    for r in reports:
        if len(np.unique(r.truth)) < 2:
            continue
        fpr, tpr, th = roc_curve(r.scores, r.truth)
        for x, y, t in zip(fpr, tpr, th):
            w.writerow([r.model_id, "roc", repr(float(x)), repr(float(y)), repr(float(t))])
        precision, recall, th = precision_recall_curve(r.scores, r.truth)
        for x, y, t in zip(recall, precision, th):
            w.writerow([r.model_id, "pr", repr(float(x)), repr(float(y)), repr(float(t))])
    return buf.getvalue()


def alert_rates_csv(alert_reports):
    """``{model_id: AlertRateReport}`` -> CSV rows per model and home."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "home_id", "tag", "days", "alerts", "rate"])
    for model_id in sorted(alert_reports):
        for h in alert_reports[model_id].homes:
            w.writerow([model_id, h["home_id"], h["tag"], h["days"], h["alerts"], repr(float(h["rate"]))])
    return buf.getvalue()


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path):
    # fixed metadata keeps repeated renders byte-identical
    fig.savefig(path, dpi=100, metadata={"Software": None})


def plot_curves(reports, path):
    """ROC and precision-recall curves of the pooled out-of-fold scores."""
    plt = _pyplot()
    fig, (ax_roc, ax_pr) = plt.subplots(1, 2, figsize=(10, 4.5))
    for r in reports:
        if len(np.unique(r.truth)) < 2:
            continue
        fpr, tpr, _ = roc_curve(r.scores, r.truth)
        ax_roc.plot(fpr, tpr, label=f"{r.model_id} ({r.mean['roc_auc']:.3f})")
        precision, recall, _ = precision_recall_curve(r.scores, r.truth)
        ax_pr.step(np.r_[0.0, recall], np.r_[precision[0], precision], where="pre",
                   label=f"{r.model_id} ({r.mean['pr_auc']:.3f})")
    ax_roc.plot([0, 1], [0, 1], color="grey", lw=0.8, ls="--")
    ax_roc.set(xlabel="False positive rate", ylabel="True positive rate", title="ROC")
    ax_pr.set(xlabel="Recall", ylabel="Precision", title="Precision-recall", ylim=(0, 1.05))
    for ax in (ax_roc, ax_pr):
        ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_alert_rates(alert_reports, path):
    """Grouped bars of per-home alert rate, one group per home and one bar per model."""
    plt = _pyplot()
    models = sorted(alert_reports)
    homes = [h["home_id"] for h in alert_reports[models[0]].homes] if models else []
    fig, ax = plt.subplots(figsize=(max(6, 0.6 * len(homes) + 2), 4))
    width = 0.8 / max(len(models), 1)
    for j, m in enumerate(models):
        rates = [h["rate"] for h in alert_reports[m].homes]
        ax.bar(np.arange(len(homes)) + j * width, rates, width, label=m)
    tags = {h["home_id"]: h["tag"] for h in alert_reports[models[0]].homes} if models else {}
    ax.set_xticks(np.arange(len(homes)) + 0.4 - width / 2)
    ax.set_xticklabels([f"{h}\n{tags[h].split('-')[0]}" for h in homes], rotation=90, fontsize=7)
    ax.set(ylabel="Alert rate", ylim=(0, 1), title="Hold-out alert rate per home")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_losses(histories, path, title="Training loss"):
    """``{name: [loss per epoch]}`` as lines on one axis."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in sorted(histories):
        h = histories[name]
        ax.plot(np.arange(1, len(h) + 1), h, marker="o", ms=3, label=name)
    ax.set(xlabel="Epoch", ylabel="Loss", title=title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
