"""Artifact writers: delimited outputs, JSON reports, and rendered figures.

Wall-clock measurements are quarantined into the timing files so that every
other artifact is byte-identical across reruns of the same seeded command.
"""
from __future__ import annotations

import csv
import json

from .metrics import REPORT_CSV_HEADER, EvalReport
from .unlearning import UnlearnTrace

TRACE_CSV_HEADER = ["epoch", "loss", "loss_r", "loss_f", "kl_info_bound"]
HISTORY_CSV_HEADER = ["epoch", "train_loss", "val_auc"]


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_history_csv(path, history) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_CSV_HEADER)
        for epoch, loss, val_auc in history:
            writer.writerow([epoch, _fmt(float(loss)), _fmt(float(val_auc))])


def write_trace_csv(path, trace: UnlearnTrace) -> None:
    """Deterministic per-epoch loss curves; epoch timings go to the timing file."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_CSV_HEADER)
        for i in range(len(trace)):
            writer.writerow(
                [i, _fmt(trace.loss[i]), _fmt(trace.loss_r[i]), _fmt(trace.loss_f[i]),
                 _fmt(trace.kl_info_bound[i])]
            )


def write_timing_csv(path, stage_seconds: dict, trace: UnlearnTrace | None = None) -> None:
    """Measured wall-clock per stage and, when available, per unlearning epoch."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "seconds"])
        for stage, secs in stage_seconds.items():
            writer.writerow([stage, _fmt(float(secs))])
        if trace is not None:
            for i, secs in enumerate(trace.seconds):
                writer.writerow([f"unlearn_epoch_{i}", _fmt(float(secs))])


def write_report_csv(path, report: EvalReport) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_CSV_HEADER)
        writer.writerow(report.csv_row())


def write_report_json(path, report: EvalReport, baselines: dict | None = None,
                      seeds: dict | None = None) -> None:
    """Deterministic report document; timing is excluded here by design."""
    doc = report.json_dict(include_timing=False)
    if baselines:
        doc["baselines"] = baselines
    if seeds:
        doc["seeds"] = {k: int(v) for k, v in seeds.items()}
    with open(path, "w", encoding="ascii") as fh:
        fh.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def append_sweep_row(path, fields: dict, error: str = "") -> None:
    """Append one run's row to the sweep CSV, creating the header on first use."""
    header = REPORT_CSV_HEADER + ["error"]
    new_file = not _has_content(path)
    with open(path, "a", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(header)
        row = [_fmt(fields[k]) if k in fields else "" for k in REPORT_CSV_HEADER]
        writer.writerow(row + [error])


def _has_content(path) -> bool:
    try:
        with open(path, "r", encoding="ascii") as fh:
            return bool(fh.readline())
    except FileNotFoundError:
        return False


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> None:
    # Strip the creation date so reruns overwrite with identical bytes.
    fig.savefig(path, dpi=120, metadata={"Date": None})


def render_trace_figure(trace: UnlearnTrace, path) -> None:
    """Loss decomposition and forget-set divergence curves for one run."""
    plt = _pyplot()
    epochs = range(len(trace))
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax0.plot(epochs, trace.loss, label="total", lw=1.2)
    ax0.plot(epochs, trace.loss_r, label="retain", lw=1.0)
    ax0.plot(epochs, trace.loss_f, label="forget", lw=1.0)
    ax0.set_xlabel("epoch")
    ax0.set_ylabel("loss")
    ax0.legend(frameon=False, fontsize=8)
    ax1.plot(epochs, trace.kl_info_bound, color="tab:red", lw=1.2)
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("forget-set KL to destroyer")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def render_report_figure(report: EvalReport, baselines: dict, stage_seconds: dict, path) -> None:
    """AUC comparison across models plus stage wall-clock bars."""
    plt = _pyplot()
    models = ["source", "gold", "unlearned"]
    retain = [baselines.get("source", {}).get("auc_retain"),
              baselines.get("gold", {}).get("auc_retain"),
              report.auc_retain]
    forget = [baselines.get("source", {}).get("auc_forget"),
              baselines.get("gold", {}).get("auc_forget"),
              report.auc_forget]
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.4))
    x = range(len(models))
    width = 0.38
    ax0.bar([i - width / 2 for i in x], [v or 0.0 for v in retain], width, label="retain AUC")
    ax0.bar([i + width / 2 for i in x], [v or 0.0 for v in forget], width, label="forget AUC")
    ax0.set_xticks(list(x))
    ax0.set_xticklabels(models)
    ax0.set_ylim(0.0, 1.05)
    ax0.axhline(0.5, color="gray", lw=0.6, ls="--")
    ax0.legend(frameon=False, fontsize=8)
    stages = list(stage_seconds)
    ax1.bar(stages, [stage_seconds[s] for s in stages], color="tab:purple")
    ax1.set_ylabel("seconds")
    ax1.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
