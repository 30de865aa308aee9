"""Report emission: stable JSON + CSV, with matplotlib figures alongside.

Numeric report fields are fixed to 6 decimal places (integers stay exact) so
identical runs produce byte-identical report files.
"""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def round6(value):
    """Recursively round floats to 6 decimals; leave ints and strings alone."""
    if isinstance(value, bool) or isinstance(value, (int, str)) or value is None:
        return value
    if isinstance(value, float):
        return round(value, 6)
    if isinstance(value, dict):
        return {k: round6(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round6(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return round(float(value), 6)
    return value


def fmt6(x) -> str:
    return f"{float(x):.6f}"


def write_json(path, record: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(round6(record), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, rows: list[dict], fieldnames: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: fmt6(v) if isinstance(v, float) else v for k, v in row.items()})


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_bar_figure(path, labels, values, title, ylabel) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(range(len(labels)), values, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    _finish(fig, path)


def save_curve_figure(path, x, y, title, xlabel, ylabel, marker=None) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(x, y, marker=marker, color="#a84848")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    _finish(fig, path)


def save_f1_sweep_figure(path, taus, f1) -> None:
    save_curve_figure(path, taus, f1, "Pooled F1 vs threshold", "threshold", "F1")


def save_pr_figure(path, rec, pre) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(rec, pre, color="#48a860")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_title("Pooled precision-recall")
    ax.grid(True, alpha=0.3)
    _finish(fig, path)


class ReportDir:
    """A directory receiving the delimited report files and their figures."""

    def __init__(self, path):
        self.path = str(path)
        os.makedirs(self.path, exist_ok=True)

    def file(self, name: str) -> str:
        return os.path.join(self.path, name)

    def emit_analyze(self, record: dict) -> None:
        write_json(self.file("analysis.json"), record)
        rows = []
        groups = sorted(set(record["param_breakdown"]) | set(record["macs_breakdown"]))
        for grp in groups:
            rows.append({
                "group": grp,
                "params": record["param_breakdown"].get(grp, 0),
                "macs": record["macs_breakdown"].get(grp, 0),
            })
        write_csv(self.file("analysis.csv"), rows, ["group", "params", "macs"])
        save_bar_figure(self.file("params_by_group.png"),
                        [r["group"] for r in rows], [r["params"] for r in rows],
                        f"Parameters by group ({record['variant']})", "parameters")
        save_bar_figure(self.file("macs_by_group.png"),
                        [r["group"] for r in rows], [r["macs"] for r in rows],
                        f"MACs by group ({record['variant']})", "multiply-accumulates")

    def emit_eval(self, report, sweep=None) -> None:
        write_json(self.file("eval.json"), report.to_dict())
        fields = ["name", "maxf", "best_threshold", "ap", "pre", "rec",
                  "fpr", "fnr", "miou", "ohem_loss"]
        write_csv(self.file("eval_per_image.csv"),
                  [r.to_dict() for r in report.per_image], fields)
        if sweep is not None:
            taus, f1, pre, rec = sweep
            save_f1_sweep_figure(self.file("f1_sweep.png"), taus, f1)
            save_pr_figure(self.file("pr_curve.png"), rec, pre)
        save_bar_figure(self.file("per_image_maxf.png"),
                        [r.name for r in report.per_image],
                        [r.maxf for r in report.per_image],
                        "Per-image MaxF", "MaxF")

    def emit_bench(self, record: dict) -> None:
        write_json(self.file("bench.json"), record)
        rows = record["runs"]
        write_csv(self.file("bench.csv"), rows,
                  ["threads", "mean_s", "p50_s", "p95_s", "throughput_fps"])
        save_curve_figure(self.file("latency_by_threads.png"),
                          [r["threads"] for r in rows],
                          [r["mean_s"] for r in rows],
                          "Mean forward latency", "threads", "seconds", marker="o")
