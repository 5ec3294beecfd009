"""Render figures from the toolkit's delimited outputs.

Every plot here is derived from files the pipeline already writes (sweep
JSONL, projection CSV, curve CSVs), so reports can be regenerated without
re-running any experiment.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import AwepoolError

DPI = 150


def _load_sweep_records(jsonl_path):
    records = []
    with open(jsonl_path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            if "result" in d:
                records.append(d)
    if not records:
        raise AwepoolError(f"no successful records in {jsonl_path}")
    return records


def _series_key(cfg: dict) -> str:
    parts = [cfg["pooling"], "norm" if cfg["normalize"] else "raw"]
    if cfg.get("pca_dim"):
        parts.append(f"pca{cfg['pca_dim']}")
    return " ".join(parts)


def render_sweep_figure(jsonl_path, out_path) -> Path:
    """AP per layer and recipe: lines over layers, bars for a single layer."""
    records = _load_sweep_records(jsonl_path)
    layers = []
    series: dict[str, dict[str, float]] = {}
    for rec in records:
        cfg = rec["config"]
        layer = cfg["layer_tag"] or Path(cfg["feature_archive_path"]).stem
        if layer not in layers:
            layers.append(layer)
        series.setdefault(_series_key(cfg), {})[layer] = 100.0 * rec["result"]["average_precision"]

    fig, ax = plt.subplots(figsize=(7, 4))
    if len(layers) > 1:
        for name, by_layer in series.items():
            ys = [by_layer.get(layer) for layer in layers]
            ax.plot(range(len(layers)), ys, marker="o", label=name)
        ax.set_xticks(range(len(layers)))
        ax.set_xticklabels(layers)
        ax.set_xlabel("layer")
    else:
        names = list(series)
        ys = [series[name][layers[0]] for name in names]
        bars = ax.bar(range(len(names)), ys)
        ax.bar_label(bars, fmt="%.1f", fontsize=8)
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("AP (%)")
    ax.set_ylim(bottom=0)
    ax.grid(axis="y", alpha=0.3)
    if len(layers) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)
    return out_path


def render_projection_figure(csv_path, out_path, max_legend: int = 10) -> Path:
    """Scatter of the 2-D projection, the most frequent word types colored."""
    labels, xs, ys = [], [], []
    with open(csv_path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            labels.append(row["label"])
            xs.append(float(row["x"]))
            ys.append(float(row["y"]))
    if not labels:
        raise AwepoolError(f"no rows in {csv_path}")
    top = [w for w, _ in Counter(labels).most_common(max_legend)]
    fig, ax = plt.subplots(figsize=(6, 6))
    rest_x = [x for label, x in zip(labels, xs) if label not in top]
    rest_y = [y for label, y in zip(labels, ys) if label not in top]
    if rest_x:
        ax.scatter(rest_x, rest_y, s=8, color="lightgray", label="_other")
    for word in top:
        wx = [x for label, x in zip(labels, xs) if label == word]
        wy = [y for label, y in zip(labels, ys) if label == word]
        ax.scatter(wx, wy, s=12, label=word)
    ax.legend(fontsize=8, markerscale=1.5)
    ax.set_xlabel("PC 1")
    ax.set_ylabel("PC 2")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)
    return out_path


def _load_curve(csv_path, x_field, y_field):
    xs, ys = [], []
    with open(csv_path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            xs.append(float(row[x_field]))
            ys.append(float(row[y_field]))
    return xs, ys


def render_roc_figure(csv_path, out_path) -> Path:
    fpr, tpr = _load_curve(csv_path, "fpr", "tpr")
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([0, 1], [0, 1], linestyle="--", color="gray", linewidth=1)
    ax.plot([0.0] + fpr + [1.0], [0.0] + tpr + [1.0])
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)
    return out_path


def render_pr_figure(csv_path, out_path) -> Path:
    recall, precision = _load_curve(csv_path, "recall", "precision")
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(recall, precision)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)
    return out_path
