"""Evaluation metrics: top-n detection-attempt accuracy, confusion matrices,
and accuracy report assembly (CSV/JSON)."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, asdict

import numpy as np


class BadN(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


def topn_accuracy(probs: np.ndarray, labels: np.ndarray, n: int) -> float:
    """Fraction of samples whose true label is among the n highest probabilities.

    Probability ties rank the lower label index first, so the metric is
    deterministic for degenerate predictors.
    """
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    if probs.ndim != 2 or len(probs) != len(labels):
        raise LengthMismatch(f"probs {probs.shape} vs labels {labels.shape}")
    C = probs.shape[1]
    if not (1 <= n <= C):
        raise BadN(f"n={n} outside 1..{C}")
    if len(labels) == 0:
        return 0.0
    order = np.argsort(-probs, axis=1, kind="stable")  # stable: ties keep low index first
    hits = (order[:, :n] == labels[:, None]).any(axis=1)
    return float(hits.mean())


def confusion(predictions: np.ndarray, labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Rows are true labels, columns predicted; row sums are per-class support."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise LengthMismatch(f"{predictions.shape} vs {labels.shape}")
    mat = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(mat, (labels, predictions), 1)
    return mat


@dataclass
class ReportRow:
    arch: str
    variant: str
    m: int
    split: str  # "train" or "test"
    n: int
    mean: float
    std: float
    folds: list[float]


def summarize_folds(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return mean, std


def build_report(results: list[dict]) -> list[ReportRow]:
    """Aggregate k-fold outputs into (arch, variant, m, split, n) rows.

    Each input dict: {arch, variant, m, folds: [{split -> {n -> acc}}, ...]}.
    """
    rows: list[ReportRow] = []
    for res in results:
        splits = sorted({s for fold in res["folds"] for s in fold})
        for split in splits:
            ns = sorted({int(n) for fold in res["folds"] for n in fold[split]})
            for n in ns:
                vals = [float(fold[split][str(n)] if str(n) in fold[split] else fold[split][n])
                        for fold in res["folds"]]
                mean, std = summarize_folds(vals)
                rows.append(ReportRow(res["arch"], res["variant"], int(res["m"]),
                                      split, n, mean, std, vals))
    rows.sort(key=lambda r: (r.arch, r.variant, r.m, r.split, r.n))
    return rows


def report_to_csv(rows: list[ReportRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["arch", "variant", "m", "split", "n", "mean", "std", "folds"])
    for r in rows:
        writer.writerow([r.arch, r.variant, r.m, r.split, r.n,
                         f"{r.mean:.6f}", f"{r.std:.6f}",
                         ";".join(f"{v:.6f}" for v in r.folds)])
    return buf.getvalue()


def report_to_json(rows: list[ReportRow]) -> str:
    return json.dumps([asdict(r) for r in rows], indent=2, sort_keys=True) + "\n"


def report_to_plot_data(rows: list[ReportRow]) -> str:
    """Accuracy-vs-detection-attempt series, one per (arch, variant, m, split)."""
    series: dict[tuple, dict] = {}
    for r in rows:
        key = (r.arch, r.variant, r.m, r.split)
        entry = series.setdefault(key, {
            "arch": r.arch, "variant": r.variant, "m": r.m, "split": r.split,
            "x": [], "y": [], "std": [],
        })
        entry["x"].append(r.n)
        entry["y"].append(r.mean)
        entry["std"].append(r.std)
    return json.dumps(list(series.values()), indent=2, sort_keys=True) + "\n"
