"""Agreement statistics for paired angle measurements and state labels.

Covers what the evaluation workflow needs: absolute-error statistics,
Pearson and Spearman coefficients, Bland-Altman limits of agreement, an
error-range histogram, and a multi-class classification report (accuracy,
one-vs-rest precision/recall/F1, Cohen's kappa, Fowlkes-Mallows).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, UndefinedCorrelationError


@dataclass(frozen=True)
class PairedMeasurements:
    """Two measurement series over the same items, e.g. algorithmic vs reference."""

    algorithmic: tuple[float, ...]
    reference: tuple[float, ...]

    def __init__(self, algorithmic, reference):
        x = tuple(float(v) for v in algorithmic)
        y = tuple(float(v) for v in reference)
        if len(x) != len(y):
            raise ValueError(f"series lengths differ: {len(x)} vs {len(y)}")
        if not x:
            raise ValueError("series must be non-empty")
        if not all(math.isfinite(v) for v in x + y):
            raise ValueError("series values must be finite")
        object.__setattr__(self, "algorithmic", x)
        object.__setattr__(self, "reference", y)

    def __len__(self) -> int:
        return len(self.algorithmic)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square count matrix; rows are actual classes, columns predicted."""

    classes: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    def __init__(self, classes, counts):
        labels = tuple(str(c) for c in classes)
        if len(set(labels)) != len(labels) or not labels:
            raise ValueError("classes must be non-empty and unique")
        rows = tuple(tuple(int(v) for v in row) for row in counts)
        if len(rows) != len(labels) or any(len(r) != len(labels) for r in rows):
            raise ValueError("counts must be square and match the class list")
        if any(v < 0 for row in rows for v in row):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "classes", labels)
        object.__setattr__(self, "counts", rows)

    @property
    def total(self) -> int:
        return sum(v for row in self.counts for v in row)

    @classmethod
    def from_pairs(cls, actual, predicted, classes=None) -> "ConfusionMatrix":
        act = [str(a) for a in actual]
        pred = [str(p) for p in predicted]
        if len(act) != len(pred):
            raise ValueError("actual and predicted lengths differ")
        labels = tuple(classes) if classes is not None else tuple(sorted(set(act) | set(pred)))
        index = {c: i for i, c in enumerate(labels)}
        counts = [[0] * len(labels) for _ in labels]
        for a, p in zip(act, pred):
            counts[index[a]][index[p]] += 1
        return cls(labels, counts)


def _require_pairs(m: PairedMeasurements, n_min: int):
    if len(m) < n_min:
        raise InsufficientDataError(f"need at least {n_min} pairs, got {len(m)}")


def error_stats(m: PairedMeasurements) -> dict:
    """Mean, sample standard deviation (n-1) and median of |x_i - y_i|."""
    _require_pairs(m, 2)
    errors = np.abs(np.asarray(m.algorithmic) - np.asarray(m.reference))
    return {
        "mean": float(errors.mean()),
        "std": float(errors.std(ddof=1)),
        "median": float(np.median(errors)),
    }


def pearson(m: PairedMeasurements) -> float:
    """Pearson coefficient sum((x-xm)(y-ym)) / sqrt(sum((x-xm)^2) sum((y-ym)^2))."""
    _require_pairs(m, 2)
    x = np.asarray(m.algorithmic)
    y = np.asarray(m.reference)
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant series")
    return float(dx @ dy) / denom


def _average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the average of their rank positions."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, dtype=float)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(m: PairedMeasurements) -> float:
    """Rank correlation: Pearson over average ranks (handles ties)."""
    _require_pairs(m, 2)
    rx = _average_ranks(m.algorithmic)
    ry = _average_ranks(m.reference)
    return pearson(PairedMeasurements(rx, ry))


def bland_altman(m: PairedMeasurements) -> dict:
    """Bland-Altman agreement over signed differences x_i - y_i.

    Limits of agreement are mean_diff +- 1.96 * std_diff with the sample
    standard deviation; points are (pair mean, pair difference) for plotting.
    """
    _require_pairs(m, 2)
    x = np.asarray(m.algorithmic)
    y = np.asarray(m.reference)
    diff = x - y
    mean_diff = float(diff.mean())
    std_diff = float(diff.std(ddof=1))
    return {
        "mean_diff": mean_diff,
        "std_diff": std_diff,
        "upper_loa": mean_diff + 1.96 * std_diff,
        "lower_loa": mean_diff - 1.96 * std_diff,
        "points": [(float(a), float(b)) for a, b in zip((x + y) / 2.0, diff)],
    }


def classification_report(cm: ConfusionMatrix) -> dict:
    """Accuracy, one-vs-rest precision/recall/F1, kappa and Fowlkes-Mallows.

    Macro averages are unweighted class means, weighted averages use the
    actual-class supports. FM is the macro mean of per-class sqrt(P * R).
    Metrics with a zero denominator are reported as 0 and listed in that
    class's "undefined" entry so averages stay computable.
    """
    counts = np.asarray(cm.counts, dtype=np.int64)
    total = int(counts.sum())
    if total < 1:
        raise ValueError("confusion matrix has no samples")
    row_sums = counts.sum(axis=1)
    col_sums = counts.sum(axis=0)
    diag = np.diag(counts)

    per_class = {}
    fm_terms = []
    for i, label in enumerate(cm.classes):
        undefined = []
        if col_sums[i] > 0:
            precision = float(diag[i]) / float(col_sums[i])
        else:
            precision = 0.0
            undefined.append("precision")
        if row_sums[i] > 0:
            recall = float(diag[i]) / float(row_sums[i])
        else:
            recall = 0.0
            undefined.append("recall")
        if precision + recall > 0:
            f1 = 2.0 * precision * recall / (precision + recall)
        else:
            f1 = 0.0
            undefined.append("f1")
        per_class[label] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": int(row_sums[i]),
            "undefined": undefined,
        }
        fm_terms.append(math.sqrt(precision * recall))

    k = len(cm.classes)
    macro = {
        key: sum(per_class[c][key] for c in cm.classes) / k for key in ("precision", "recall", "f1")
    }
    weighted = {
        key: sum(per_class[c][key] * per_class[c]["support"] for c in cm.classes) / total
        for key in ("precision", "recall", "f1")
    }

    agree = int(diag.sum())
    chance_num = int((row_sums * col_sums).sum())  # N^2 * p_e
    p_o = agree / total
    if chance_num == total * total:
        # Both marginals sit on one class, which forces a perfect diagonal.
        kappa = 1.0
    else:
        p_e = chance_num / (total * total)
        kappa = (p_o - p_e) / (1.0 - p_e)

    return {
        "accuracy": p_o,
        "per_class": per_class,
        "macro_avg": macro,
        "weighted_avg": weighted,
        "kappa": kappa,
        "fm": sum(fm_terms) / k,
    }


def error_range_distribution(m: PairedMeasurements, full_range: float = 180.0, bin_width_pct: float = 4.0) -> list[dict]:
    """Histogram of |x_i - y_i| as a percentage of full_range.

    Bins are [0, w), [w, 2w), ... and extend far enough to cover both 100%
    and the largest observed error, so the fractions always sum to 1.
    """
    if full_range <= 0:
        raise ValueError("full_range must be > 0")
    if bin_width_pct <= 0:
        raise ValueError("bin_width_pct must be > 0")
    pct = np.abs(np.asarray(m.algorithmic) - np.asarray(m.reference)) / full_range * 100.0
    n_bins = max(math.ceil(100.0 / bin_width_pct), math.floor(float(pct.max()) / bin_width_pct) + 1)
    indices = np.minimum((pct // bin_width_pct).astype(int), n_bins - 1)
    hist = np.bincount(indices, minlength=n_bins)
    return [
        {
            "lower_pct": i * bin_width_pct,
            "upper_pct": (i + 1) * bin_width_pct,
            "count": int(hist[i]),
            "fraction": float(hist[i]) / len(m),
        }
        for i in range(n_bins)
    ]


def points_csv(rows, header: tuple[str, ...]) -> str:
    """Render rows of numbers as CSV text with a header line."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def bland_altman_csv(result: dict) -> str:
    """Bland-Altman points as CSV (pair mean, signed difference)."""
    return points_csv(result["points"], ("mean", "difference"))


def error_range_csv(bins: list[dict]) -> str:
    """Error-range histogram as CSV."""
    rows = [(b["lower_pct"], b["upper_pct"], b["count"], b["fraction"]) for b in bins]
    return points_csv(rows, ("lower_pct", "upper_pct", "count", "fraction"))
