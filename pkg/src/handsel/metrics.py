"""Classification and regression scores, and the ablation report table.

Weighted F1 uses the per-class ``2TP / (2TP + FP + FN)``. Brier is the
multi-class sum over classes, so it ranges over [0, 2].
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, LengthMismatchError, NormalizationError, ZeroActualError

BRIER_CONVENTION = "multi-class: mean over rows of sum over classes of (onehot - p)^2, range [0, 2]"


def _pair(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if len(a) != len(b):
        raise LengthMismatchError(f"lengths differ: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise EmptyInputError("metric of empty input")
    return a, b


def accuracy(labels, predictions) -> float:
    y, p = _pair(labels, predictions)
    return float(np.mean(y == p))


def weighted_f1(labels, predictions) -> float:
    """Support-weighted mean of per-class F1 over the classes present in ``labels``."""
    y, p = _pair(labels, predictions)
    n = len(y)
    total = 0.0
    for c in np.unique(y):
        tp = np.sum((y == c) & (p == c))
        fp = np.sum((y != c) & (p == c))
        fn = np.sum((y == c) & (p != c))
        f1 = 2 * tp / (2 * tp + fp + fn)
        total += f1 * np.sum(y == c) / n
    return float(total)


def brier(labels, probabilities) -> float:
    y = np.asarray(labels).astype(int)
    P = np.asarray(probabilities, dtype=float)
    if P.ndim != 2:
        raise ValueError("probabilities must be an (n, n_classes) matrix")
    _pair(y, P)
    if not np.allclose(P.sum(axis=1), 1.0, rtol=0, atol=1e-6):
        raise NormalizationError("probability vectors must sum to 1 within 1e-6")
    if y.min() < 0 or y.max() >= P.shape[1]:
        raise ValueError("label outside the probability columns")
    onehot = np.eye(P.shape[1])[y]
    return float(np.mean(np.sum((onehot - P) ** 2, axis=1)))


def rmse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(math.sqrt(np.mean((a.astype(float) - p) ** 2)))


def mape(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    a = a.astype(float)
    if np.any(a == 0):
        raise ZeroActualError("MAPE is undefined when an actual value is 0")
    return float(np.mean(np.abs(a - p) / np.abs(a)))


@dataclass
class MetricsReport:
    model: str
    features: str  # classical | classical+SEL
    accuracy: float | None = None
    weighted_f1: float | None = None
    brier: float | None = None
    rmse_home: float | None = None
    mape_home: float | None = None
    rmse_away: float | None = None
    mape_away: float | None = None

    @property
    def task(self) -> str:
        return "classify" if self.accuracy is not None else "regress"


CLASSIFY_COLUMNS = ["model", "features", "accuracy", "weighted_f1", "brier"]
REGRESS_COLUMNS = ["model", "features", "rmse_home", "mape_home", "rmse_away", "mape_away"]


def classification_report(model: str, features: str, labels, probabilities) -> MetricsReport:
    P = np.asarray(probabilities, dtype=float)
    pred = np.argmax(P, axis=1)
    return MetricsReport(model, features, accuracy=accuracy(labels, pred),
                         weighted_f1=weighted_f1(labels, pred), brier=brier(labels, P))


def regression_report(model: str, features: str, home, away, predicted) -> MetricsReport:
    predicted = np.asarray(predicted, dtype=float)
    return MetricsReport(
        model, features,
        rmse_home=rmse(home, predicted[:, 0]), mape_home=mape(home, predicted[:, 0]),
        rmse_away=rmse(away, predicted[:, 1]), mape_away=mape(away, predicted[:, 1]),
    )


def ablation_report(models: dict, datasets: dict, task: str) -> list[MetricsReport]:
    """Score every ``(model name, feature set)`` pair on its matched test data.

    ``models`` maps ``(model, features)`` to a trained classifier or
    two-target regressor; ``datasets`` maps the feature-set label to the
    test :class:`~handsel.features.Dataset` with matching columns.
    """
    rows = []
    for (name, fs), model in sorted(models.items()):
        data = datasets[fs]
        if task == "classify":
            rows.append(classification_report(name, fs, data.outcome, model.predict_proba(data.X)))
        else:
            rows.append(regression_report(name, fs, data.home_goals, data.away_goals, model.predict(data.X)))
    return rows


def write_report(reports, path, task: str) -> Path:
    """CSV (or JSON, by suffix) with exactly the task's metric columns."""
    path = Path(path)
    columns = CLASSIFY_COLUMNS if task == "classify" else REGRESS_COLUMNS
    records = [{c: asdict(r)[c] for c in columns} for r in reports]
    if path.suffix == ".json":
        path.write_text(json.dumps({"task": task, "brier_convention": BRIER_CONVENTION,
                                    "rows": records}, indent=1) + "\n", encoding="utf-8")
        return path
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for rec in records:
            w.writerow([rec[c] if isinstance(rec[c], str) else repr(rec[c]) for c in columns])
    return path


def format_table(reports, task: str) -> str:
    """Human-readable table in the layout of a results table."""
    lines = []
    if task == "classify":
        lines.append(f"{'Model':<10} {'Features':<16} {'Accuracy':>9} {'F1':>8} {'Brier':>7}")
        for r in reports:
            lines.append(f"{r.model:<10} {r.features:<16} {r.accuracy:>9.2%} {r.weighted_f1:>8.2%} {r.brier:>7.4f}")
    else:
        lines.append(f"{'Model':<10} {'Features':<16} {'RMSE(h)':>8} {'MAPE(h)':>8} {'RMSE(a)':>8} {'MAPE(a)':>8}")
        for r in reports:
            lines.append(f"{r.model:<10} {r.features:<16} {r.rmse_home:>8.2f} {r.mape_home:>8.2%} "
                         f"{r.rmse_away:>8.2f} {r.mape_away:>8.2%}")
    return "\n".join(lines)
