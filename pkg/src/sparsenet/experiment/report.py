"""Figure tables and connectivity/accuracy correlations from sweep CSVs."""

from __future__ import annotations

import csv
import io
import math
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from sparsenet.experiment.sweep import SweepResult

WEIGHT_STATS_COLUMNS = ("construction", "k", "layer", "max", "min", "std")
ACCURACY_COLUMNS = (
    "label",
    "construction",
    "degree",
    "layer0_k",
    "layer0_density",
    "network_density",
    "repeats",
    "mean_accuracy",
    "std_accuracy",
    "min_accuracy",
    "max_accuracy",
)
SETTINGS_COLUMNS = (
    "label",
    "layer_sizes",
    "dropout",
    "construction",
    "degree",
    "network_density",
    "repeats",
    "mean_accuracy",
)
CONNECTIVITY_COLUMNS = (
    "label",
    "construction",
    "degree",
    "repeat",
    "layer0_k",
    "components",
    "lambda2",
    "second_largest_nonzero",
    "largest_nonzero",
    "final_accuracy",
)
CORRELATION_COLUMNS = ("degree", "metric", "samples", "pearson_r", "status")


@dataclass(frozen=True)
class Correlation:
    degree: str
    metric: str
    samples: int
    r: Optional[float]
    status: str  # ok | insufficient-data | degenerate


def pearson(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Sample Pearson correlation, or None when either column has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size < 2:
        raise ValueError("need two equal-length columns of at least two values")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    return float(dx @ dy) / math.sqrt(sxx * syy)


def _ok_rows(result: SweepResult, label: Optional[str] = None) -> List[Dict[str, str]]:
    return [
        r
        for r in result.rows
        if r.get("status") == "ok" and (label is None or r.get("label") == label)
    ]


def correlation_report(
    result: SweepResult,
    metrics: Sequence[str] = ("lambda2", "second_largest_nonzero"),
    layer: int = 0,
    min_samples: int = 3,
    label: Optional[str] = None,
) -> List[Correlation]:
    """Per-degree Pearson r between a layer's connectivity metric and final accuracy.

    Fully connected rows are left out: they are the dense baseline, not one of
    the sparse constructions being compared.
    """
    bands: "OrderedDict[str, List[Dict[str, str]]]" = OrderedDict()
    for r in _ok_rows(result, label):
        if r["construction"] == "FullyConnected":
            continue
        bands.setdefault(r["degree"], []).append(r)
    out = []
    for degree, rows in bands.items():
        for metric in metrics:
            n = len(rows)
            if n < min_samples:
                out.append(Correlation(degree, metric, n, None, "insufficient-data"))
                continue
            x = [float(r[f"l{layer}_{metric}"]) for r in rows]
            y = [float(r["final_accuracy"]) for r in rows]
            value = pearson(x, y)
            out.append(Correlation(degree, metric, n, value, "ok" if value is not None else "degenerate"))
    return out


def _group(rows, key) -> "OrderedDict[tuple, List[Dict[str, str]]]":
    groups: "OrderedDict[tuple, List[Dict[str, str]]]" = OrderedDict()
    for r in rows:
        groups.setdefault(key(r), []).append(r)
    return groups


def _acc(rows) -> np.ndarray:
    return np.array([float(r["final_accuracy"]) for r in rows])


def accuracy_vs_density(result: SweepResult, label: Optional[str] = None) -> List[tuple]:
    out = []
    groups = _group(_ok_rows(result, label), lambda r: (r["label"], r["construction"], r["degree"]))
    for (lab, construction, degree), rows in groups.items():
        acc = _acc(rows)
        first = rows[0]
        out.append(
            (
                lab,
                construction,
                degree,
                first["l0_k"],
                first["l0_density"],
                first["network_density"],
                len(rows),
                float(acc.mean()),
                float(acc.std()),
                float(acc.min()),
                float(acc.max()),
            )
        )
    return out


def settings_comparison(result: SweepResult, label: Optional[str] = None) -> List[tuple]:
    out = []
    groups = _group(
        _ok_rows(result, label),
        lambda r: (r["label"], r["layer_sizes"], r["dropout"], r["construction"], r["degree"]),
    )
    for key, rows in groups.items():
        out.append(key + (rows[0]["network_density"], len(rows), float(_acc(rows).mean())))
    return out


def connectivity_vs_accuracy(result: SweepResult, label: Optional[str] = None) -> List[tuple]:
    return [
        (
            r["label"],
            r["construction"],
            r["degree"],
            r["repeat"],
            r["l0_k"],
            r["l0_components"],
            r["l0_lambda2"],
            r["l0_second_largest_nonzero"],
            r["l0_largest_nonzero"],
            r["final_accuracy"],
        )
        for r in _ok_rows(result, label)
    ]


def _layer_count(columns: Iterable[str]) -> int:
    return sum(1 for c in columns if c.endswith("_w_std"))


def weight_statistics_table(result: SweepResult, label: Optional[str] = None) -> List[tuple]:
    """Mean over repeats of each layer's trained (max, min, std) per (construction, k)."""
    out = []
    layers = _layer_count(result.columns)
    rows = _ok_rows(result, label)
    for layer in range(layers):
        groups = _group(rows, lambda r: (r["construction"], r[f"l{layer}_k"]))
        for (construction, k), members in groups.items():
            stats = [
                float(np.mean([float(m[f"l{layer}_w_{s}"]) for m in members])) for s in ("max", "min", "std")
            ]
            out.append((construction, k, layer, *stats))
    return out


def _csv(header: Sequence[str], rows: Iterable[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def figure_tables(result: SweepResult, label: Optional[str] = None) -> Dict[str, str]:
    """CSV text per figure table, keyed by file stem."""
    return {
        "accuracy_vs_density": _csv(ACCURACY_COLUMNS, accuracy_vs_density(result, label)),
        "settings_comparison": _csv(SETTINGS_COLUMNS, settings_comparison(result, label)),
        "connectivity_vs_accuracy": _csv(CONNECTIVITY_COLUMNS, connectivity_vs_accuracy(result, label)),
        "weight_statistics": _csv(WEIGHT_STATS_COLUMNS, weight_statistics_table(result, label)),
    }


def correlation_csv(correlations: Sequence[Correlation]) -> str:
    return _csv(
        CORRELATION_COLUMNS,
        [(c.degree, c.metric, c.samples, "" if c.r is None else c.r, c.status) for c in correlations],
    )


def write_report(result: SweepResult, out_dir, label: Optional[str] = None) -> Dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, text in figure_tables(result, label).items():
        paths[name] = out / f"{name}.csv"
        paths[name].write_text(text, encoding="utf-8")
    paths["correlations"] = out / "correlations.csv"
    paths["correlations"].write_text(correlation_csv(correlation_report(result, label=label)), encoding="utf-8")
    return paths
