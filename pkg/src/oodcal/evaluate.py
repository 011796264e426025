"""Evaluation metrics: per-class TPR summaries and missed-detection rates.

TPR here is the per-activated-class fraction of ID samples accepted as ID
(one minus that class's false-alarm rate); the missed detection rate is the
fraction of an OoD set accepted as ID.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calibrate import ThresholdModel, decide
from .errors import EmptyScores
from .scores import ScoreVector


@dataclass(frozen=True)
class TprSummary:
    """Per-class TPRs (NaN where a class has no samples) with population stats."""

    tpr: np.ndarray
    counts: np.ndarray
    undefined_classes: tuple[int, ...]
    tpr_min: float
    tpr_max: float
    tpr_std: float


def per_class_tpr(
    id_scores: ScoreVector, model: ThresholdModel, num_classes: int | None = None
) -> TprSummary:
    """TPR per activated class: fraction of class samples decided ID.

    Classes with zero samples are reported as NaN and excluded from the
    min/max/std summary. The std is the population standard deviation over
    the defined classes.
    """
    if id_scores.activated is None:
        raise ValueError("per-class TPR needs activated class indices")
    if num_classes is None:
        if model.scheme == "multi":
            num_classes = model.num_classes
        else:
            num_classes = int(id_scores.activated.max()) + 1 if len(id_scores) else 1

    is_ood = decide(id_scores, model)
    act = id_scores.activated
    counts = np.bincount(act, minlength=num_classes).astype(np.int64)
    accepted = np.bincount(act, weights=~is_ood, minlength=num_classes)

    tpr = np.full(num_classes, np.nan)
    defined = counts > 0
    tpr[defined] = accepted[defined] / counts[defined]
    undefined = tuple(int(c) for c in np.where(~defined)[0])

    if defined.any():
        vals = tpr[defined]
        return TprSummary(
            tpr=tpr,
            counts=counts,
            undefined_classes=undefined,
            tpr_min=float(vals.min()),
            tpr_max=float(vals.max()),
            tpr_std=float(vals.std()),
        )
    return TprSummary(
        tpr=tpr,
        counts=counts,
        undefined_classes=undefined,
        tpr_min=float("nan"),
        tpr_max=float("nan"),
        tpr_std=float("nan"),
    )


def missed_detection_rate(ood_scores: ScoreVector, model: ThresholdModel) -> float:
    """Fraction of OoD samples mistaken for ID."""
    if len(ood_scores) == 0:
        raise EmptyScores("missed detection rate over zero samples is undefined")
    return float(np.mean(~decide(ood_scores, model)))


@dataclass(frozen=True)
class EvaluationReport:
    """Result bundle for one detector/scheme pair, serializable to JSON."""

    detector: str
    scheme: str
    beta: float
    per_class_tpr: np.ndarray
    tpr_min: float
    tpr_max: float
    tpr_std: float
    undefined_classes: tuple[int, ...] = ()
    per_ood_set: tuple[tuple[str, float], ...] = ()
    mean_missed_detection: float | None = None

    def to_json(self) -> dict:
        def rate(x: float):
            # full precision internally, 4 decimals on the wire
            return None if x is None or np.isnan(x) else round(float(x), 4)

        doc: dict = {
            "detector": self.detector,
            "scheme": self.scheme,
            "beta": self.beta,
            "per_class_tpr": [rate(t) for t in self.per_class_tpr],
            "tpr_min": rate(self.tpr_min),
            "tpr_max": rate(self.tpr_max),
            "tpr_std": rate(self.tpr_std),
        }
        if self.undefined_classes:
            doc["undefined_classes"] = list(self.undefined_classes)
        doc["per_ood_set"] = [
            {"name": name, "missed_detection_rate": rate(r)}
            for name, r in self.per_ood_set
        ]
        if self.mean_missed_detection is not None:
            doc["mean_missed_detection"] = rate(self.mean_missed_detection)
        return doc


def build_report(
    detector: str,
    scheme: str,
    beta: float,
    tpr: TprSummary,
    ood_rates: list[tuple[str, float]] | None = None,
) -> EvaluationReport:
    """Assemble a report; the mean missed detection is the unweighted mean
    over OoD sets and is omitted when there are none."""
    ood_rates = list(ood_rates or [])
    mean_rate = (
        float(np.mean([r for _, r in ood_rates])) if ood_rates else None
    )
    return EvaluationReport(
        detector=detector,
        scheme=scheme,
        beta=beta,
        per_class_tpr=tpr.tpr,
        tpr_min=tpr.tpr_min,
        tpr_max=tpr.tpr_max,
        tpr_std=tpr.tpr_std,
        undefined_classes=tpr.undefined_classes,
        per_ood_set=tuple(ood_rates),
        mean_missed_detection=mean_rate,
    )


def write_tpr_csv(path: str | Path, tpr: TprSummary) -> None:
    """`class,tpr` rows for plotting; undefined classes emit an empty field."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("class,tpr\n")
        for c, t in enumerate(tpr.tpr):
            fh.write(f"{c},{'' if np.isnan(t) else repr(float(t))}\n")


def write_ood_rates_csv(path: str | Path, rates: list[tuple[str, float]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("ood_set,missed_detection_rate\n")
        for name, r in rates:
            fh.write(f"{name},{repr(float(r))}\n")


def dump_reports(reports: list[EvaluationReport]) -> str:
    """Deterministic JSON array of report blocks."""
    return json.dumps([r.to_json() for r in reports], indent=2)
