"""Statistical distances between score distributions, difficulty correlation
and exhaustive hyperparameter grid search for the fitted detectors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calibrate import SCHEME_MULTI, decide, fit_threshold_multi, fit_threshold_one
from .dataset import LogitDataset
from .errors import (
    ConstantInput,
    EmptyInput,
    LengthMismatch,
    SetNameMismatch,
)
from .evaluate import missed_detection_rate, per_class_tpr
from .scores import DetectorModel, fit_knn, fit_mahalanobis, score_dataset


def _sample(a) -> np.ndarray:
    v = np.asarray(a, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyInput("empty sample")
    return v


def wasserstein_1d(a, b) -> float:
    """1-Wasserstein distance between two empirical distributions.

    Integral of |F_a - F_b| over the merged sample, which for equal sizes
    reduces to the mean absolute difference of sorted samples.
    """
    xs = np.sort(_sample(a))
    ys = np.sort(_sample(b))
    grid = np.sort(np.concatenate([xs, ys]))
    deltas = np.diff(grid)
    if deltas.size == 0:
        return 0.0
    fa = np.searchsorted(xs, grid[:-1], side="right") / xs.size
    fb = np.searchsorted(ys, grid[:-1], side="right") / ys.size
    return float(np.sum(np.abs(fa - fb) * deltas))


def _mean_abs_self(sorted_x: np.ndarray) -> float:
    # E|X - X'| over all ordered pairs of one sorted sample
    n = sorted_x.size
    if n == 1:
        return 0.0
    i = np.arange(n)
    prefix = np.concatenate(([0.0], np.cumsum(sorted_x)))
    total = 2.0 * np.sum(i * sorted_x - prefix[:-1])
    return float(total / (n * n))


def _mean_abs_cross(sorted_x: np.ndarray, y: np.ndarray) -> float:
    # E|X - Y| via prefix sums over the sorted first sample
    n = sorted_x.size
    prefix = np.concatenate(([0.0], np.cumsum(sorted_x)))
    pos = np.searchsorted(sorted_x, y, side="right")
    below = y * pos - prefix[pos]
    above = (prefix[n] - prefix[pos]) - y * (n - pos)
    return float(np.sum(below + above) / (n * y.size))


def energy_distance(a, b) -> float:
    """Energy distance sqrt(2 E|X-Y| - E|X-X'| - E|Y-Y'|) between samples.

    The expectations are exact all-pairs means (computed in O(n log n) via
    sorted prefix sums); the radicand is clamped at zero against rounding.
    """
    x = np.sort(_sample(a))
    y = np.sort(_sample(b))
    radicand = (
        2.0 * _mean_abs_cross(x, y) - _mean_abs_self(x) - _mean_abs_self(y)
    )
    return math.sqrt(max(radicand, 0.0))


def pearson(x, y) -> float:
    """Product-moment correlation of two equal-length, non-constant vectors."""
    xv = np.asarray(x, dtype=np.float64).ravel()
    yv = np.asarray(y, dtype=np.float64).ravel()
    if xv.size != yv.size:
        raise LengthMismatch(f"lengths {xv.size} and {yv.size} differ")
    if xv.size < 2:
        raise LengthMismatch("need at least 2 points")
    xc = xv - xv.mean()
    yc = yv - yv.mean()
    sx = float(np.sqrt(np.sum(xc * xc)))
    sy = float(np.sqrt(np.sum(yc * yc)))
    if sx == 0.0 or sy == 0.0:
        raise ConstantInput("correlation of a constant vector is undefined")
    r = float(np.dot(xc, yc) / (sx * sy))
    return min(1.0, max(-1.0, r))  # rounding can spill past +-1 by an ulp


@dataclass(frozen=True)
class DistancePair:
    """Wasserstein and energy distances from the ID score sample to one OoD set."""

    ood_set: str
    wasserstein: float
    energy: float


def distance_table(
    id_scores, ood_score_sets: Sequence[tuple[str, np.ndarray]]
) -> list[DistancePair]:
    """One DistancePair per OoD set, order preserved.

    Distances are computed between 1-D score samples (by convention the
    max-logit score distribution of the ID test set and of each OoD set),
    keeping them comparable across models of different width.
    """
    ref = _sample(id_scores)
    table = []
    for name, sample in ood_score_sets:
        table.append(
            DistancePair(
                ood_set=name,
                wasserstein=wasserstein_1d(ref, sample),
                energy=energy_distance(ref, sample),
            )
        )
    return table


def correlate_difficulty(
    rates: Sequence[tuple[str, float]], distances: Sequence[DistancePair]
) -> dict[str, float]:
    """Pearson r between missed-detection rates and each distance column.

    The two inputs must list the same OoD sets in the same order.
    """
    rate_names = [name for name, _ in rates]
    dist_names = [d.ood_set for d in distances]
    if rate_names != dist_names:
        raise SetNameMismatch(
            f"rate sets {rate_names} do not align with distance sets {dist_names}"
        )
    r = [v for _, v in rates]
    return {
        "wasserstein_r": pearson(r, [d.wasserstein for d in distances]),
        "energy_r": pearson(r, [d.energy for d in distances]),
    }


# --- grid search -----------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Candidate lists per hyperparameter for one detector family.

    knn sweeps {k, metric, aggregation, minkowski_p}; energy and max_softmax
    sweep {temperature}; the remaining families take no parameters.
    """

    family: str
    candidates: dict[str, list] = field(default_factory=dict)

    _KEYS = {
        "knn": ("k", "metric", "aggregation", "minkowski_p"),
        "energy": ("temperature",),
        "max_softmax": ("temperature",),
        "max_logit": (),
        "mahalanobis": ("eps_scale",),
    }

    def __post_init__(self):
        if self.family not in self._KEYS:
            raise ValueError(f"unknown detector family {self.family!r}")
        for key, values in self.candidates.items():
            if key not in self._KEYS[self.family]:
                raise ValueError(f"{key!r} is not a parameter of {self.family}")
            if not values:
                raise ValueError(f"candidate list for {key!r} is empty")

    def configurations(self) -> list[dict]:
        """Cartesian product of candidate lists, in declaration order."""
        keys = [k for k in self._KEYS[self.family] if k in self.candidates]
        if not keys:
            return [{}]
        combos = itertools.product(*(self.candidates[k] for k in keys))
        return [dict(zip(keys, combo)) for combo in combos]

    @classmethod
    def from_json(cls, doc: dict) -> "GridSpec":
        family = doc["family"]
        candidates = {k: v for k, v in doc.items() if k != "family"}
        return cls(family=family, candidates=candidates)


def _build_detector(family: str, params: dict, fit_data: LogitDataset) -> DetectorModel:
    if family == "max_logit":
        return DetectorModel(kind="max_logit")
    if family == "max_softmax":
        return DetectorModel(kind="max_softmax", temperature=params.get("temperature", 1.0))
    if family == "energy":
        return DetectorModel(kind="energy", temperature=params.get("temperature", 1.0))
    if family == "mahalanobis":
        return fit_mahalanobis(fit_data, eps_scale=params.get("eps_scale", 1e-6))
    return fit_knn(
        fit_data,
        k=int(params.get("k", 1)),
        metric=params.get("metric", "euclidean"),
        aggregation=params.get("aggregation", "largest"),
        minkowski_p=float(params.get("minkowski_p", 2.0)),
    )


@dataclass(frozen=True)
class GridSearchResult:
    best: dict
    table: list[dict]


def grid_search(
    grid: GridSpec,
    fit_data: LogitDataset,
    valid_id: LogitDataset,
    valid_ood: LogitDataset,
    beta: float,
    scheme: str,
) -> GridSearchResult:
    """Exhaustive best-case sweep over a hyperparameter grid.

    Each configuration is fitted on ``fit_data``, thresholded on ``valid_id``
    and ranked by missed-detection rate on ``valid_ood`` (ties broken by
    higher minimum per-class TPR, then declaration order). This measures the
    maximum achievable performance given access to validation OoD data.
    """
    table: list[dict] = []
    for index, params in enumerate(grid.configurations()):
        detector = _build_detector(grid.family, params, fit_data)
        id_sv = score_dataset(detector, valid_id)
        if scheme == SCHEME_MULTI:
            model = fit_threshold_multi(id_sv, beta, valid_id.num_classes)
        else:
            model = fit_threshold_one(id_sv, beta)
        rate = missed_detection_rate(score_dataset(detector, valid_ood), model)
        if id_sv.activated is not None:
            min_tpr = per_class_tpr(id_sv, model, num_classes=valid_id.num_classes).tpr_min
        else:
            # feature data has no activated class; fall back to the overall accept rate
            min_tpr = float(np.mean(~decide(id_sv, model)))
        table.append(
            {
                "index": index,
                "family": grid.family,
                **params,
                "missed_detection_rate": rate,
                "min_tpr": min_tpr,
            }
        )
    ranked = sorted(
        table,
        key=lambda row: (row["missed_detection_rate"], -row["min_tpr"], row["index"]),
    )
    return GridSearchResult(best=ranked[0], table=table)
