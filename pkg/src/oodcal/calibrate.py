"""TPR-beta threshold fitting (single and class-wise) and OoD/ID decisions.

The cutoff rule: with validation scores sorted ascending and
``m = ceil(beta * n)``, the threshold is the (m+1)-th order statistic, or
+inf when ``m == n``. When ties at that value would push the flagged fraction
above ``1 - beta``, the threshold advances past the ties to the next distinct
value (or +inf). The empirical false-alarm fraction on the fitting set is
therefore always <= 1 - beta, exactly.

A sample is declared out-of-distribution iff its score is >= the threshold
(inclusive); under the class-wise scheme the threshold is the one of the
sample's activated (argmax) logit.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BetaOutOfRange,
    ClassIndexOutOfRange,
    EmptyScores,
    MissingActivated,
)
from .scores import ScoreVector

SCHEME_ONE = "one"
SCHEME_MULTI = "multi"


def _check_beta(beta: float) -> None:
    if not (0.0 < beta < 1.0):
        raise BetaOutOfRange(f"beta must be in (0, 1), got {beta}")


def _ceil_beta_n(beta: float, n: int) -> int:
    # exact ceil(beta * n) on the binary value of beta, no float rounding
    p, q = float(beta).as_integer_ratio()
    return -((-p * n) // q)


def tpr_beta_cutoff(scores: np.ndarray, beta: float) -> float:
    """Threshold for one score sample under the TPR-beta rule (see module doc)."""
    n = scores.shape[0]
    if n == 0:
        raise EmptyScores("cannot fit a threshold on zero scores")
    m = _ceil_beta_n(beta, n)
    if m >= n:
        return float("inf")
    tau = np.partition(scores, m)[m]
    flagged = int(np.count_nonzero(scores >= tau))
    if flagged > n - m:
        # ties at tau spill below the order statistic; advance past them
        above = scores[scores > tau]
        return float(above.min()) if above.size else float("inf")
    return float(tau)


@dataclass(frozen=True)
class ThresholdModel:
    """Fitted thresholds: scheme 'one' holds a single tau (taus has length 1),
    scheme 'multi' holds one tau per class, +inf meaning never flag."""

    scheme: str
    beta: float
    taus: np.ndarray
    fit_counts: np.ndarray

    def __post_init__(self):
        if self.scheme not in (SCHEME_ONE, SCHEME_MULTI):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        _check_beta(self.beta)
        taus = np.asarray(self.taus, dtype=np.float64)
        counts = np.asarray(self.fit_counts, dtype=np.int64)
        if self.scheme == SCHEME_ONE and taus.size != 1:
            raise ValueError("scheme 'one' carries exactly one tau")
        if taus.shape != counts.shape:
            raise ValueError("taus and fit_counts must align")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "fit_counts", counts)

    @property
    def tau(self) -> float:
        if self.scheme != SCHEME_ONE:
            raise ValueError("tau is only defined for scheme 'one'")
        return float(self.taus[0])

    @property
    def num_classes(self) -> int:
        return int(self.taus.size)

    def to_json(self) -> dict:
        return {
            "scheme": self.scheme,
            "beta": self.beta,
            "taus": ["inf" if np.isinf(t) else float(t) for t in self.taus],
            "fit_counts": [int(c) for c in self.fit_counts],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ThresholdModel":
        taus = np.array(
            [np.inf if t == "inf" else float(t) for t in doc["taus"]], dtype=np.float64
        )
        return cls(
            scheme=doc["scheme"],
            beta=float(doc["beta"]),
            taus=taus,
            fit_counts=np.asarray(doc["fit_counts"], dtype=np.int64),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "ThresholdModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _score_array(scores) -> np.ndarray:
    if isinstance(scores, ScoreVector):
        return scores.scores
    return np.asarray(scores, dtype=np.float64)


def fit_threshold_one(scores, beta: float) -> ThresholdModel:
    """Single global threshold from ID validation scores."""
    _check_beta(beta)
    s = _score_array(scores)
    tau = tpr_beta_cutoff(s, beta)
    return ThresholdModel(
        scheme=SCHEME_ONE,
        beta=beta,
        taus=np.array([tau]),
        fit_counts=np.array([s.shape[0]]),
    )


def multi_cutoffs(
    scores: np.ndarray, activated: np.ndarray, num_classes: int, beta: float
) -> np.ndarray:
    """Per-activated-class TPR-beta cutoffs; +inf where a class is empty."""
    taus = np.full(num_classes, np.inf)
    order = np.argsort(activated, kind="stable")
    sorted_act = activated[order]
    sorted_scores = scores[order]
    bounds = np.searchsorted(sorted_act, np.arange(num_classes + 1))
    for c in range(num_classes):
        lo, hi = bounds[c], bounds[c + 1]
        if hi > lo:
            taus[c] = tpr_beta_cutoff(sorted_scores[lo:hi], beta)
    return taus


def fit_threshold_multi(scores: ScoreVector, beta: float, num_classes: int) -> ThresholdModel:
    """Per-activated-class thresholds from ID validation scores.

    Classes with no validation samples get tau = +inf and a warning, so they
    never raise an alarm until data arrives for them.
    """
    _check_beta(beta)
    if scores.activated is None:
        raise MissingActivated("multi fitting needs activated class indices")
    if num_classes < 1:
        raise ValueError("num_classes must be positive")
    act = scores.activated
    if act.size and (act.min() < 0 or act.max() >= num_classes):
        raise ClassIndexOutOfRange(
            f"activated index outside [0, {num_classes - 1}]"
        )

    counts = np.bincount(act, minlength=num_classes).astype(np.int64)
    taus = multi_cutoffs(scores.scores, act, num_classes, beta)
    empty = [int(c) for c in np.where(counts == 0)[0]]
    if empty:
        warnings.warn(
            f"classes {empty} have no validation samples; thresholds set to +inf",
            stacklevel=2,
        )
    return ThresholdModel(scheme=SCHEME_MULTI, beta=beta, taus=taus, fit_counts=counts)


def decide(scores: ScoreVector, model: ThresholdModel) -> np.ndarray:
    """Per-sample decisions: True = out-of-distribution, False = in-distribution.

    Decisions are pointwise, so they are invariant to dataset composition;
    duplicating samples never changes any original sample's decision.
    """
    s = scores.scores
    if model.scheme == SCHEME_ONE:
        return s >= model.taus[0]
    if scores.activated is None:
        raise MissingActivated("scheme 'multi' needs activated class indices")
    act = scores.activated
    if act.size and (act.min() < 0 or act.max() >= model.num_classes):
        raise ClassIndexOutOfRange(
            f"activated index outside [0, {model.num_classes - 1}]"
        )
    return s >= model.taus[act]
