"""OoD score functions and fitted detectors.

All scores follow one convention: larger means more likely out of
distribution. The logit-dump scorers are

* max-logit:   -max_j l_j
* max-softmax: -max_j softmax(l / T)_j   (T defaults to 1)
* energy:      -T * logsumexp(l / T)

and the feature-space detectors are the minimal squared Mahalanobis distance
to the class-conditional Gaussians (tied covariance) and the aggregated
distance to the k nearest reference rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import LogitDataset
from .errors import (
    ClassTooSmall,
    ColumnKindMismatch,
    DimensionMismatch,
    EmptyVector,
    KExceedsReferenceSize,
    NonPositiveTemperature,
    SingularCovariance,
    UnlabeledDataset,
)

SCORE_KINDS = ("max_logit", "max_softmax", "energy", "mahalanobis", "knn")
LOGIT_KINDS = ("max_logit", "max_softmax", "energy")
KNN_METRICS = ("euclidean", "manhattan", "chebyshev", "minkowski", "braycurtis")
KNN_AGGREGATIONS = ("mean", "largest", "median")

_CDIST_NAME = {
    "euclidean": "euclidean",
    "manhattan": "cityblock",
    "chebyshev": "chebyshev",
    "minkowski": "minkowski",
    "braycurtis": "braycurtis",
}


@dataclass(frozen=True)
class ScoreVector:
    """Scores for a dataset, plus argmax class per row when logits are present."""

    scores: np.ndarray
    activated: np.ndarray | None = None

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "scores", s)
        if self.activated is not None:
            a = np.asarray(self.activated, dtype=np.int64)
            if a.shape != s.shape:
                raise DimensionMismatch("activated must align with scores")
            object.__setattr__(self, "activated", a)

    def __len__(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class DetectorModel:
    """A fitted (or parameter-only) OoD scorer.

    Only the fields relevant to ``kind`` are used; the rest stay at their
    defaults. Models are immutable and serialize to a self-contained JSON
    document.
    """

    kind: str
    temperature: float = 1.0
    class_means: np.ndarray | None = None
    covariance_inverse: np.ndarray | None = None
    regularization: float = 0.0
    reference: np.ndarray | None = None
    k: int = 1
    metric: str = "euclidean"
    aggregation: str = "largest"
    minkowski_p: float = 2.0

    def __post_init__(self):
        if self.kind not in SCORE_KINDS:
            raise ValueError(f"unknown detector kind {self.kind!r}")
        if self.temperature <= 0:
            raise NonPositiveTemperature(f"temperature {self.temperature} must be > 0")
        if self.kind == "mahalanobis":
            if self.class_means is None or self.covariance_inverse is None:
                raise ValueError("mahalanobis model requires means and covariance inverse")
            object.__setattr__(
                self, "class_means", np.asarray(self.class_means, dtype=np.float64)
            )
            object.__setattr__(
                self,
                "covariance_inverse",
                np.asarray(self.covariance_inverse, dtype=np.float64),
            )
        if self.kind == "knn":
            if self.reference is None:
                raise ValueError("knn model requires a reference matrix")
            ref = np.asarray(self.reference, dtype=np.float64)
            object.__setattr__(self, "reference", ref)
            if self.metric not in KNN_METRICS:
                raise ValueError(f"unknown knn metric {self.metric!r}")
            if self.aggregation not in KNN_AGGREGATIONS:
                raise ValueError(f"unknown knn aggregation {self.aggregation!r}")
            if self.k < 1 or self.k > ref.shape[0]:
                raise KExceedsReferenceSize(
                    f"k={self.k} outside [1, {ref.shape[0]}]"
                )

    @property
    def feature_dim(self) -> int | None:
        if self.kind == "mahalanobis":
            return self.class_means.shape[1]
        if self.kind == "knn":
            return self.reference.shape[1]
        return None

    def to_json(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.kind in ("energy", "max_softmax"):
            doc["temperature"] = self.temperature
        if self.kind == "mahalanobis":
            doc["class_means"] = self.class_means.tolist()
            doc["covariance_inverse"] = self.covariance_inverse.tolist()
            doc["regularization"] = self.regularization
        if self.kind == "knn":
            doc["reference"] = self.reference.tolist()
            doc["k"] = self.k
            doc["metric"] = self.metric
            doc["aggregation"] = self.aggregation
            if self.metric == "minkowski":
                doc["minkowski_p"] = self.minkowski_p
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "DetectorModel":
        kind = doc["kind"]
        kwargs: dict = {"kind": kind}
        if "temperature" in doc:
            kwargs["temperature"] = float(doc["temperature"])
        if kind == "mahalanobis":
            kwargs["class_means"] = np.asarray(doc["class_means"], dtype=np.float64)
            kwargs["covariance_inverse"] = np.asarray(
                doc["covariance_inverse"], dtype=np.float64
            )
            kwargs["regularization"] = float(doc.get("regularization", 0.0))
        if kind == "knn":
            kwargs["reference"] = np.asarray(doc["reference"], dtype=np.float64)
            kwargs["k"] = int(doc["k"])
            kwargs["metric"] = doc["metric"]
            kwargs["aggregation"] = doc["aggregation"]
            kwargs["minkowski_p"] = float(doc.get("minkowski_p", 2.0))
        return cls(**kwargs)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "DetectorModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


# --- per-vector scorers ------------------------------------------------------


def _as_vector(logits) -> np.ndarray:
    v = np.asarray(logits, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise EmptyVector("expected a non-empty 1-D vector")
    return v


def argmax_class(logits) -> int:
    """Index of the first occurrence of the maximum entry."""
    v = _as_vector(logits)
    return int(np.argmax(v))


def max_logit_score(logits) -> float:
    v = _as_vector(logits)
    return float(-np.max(v))


def max_softmax_score(logits, temperature: float = 1.0) -> float:
    """Negated maximum softmax probability, in [-1, -1/K].

    Computed with max-subtraction so large logits cannot overflow.
    """
    if temperature <= 0:
        raise NonPositiveTemperature(f"temperature {temperature} must be > 0")
    v = _as_vector(logits) / temperature
    shifted = v - np.max(v)
    return float(-1.0 / np.sum(np.exp(shifted)))


def energy_score(logits, temperature: float = 1.0) -> float:
    """-T * logsumexp(l / T), the smooth surrogate for the negated max logit.

    The shifted log-sum-exp keeps intermediates finite, so the bound
    ``max l <= -score <= max l + T*log(K)`` holds for any finite input.
    """
    if temperature <= 0:
        raise NonPositiveTemperature(f"temperature {temperature} must be > 0")
    v = _as_vector(logits) / temperature
    top = v.max()
    return float(-temperature * (top + np.log(np.exp(v - top).sum())))


# --- fitted detectors --------------------------------------------------------


def fit_mahalanobis(features: LogitDataset, eps_scale: float = 1e-6) -> DetectorModel:
    """Fit class-conditional Gaussians with a tied covariance.

    Means are per-class empirical means; the pooled covariance uses the 1/N
    maximum-likelihood denominator and is regularized as
    ``Sigma + eps*I`` with ``eps = eps_scale * trace(Sigma) / D`` before
    inversion.
    """
    if not features.is_labeled:
        raise UnlabeledDataset("fit_mahalanobis requires labels")
    pools = features.class_indices()
    for c, pool in enumerate(pools):
        if pool.size < 2:
            raise ClassTooSmall(c, f"class {c} has {pool.size} samples, needs >= 2")

    x = features.values
    n, d = x.shape
    means = np.empty((features.num_classes, d), dtype=np.float64)
    sigma = np.zeros((d, d), dtype=np.float64)
    for c, pool in enumerate(pools):
        xc = x[pool]
        mu = xc.mean(axis=0)
        means[c] = mu
        centered = xc - mu
        sigma += centered.T @ centered
    sigma /= n

    trace = np.trace(sigma)
    # absolute ridge when the covariance is identically zero, else trace-scaled
    eps = eps_scale * (trace / d if trace > 0 else 1.0)
    regularized = sigma + eps * np.eye(d)
    try:
        np.linalg.cholesky(regularized)
    except np.linalg.LinAlgError:
        raise SingularCovariance(
            "tied covariance is not positive definite after regularization"
        ) from None
    inverse = np.linalg.inv(regularized)

    return DetectorModel(
        kind="mahalanobis",
        class_means=means,
        covariance_inverse=inverse,
        regularization=float(eps),
    )


def _mahalanobis_batch(model: DetectorModel, x: np.ndarray) -> np.ndarray:
    # min over classes of (x - mu)^T Sigma^-1 (x - mu), vectorized over rows
    best = np.full(x.shape[0], np.inf)
    for mu in model.class_means:
        delta = x - mu
        d2 = np.einsum("ij,jk,ik->i", delta, model.covariance_inverse, delta)
        np.minimum(best, d2, out=best)
    return best


def mahalanobis_score(model: DetectorModel, x) -> float:
    """Minimal squared Mahalanobis distance to any class mean."""
    if model.kind != "mahalanobis":
        raise ValueError("model is not a mahalanobis detector")
    v = _as_vector(x)
    if v.size != model.feature_dim:
        raise DimensionMismatch(f"expected dim {model.feature_dim}, got {v.size}")
    return float(_mahalanobis_batch(model, v[None, :])[0])


def _knn_batch(model: DetectorModel, x: np.ndarray) -> np.ndarray:
    kwargs = {"p": model.minkowski_p} if model.metric == "minkowski" else {}
    out = np.empty(x.shape[0], dtype=np.float64)
    k = model.k
    # chunked so the distance matrix stays modest for large query sets
    step = max(1, int(2**24 // max(1, model.reference.shape[0])))
    for start in range(0, x.shape[0], step):
        block = x[start : start + step]
        dist = cdist(block, model.reference, metric=_CDIST_NAME[model.metric], **kwargs)
        smallest = np.partition(dist, k - 1, axis=1)[:, :k]
        if model.aggregation == "largest":
            agg = smallest.max(axis=1)
        elif model.aggregation == "mean":
            agg = smallest.mean(axis=1)
        else:
            agg = np.median(smallest, axis=1)
        out[start : start + block.shape[0]] = agg
    return out


def knn_score(model: DetectorModel, x) -> float:
    """Aggregate of the k smallest distances from x to the reference rows.

    ``largest`` keeps the k-th smallest distance, ``mean`` and ``median``
    aggregate over the k smallest.
    """
    if model.kind != "knn":
        raise ValueError("model is not a knn detector")
    v = _as_vector(x)
    if v.size != model.feature_dim:
        raise DimensionMismatch(f"expected dim {model.feature_dim}, got {v.size}")
    if model.k > model.reference.shape[0]:
        raise KExceedsReferenceSize(f"k={model.k} > reference size")
    return float(_knn_batch(model, v[None, :])[0])


def fit_knn(
    reference: LogitDataset,
    k: int,
    metric: str = "euclidean",
    aggregation: str = "largest",
    minkowski_p: float = 2.0,
) -> DetectorModel:
    """Build a k-NN detector whose reference set is the given dataset's rows."""
    return DetectorModel(
        kind="knn",
        reference=reference.values,
        k=k,
        metric=metric,
        aggregation=aggregation,
        minkowski_p=minkowski_p,
    )


# --- dataset-level scoring ----------------------------------------------------


def score_dataset(model: DetectorModel, ds: LogitDataset) -> ScoreVector:
    """Score every row, preserving order.

    Logit scorers require ``column_kind == "logits"``; mahalanobis and knn
    treat the columns as features either way. ``activated`` is filled with the
    per-row argmax class whenever the columns are logits.
    """
    if model.kind in LOGIT_KINDS and ds.column_kind != "logits":
        raise ColumnKindMismatch(
            f"{model.kind} scoring requires logits, dataset holds {ds.column_kind}"
        )
    x = ds.values
    if len(ds) == 0:
        activated = np.empty(0, dtype=np.int64) if ds.column_kind == "logits" else None
        return ScoreVector(scores=np.empty(0, dtype=np.float64), activated=activated)

    if model.kind == "max_logit":
        scores = -x.max(axis=1)
    elif model.kind == "max_softmax":
        shifted = x / model.temperature
        shifted = shifted - shifted.max(axis=1, keepdims=True)
        scores = -1.0 / np.exp(shifted).sum(axis=1)
    elif model.kind == "energy":
        shifted = x / model.temperature
        top = shifted.max(axis=1, keepdims=True)
        scores = -model.temperature * (
            top[:, 0] + np.log(np.exp(shifted - top).sum(axis=1))
        )
    elif model.kind == "mahalanobis":
        if ds.num_columns != model.feature_dim:
            raise DimensionMismatch(
                f"model dim {model.feature_dim}, dataset has {ds.num_columns} columns"
            )
        scores = _mahalanobis_batch(model, x)
    else:
        if ds.num_columns != model.feature_dim:
            raise DimensionMismatch(
                f"model dim {model.feature_dim}, dataset has {ds.num_columns} columns"
            )
        scores = _knn_batch(model, x)

    activated = x.argmax(axis=1).astype(np.int64) if ds.column_kind == "logits" else None
    return ScoreVector(scores=np.asarray(scores, dtype=np.float64), activated=activated)
