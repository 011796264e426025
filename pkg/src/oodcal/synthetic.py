"""Synthetic logit generators for tests, demos and desk-scale studies.

These stand in for classifier exports: ID datasets get deliberately
misaligned per-class score scales (the activated logit of class j is drawn
from Normal(mean_base + mean_step*j, std_base + std_step*j) on top of unit
Gaussian background entries), which is exactly the regime where a single
global threshold produces uneven per-class false-alarm rates.
"""

from __future__ import annotations

import numpy as np

from .dataset import IN_DISTRIBUTION, OUT_OF_DISTRIBUTION, LogitDataset


def make_shifted_logits(
    n_per_class: int,
    num_classes: int = 10,
    mean_base: float = 10.0,
    mean_step: float = 1.0,
    std_base: float = 1.0,
    std_step: float = 0.3,
    seed: int = 0,
    name: str = "synthetic-id",
) -> LogitDataset:
    """Labeled ID logits whose class-j activated logit ~ Normal(10 + j, 1 + 0.3j)
    by default, over Normal(0, 1) background entries."""
    rng = np.random.default_rng(seed)
    n = n_per_class * num_classes
    values = rng.normal(0.0, 1.0, size=(n, num_classes))
    labels = np.repeat(np.arange(num_classes), n_per_class)
    means = mean_base + mean_step * labels
    stds = std_base + std_step * labels
    values[np.arange(n), labels] = rng.normal(means, stds)
    order = rng.permutation(n)
    return LogitDataset(
        name=name,
        kind=IN_DISTRIBUTION,
        num_classes=num_classes,
        column_kind="logits",
        ids=[f"id{i}" for i in range(n)],
        labels=labels[order],
        values=values[order],
    )


def make_ood_logits(
    n: int,
    num_classes: int = 10,
    level: float = 5.0,
    spread: float = 2.0,
    seed: int = 1,
    name: str = "synthetic-ood",
) -> LogitDataset:
    """Unlabeled OoD logits: every entry ~ Normal(0, 1) plus one inflated
    entry ~ Normal(level, spread) at a random position. Lower levels sit
    further below the ID score range, i.e. are easier to detect."""
    rng = np.random.default_rng(seed)
    values = rng.normal(0.0, 1.0, size=(n, num_classes))
    hot = rng.integers(0, num_classes, size=n)
    values[np.arange(n), hot] = rng.normal(level, spread, size=n)
    return LogitDataset(
        name=name,
        kind=OUT_OF_DISTRIBUTION,
        num_classes=num_classes,
        column_kind="logits",
        ids=[f"ood{i}" for i in range(n)],
        labels=[None] * n,
        values=values,
    )


def make_feature_blobs(
    n_per_class: int,
    num_classes: int = 3,
    dim: int = 4,
    separation: float = 6.0,
    seed: int = 0,
    kind: str = IN_DISTRIBUTION,
    name: str = "synthetic-features",
) -> LogitDataset:
    """Labeled isotropic Gaussian blobs in feature space, one blob per class,
    centered ``separation`` apart along the first axis."""
    rng = np.random.default_rng(seed)
    n = n_per_class * num_classes
    labels = np.repeat(np.arange(num_classes), n_per_class)
    values = rng.normal(0.0, 1.0, size=(n, dim))
    values[:, 0] += separation * labels
    return LogitDataset(
        name=name,
        kind=kind,
        num_classes=num_classes,
        column_kind="features",
        ids=[f"f{i}" for i in range(n)],
        labels=labels,
        values=values,
    )
