import numpy as np
import pytest

from oodcal.dataset import IN_DISTRIBUTION, LogitDataset


def make_dataset(
    values,
    labels=None,
    kind=IN_DISTRIBUTION,
    column_kind="logits",
    num_classes=None,
    name="test",
):
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    if labels is None:
        labels = [None] * n
    if num_classes is None:
        num_classes = values.shape[1]
    return LogitDataset(
        name=name,
        kind=kind,
        num_classes=num_classes,
        column_kind=column_kind,
        ids=[f"s{i}" for i in range(n)],
        labels=labels,
        values=values,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
