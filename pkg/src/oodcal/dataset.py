"""Loading, validation, splitting and class-resampling of logit/feature dumps.

Canonical on-disk format is a UTF-8 CSV with header ``id,label,c0,...,c{N-1}``
(``label`` left empty when absent) plus a JSON manifest
``{"name", "kind": "id"|"ood", "num_classes", "column_kind"}``. Values are
written as shortest round-trip decimals, so save followed by load is
bit-exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    ClassTooSmall,
    ColumnCountMismatch,
    DuplicateId,
    LabelOutOfRange,
    MalformedHeader,
    NonFiniteValue,
    UnlabeledDataset,
)

IN_DISTRIBUTION = "in_distribution"
OUT_OF_DISTRIBUTION = "out_of_distribution"

_MANIFEST_KIND = {"id": IN_DISTRIBUTION, "ood": OUT_OF_DISTRIBUTION}
_KIND_MANIFEST = {v: k for k, v in _MANIFEST_KIND.items()}

NO_LABEL = -1  # sentinel in the labels array


def round_half_away(x: float) -> int:
    """Round a non-negative count, halves away from zero.

    Used everywhere a sample count is derived from a fraction so that all
    modules agree on the rounding rule.
    """
    if x < 0:
        raise ValueError("counts are non-negative")
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SampleRow:
    """One sample: an id, an optional class label and its value vector."""

    id: str
    label: int | None
    values: np.ndarray


@dataclass(frozen=True)
class ClassWeights:
    """Per-class resampling factors (oversampling gammas or marginal ratios)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-D vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        if not np.any(w > 0):
            raise ValueError("at least one weight must be strictly positive")
        object.__setattr__(self, "weights", w)


class LogitDataset:
    """Immutable table of samples with ids, optional labels and row vectors.

    ``values`` is an (n, num_columns) float64 array; ``labels`` is an int64
    array with -1 marking a missing label. Row order is preserved exactly as
    constructed (or as on disk after :func:`load_dataset`).
    """

    def __init__(
        self,
        name: str,
        kind: str,
        num_classes: int,
        column_kind: str,
        ids: Sequence[str],
        labels: Sequence[int | None] | np.ndarray,
        values: np.ndarray,
    ):
        if kind not in (IN_DISTRIBUTION, OUT_OF_DISTRIBUTION):
            raise ValueError(f"unknown dataset kind {kind!r}")
        if column_kind not in ("logits", "features"):
            raise ValueError(f"unknown column kind {column_kind!r}")
        if num_classes < 1:
            raise ValueError("num_classes must be positive")

        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        n = values.shape[0]
        if values.shape[1] < 1:
            raise ValueError("num_columns must be positive")
        if len(ids) != n:
            raise ValueError("ids length must match values")

        if isinstance(labels, np.ndarray):
            lab = labels.astype(np.int64, copy=True)
        else:
            if len(labels) != n:
                raise ValueError("labels length must match values")
            lab = np.fromiter(
                (NO_LABEL if v is None else int(v) for v in labels),
                dtype=np.int64,
                count=n,
            )

        bad = np.where(~np.isfinite(values).all(axis=1))[0]
        if bad.size:
            raise NonFiniteValue(int(bad[0]) + 1)
        if kind == IN_DISTRIBUTION:
            present = lab != NO_LABEL
            out = present & ((lab < 0) | (lab >= num_classes))
            if np.any(out):
                raise LabelOutOfRange(int(np.where(out)[0][0]) + 1)
        seen: set[str] = set()
        for i, sid in enumerate(ids):
            if sid in seen:
                raise DuplicateId(i + 1, f"duplicate id {sid!r} at row {i + 1}")
            seen.add(sid)

        values.setflags(write=False)
        lab.setflags(write=False)
        self.name = name
        self.kind = kind
        self.num_classes = int(num_classes)
        self.column_kind = column_kind
        self.ids: tuple[str, ...] = tuple(ids)
        self.labels = lab
        self.values = values

    # -- basic views ---------------------------------------------------

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def num_columns(self) -> int:
        return self.values.shape[1]

    @property
    def is_labeled(self) -> bool:
        """True when every row carries a label."""
        return len(self) > 0 and bool(np.all(self.labels != NO_LABEL))

    def row(self, i: int) -> SampleRow:
        lab = self.labels[i]
        return SampleRow(
            id=self.ids[i],
            label=None if lab == NO_LABEL else int(lab),
            values=self.values[i],
        )

    @property
    def rows(self) -> Iterator[SampleRow]:
        return (self.row(i) for i in range(len(self)))

    def class_indices(self) -> list[np.ndarray]:
        """Row indices per class, in class order. Requires labels."""
        if not self.is_labeled:
            raise UnlabeledDataset(f"dataset {self.name!r} has unlabeled rows")
        return [
            np.where(self.labels == c)[0] for c in range(self.num_classes)
        ]

    def subset(self, indices: np.ndarray, name: str | None = None) -> "LogitDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LogitDataset(
            name=name or self.name,
            kind=self.kind,
            num_classes=self.num_classes,
            column_kind=self.column_kind,
            ids=[self.ids[i] for i in idx],
            labels=self.labels[idx],
            values=self.values[idx],
        )


# --- on-disk format ---------------------------------------------------------


def _read_manifest(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    for key in ("name", "kind", "num_classes", "column_kind"):
        if key not in manifest:
            raise MalformedHeader(f"manifest missing key {key!r}")
    if manifest["kind"] not in _MANIFEST_KIND:
        raise MalformedHeader(f"manifest kind must be 'id' or 'ood', got {manifest['kind']!r}")
    if manifest["column_kind"] not in ("logits", "features"):
        raise MalformedHeader(f"manifest column_kind must be 'logits' or 'features'")
    if not isinstance(manifest["num_classes"], int) or manifest["num_classes"] < 1:
        raise MalformedHeader("manifest num_classes must be a positive integer")
    return manifest


def load_dataset(path: str | Path, manifest: str | Path) -> LogitDataset:
    """Load and validate a dataset from its CSV file and JSON manifest.

    Values are parsed at full decimal precision and row order is preserved.
    Raises MalformedHeader, NonFiniteValue, LabelOutOfRange, DuplicateId or
    ColumnCountMismatch naming the first offending row.
    """
    meta = _read_manifest(manifest)
    kind = _MANIFEST_KIND[meta["kind"]]
    num_classes = meta["num_classes"]
    column_kind = meta["column_kind"]

    with open(path, "r", encoding="utf-8", newline="") as fh:
        header_line = fh.readline()
        if not header_line:
            raise MalformedHeader("empty file")
        header = header_line.rstrip("\r\n").split(",")
        if len(header) < 3 or header[0] != "id" or header[1] != "label":
            raise MalformedHeader("header must start with 'id,label,c0,...'")
        ncols = len(header) - 2
        expected = [f"c{i}" for i in range(ncols)]
        if header[2:] != expected:
            raise MalformedHeader("value columns must be named c0..c{N-1} in order")
        if column_kind == "logits" and ncols != num_classes:
            raise MalformedHeader(
                f"manifest declares {num_classes} logit columns, header has {ncols}"
            )

        ids: list[str] = []
        labels: list[int | None] = []
        rows: list[list[float]] = []
        lineno = 0
        for line in fh:
            line = line.rstrip("\r\n")
            if not line:
                continue
            lineno += 1
            parts = line.split(",")
            if len(parts) != len(header):
                raise ColumnCountMismatch(
                    lineno, f"row {lineno} has {len(parts)} fields, expected {len(header)}"
                )
            ids.append(parts[0])
            raw_label = parts[1]
            if raw_label == "":
                labels.append(None)
            else:
                try:
                    labels.append(int(raw_label))
                except ValueError:
                    raise LabelOutOfRange(
                        lineno, f"row {lineno} label {raw_label!r} is not an integer"
                    ) from None
            try:
                vals = [float(v) for v in parts[2:]]
            except ValueError:
                raise NonFiniteValue(
                    lineno, f"row {lineno} contains a non-numeric value"
                ) from None
            if not all(math.isfinite(v) for v in vals):
                raise NonFiniteValue(lineno, f"row {lineno} contains a non-finite value")
            rows.append(vals)

    values = (
        np.asarray(rows, dtype=np.float64)
        if rows
        else np.empty((0, ncols), dtype=np.float64)
    )
    return LogitDataset(
        name=meta["name"],
        kind=kind,
        num_classes=num_classes,
        column_kind=column_kind,
        ids=ids,
        labels=labels,
        values=values,
    )


def save_dataset(
    ds: LogitDataset, path: str | Path, manifest: str | Path | None = None
) -> None:
    """Write a dataset (and optionally its manifest) in the canonical format.

    Floats are emitted as shortest round-trip decimals so the file reloads
    bit-exactly.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("id,label," + ",".join(f"c{i}" for i in range(ds.num_columns)) + "\n")
        for i in range(len(ds)):
            lab = ds.labels[i]
            label_str = "" if lab == NO_LABEL else str(int(lab))
            vals = ",".join(repr(float(v)) for v in ds.values[i])
            fh.write(f"{ds.ids[i]},{label_str},{vals}\n")
    if manifest is not None:
        doc = {
            "name": ds.name,
            "kind": _KIND_MANIFEST[ds.kind],
            "num_classes": ds.num_classes,
            "column_kind": ds.column_kind,
        }
        with open(manifest, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


# --- splitting and resampling ------------------------------------------------


def split_dataset(
    ds: LogitDataset, valid_fraction: float, seed: int
) -> tuple[LogitDataset, LogitDataset]:
    """Disjoint, exhaustive (train, valid) partition, stratified by label.

    Per class, the validation side receives ``round(valid_fraction * n_c)``
    rows (halves away from zero). Unlabeled datasets are split as a single
    stratum. Deterministic under a fixed seed; within each side the original
    row order is preserved.
    """
    if not (0.0 < valid_fraction < 1.0):
        raise ValueError("valid_fraction must be in (0, 1)")
    if len(ds) < 2:
        raise ClassTooSmall(None, "dataset must have at least 2 rows to split")

    rng = np.random.default_rng(seed)
    if ds.is_labeled:
        strata = [(c, idx) for c, idx in enumerate(ds.class_indices()) if idx.size > 0]
    else:
        strata = [(None, np.arange(len(ds), dtype=np.int64))]

    valid_parts: list[np.ndarray] = []
    for c, idx in strata:
        n_c = idx.size
        n_valid = round_half_away(valid_fraction * n_c)
        if n_c < 2 or n_valid == 0 or n_valid == n_c:
            raise ClassTooSmall(
                c, f"class {c}: cannot place at least 1 of {n_c} samples on each side"
            )
        chosen = rng.choice(idx, size=n_valid, replace=False)
        valid_parts.append(np.sort(chosen))

    valid_idx = np.sort(np.concatenate(valid_parts))
    mask = np.zeros(len(ds), dtype=bool)
    mask[valid_idx] = True
    train_idx = np.where(~mask)[0]
    return (
        ds.subset(train_idx, name=f"{ds.name}:train"),
        ds.subset(valid_idx, name=f"{ds.name}:valid"),
    )


def resample_class_indices(
    class_pools: Sequence[np.ndarray],
    weights: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Row indices for a duplication-based class resample.

    For class ``c`` with pool size ``n_c`` and weight ``w_c``, the output
    contains ``round(w_c * n_c)`` indices: ``floor(w_c)`` full copies of the
    pool (preserving pool order) plus the remainder drawn with replacement.
    Integer weights therefore duplicate every row exactly, which is what makes
    per-sample decisions invariant under oversampling.
    """
    parts: list[np.ndarray] = []
    for c, pool in enumerate(class_pools):
        n_c = pool.size
        if n_c == 0:
            continue
        w = float(weights[c])
        target = round_half_away(w * n_c)
        whole = int(math.floor(w))
        extra = target - whole * n_c
        if whole > 0:
            parts.append(np.tile(pool, whole))
        if extra > 0:
            parts.append(pool[rng.integers(0, n_c, size=extra)])
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(parts)


def resample_by_class(ds: LogitDataset, w: ClassWeights, seed: int) -> LogitDataset:
    """Replace each class-c row set by ``round(w_c * n_c)`` duplicated rows.

    Weight 1.0 everywhere returns the input multiset unchanged; weight 0
    removes the class. Duplicated rows get a ``#dupN`` id suffix so ids stay
    unique. Deterministic under a fixed seed.
    """
    if not ds.is_labeled:
        raise UnlabeledDataset("resample_by_class requires a fully labeled dataset")
    if w.weights.size != ds.num_classes:
        raise ValueError(
            f"weights length {w.weights.size} != num_classes {ds.num_classes}"
        )
    rng = np.random.default_rng(seed)
    idx = resample_class_indices(ds.class_indices(), w.weights, rng)

    counts: dict[str, int] = {}
    ids: list[str] = []
    for i in idx:
        base = ds.ids[i]
        k = counts.get(base, 0)
        counts[base] = k + 1
        ids.append(base if k == 0 else f"{base}#dup{k}")

    return LogitDataset(
        name=ds.name,
        kind=ds.kind,
        num_classes=ds.num_classes,
        column_kind=ds.column_kind,
        ids=ids,
        labels=ds.labels[idx],
        values=ds.values[idx],
    )
