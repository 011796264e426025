"""Robustness studies: label-shift Monte Carlo, class oversampling and
single-threshold perturbation sweeps.

Per-trial randomness comes from mixing (master_seed, trial_index) through a
fixed 64-bit splitmix64 finalizer, so runs are bit-reproducible and
independent of execution order. Trials operate on precomputed per-row scores;
because scores and decisions are pointwise, resampling score rows is exactly
equivalent to resampling the dataset and rescoring.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .calibrate import (
    SCHEME_MULTI,
    SCHEME_ONE,
    ThresholdModel,
    decide,
    multi_cutoffs,
    tpr_beta_cutoff,
)
from .dataset import LogitDataset, resample_class_indices, split_dataset
from .errors import (
    AllThresholdsInfinite,
    MissingActivated,
    UnlabeledDataset,
)
from .evaluate import missed_detection_rate
from .scores import DetectorModel, ScoreVector, score_dataset

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def derive_trial_seed(master_seed: int, trial_index: int) -> int:
    """splitmix64 finalizer over the master seed advanced by the trial index."""
    z = ((master_seed & _MASK64) + (trial_index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class SimplexSample:
    """A point on the probability simplex (a class marginal)."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("simplex sample must be a non-empty vector")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("simplex sample must be non-negative and sum to 1")
        object.__setattr__(self, "p", p)


def sample_simplex(k: int, rng: np.random.Generator) -> SimplexSample:
    """Uniform draw from the k-dimensional probability simplex.

    Uses the exponential trick: X_i = -ln(U_i) with U_i uniform on (0, 1],
    normalized by the sum.
    """
    if k < 1:
        raise ValueError("k must be positive")
    u = rng.random(k)
    x = -np.log1p(-u)  # -ln(1 - u), and 1 - u lies in (0, 1]
    total = x.sum()
    if total == 0.0:  # all U_i landed exactly on 1; measure-zero fallback
        return SimplexSample(p=np.full(k, 1.0 / k))
    return SimplexSample(p=x / total)


@dataclass(frozen=True)
class TrialRecord:
    """One simulation trial: its index, derived seed and study payload."""

    trial_index: int
    seed: int
    kind: str  # "shift" | "oversample" | "sweep"
    payload: dict


# --- label shift ---------------------------------------------------------------


def _marginal_weights(p: np.ndarray, pools: Sequence[np.ndarray], total: int) -> np.ndarray:
    """Class weights that resample pools to marginal p at the original size."""
    w = np.zeros(len(pools))
    for c, pool in enumerate(pools):
        if pool.size:
            w[c] = p[c] * total / pool.size
    return w


class _WeightedCutoff:
    """Smallest pooled score value whose class-weighted flagged mass stays
    within 1 - beta, the exact large-resample limit of fitting on data
    resampled to a train marginal."""

    def __init__(self, scores: np.ndarray, labels: np.ndarray, num_classes: int):
        order = np.argsort(scores, kind="stable")
        self.sorted_scores = scores[order]
        self.sorted_labels = labels[order]
        self.pool_sizes = np.bincount(labels, minlength=num_classes).astype(np.float64)
        # first occurrence of each value, so tied blocks share one decision
        self.first_index = np.searchsorted(self.sorted_scores, self.sorted_scores, side="left")

    def cutoff(self, p_train: np.ndarray, beta: float) -> float:
        sizes = self.pool_sizes[self.sorted_labels]
        mass = np.where(sizes > 0, p_train[self.sorted_labels] / sizes, 0.0)
        flagged = np.cumsum(mass[::-1])[::-1]  # mass at or above each rank
        ok = flagged[self.first_index] <= 1.0 - beta
        if not ok.any():
            return float("inf")
        return float(self.sorted_scores[np.argmax(ok)])


def simulate_label_shift(
    id_data: LogitDataset,
    detector: DetectorModel,
    scheme: str,
    beta: float,
    n_trials: int,
    master_seed: int,
    valid_fraction: float = 0.5,
    equal_marginals: bool = False,
    fit_mode: str = "weighted",
    valid_resample_factor: int = 1,
) -> list[TrialRecord]:
    """Monte-Carlo study of false-alarm drift under label shift.

    Each trial draws train and test marginals uniformly from the simplex,
    fits thresholds under the train marginal, resamples the held-out half to
    the test marginal and records the overall false-alarm rate together with
    delta_p = ||p_train - p_test||_2.

    ``fit_mode="weighted"`` (default) fits in the exact large-resample limit:
    the single threshold is the p_train-weighted pooled quantile and the
    class-wise thresholds are the per-class pool cutoffs (independent of the
    marginal, which is the mechanism under study). ``fit_mode="resample"``
    instead materializes a duplication bootstrap of the validation half at
    ``valid_resample_factor`` times its size and refits per trial; this is
    the literal finite-sample protocol and adds marginal-coupled fitting
    noise on top. ``equal_marginals`` forces p_test = p_train (a no-shift
    baseline).
    """
    if not id_data.is_labeled:
        raise UnlabeledDataset("label-shift simulation requires labels")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if fit_mode not in ("weighted", "resample"):
        raise ValueError(f"unknown fit_mode {fit_mode!r}")
    if valid_resample_factor < 1:
        raise ValueError("valid_resample_factor must be >= 1")
    k = id_data.num_classes

    test_half, valid_half = split_dataset(id_data, valid_fraction, master_seed)
    sv = score_dataset(detector, valid_half)
    st = score_dataset(detector, test_half)
    if scheme == SCHEME_MULTI and (sv.activated is None or st.activated is None):
        raise MissingActivated("scheme 'multi' needs logit data (activated classes)")

    valid_pools = [np.where(valid_half.labels == c)[0] for c in range(k)]
    test_pools = [np.where(test_half.labels == c)[0] for c in range(k)]
    n_valid, n_test = len(valid_half), len(test_half)

    weighted = fit_mode == "weighted"
    if weighted:
        if scheme == SCHEME_ONE:
            pooled = _WeightedCutoff(sv.scores, valid_half.labels, k)
        else:
            fixed_taus = multi_cutoffs(sv.scores, sv.activated, k, beta)

    records: list[TrialRecord] = []
    for t in range(n_trials):
        seed_t = derive_trial_seed(master_seed, t)
        rng = np.random.default_rng(seed_t)
        p_train = sample_simplex(k, rng).p
        p_test = p_train if equal_marginals else sample_simplex(k, rng).p

        if weighted:
            if scheme == SCHEME_ONE:
                tau = pooled.cutoff(p_train, beta)
            else:
                taus = fixed_taus
        else:
            vidx = resample_class_indices(
                valid_pools,
                _marginal_weights(p_train, valid_pools, n_valid * valid_resample_factor),
                rng,
            )
            vs = sv.scores[vidx]
            if scheme == SCHEME_ONE:
                tau = tpr_beta_cutoff(vs, beta) if vs.size else np.inf
            else:
                taus = multi_cutoffs(vs, sv.activated[vidx], k, beta)

        tidx = resample_class_indices(
            test_pools, _marginal_weights(p_test, test_pools, n_test), rng
        )
        ts = st.scores[tidx]
        if tidx.size == 0:
            far = 0.0  # nothing sampled, nothing flagged
        elif scheme == SCHEME_ONE:
            far = float(np.mean(ts >= tau))
        else:
            far = float(np.mean(ts >= taus[st.activated[tidx]]))

        records.append(
            TrialRecord(
                trial_index=t,
                seed=seed_t,
                kind="shift",
                payload={
                    "p_train": p_train.tolist(),
                    "p_test": p_test.tolist(),
                    "delta_p": float(np.linalg.norm(p_train - p_test)),
                    "false_alarm_rate": far,
                },
            )
        )
    return records


# --- oversampling ----------------------------------------------------------------


def _group_rates(
    accept: np.ndarray, groups: np.ndarray, num_classes: int
) -> np.ndarray:
    counts = np.bincount(groups, minlength=num_classes)
    accepted = np.bincount(groups, weights=accept, minlength=num_classes)
    out = np.full(num_classes, np.nan)
    defined = counts > 0
    out[defined] = accepted[defined] / counts[defined]
    return out


def simulate_oversampling(
    id_test: LogitDataset,
    model: ThresholdModel,
    detector: DetectorModel,
    n_trials: int = 1000,
    gamma_range: tuple[float, float] = (1.0, 10.0),
    master_seed: int = 0,
) -> list[TrialRecord]:
    """Oversample each true class by a random factor and re-measure TPRs.

    The threshold model stays fixed; duplication-based resampling combined
    with pointwise decisions means an integer factor leaves every TPR exactly
    unchanged. TPRs are recorded grouped by activated class (as plotted) and
    by true label (the resampling axis).
    """
    if not id_test.is_labeled:
        raise UnlabeledDataset("oversampling simulation requires labels")
    lo, hi = float(gamma_range[0]), float(gamma_range[1])
    if lo < 0 or hi < lo:
        raise ValueError("gamma range must satisfy 0 <= lo <= hi")
    k = id_test.num_classes

    sv = score_dataset(detector, id_test)
    is_ood = decide(sv, model)
    accept = (~is_ood).astype(np.float64)
    pools = [np.where(id_test.labels == c)[0] for c in range(k)]
    labels = id_test.labels

    records: list[TrialRecord] = []
    for t in range(n_trials):
        seed_t = derive_trial_seed(master_seed, t)
        rng = np.random.default_rng(seed_t)
        gammas = rng.uniform(lo, hi, size=k)
        idx = resample_class_indices(pools, gammas, rng)

        payload: dict = {"gammas": gammas.tolist()}
        if idx.size == 0:
            payload["per_class_tpr"] = [None] * k
            payload["per_label_tpr"] = [None] * k
        else:
            acc = accept[idx]
            if sv.activated is not None:
                by_act = _group_rates(acc, sv.activated[idx], k)
                payload["per_class_tpr"] = [
                    None if np.isnan(v) else float(v) for v in by_act
                ]
            else:
                payload["per_class_tpr"] = [None] * k
            by_label = _group_rates(acc, labels[idx], k)
            payload["per_label_tpr"] = [
                None if np.isnan(v) else float(v) for v in by_label
            ]
        records.append(
            TrialRecord(trial_index=t, seed=seed_t, kind="oversample", payload=payload)
        )
    return records


# --- threshold perturbation sweep ---------------------------------------------------


def perturbation_sweep(
    one_model: ThresholdModel,
    multi_model: ThresholdModel,
    ood_scores: Mapping[str, ScoreVector],
    delta: float = 0.5,
    n_points: int = 50,
) -> tuple[list[TrialRecord], dict[str, float]]:
    """Sweep additive perturbations of the single threshold.

    The perturbation grid spans
    ``delta * [-|tau_one - min_j tau_j|, +|max_j tau_j - tau_one|]``
    over ``n_points`` evenly spaced values, endpoints included; only finite
    class-wise thresholds enter the interval. Returns the per-point missed
    detection rates per OoD set plus the (unperturbed) class-wise reference
    rates.
    """
    if not (0.0 <= delta <= 1.0):
        raise ValueError("delta must lie in [0, 1]")
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    finite = multi_model.taus[np.isfinite(multi_model.taus)]
    if finite.size == 0:
        raise AllThresholdsInfinite("no finite class-wise thresholds to span")
    tau_one = one_model.tau

    lo = -delta * abs(tau_one - float(finite.min()))
    hi = delta * abs(float(finite.max()) - tau_one)
    grid = np.linspace(lo, hi, n_points)

    multi_rates = {
        name: missed_detection_rate(sv, multi_model) for name, sv in ood_scores.items()
    }

    records: list[TrialRecord] = []
    for i, dtau in enumerate(grid):
        threshold = tau_one + dtau
        rates = {
            name: float(np.mean(sv.scores < threshold))
            for name, sv in ood_scores.items()
        }
        records.append(
            TrialRecord(
                trial_index=i,
                seed=0,
                kind="sweep",
                payload={"delta_tau": float(dtau), "per_ood_rates": rates},
            )
        )
    return records, multi_rates


# --- record output -------------------------------------------------------------------


def rate_histogram(values: np.ndarray) -> dict:
    """Counts over [0, 1] in bins of width 0.005 (200 bins)."""
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    counts, _ = np.histogram(v, bins=np.linspace(0.0, 1.0, 201))
    return {"bin_width": 0.005, "lo": 0.0, "hi": 1.0, "counts": counts.tolist()}


def write_shift_csv(records: list[TrialRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("trial,delta_p,far\n")
        for r in records:
            fh.write(
                f"{r.trial_index},{repr(r.payload['delta_p'])},"
                f"{repr(r.payload['false_alarm_rate'])}\n"
            )


def write_oversample_csv(records: list[TrialRecord], path: str | Path) -> None:
    """One `trial,class,tpr` row per activated class; empty tpr when undefined."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("trial,class,tpr\n")
        for r in records:
            for c, tpr in enumerate(r.payload["per_class_tpr"]):
                fh.write(f"{r.trial_index},{c},{'' if tpr is None else repr(tpr)}\n")


def write_sweep_csv(records: list[TrialRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("point,delta_tau,ood_set,rate\n")
        for r in records:
            for name, rate in r.payload["per_ood_rates"].items():
                fh.write(
                    f"{r.trial_index},{repr(r.payload['delta_tau'])},{name},{repr(rate)}\n"
                )


def _stats(values: np.ndarray) -> dict:
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"count": 0, "mean": None, "std": None, "min": None, "max": None}
    lo, hi = float(v.min()), float(v.max())
    return {
        "count": int(v.size),
        "mean": float(v.mean()),
        "std": 0.0 if lo == hi else float(v.std()),  # constant sample is exactly zero
        "min": lo,
        "max": hi,
    }


def summarize_shift(records: list[TrialRecord]) -> dict:
    far = np.array([r.payload["false_alarm_rate"] for r in records])
    dp = np.array([r.payload["delta_p"] for r in records])
    return {
        "trials": len(records),
        "false_alarm_rate": _stats(far),
        "delta_p": _stats(dp),
        "histogram": rate_histogram(far),
    }


def summarize_oversampling(records: list[TrialRecord], num_classes: int) -> dict:
    per_class = []
    pooled: list[float] = []
    for c in range(num_classes):
        vals = np.array(
            [
                r.payload["per_class_tpr"][c]
                for r in records
                if r.payload["per_class_tpr"][c] is not None
            ]
        )
        per_class.append({"class": c, **_stats(vals)})
        pooled.extend(vals.tolist())
    return {
        "trials": len(records),
        "per_class_tpr": per_class,
        "histogram": rate_histogram(np.asarray(pooled)),
    }


def summarize_sweep(records: list[TrialRecord], multi_rates: dict[str, float]) -> dict:
    names = list(multi_rates)
    per_set = []
    pooled: list[float] = []
    for name in names:
        vals = np.array([r.payload["per_ood_rates"][name] for r in records])
        per_set.append(
            {"ood_set": name, **_stats(vals), "multi_reference": multi_rates[name]}
        )
        pooled.extend(vals.tolist())
    return {
        "points": len(records),
        "per_ood_set": per_set,
        "histogram": rate_histogram(np.asarray(pooled)),
    }


def write_summary_json(summary: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
