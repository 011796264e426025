#!/usr/bin/env python3
"""OoD-set difficulty vs statistical distance, plus a best-case grid search.

Scores a family of synthetic OoD sets at increasing distance from the ID
score distribution, computes Wasserstein and energy distances, correlates
them with the missed-detection rates (the expected sign is negative: closer
sets are harder), and finishes with an exhaustive k-NN hyperparameter sweep
ranked by missed detection on a held-out OoD sample.
"""

from pathlib import Path

import numpy as np

from oodcal import (
    DetectorModel,
    GridSpec,
    correlate_difficulty,
    distance_table,
    fit_threshold_multi,
    grid_search,
    missed_detection_rate,
    score_dataset,
    split_dataset,
)
from oodcal.synthetic import make_ood_logits, make_shifted_logits

OUT = Path(__file__).resolve().parent.parent / "demo_output"


def main():
    OUT.mkdir(exist_ok=True)
    ds = make_shifted_logits(1500, num_classes=10, seed=7)
    _, valid = split_dataset(ds, 0.5, seed=7)
    detector = DetectorModel(kind="max_logit")
    sv = score_dataset(detector, valid)
    model = fit_threshold_multi(sv, 0.95, ds.num_classes)

    names, rates, samples = [], [], []
    for i, level in enumerate(np.linspace(12.0, 2.0, 6)):
        name = f"ood-level-{level:.0f}"
        ood = make_ood_logits(3000, 10, level=level, spread=2.0, seed=40 + i, name=name)
        scores = score_dataset(detector, ood)
        names.append(name)
        rates.append(missed_detection_rate(scores, model))
        samples.append((name, scores.scores))

    pairs = distance_table(sv.scores, samples)
    print("ood set          missed rate   wasserstein   energy")
    for name, rate, pair in zip(names, rates, pairs):
        print(f"{name:15s}  {rate:10.4f}   {pair.wasserstein:10.4f}   {pair.energy:7.4f}")

    corr = correlate_difficulty(list(zip(names, rates)), pairs)
    print(f"\npearson r (rate vs distance): wasserstein {corr['wasserstein_r']:+.3f}, "
          f"energy {corr['energy_r']:+.3f}  (negative = farther sets are easier)")

    with open(OUT / "distances.csv", "w", encoding="utf-8") as fh:
        fh.write("ood_set,missed_detection_rate,wasserstein,energy\n")
        for name, rate, pair in zip(names, rates, pairs):
            fh.write(f"{name},{rate!r},{pair.wasserstein!r},{pair.energy!r}\n")

    # best-case analysis: sweep k-NN hyperparameters with access to OoD data
    fit_ds, valid_id = split_dataset(ds, 0.4, seed=8)
    valid_ood = make_ood_logits(2000, 10, level=8.0, spread=2.0, seed=50, name="tune-ood")
    grid = GridSpec(
        family="knn",
        candidates={
            "k": [4, 8, 15, 25],
            "metric": ["euclidean", "braycurtis", "chebyshev"],
            "aggregation": ["mean", "largest", "median"],
        },
    )
    result = grid_search(grid, fit_ds, valid_id, valid_ood, beta=0.95, scheme="multi")
    print(f"\ngrid search over {len(result.table)} k-NN configurations "
          f"(maximum achievable performance given OoD validation data):")
    best = result.best
    print(f"best: k={best['k']}, metric={best['metric']}, "
          f"aggregation={best['aggregation']} -> missed rate "
          f"{best['missed_detection_rate']:.4f}, min TPR {best['min_tpr']:.4f}")


if __name__ == "__main__":
    main()
