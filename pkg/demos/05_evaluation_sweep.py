"""
Retrieval EER and identification over a (k, L) grid
====================================================

A sweep evaluates every (method, k, L) cell against the same split and
reports EER for retrieval and top-1 accuracy for identification, with the
mean number of candidates each query examined.
"""

from rsshash import fastest_at_accuracy, length_normalize, reports_to_csv, speaker_split, sweep, synthesize

store = length_normalize(synthesize(600, 4, 32, within_var=0.1, seed=3, anisotropy=100.0))
split = speaker_split(store, n_train=100, n_target=200, n_nontarget=0, query_utts=1, seed=0)

reports = sweep(store, split, ["lsh", "rss"], k_values=[6, 10, 14], L_values=[4, 16], seeds=[0], baseline=True)
print(reports_to_csv(reports))

###############################################################################
# Cheapest configuration per method that keeps 95% of linear accuracy.

linear = next(r for r in reports if r.method == "linear" and r.task == "identification")
for method in ("lsh", "rss"):
    best = fastest_at_accuracy([r for r in reports if r.method == method], linear.metric_value)
    if best is None:
        print(f"{method}: no configuration reaches 95% of linear accuracy")
    else:
        print(f"{method}: k={best.k} L={best.L} accuracy {best.metric_value:.1f}% "
              f"candidate fraction {best.candidate_fraction:.4f}")
