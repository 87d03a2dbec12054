"""Speaker retrieval / identification protocols, metrics and parameter sweeps."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .index import HashIndex, LinearIndex, popcount64, table_keys
from .projections import ProjectionMatrix, generate
from .store import EmbeddingStore, SplitSpec, StoreError, centroid_store

log = logging.getLogger(__name__)

NOT_RETRIEVED = None

CSV_COLUMNS = [
    "method", "task", "k", "L", "seed", "metric_name", "metric_value", "mean_candidates", "relative_speed",
]


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class Trial:
    query_id: str
    item_id: str
    label: bool
    score: float | None  # NOT_RETRIEVED when the item never surfaced


@dataclass
class EvalReport:
    method: str
    task: str
    k: int
    L: int
    seed: int | None
    metric_name: str
    metric_value: float
    mean_candidates: float
    n_items: int
    n_queries: int
    mean_query_seconds: float
    relative_speed: float | None = None

    @property
    def candidate_fraction(self) -> float:
        return self.mean_candidates / self.n_items


# -- EER ------------------------------------------------------------------


def eer_from_scores(scores, labels) -> float:
    """Equal error rate in percent.

    ``scores`` may contain NaN for items that were never retrieved; those are
    rejected at every threshold. Operating points are taken at every distinct
    score (accept ``score >= t``) plus the reject-all point. The EER is the
    linear interpolation between the two points bracketing FRR = FAR. If FRR
    stays above FAR at the most permissive point (too many unretrieved
    targets) the curve never crosses and that point's FRR is returned.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=bool).ravel()
    n_tgt = int(labels.sum())
    n_non = labels.size - n_tgt
    if n_tgt == 0 or n_non == 0:
        raise EvaluationError("EER needs at least one target and one non-target trial")

    finite = ~np.isnan(scores)
    tgt = np.sort(scores[labels & finite])
    non = np.sort(scores[~labels & finite])
    thresholds = np.unique(np.concatenate([tgt, non]))[::-1]
    acc_tgt = len(tgt) - np.searchsorted(tgt, thresholds, side="left")
    acc_non = len(non) - np.searchsorted(non, thresholds, side="left")
    frr = np.concatenate([[1.0], 1.0 - acc_tgt / n_tgt])
    far = np.concatenate([[0.0], acc_non / n_non])

    diff = frr - far
    crossed = np.flatnonzero(diff <= 0)
    if len(crossed) == 0:
        return 100.0 * float(frr[-1])
    b = crossed[0]
    a = b - 1
    alpha = diff[a] / (diff[a] - diff[b])
    return 100.0 * float(far[a] + alpha * (far[b] - far[a]))


def eer(trials: Iterable[Trial]) -> float:
    trials = list(trials)
    scores = [np.nan if t.score is NOT_RETRIEVED else t.score for t in trials]
    return eer_from_scores(scores, [t.label for t in trials])


# -- backends -------------------------------------------------------------


class LinearBackend:
    name = "linear"
    k = 0
    L = 0

    def build(self, store: EmbeddingStore, subset=None) -> LinearIndex:
        return LinearIndex(store, subset)


class HashBackend:
    def __init__(self, projections: Sequence[ProjectionMatrix], name: str | None = None):
        self.projections = list(projections)
        self.name = name or (self.projections[0].method if self.projections else "hash")
        self.k = self.projections[0].k if self.projections else 0
        self.L = len(self.projections)

    def build(self, store: EmbeddingStore, subset=None) -> HashIndex:
        return HashIndex(store, self.projections, subset)


def _timed_scores(index, queries: np.ndarray):
    """Score every query; returns per-query (positions, scores) and mean seconds per query."""
    out = []
    elapsed = 0.0
    for q in queries:
        t0 = time.perf_counter()
        res = index.score(q)
        elapsed += time.perf_counter() - t0
        out.append(res)
    return out, elapsed / max(len(queries), 1)


def _top1(index, positions: np.ndarray, scores: np.ndarray):
    if len(positions) == 0:
        return None, NOT_RETRIEVED
    best = scores.max()
    tied = positions[scores == best]
    if len(tied) > 1:
        ids = index.store.ids
        pos = min(tied, key=lambda p: ids[p])
    else:
        pos = tied[0]
    return pos, float(best)


# -- speaker retrieval ----------------------------------------------------


@dataclass
class TrialSet:
    """Full query x item trial grid, stored densely.

    ``scores`` is (n_queries, n_items) with NaN marking unretrieved items.
    """

    query_ids: list[str]
    item_ids: list[str]
    labels: np.ndarray
    scores: np.ndarray

    def __len__(self) -> int:
        return self.labels.size

    def __iter__(self) -> Iterator[Trial]:
        for i, qid in enumerate(self.query_ids):
            for j, iid in enumerate(self.item_ids):
                s = self.scores[i, j]
                yield Trial(qid, iid, bool(self.labels[i, j]), NOT_RETRIEVED if np.isnan(s) else float(s))

    def eer(self) -> float:
        return eer_from_scores(self.scores, self.labels)


def query_centroids(store: EmbeddingStore, query_ids: Sequence[str]) -> tuple[list[str], np.ndarray]:
    """Group query utterances by speaker and average them into unit centroids."""
    if not query_ids:
        raise EvaluationError("no queries")
    sub = store.subset(query_ids)
    cents = centroid_store(sub)
    return cents.ids, cents.vectors


def retrieval_task(backend, store: EmbeddingStore, split: SplitSpec, seed: int | None = None):
    """1-to-N speaker verification over the search space.

    Query speakers are represented by the centroid of their query utterances;
    every (query speaker, search item) pair is a trial.
    """
    if not split.search_space:
        raise EvaluationError("empty search space")
    speakers, qvecs = query_centroids(store, split.queries)
    index = backend.build(store, split.search_space)
    members = index.members
    results, qtime = _timed_scores(index, qvecs)

    scores = np.full((len(speakers), len(members)), np.nan)
    for i, (pos, sc) in enumerate(results):
        scores[i, np.searchsorted(members, pos)] = sc
    item_spk = np.array([store.speakers[p] for p in members], dtype=object)
    labels = item_spk[None, :] == np.array(speakers, dtype=object)[:, None]
    trials = TrialSet(speakers, [store.ids[p] for p in members], labels, scores)

    report = EvalReport(
        method=backend.name, task="retrieval", k=backend.k, L=backend.L, seed=seed,
        metric_name="eer_percent", metric_value=trials.eer(),
        mean_candidates=float(np.mean([len(p) for p, _ in results])),
        n_items=len(members), n_queries=len(speakers), mean_query_seconds=qtime,
        relative_speed=1.0 if isinstance(backend, LinearBackend) else None,
    )
    return trials, report


# -- speaker identification -----------------------------------------------


def _identify(backend, store: EmbeddingStore, split: SplitSpec):
    if not split.search_space:
        raise EvaluationError("empty search space")
    enrolled = centroid_store(store.subset(split.search_space))
    index = backend.build(enrolled)
    qpos = store.positions(split.queries)
    if len(qpos) == 0:
        raise EvaluationError("no queries")
    results, qtime = _timed_scores(index, store.vectors[qpos])
    top = [_top1(index, p, s) for p, s in results]
    predicted = [None if pos is None else enrolled.ids[pos] for pos, _ in top]
    top_scores = [score for _, score in top]
    truth = [store.speakers[p] for p in qpos]
    in_set = np.array([t in enrolled.position for t in truth])
    mean_cands = float(np.mean([len(p) for p, _ in results]))
    return enrolled, truth, predicted, top_scores, in_set, mean_cands, qtime


def identification_task(backend, store: EmbeddingStore, split: SplitSpec, seed: int | None = None,
                        strict: bool = True) -> EvalReport:
    """Closed-set identification accuracy against speaker centroids.

    Each search-space speaker is enrolled as the centroid of its utterances;
    each query utterance is assigned the speaker of its top-1 result. Queries
    whose candidate set is empty count as errors. Queries from speakers absent
    from the search space break the closed-set premise: with ``strict`` they
    raise, otherwise they are logged and left out.
    """
    enrolled, truth, predicted, _, in_set, mean_cands, qtime = _identify(backend, store, split)
    if not in_set.all():
        missing = [q for q, ok in zip(split.queries, in_set) if not ok]
        if strict:
            raise EvaluationError(
                f"{len(missing)} queries have no enrolled speaker (closed set violated), e.g. {missing[0]!r}"
            )
        for q in missing:
            log.info("query %s excluded: speaker not in search space", q)
    correct = [p == t for p, t, ok in zip(predicted, truth, in_set) if ok]
    if not correct:
        raise EvaluationError("no closed-set queries")
    return EvalReport(
        method=backend.name, task="identification", k=backend.k, L=backend.L, seed=seed,
        metric_name="accuracy_percent", metric_value=100.0 * float(np.mean(correct)),
        mean_candidates=mean_cands, n_items=len(enrolled), n_queries=len(correct),
        mean_query_seconds=qtime,
        relative_speed=1.0 if isinstance(backend, LinearBackend) else None,
    )


def openset_identification(backend, store: EmbeddingStore, split: SplitSpec, thresholds: Sequence[float]):
    """Top-1 detector miss / false-alarm rates per threshold.

    A miss is an in-set query whose top-1 is absent, the wrong speaker, or
    scores below the threshold; a false alarm is an out-of-set query whose
    top-1 scores at or above it.
    """
    _, truth, predicted, top_scores, in_set, _, _ = _identify(backend, store, split)
    if in_set.all():
        raise EvaluationError("open-set evaluation needs out-of-set queries")
    n_in = int(in_set.sum())
    n_out = len(in_set) - n_in
    out = []
    for t in thresholds:
        miss = fa = 0
        for p, s, tr, ok in zip(predicted, top_scores, truth, in_set):
            hit = p is not None and s >= t
            if ok:
                miss += not (hit and p == tr)
            else:
                fa += hit
        out.append((float(t), miss / n_in if n_in else 0.0, fa / n_out))
    return out


# -- Hamming-ratio diagnostic ---------------------------------------------


def _sample_pairs(labels: np.ndarray, n: int, rng: np.random.Generator):
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    uniq, starts, counts = np.unique(sorted_labels, return_index=True, return_counts=True)
    eligible = np.flatnonzero(counts[np.searchsorted(uniq, sorted_labels)] >= 2)
    if len(eligible) == 0 or len(uniq) < 2:
        raise EvaluationError("hamming ratio needs >= 2 speakers with >= 2 utterances")

    r = rng.choice(eligible, size=n)
    g = np.searchsorted(uniq, sorted_labels[r])
    within = r - starts[g]
    other = starts[g] + (within + rng.integers(1, counts[g])) % counts[g]
    same = (order[r], order[other])

    a = rng.integers(0, len(labels), size=n)
    b = rng.integers(0, len(labels), size=n)
    clash = labels[a] == labels[b]
    while clash.any():
        b[clash] = rng.integers(0, len(labels), size=int(clash.sum()))
        clash = labels[a] == labels[b]
    return same, (a, b)


def mean_hamming(keys: np.ndarray, i: np.ndarray, j: np.ndarray) -> float:
    """Mean over pairs of the table-averaged Hamming distance."""
    return float(popcount64(keys[i] ^ keys[j]).mean())


def hamming_ratio(store: EmbeddingStore, projections: Sequence[ProjectionMatrix], sample: int = 10000,
                  seed: int = 0) -> float:
    """Mean same-speaker Hamming distance over mean different-speaker distance.

    ``sample`` pairs of each kind are drawn with ``seed``; per pair the
    distance is averaged over all tables. Lower means codes keep speakers
    together better.
    """
    if not projections:
        raise EvaluationError("no projections")
    rng = np.random.default_rng(seed)
    (si, sj), (di, dj) = _sample_pairs(store.labels(), sample, rng)
    keys = table_keys(store.vectors, projections)
    diff = mean_hamming(keys, di, dj)
    if diff == 0:
        raise EvaluationError("different-speaker pairs all collide; ratio undefined")
    return mean_hamming(keys, si, sj) / diff


# -- sweeps ---------------------------------------------------------------


TASKS = ("retrieval", "identification")


def run_task(task: str, backend, store: EmbeddingStore, split: SplitSpec, seed=None) -> EvalReport:
    if task == "retrieval":
        return retrieval_task(backend, store, split, seed)[1]
    if task == "identification":
        return identification_task(backend, store, split, seed, strict=False)
    raise EvaluationError(f"unknown task {task!r}")


def sweep(
    store: EmbeddingStore,
    split: SplitSpec,
    methods: Sequence[str],
    k_values: Sequence[int],
    L_values: Sequence[int],
    seeds: Sequence[int],
    tasks: Sequence[str] = TASKS,
    n_speakers: int | None = None,
    m_eigen: int | None = None,
    ridge: float | None = None,
    baseline: bool = False,
) -> list[EvalReport]:
    """One report per (method, k, L, seed, task).

    Projections are generated once per (method, k, seed) for the largest L;
    smaller L use a prefix, which is exactly what a fresh generation with
    that L returns. Relative speed is the linear backend's mean query time
    over the hashed one, timed in this process. With ``baseline`` the linear
    reports (relative speed 1.0) are prepended.
    """
    if not (methods and k_values and L_values and seeds and tasks):
        raise EvaluationError("empty sweep grid")
    train = store.subset(split.train)
    linear = {t: run_task(t, LinearBackend(), store, split) for t in tasks}
    reports = list(linear.values()) if baseline else []
    max_L = max(L_values)
    for method in methods:
        for k in k_values:
            for seed in seeds:
                tables = generate(method, train, k, max_L, seed, n_speakers=n_speakers, m_eigen=m_eigen, ridge=ridge)
                for L in L_values:
                    backend = HashBackend(tables[:L], name=method)
                    backend.k = k
                    for t in tasks:
                        rep = run_task(t, backend, store, split, seed)
                        rep.relative_speed = linear[t].mean_query_seconds / max(rep.mean_query_seconds, 1e-12)
                        reports.append(rep)
    return reports


def fastest_at_accuracy(reports: Iterable[EvalReport], baseline_accuracy: float, relative: float = 0.95):
    """Identification report with the smallest candidate fraction reaching
    ``relative`` of the baseline accuracy, or None."""
    ok = [
        r for r in reports
        if r.task == "identification" and r.metric_value >= relative * baseline_accuracy
    ]
    if not ok:
        return None
    return min(ok, key=lambda r: (r.candidate_fraction, r.k, r.L))


# -- CSV ------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def reports_to_csv(reports: Iterable[EvalReport], timing: bool = True) -> str:
    """CSV text; with ``timing=False`` the relative_speed column is left blank."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow([
            r.method, r.task, r.k, r.L, _fmt(r.seed), r.metric_name, _fmt(float(r.metric_value)),
            _fmt(float(r.mean_candidates)), _fmt(r.relative_speed) if timing else "",
        ])
    return buf.getvalue()


def read_reports_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))
