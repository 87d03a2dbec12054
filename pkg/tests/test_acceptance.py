"""Acceptance checks. Each test prints one PASS/FAIL line before asserting."""

import csv
import io
import subprocess
import sys
import time

import numpy as np
import pytest

from rsshash.evaluation import eer_from_scores, fastest_at_accuracy, hamming_ratio, sweep
from rsshash.index import build, linear_search
from rsshash.linalg import lda, principal_angles, scatter_matrices
from rsshash.projections import ProjectionMatrix, generate
from rsshash.store import EmbeddingStore, length_normalize, speaker_split, synthesize

from conftest import desk_corpus
from test_evaluation import sweep_eer
from test_linalg import brute_force_lda, labelled, total_scatter_loop


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return emit


def test_c1_lda_oracle(report):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 9))
        C = int(rng.integers(2, 6))
        k = int(rng.integers(1, min(d, C - 1) + 1))
        X, y = labelled(rng, C, int(rng.integers(d + 2, 3 * d + 4)), d)
        ours = lda(X, k, ridge=0.0, labels=y).matrix
        worst = max(worst, principal_angles(ours, brute_force_lda(X, y, k)[0]).max())
    elapsed = time.perf_counter() - t0
    report(1, worst < 1e-6 and elapsed < 5, f"max principal angle {worst:.2e} rad over 20 instances, {elapsed:.2f}s")


def test_c2_scatter_decomposition(report):
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        d = int(rng.integers(1, 7))
        X, y = labelled(rng, int(rng.integers(2, 6)), int(rng.integers(1, 8)), d)
        sc = scatter_matrices(X, y)
        T = total_scatter_loop(X.tolist())
        worst = max(worst, np.abs(sc.between + sc.within - T).max() / np.abs(T).max())
    report(2, worst < 1e-8, f"max relative deviation {worst:.2e} over 50 instances")


def test_c3_hamming_cosine_convergence(report):
    t0 = time.perf_counter()
    ks = (16, 64, 256, 1024)
    ok = True
    rows = []
    for seed in range(3):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(200, 2, 32))
        X /= np.linalg.norm(X, axis=2, keepdims=True)
        true = np.sum(X[:, 0] * X[:, 1], axis=1)
        errs = []
        for k in ks:
            bits = (X @ rng.normal(size=(32, k))) >= 0
            h = (bits[:, 0] != bits[:, 1]).sum(axis=1)
            errs.append(float(np.abs(np.cos(np.pi * h / k) - true).mean()))
        ok &= all(a > b for a, b in zip(errs, errs[1:])) and errs[-1] < 0.05
        rows.append("/".join(f"{e:.3f}" for e in errs))
    elapsed = time.perf_counter() - t0
    report(3, ok and elapsed < 10, f"mean |error| at k={ks}: {'; '.join(rows)}, {elapsed:.2f}s")


def test_c4_full_coverage_matches_linear(report):
    mismatches = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 12))
        store = synthesize(int(rng.integers(2, 15)), int(rng.integers(1, 6)), d, seed=seed)
        tables = generate("lsh", store, int(rng.integers(1, 6)), int(rng.integers(1, 4)), seed=seed)
        # zero hyperplanes with positive bias send every vector to one bucket
        tables.append(ProjectionMatrix(np.zeros((d, tables[0].k)), np.ones(tables[0].k), "lsh", len(tables) + 1))
        idx = build(store, tables)
        q = rng.normal(size=d)
        res = idx.query(q, top_n=None)
        assert res.candidates_examined == len(store)
        mismatches += res.ranked != linear_search(store, q, top_n=None).ranked
    report(4, mismatches == 0, f"{10 - mismatches}/10 fixtures rank identically")


def test_c5_eer_oracle(report):
    worst = 0.0
    for seed in range(25):
        rng = np.random.default_rng(seed)
        nt, nn = int(rng.integers(1, 40)), int(rng.integers(1, 40))
        # coarse rounding forces tied scores
        tgt = np.round(rng.normal(0.4, 0.3, nt), 1)
        non = np.round(rng.normal(0.0, 0.3, nn), 1)
        mt, mn = int(rng.integers(0, 4)), int(rng.integers(0, 4))
        scores = np.concatenate([tgt, np.full(mt, np.nan), non, np.full(mn, np.nan)])
        labels = [True] * (nt + mt) + [False] * (nn + mn)
        worst = max(worst, abs(eer_from_scores(scores, labels) - sweep_eer(tgt.tolist(), non.tolist(), mt, mn)))
    report(5, worst < 1e-9, f"max |EER - sweep EER| {worst:.1e} points over 25 fixtures")


def test_c6_hamming_ratio_ordering(report):
    t0 = time.perf_counter()
    votes = 0
    rows = []
    for seed in range(5):
        store = desk_corpus(seed)
        r = {m: hamming_ratio(store, generate(m, store, 10, 16, seed=seed), 10000, seed)
             for m in ("rss", "rs-lda", "lsh")}
        votes += r["rss"] < r["rs-lda"] < r["lsh"]
        rows.append(f"{r['rss']:.3f}<{r['rs-lda']:.3f}<{r['lsh']:.3f}")
    elapsed = time.perf_counter() - t0
    report(6, votes >= 3 and elapsed < 60,
           f"RSS<rs-LDA<LSH in {votes}/5 seeds ({', '.join(rows)}), {elapsed:.1f}s")


@pytest.mark.slow
def test_c7_retrieval_eer_ordering(report):
    t0 = time.perf_counter()
    ks, Ls = [2, 4, 6, 8, 10, 12], [8, 16, 32]
    wins = cells = 0
    for seed in range(3):
        store = desk_corpus(seed, n_speakers=732)
        split = speaker_split(store, 100, 40, 120, query_utts=3, seed=seed)
        assert len(split.search_space) == 5000
        reps = sweep(store, split, ["lsh", "rss"], ks, Ls, [seed], tasks=["retrieval"])
        eer = {(r.method, r.k, r.L): r.metric_value for r in reps}
        for k in ks:
            for L in Ls:
                wins += eer[("rss", k, L)] <= eer[("lsh", k, L)]
                cells += 1
    elapsed = time.perf_counter() - t0
    report(7, wins >= 0.8 * cells and elapsed < 600,
           f"EER(RSS) <= EER(LSH) in {wins}/{cells} cells, {elapsed:.1f}s")


@pytest.mark.slow
def test_c8_candidate_fraction_at_matched_accuracy(report):
    store = length_normalize(synthesize(20200, 3, 64, 1.0, 0.05, seed=0, anisotropy=100.0))
    split = speaker_split(store, 200, 1000, 0, query_utts=1, seed=0)
    reps = sweep(store, split, ["lsh", "rss"], [10, 12, 14, 16, 18, 20], [8, 16, 32], [0],
                 tasks=["identification"], baseline=True)
    linear = reps[0]
    assert linear.n_items == 20000
    best = {m: fastest_at_accuracy([r for r in reps[1:] if r.method == m], linear.metric_value)
            for m in ("rss", "lsh")}
    ok = best["rss"] is not None and best["lsh"] is not None and \
        best["rss"].candidate_fraction < best["lsh"].candidate_fraction
    detail = ", ".join(
        f"{m} k={b.k} L={b.L} acc={b.metric_value:.1f}% fraction={b.candidate_fraction:.5f}" if b else f"{m} none"
        for m, b in best.items()
    )
    report(8, ok, f"linear acc={linear.metric_value:.1f}%; {detail}")


def _strip_timing(text):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or "relative_speed" not in rows[0]:
        return text
    col = rows[0].index("relative_speed")
    return "\n".join(",".join(r[:col] + r[col + 1:]) for r in rows)


CLI_SCRIPT = [
    ["synth", "--speakers", "60", "--utts", "5", "--dim", "16", "--seed", "2", "-o", "emb.csv",
     "--split-out", "split.json", "--train-speakers", "25", "--target-speakers", "20",
     "--nontarget-speakers", "5", "--query-utts", "2"],
    ["synth", "--speakers", "5", "--utts", "3", "--dim", "4", "--seed", "2", "-o", "small.jsonl"],
    ["ingest-check", "--data", "emb.csv", "--split", "split.json"],
    ["build", "--data", "emb.csv", "--split", "split.json", "--method", "rss", "--k", "6", "--L", "8",
     "--seed", "5", "-o", "rss.json"],
    ["build", "--data", "emb.csv", "--split", "split.json", "--method", "lsh", "--k", "6", "--L", "8",
     "--seed", "5", "-o", "lsh.json"],
    ["build", "--data", "emb.csv", "--split", "split.json", "--method", "rs-lda", "--k", "4", "--L", "3",
     "--seed", "5", "-o", "rslda.json"],
    ["query", "--data", "emb.csv", "--split", "split.json", "--projections", "rss.json", "--id", "spk07-u0",
     "-o", "q_rss.tsv"],
    ["query", "--data", "emb.csv", "--linear", "--speaker", "spk03", "-o", "q_lin.tsv"],
    ["eval", "--data", "emb.csv", "--split", "split.json", "--projections", "rss.json", "-o", "e_ret.csv"],
    ["eval", "--data", "emb.csv", "--split", "split.json", "--projections", "lsh.json", "--task",
     "identification", "--no-timing", "-o", "e_id.csv"],
    ["eval", "--data", "emb.csv", "--split", "split.json", "--linear", "--task", "openset", "-o", "e_open.csv"],
    ["sweep", "--data", "emb.csv", "--split", "split.json", "--methods", "lsh,rss,rs-lda", "--k", "4,6",
     "--L", "2,4", "--seeds", "0,1", "-o", "sweep.csv"],
]


def _run_script(workdir):
    outputs = {}
    for i, argv in enumerate(CLI_SCRIPT):
        res = subprocess.run([sys.executable, "-m", "rsshash", *argv], cwd=workdir, capture_output=True, text=True)
        assert res.returncode == 0, (argv, res.stderr)
        outputs[f"stdout{i}"] = res.stdout
    for path in sorted(workdir.iterdir()):
        outputs[path.name] = _strip_timing(path.read_text()) if path.suffix == ".csv" and path.name != "emb.csv" \
            else path.read_text()
    return outputs


def test_c9_cli_determinism(report, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    first, second = _run_script(a), _run_script(b)
    differing = sorted(k for k in first if first[k] != second.get(k))
    report(9, not differing and first.keys() == second.keys(),
           f"{len(CLI_SCRIPT)} commands, {len(first)} outputs compared, differing: {differing or 'none'}")
