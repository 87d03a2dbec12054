"""Per-table projection generators: Gaussian LSH, random-sampling LDA and RSS.

Every table draws its randomness from ``(seed, method, table index)`` so a
set of ``L`` tables is a prefix of any larger set built with the same seed,
and generation order cannot change the result.
"""

from __future__ import annotations

import json
import logging
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import LinalgError, lda, pca
from .store import EmbeddingStore

log = logging.getLogger(__name__)

METHODS = ("lsh", "rs-lda", "rss")


class ProjectionError(ValueError):
    pass


class RankBoundError(ProjectionError):
    """More hyperplanes requested than LDA on the sampled speakers can supply."""


@dataclass
class ProjectionMatrix:
    """Hyperplanes of one hash table: bit j is ``w @ matrix[:, j] + bias[j] >= 0``."""

    matrix: np.ndarray  # (d, k)
    bias: np.ndarray  # (k,)
    method: str
    table_index: int  # 1-based

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[1] < 1:
            raise ProjectionError("projection matrix must be d x k with k >= 1")
        if self.bias.shape != (self.matrix.shape[1],):
            raise ProjectionError("bias length must equal the column count")
        if not (np.isfinite(self.matrix).all() and np.isfinite(self.bias).all()):
            raise ProjectionError("non-finite projection entries")

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def k(self) -> int:
        return self.matrix.shape[1]


@dataclass
class RssConfig:
    n_speakers: int
    k: int
    L: int
    ridge: float | None = None
    seed: int = 0


def table_rng(seed: int, method: str, table_index: int) -> np.random.Generator:
    tag = zlib.crc32(method.encode())
    return np.random.default_rng(np.random.SeedSequence([seed, tag, table_index]))


def centering_bias(vectors: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """``b_j = -mean_i(w_i . r_j)``: puts each hyperplane through the data mean."""
    return -(vectors @ matrix).mean(axis=0)


def gen_lsh(d: int, k: int, L: int, seed: int = 0) -> list[ProjectionMatrix]:
    """``L`` tables of i.i.d. standard-normal hyperplanes with zero bias."""
    if d < 1 or k < 1 or L < 0:
        raise ProjectionError("need d >= 1, k >= 1, L >= 0")
    out = []
    for l in range(1, L + 1):
        r = table_rng(seed, "lsh", l).standard_normal((d, k))
        out.append(ProjectionMatrix(r, np.zeros(k), "lsh", l))
    return out


def gen_rss(store: EmbeddingStore, cfg: RssConfig) -> list[ProjectionMatrix]:
    """Random Speaker-variability Subspace projections.

    For each table a fresh subset of ``cfg.n_speakers`` training speakers is
    drawn without replacement and the ``k`` leading LDA directions of their
    utterances become the hyperplanes. Biases centre every hyperplane on the
    whole training set.
    """
    speakers = store.speaker_list
    ns, k = cfg.n_speakers, cfg.k
    if ns > len(speakers):
        raise ProjectionError(f"N_s={ns} exceeds the {len(speakers)} available training speakers")
    if k < 1:
        raise ProjectionError("k must be >= 1")
    if k > ns - 1:
        raise RankBoundError(f"LDA rank bound: k={k} > N_s - 1 = {ns - 1} (N_s must exceed k)")
    if k > store.dimension:
        raise ProjectionError(f"k={k} exceeds dimension d={store.dimension}")

    labels = store.labels()
    singletons = [s for s in speakers if len(store.speaker_index[s]) < 2]
    if singletons:
        log.warning("%d training speakers have a single utterance", len(singletons))

    out = []
    for l in range(1, cfg.L + 1):
        rng = table_rng(cfg.seed, "rss", l)
        chosen = rng.choice(len(speakers), size=ns, replace=False)
        mask = np.isin(labels, chosen)
        try:
            t = lda(store.vectors[mask], k, ridge=cfg.ridge, labels=labels[mask])
        except LinalgError as exc:
            raise ProjectionError(f"table {l}: {exc}") from None
        out.append(ProjectionMatrix(t.matrix, centering_bias(store.vectors, t.matrix), "rss", l))
    return out


def gen_rs_lda(
    store: EmbeddingStore,
    m_eigen: int,
    k: int,
    L: int,
    ridge: float | None = None,
    seed: int = 0,
) -> list[ProjectionMatrix]:
    """Random-sampling LDA projections.

    The PCA basis of the training data is computed once; each table keeps a
    random ``m_eigen`` of its ``d`` axes, runs LDA over all training speakers
    inside that subspace and composes the two maps into one ``d x k`` matrix.
    """
    d = store.dimension
    n_classes = len(store.speaker_index)
    if m_eigen < 1 or m_eigen > d:
        raise ProjectionError(f"cannot select {m_eigen} of {d} PCA eigenvectors")
    if k < 1 or k > min(m_eigen, n_classes - 1):
        raise ProjectionError(f"k={k} exceeds min(m_eigen, C-1) = {min(m_eigen, n_classes - 1)}")

    basis = pca(store.vectors, d)
    labels = store.labels()
    out = []
    for l in range(1, L + 1):
        rng = table_rng(seed, "rs-lda", l)
        sel = np.sort(rng.choice(d, size=m_eigen, replace=False))
        p = basis[:, sel]
        try:
            t = lda(store.vectors @ p, k, ridge=ridge, labels=labels)
        except LinalgError as exc:
            raise ProjectionError(f"table {l}: {exc}") from None
        matrix = p @ t.matrix
        out.append(ProjectionMatrix(matrix, centering_bias(store.vectors, matrix), "rs-lda", l))
    return out


def generate(
    method: str,
    train: EmbeddingStore,
    k: int,
    L: int,
    seed: int = 0,
    n_speakers: int | None = None,
    m_eigen: int | None = None,
    ridge: float | None = None,
) -> list[ProjectionMatrix]:
    """Dispatch to one generator with the default ``N_s`` and ``m_eigen`` rules.

    ``n_speakers`` defaults to ``d`` clamped to the training speaker count;
    ``m_eigen`` defaults to two thirds of ``d`` (100 of 150 at full scale).
    """
    d = train.dimension
    if method == "lsh":
        return gen_lsh(d, k, L, seed)
    if method == "rss":
        if n_speakers is None:
            n_speakers = d
            if n_speakers > len(train.speaker_index):
                log.warning("N_s=d=%d clamped to %d training speakers", d, len(train.speaker_index))
                n_speakers = len(train.speaker_index)
        return gen_rss(train, RssConfig(n_speakers, k, L, ridge, seed))
    if method == "rs-lda":
        if m_eigen is None:
            m_eigen = max(k, (2 * d) // 3)
        return gen_rs_lda(train, m_eigen, k, L, ridge, seed)
    raise ProjectionError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


# -- persistence ----------------------------------------------------------


def projections_to_dict(projections: list[ProjectionMatrix], seed: int, method: str | None = None) -> dict:
    if projections:
        method = method or projections[0].method
        d, k = projections[0].d, projections[0].k
    else:
        d = k = 0
    return {
        "method": method,
        "d": d,
        "k": k,
        "L": len(projections),
        "seed": seed,
        "tables": [{"matrix": p.matrix.tolist(), "bias": p.bias.tolist()} for p in projections],
    }


def save_projections(projections: list[ProjectionMatrix], path, seed: int, method: str | None = None) -> None:
    doc = projections_to_dict(projections, seed, method)
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def projections_from_dict(doc: dict) -> list[ProjectionMatrix]:
    try:
        method, d, k = doc["method"], int(doc["d"]), int(doc["k"])
        tables = doc["tables"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ProjectionError(f"malformed projection document ({exc})") from None
    out = []
    for l, t in enumerate(tables, start=1):
        p = ProjectionMatrix(np.array(t["matrix"], dtype=np.float64).reshape(d, k), t["bias"], method, l)
        out.append(p)
    if len(out) != int(doc.get("L", len(out))):
        raise ProjectionError("table count does not match L")
    return out


def load_projections(path) -> tuple[list[ProjectionMatrix], dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return projections_from_dict(doc), doc
