"""Speaker-labelled embedding storage, file ingestion and splits.

Records are kept in insertion order. Vectors are widened to float64 on
construction; the store is treated as read-only afterwards.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FORMATS = ("csv", "jsonl")


class StoreError(ValueError):
    """Raised for malformed or inconsistent embedding data."""


@dataclass(frozen=True)
class Embedding:
    id: str
    speaker: str
    vector: np.ndarray


class EmbeddingStore:
    """Immutable collection of :class:`Embedding` records of one dimension.

    Parameters
    ----------
    ids, speakers : sequences of str
        Utterance ids (unique) and their speaker labels.
    vectors : (N, d) array-like
        Embedding coordinates. Converted to float64.
    """

    def __init__(self, ids: Sequence[str], speakers: Sequence[str], vectors):
        vectors = np.array(vectors, dtype=np.float64, copy=True)
        if vectors.ndim != 2:
            raise StoreError("vectors must be a 2-D array")
        n, d = vectors.shape
        if len(ids) != n or len(speakers) != n:
            raise StoreError("ids, speakers and vectors differ in length")
        if n == 0:
            raise StoreError("no records")
        if d == 0:
            raise StoreError("dimension must be positive")
        bad = ~np.isfinite(vectors).all(axis=1)
        if bad.any():
            raise StoreError(f"non-finite value in record {ids[int(np.argmax(bad))]!r}")

        self.ids = [str(i) for i in ids]
        self.speakers = [str(s) for s in speakers]
        self.position: dict[str, int] = {}
        for pos, uid in enumerate(self.ids):
            if uid in self.position:
                raise StoreError(f"duplicate id {uid!r}")
            self.position[uid] = pos

        self.speaker_index: dict[str, list[int]] = {}
        for pos, spk in enumerate(self.speakers):
            self.speaker_index.setdefault(spk, []).append(pos)

        vectors.setflags(write=False)
        self.vectors = vectors

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, pos: int) -> Embedding:
        return Embedding(self.ids[pos], self.speakers[pos], self.vectors[pos])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        return (
            self.ids == other.ids
            and self.speakers == other.speakers
            and np.array_equal(self.vectors, other.vectors)
        )

    def __repr__(self) -> str:
        return f"EmbeddingStore(N={len(self)}, d={self.dimension}, speakers={len(self.speaker_index)})"

    @property
    def speaker_list(self) -> list[str]:
        """Speakers in order of first appearance."""
        return list(self.speaker_index)

    def positions(self, ids: Iterable[str]) -> np.ndarray:
        """Record positions for ``ids``; raises on unknown ids."""
        try:
            return np.array([self.position[i] for i in ids], dtype=np.intp)
        except KeyError as exc:
            raise StoreError(f"unknown id {exc.args[0]!r}") from None

    def subset(self, ids: Iterable[str]) -> "EmbeddingStore":
        pos = self.positions(ids)
        return EmbeddingStore(
            [self.ids[p] for p in pos], [self.speakers[p] for p in pos], self.vectors[pos]
        )

    def labels(self) -> np.ndarray:
        """Integer speaker codes aligned with the records."""
        code = {s: i for i, s in enumerate(self.speaker_index)}
        return np.array([code[s] for s in self.speakers], dtype=np.intp)


def speaker_centroid(store: EmbeddingStore, speaker: str) -> np.ndarray:
    """Mean of a speaker's vectors, scaled to unit length."""
    try:
        pos = store.speaker_index[speaker]
    except KeyError:
        raise StoreError(f"unknown speaker {speaker!r}") from None
    mean = store.vectors[pos].mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        return mean
    return mean / norm


def length_normalize(store: EmbeddingStore) -> EmbeddingStore:
    """Copy of ``store`` with every vector scaled to unit length.

    Centroid queries are unit vectors, and hyperplane biases are fitted on
    training vectors, so items, queries and training data must share a scale.
    """
    norms = np.linalg.norm(store.vectors, axis=1, keepdims=True)
    unit = np.divide(store.vectors, norms, out=np.zeros_like(store.vectors), where=norms > 0)
    return EmbeddingStore(store.ids, store.speakers, unit)


def centroid_store(store: EmbeddingStore) -> EmbeddingStore:
    """One unit-norm centroid record per speaker; the record id is the speaker id."""
    spk = store.speaker_list
    return EmbeddingStore(spk, spk, np.stack([speaker_centroid(store, s) for s in spk]))


def synthesize(
    n_speakers: int,
    utts_per_speaker: int,
    dimension: int,
    between_var: float = 1.0,
    within_var: float = 0.05,
    seed: int = 0,
    anisotropy: float = 1.0,
) -> EmbeddingStore:
    """Draw a Gaussian speaker corpus.

    Speaker means come from a zero-mean Gaussian, utterances from an isotropic
    Gaussian of variance ``within_var`` around their speaker mean.

    With ``anisotropy == 1`` the speaker-mean distribution is isotropic with
    variance ``between_var``. Larger values give per-axis variances spaced
    geometrically from ``anisotropy`` down to 1, rescaled so their average
    stays ``between_var``; speaker identity then concentrates in the leading
    axes, the structure discriminant projections can exploit.
    """
    if min(n_speakers, utts_per_speaker, dimension) < 1:
        raise ValueError("counts must be positive")
    if between_var <= 0 or within_var <= 0:
        raise ValueError("variances must be positive")
    if anisotropy < 1:
        raise ValueError("anisotropy must be >= 1")

    rng = np.random.default_rng(seed)
    axis_var = np.geomspace(anisotropy, 1.0, dimension) if dimension > 1 else np.ones(1)
    axis_var *= between_var / axis_var.mean()
    means = rng.standard_normal((n_speakers, dimension)) * np.sqrt(axis_var)
    noise = rng.standard_normal((n_speakers, utts_per_speaker, dimension)) * math.sqrt(within_var)
    vectors = (means[:, None, :] + noise).reshape(-1, dimension)

    width = len(str(n_speakers - 1))
    uwidth = len(str(utts_per_speaker - 1))
    ids, speakers = [], []
    for s in range(n_speakers):
        spk = f"spk{s:0{width}d}"
        for u in range(utts_per_speaker):
            ids.append(f"{spk}-u{u:0{uwidth}d}")
            speakers.append(spk)
    return EmbeddingStore(ids, speakers, vectors)


# -- file formats ---------------------------------------------------------


def _parse_csv(text: str):
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) < 3:
            raise StoreError(f"line {lineno}: expected id,speaker,v0,... got {len(row)} fields")
        uid = row[0]
        try:
            vec = [float(x) for x in row[2:]]
        except ValueError:
            raise StoreError(f"line {lineno}: malformed number in record {uid!r}") from None
        yield uid, row[1], vec


def _parse_jsonl(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            uid, spk, vec = obj["id"], obj["speaker"], obj["vector"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise StoreError(f"line {lineno}: malformed record ({exc})") from None
        if not isinstance(uid, str) or not isinstance(spk, str) or not isinstance(vec, list):
            raise StoreError(f"line {lineno}: id/speaker must be strings and vector an array")
        try:
            vec = [float(x) for x in vec]
        except (TypeError, ValueError):
            raise StoreError(f"line {lineno}: malformed number in record {uid!r}") from None
        yield uid, spk, vec


def ingest(path, format: str | None = None) -> EmbeddingStore:
    """Read an embedding file.

    ``format`` is ``"csv"`` or ``"jsonl"``; when omitted it is taken from the
    file suffix. The dimension is fixed by the first record.
    """
    path = Path(path)
    if format is None:
        format = "jsonl" if path.suffix.lower() in (".jsonl", ".json") else "csv"
    if format not in FORMATS:
        raise StoreError(f"unknown format {format!r}")
    text = path.read_text(encoding="utf-8")
    parser = _parse_csv if format == "csv" else _parse_jsonl

    ids, speakers, rows = [], [], []
    d = None
    for uid, spk, vec in parser(text):
        if d is None:
            d = len(vec)
        elif len(vec) != d:
            raise StoreError(f"record {uid!r} has dimension {len(vec)}, expected {d}")
        ids.append(uid)
        speakers.append(spk)
        rows.append(vec)
    if not rows:
        raise StoreError("no records")
    return EmbeddingStore(ids, speakers, np.array(rows, dtype=np.float64))


def serialize(store: EmbeddingStore, path, format: str = "csv") -> None:
    """Write ``store`` in a format :func:`ingest` reads back exactly."""
    if format not in FORMATS:
        raise StoreError(f"unknown format {format!r}")
    lines = []
    for rec in store:
        if format == "csv":
            # repr() of a Python float round-trips exactly
            lines.append(",".join([rec.id, rec.speaker] + [repr(float(v)) for v in rec.vector]))
        else:
            lines.append(json.dumps({"id": rec.id, "speaker": rec.speaker, "vector": rec.vector.tolist()}))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- splits ---------------------------------------------------------------


@dataclass
class SplitSpec:
    """Utterance-level partition into training data, search space and queries."""

    train: list[str] = field(default_factory=list)
    search_space: list[str] = field(default_factory=list)
    queries: list[str] = field(default_factory=list)

    def validate(self, store: EmbeddingStore) -> None:
        sets = {"train": set(self.train), "search_space": set(self.search_space), "queries": set(self.queries)}
        names = list(sets)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                common = sets[a] & sets[b]
                if common:
                    raise StoreError(f"{a} and {b} share id {sorted(common)[0]!r}")
        for name, ids in sets.items():
            for uid in ids:
                if uid not in store.position:
                    raise StoreError(f"{name} references unknown id {uid!r}")

    def to_json(self) -> str:
        return json.dumps({"train": self.train, "search_space": self.search_space, "queries": self.queries})

    @classmethod
    def from_json(cls, text: str) -> "SplitSpec":
        obj = json.loads(text)
        try:
            return cls(list(obj["train"]), list(obj["search_space"]), list(obj["queries"]))
        except (KeyError, TypeError) as exc:
            raise StoreError(f"malformed split file ({exc})") from None

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SplitSpec":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def speaker_split(
    store: EmbeddingStore,
    n_train: int,
    n_target: int,
    n_nontarget: int = 0,
    query_utts: int = 3,
    seed: int = 0,
) -> SplitSpec:
    """Partition a corpus by speaker.

    Speakers are shuffled with ``seed`` and assigned in order: ``n_train``
    training speakers (all utterances to ``train``), ``n_target`` target
    speakers (first ``query_utts`` utterances to ``queries``, the rest to the
    search space), ``n_nontarget`` speakers with all utterances as queries,
    and every remaining speaker to the search space as distractors.
    """
    speakers = store.speaker_list
    if n_train + n_target + n_nontarget > len(speakers):
        raise StoreError(
            f"split needs {n_train + n_target + n_nontarget} speakers, store has {len(speakers)}"
        )
    order = np.random.default_rng(seed).permutation(len(speakers))
    shuffled = [speakers[i] for i in order]
    split = SplitSpec()
    for rank, spk in enumerate(shuffled):
        utts = [store.ids[p] for p in store.speaker_index[spk]]
        if rank < n_train:
            split.train += utts
        elif rank < n_train + n_target:
            if len(utts) <= query_utts:
                raise StoreError(f"target speaker {spk!r} has too few utterances")
            split.queries += utts[:query_utts]
            split.search_space += utts[query_utts:]
        elif rank < n_train + n_target + n_nontarget:
            split.queries += utts
        else:
            split.search_space += utts
    return split
