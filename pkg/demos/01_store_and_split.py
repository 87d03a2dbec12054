"""
Synthetic speaker corpora and speaker-disjoint splits
=====================================================

A store holds one unit-length embedding per utterance. Here we draw a
small synthetic corpus, write it to CSV, read it back, and carve it into
training speakers, an enrolled search space and held-out queries.
"""

import tempfile
from pathlib import Path

import numpy as np

from rsshash import ingest, length_normalize, serialize, speaker_split, synthesize

# Speaker identity lives mostly in the leading axes when anisotropy > 1.
store = length_normalize(synthesize(50, 6, 16, within_var=0.05, seed=0, anisotropy=100.0))
print(f"{len(store)} utterances, {len(store.speaker_index)} speakers, d={store.dimension}")

###############################################################################
# Round trip through CSV. Floats are written with repr, so values come back
# bit for bit.

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "emb.csv"
    serialize(store, path, "csv")
    back = ingest(path)
    print("round trip exact:", back == store)

###############################################################################
# Split by speaker: 20 train, 15 target (2 query utterances each) and
# 5 non-target speakers whose utterances are all queries.

split = speaker_split(store, n_train=20, n_target=15, n_nontarget=5, query_utts=2, seed=0)
split.validate(store)
print(f"train={len(split.train)} search_space={len(split.search_space)} queries={len(split.queries)}")

spk = lambda ids: {store.speakers[store.position[i]] for i in ids}
print("train and search space share speakers:", bool(spk(split.train) & spk(split.search_space)))

###############################################################################
# Within-speaker cosines sit far above between-speaker ones.

X = store.vectors
labels = store.labels()
same = labels[:, None] == labels[None, :]
cos = X @ X.T
off = ~np.eye(len(X), dtype=bool)
print(f"mean cosine same speaker {cos[same & off].mean():.3f}, different {cos[~same].mean():.3f}")
