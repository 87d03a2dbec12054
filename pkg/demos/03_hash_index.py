"""
Multi-table hash index versus exact search
==========================================

Each table maps a vector to a k-bit key. A query collects everything that
shares its key in any table and reranks those candidates by exact cosine.
More tables widen the candidate set; more bits per table narrow it.
"""

import numpy as np

from rsshash import RssConfig, build, gen_rss, length_normalize, linear_search, synthesize

store = length_normalize(synthesize(400, 5, 32, seed=2, anisotropy=100.0))
tables = gen_rss(store, RssConfig(n_speakers=32, k=10, L=32, seed=0))

rng = np.random.default_rng(0)
queries = rng.choice(len(store), 50, replace=False)

###############################################################################
# Candidate fraction and top-1 agreement with linear search, per L.
# Queries are stored utterances, so top-1 is the query itself; we compare
# the second hit instead.

for L in (1, 4, 16, 32):
    index = build(store, tables[:L])
    cands, agree = [], 0
    for pos in queries:
        q = store.vectors[pos]
        hashed = index.query(q, top_n=2)
        exact = linear_search(store, q, top_n=2)
        cands.append(hashed.candidates_examined / len(store))
        agree += hashed.ranked[1:2] == exact.ranked[1:2]
    print(f"L={L:2d}  mean candidate fraction {np.mean(cands):.3f}  second-hit agreement {agree}/{len(queries)}")

###############################################################################
# Bucket occupancy of one table.

sizes = build(store, tables[:1]).bucket_sizes()[0]
print(f"{len(sizes)} occupied buckets of {2 ** 10}; largest {sizes[:5]}")
