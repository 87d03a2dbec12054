"""
Scatter matrices, LDA and per-table projections
===============================================

LDA finds directions that spread speaker means apart relative to the
spread inside each speaker. RSS fits one LDA per hash table on a random
subset of training speakers, so the tables differ while each stays
discriminative.
"""

import numpy as np

from rsshash import (
    RssConfig,
    gen_lsh,
    gen_rs_lda,
    gen_rss,
    lda,
    length_normalize,
    principal_angles,
    scatter_matrices,
    synthesize,
)

store = length_normalize(synthesize(60, 8, 16, seed=1, anisotropy=100.0))
X, y = store.vectors, store.labels()

###############################################################################
# Between plus within scatter equals total scatter.

sc = scatter_matrices(X, y)
Xc = X - X.mean(axis=0)
print("max |S_b + S_w - S_t|:", np.abs(sc.between + sc.within - Xc.T @ Xc).max())

###############################################################################
# LDA eigenvalues are the between/within variance ratios of each direction.
# The hand-written Jacobi solver agrees with LAPACK.

t = lda(X, 4, labels=y)
print("LDA eigenvalues:", np.round(t.eigenvalues, 2))
tj = lda(X, 4, labels=y, method="jacobi")
print("largest angle LAPACK vs Jacobi subspace:", principal_angles(t.matrix, tj.matrix).max())

###############################################################################
# Three generators, 4 tables of 6 hyperplanes each. RSS tables come from
# different speaker subsets, so their subspaces differ from one another.

lsh = gen_lsh(16, 6, 4, seed=0)
rss = gen_rss(store, RssConfig(n_speakers=16, k=6, L=4, seed=0))
rsl = gen_rs_lda(store, m_eigen=10, k=6, L=4, seed=0)
for name, tables in (("lsh", lsh), ("rss", rss), ("rs-lda", rsl)):
    angles = [principal_angles(a.matrix, b.matrix).mean() for i, a in enumerate(tables) for b in tables[i + 1:]]
    print(f"{name:7s} mean angle between tables {np.mean(angles):.3f} rad")

###############################################################################
# RSS biases centre every hyperplane on the training data, so each bit
# splits the training set roughly in half.

bits = (X @ rss[0].matrix + rss[0].bias) >= 0
print("fraction of ones per bit:", np.round(bits.mean(axis=0), 2))
