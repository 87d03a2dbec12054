"""Fast speaker search: multi-table sign-random-projection hashing with
Gaussian, random-sampling LDA and random speaker-variability subspace
(RSS) hyperplanes, plus retrieval and identification evaluation."""

__version__ = "0.1.0"

from .store import (
    Embedding,
    EmbeddingStore,
    SplitSpec,
    StoreError,
    centroid_store,
    ingest,
    length_normalize,
    serialize,
    speaker_centroid,
    speaker_split,
    synthesize,
)
from .linalg import LdaTransform, ScatterPair, lda, pca, principal_angles, scatter_matrices, symmetric_eig
from .projections import ProjectionMatrix, RssConfig, gen_lsh, gen_rs_lda, gen_rss, generate
from .index import (
    HashIndex,
    HashKey,
    LinearIndex,
    QueryResult,
    build,
    cosine_from_hamming,
    hamming,
    hash_vector,
    linear_search,
)
from .evaluation import (
    EvalReport,
    HashBackend,
    LinearBackend,
    Trial,
    eer,
    fastest_at_accuracy,
    hamming_ratio,
    identification_task,
    openset_identification,
    reports_to_csv,
    retrieval_task,
    sweep,
)
