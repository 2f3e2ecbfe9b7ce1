"""Rank fusion and pseudo-relevance feedback.

Fuses a sparse and a dense ranking with RRF and weighted RRF (the production
configuration weights sparse 0.1 / dense 0.9 with smoothing k=5), then shows
Rocchio feedback pulling a query toward the centroid of its top results.
"""

import numpy as np

from graphir import (
    DeterministicProvider,
    Ranking,
    RocchioConfig,
    RrfConfig,
    VectorIndex,
    WrrfConfig,
    knn_search,
    rocchio_expand,
    rrf_fuse,
    wrrf_fuse,
)

sparse = Ranking("q", (("statute-12", 8.1), ("statute-40", 6.3), ("statute-07", 2.2)))
dense = Ranking("q", (("statute-40", 0.91), ("statute-99", 0.83), ("statute-12", 0.80)))

print("RRF (k=5):")
for doc_id, score in rrf_fuse([sparse, dense], RrfConfig(k=5.0)):
    print(f"  {doc_id}  {score:.4f}")

print("\nwRRF (k=5, weights 0.1 sparse / 0.9 dense):")
for doc_id, score in wrrf_fuse([sparse, dense], WrrfConfig(k=5.0, weights=(0.1, 0.9))):
    print(f"  {doc_id}  {score:.4f}")

# Rocchio: the expanded query moves toward the feedback centroid
rng = np.random.default_rng(0)
provider = DeterministicProvider(seed=3, dim=32)
vectors = {f"d{i}": provider.embed([f"document body {i} {'fire ' * (i % 3)}"])[0] for i in range(12)}
index = VectorIndex(vectors)

q_vec = provider.embed(["fire document"])[0]
initial = knn_search(index, q_vec, top_n=12, query_id="q")
expanded = rocchio_expand(q_vec, initial, index, RocchioConfig(alpha=1.0, beta=0.75, feedback_k=3))

print("\ntop-3 before feedback:", initial.ids()[:3])
print("top-3 after feedback: ", knn_search(index, expanded, top_n=12, query_id="q").ids()[:3])
print("expanded query norm:  ", float(np.linalg.norm(expanded)))
