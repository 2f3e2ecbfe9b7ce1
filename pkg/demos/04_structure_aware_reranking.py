"""The planted retrieval gap, and how citation-guided reranking closes it.

The synthetic suite plants queries whose gold documents share vocabulary with
nothing (dense retrieval misses them) but are cited by a lexically matching
entry document. Seed votes propagate along explicit edges with dual
log-degree penalties; residual fusion lifts the gold documents into the top
ranks without disturbing confident hits. Compare the one-hop hit rates of
the explicit graph and a cosine-kNN graph to see why the structure helps.
"""

from graphir import (
    DeterministicProvider,
    SarConfig,
    build_graph,
    build_knn_graph,
    build_vector_index,
    cosine_to_unit,
    embed,
    knn_search,
    one_hop_hit_rate,
    recall_at_k,
    sar_rerank,
)
from graphir.synth import planted_gap_suite

corpus, queries = planted_gap_suite(n_docs=300, n_queries=30, seed=7)
graph = build_graph(corpus)
provider = DeterministicProvider(seed=13, dim=64)
index = build_vector_index(corpus, provider)

cfg = SarConfig(seed_count=10, beta=0.5)
dense_recall, reranked_recall, probes = [], [], []
for query in queries:
    q_vec = embed(provider, [query.text])[0]
    dense = knn_search(index, q_vec, top_n=len(corpus), query_id=query.qid)
    reranked = sar_rerank(cosine_to_unit(dense), graph, cfg)
    dense_recall.append(recall_at_k(dense, set(query.gold), 10))
    reranked_recall.append(recall_at_k(reranked, set(query.gold), 10))
    probes.append((set(dense.ids()[:10]), set(query.gold)))

n = len(queries)
print(f"dense recall@10:          {sum(dense_recall) / n:.3f}")
print(f"dense + rerank recall@10: {sum(reranked_recall) / n:.3f}  (beta=0.5, 10 seeds)")

knn_graph = build_knn_graph(index, k=5)
print(f"\none-hop hit rate, explicit graph:  {one_hop_hit_rate(probes, graph):.3f}")
print(f"one-hop hit rate, cosine kNN (k=5): {one_hop_hit_rate(probes, knn_graph):.3f}")

# walk one query end to end
query = queries[0]
q_vec = embed(provider, [query.text])[0]
dense = knn_search(index, q_vec, top_n=len(corpus), query_id=query.qid)
reranked = sar_rerank(cosine_to_unit(dense), graph, cfg)
gold = next(iter(query.gold))
print(f"\nquery {query.qid}: gold {gold} sits at dense rank {dense.ranks()[gold]}, "
      f"reranked to {reranked.ranks()[gold]}")
