"""Sparse and dense retrieval over the same toy corpus.

Shows BM25 with Hangul jamo decomposition (queries in full syllables match
documents at the jamo level), TF-IDF cosine scoring, and exhaustive
cosine kNN with the deterministic hash embedder.
"""

from graphir import (
    Bm25Params,
    DeterministicProvider,
    TokenizerConfig,
    bm25_search,
    build_index,
    build_vector_index,
    embed,
    knn_search,
    tfidf_search,
    tokenize,
)
from graphir.corpus import Corpus, Document

TEXTS = {
    "k1": "소방 설비 설치 기준",
    "k2": "건축물 허가 절차",
    "k3": "소방 점검 일정 및 기준",
    "e1": "sprinkler head spacing requirements",
    "e2": "fire hydrant inspection schedule",
}

corpus = Corpus(
    {i: Document(id=i, title="demo", path=("demo", i), text=t) for i, t in TEXTS.items()}
)

jamo_cfg = TokenizerConfig(lowercase=True, jamo_decompose=True)
print("jamo tokens for '소방 기준':", tokenize("소방 기준", jamo_cfg))

index = build_index(corpus, jamo_cfg)
query = tokenize("소방 기준", jamo_cfg)
print("\nBM25 (k1=1.2, b=0.75):")
for doc_id, score in bm25_search(index, query, Bm25Params(), top_n=3):
    print(f"  {doc_id}  {score:.4f}  {TEXTS[doc_id]}")

print("\nTF-IDF cosine:")
for doc_id, score in tfidf_search(index, query, top_n=3):
    print(f"  {doc_id}  {score:.4f}  {TEXTS[doc_id]}")

provider = DeterministicProvider(seed=13, dim=64)
vindex = build_vector_index(corpus, provider)
q_vec = embed(provider, ["fire hydrant inspection"])[0]
print("\ncosine kNN:")
for doc_id, score in knn_search(vindex, q_vec, top_n=3):
    print(f"  {doc_id}  {score:.4f}  {TEXTS[doc_id]}")
