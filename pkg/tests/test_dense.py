import math
import random

import numpy as np
import pytest

from graphir.dense import (
    SIMILARITY_KIND,
    DeterministicProvider,
    PrecomputedProvider,
    VectorIndex,
    build_knn_graph,
    build_vector_index,
    cosine_sim,
    det_embed,
    embed,
    knn_search,
    load_vectors_file,
    normalize,
    save_vectors_file,
)
from graphir.errors import EmbeddingError, GraphirError

from conftest import make_corpus


def test_deterministic_provider_is_pure():
    provider = DeterministicProvider(seed=11, dim=32)
    a, b = embed(provider, ["fire valve spacing", "fire valve spacing"])
    assert np.array_equal(a, b)


def test_different_seeds_differ():
    v1 = det_embed("same text", seed=1, dim=32)
    v2 = det_embed("same text", seed=2, dim=32)
    assert v1 != v2


def test_embed_empty_list():
    assert embed(DeterministicProvider(), []) == []


def test_embedding_norms_are_unit():
    provider = DeterministicProvider(seed=3, dim=16)
    for vec in embed(provider, ["a", "ab", "abc", "longer text here", ""]):
        assert abs(float(np.linalg.norm(vec)) - 1.0) <= 1e-6


def test_det_embed_short_and_empty_texts():
    assert len(det_embed("", 0, 8)) == 8
    assert math.isclose(sum(x * x for x in det_embed("ab", 0, 8)), 1.0, abs_tol=1e-12)


def test_cosine_self_and_orthogonal():
    v = normalize([1.0, 2.0, 3.0])
    assert cosine_sim(v, v) == pytest.approx(1.0, abs=1e-6)
    assert cosine_sim([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0, abs=1e-6)


def test_cosine_symmetric_exactly():
    rng = np.random.default_rng(5)
    a = rng.standard_normal(24)
    b = rng.standard_normal(24)
    assert cosine_sim(a, b) == cosine_sim(b, a)


def test_cosine_dim_mismatch():
    with pytest.raises(EmbeddingError):
        cosine_sim([1.0, 0.0], [1.0, 0.0, 0.0])


def test_knn_exact_match_ranks_first():
    corpus = make_corpus({"a": "sprinkler head spacing", "b": "egress width", "c": "alarm wiring"})
    provider = DeterministicProvider(seed=2, dim=48)
    idx = build_vector_index(corpus, provider)
    ranking = knn_search(idx, idx.vector("b"), top_n=3, query_id="q")
    assert ranking.ids()[0] == "b"
    assert ranking.entries[0][1] == pytest.approx(1.0, abs=1e-9)


def test_knn_matches_exhaustive_oracle():
    rng = np.random.default_rng(9)
    vectors = {f"d{i}": rng.standard_normal(12) for i in range(5)}
    idx = VectorIndex(vectors)
    q = rng.standard_normal(12)
    ranking = knn_search(idx, q, top_n=5)

    qn = q / np.linalg.norm(q)
    sims = {d: float(np.dot(normalize(v), qn)) for d, v in vectors.items()}
    expected = sorted(sims, key=lambda d: (-sims[d], d))
    assert ranking.ids() == expected
    for doc_id, score in ranking:
        assert score == pytest.approx(sims[doc_id], abs=1e-12)


def test_knn_top_n_larger_than_index():
    idx = VectorIndex({"a": [1.0, 0.0], "b": [0.0, 1.0]})
    assert len(knn_search(idx, [1.0, 0.0], top_n=10)) == 2


def test_knn_insertion_order_irrelevant():
    rng = np.random.default_rng(1)
    vectors = {f"d{i}": rng.standard_normal(8) for i in range(20)}
    shuffled = dict(sorted(vectors.items(), key=lambda _: rng.random()))
    q = rng.standard_normal(8)
    r1 = knn_search(VectorIndex(vectors), q, top_n=20)
    r2 = knn_search(VectorIndex(shuffled), q, top_n=20)
    assert r1.entries == r2.entries


def test_knn_scores_non_increasing():
    rng = np.random.default_rng(2)
    idx = VectorIndex({f"d{i}": rng.standard_normal(6) for i in range(15)})
    ranking = knn_search(idx, rng.standard_normal(6), top_n=15)
    scores = [s for _, s in ranking]
    assert scores == sorted(scores, reverse=True)


def test_knn_dim_mismatch():
    idx = VectorIndex({"a": [1.0, 0.0]})
    with pytest.raises(EmbeddingError):
        knn_search(idx, [1.0, 0.0, 0.0], top_n=1)


def test_knn_graph_uniform_out_degree():
    rng = np.random.default_rng(4)
    idx = VectorIndex({f"d{i}": rng.standard_normal(10) for i in range(12)})
    g = build_knn_graph(idx, k=3)
    assert all(g.degree(n, "out") == 3 for n in g.nodes)
    assert sum(g.out_degree.values()) == 3 * len(g.nodes)
    assert all(kind == SIMILARITY_KIND for _, _, kind in g.edges)


def test_knn_graph_matches_pairwise_cosine_table():
    # three planar directions: 0, 15 and 40 degrees
    def at(deg):
        r = math.radians(deg)
        return [math.cos(r), math.sin(r)]

    idx = VectorIndex({"a": at(0), "b": at(15), "c": at(40)})
    g = build_knn_graph(idx, k=1)
    # brute-force table: nearest(a)=b, nearest(b)=a (15 < 25), nearest(c)=b
    assert ("a", "b", SIMILARITY_KIND) in g.edges
    assert ("b", "a", SIMILARITY_KIND) in g.edges
    assert ("c", "b", SIMILARITY_KIND) in g.edges


def test_knn_graph_tie_rule_on_duplicates():
    idx = VectorIndex({"a": [1.0, 0.0], "b": [1.0, 0.0], "c": [1.0, 0.0]})
    g = build_knn_graph(idx, k=1)
    assert ("b", "a", SIMILARITY_KIND) in g.edges  # ascending id wins the tie
    assert ("a", "b", SIMILARITY_KIND) in g.edges


def test_knn_graph_k_too_large():
    idx = VectorIndex({"a": [1.0, 0.0], "b": [0.0, 1.0]})
    with pytest.raises(GraphirError):
        build_knn_graph(idx, k=2)


def test_vectors_file_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    vectors = {f"d{i}": normalize(rng.standard_normal(5)) for i in range(4)}
    path = tmp_path / "vecs.jsonl"
    save_vectors_file(vectors, path)
    loaded = load_vectors_file(path)
    assert set(loaded) == set(vectors)
    for doc_id in vectors:
        assert np.array_equal(loaded[doc_id], vectors[doc_id])


def test_vectors_file_duplicate_id(tmp_path):
    path = tmp_path / "dup.jsonl"
    path.write_text('{"id": "a", "vec": [1.0]}\n{"id": "a", "vec": [1.0]}\n')
    with pytest.raises(EmbeddingError, match="duplicate"):
        load_vectors_file(path)


def test_precomputed_provider_lookup_and_errors():
    provider = PrecomputedProvider({"a": np.array([1.0, 0.0]), "b": np.array([0.0, 2.0])})
    (vec,) = provider.embed(["b"])
    assert vec == pytest.approx([0.0, 1.0])
    with pytest.raises(EmbeddingError, match="ghost"):
        provider.embed(["ghost"])
    with pytest.raises(EmbeddingError, match="mixed"):
        PrecomputedProvider({"a": np.array([1.0, 0.0]), "b": np.array([1.0, 0.0, 0.0])})


def test_vector_index_rejects_mixed_dims_and_zero_vectors():
    with pytest.raises(EmbeddingError):
        VectorIndex({"a": [1.0, 0.0], "b": [1.0, 0.0, 0.0]})
    with pytest.raises(EmbeddingError):
        VectorIndex({"a": [0.0, 0.0]})


def test_overlapping_texts_are_more_similar():
    provider = DeterministicProvider(seed=6, dim=96)
    a, b, c = embed(
        provider,
        [
            "the corridor width must exceed the stated minimum",
            "the corridor width must exceed the minimum stated",
            "unrelated gibberish qqq zzz www",
        ],
    )
    assert cosine_sim(a, b) > cosine_sim(a, c)


def test_seeded_randomness_property():
    rng = random.Random(0)
    texts = ["".join(rng.choices("abcdefgh ", k=30)) for _ in range(10)]
    p1 = DeterministicProvider(seed=42, dim=64)
    p2 = DeterministicProvider(seed=42, dim=64)
    for t in texts:
        assert det_embed(t, 42, 64) == det_embed(t, 42, 64)
        assert np.array_equal(p1.embed([t])[0], p2.embed([t])[0])
