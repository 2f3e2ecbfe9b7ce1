"""Embeddings, exhaustive cosine search, and similarity-kNN graphs.

Vectors are float64 numpy arrays, L2-normalized at ingestion, so similarity
is a plain dot product. Search is an exact full scan: at corpus scales of a
few thousand units this is fast, and it keeps approximate-recall effects out
of any reranking comparison.

Three provider flavors produce vectors: a precomputed id -> vector file, an
external process speaking the NDJSON stream protocol, and a deterministic
seeded hashing embedder for tests and offline runs.

Deterministic embedder recipe (fixed so independent implementations can be
compared bit for bit):

1. grams = all character trigrams of the text, i.e. text[i:i+3] for
   i in 0..max(1, len(text) - 2) - 1 (short texts yield one gram).
2. For each gram, h = FNV-1a 64-bit over its UTF-8 bytes, with the basis
   XORed with (seed * 0x9E3779B97F4A7C15 mod 2^64).
3. Add +1.0 to bucket (h mod dim) if the top bit of h is 0, else -1.0.
4. Divide by the L2 norm (sqrt of the ordered sum of squares). If the
   accumulator is all zeros, set bucket 0 to 1.0 first.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus
from .errors import EmbeddingError, GraphirError, TransportError
from .fusion import Ranking
from .graph import CitationGraph
from .protocol import StreamProcessClient

SIMILARITY_KIND = "similarity"

_FNV_BASIS = 14695981039346656037
_FNV_PRIME = 1099511628211
_SEED_MIX = 0x9E3779B97F4A7C15
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes, seed: int = 0) -> int:
    h = (_FNV_BASIS ^ ((seed * _SEED_MIX) & _MASK64)) & _MASK64
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def det_embed(text: str, seed: int, dim: int) -> list[float]:
    """The documented hashing recipe, in plain Python floats."""
    if dim < 1:
        raise EmbeddingError(f"dim must be >= 1, got {dim}")
    acc = [0.0] * dim
    for i in range(max(1, len(text) - 2)):
        h = fnv1a64(text[i : i + 3].encode("utf-8"), seed)
        sign = 1.0 if (h >> 63) == 0 else -1.0
        acc[h % dim] += sign
    norm = math.sqrt(sum(x * x for x in acc))
    if norm == 0.0:
        acc[0] = 1.0
        norm = 1.0
    return [x / norm for x in acc]


def normalize(vec) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    if arr.ndim != 1:
        raise EmbeddingError(f"expected a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise EmbeddingError("vector has non-finite entries")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise EmbeddingError("cannot normalize a zero vector")
    return arr / norm


def cosine_sim(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise EmbeddingError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise EmbeddingError("cosine undefined for zero vectors")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


class DeterministicProvider:
    """Seeded hashing embedder; a pure function of (text, seed, dim)."""

    def __init__(self, seed: int = 0, dim: int = 64):
        self.seed = seed
        self.dim = dim
        self.name = f"deterministic-fnv1a64(seed={seed})"

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [np.asarray(det_embed(t, self.seed, self.dim)) for t in texts]

    def close(self) -> None:
        pass


class PrecomputedProvider:
    """Serves vectors from an id -> vector mapping (typically a vectors file).

    Only keys present in the mapping can be embedded; use it for corpora
    whose vectors were computed offline.
    """

    def __init__(self, vectors: Mapping[str, np.ndarray], name: str = "precomputed"):
        if not vectors:
            raise EmbeddingError("precomputed provider needs at least one vector")
        self._vectors = {k: normalize(v) for k, v in vectors.items()}
        dims = {v.shape[0] for v in self._vectors.values()}
        if len(dims) != 1:
            raise EmbeddingError(f"mixed dimensions in precomputed vectors: {sorted(dims)}")
        self.dim = dims.pop()
        self.name = name

    @classmethod
    def from_file(cls, path: str | Path) -> "PrecomputedProvider":
        return cls(load_vectors_file(path), name=f"precomputed:{path}")

    def embed(self, keys: Sequence[str]) -> list[np.ndarray]:
        out = []
        for key in keys:
            if key not in self._vectors:
                raise EmbeddingError(f"no precomputed vector for {key!r}")
            out.append(self._vectors[key])
        return out

    def close(self) -> None:
        pass


class ExternalProvider:
    """Embedding provider backed by a stream-protocol child process."""

    def __init__(self, cmd: str | Sequence[str], timeout: float = 60.0):
        self._client = StreamProcessClient(cmd, timeout=timeout)
        info = self._client.request({"op": "info"})
        try:
            self.dim = int(info["dim"])
            self.name = str(info["name"])
        except (KeyError, TypeError, ValueError):
            raise TransportError(f"bad info response: {info}")

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        texts = list(texts)
        if not texts:
            return []
        request_id = self._client.next_id()
        response = self._client.request(
            {"op": "embed", "id": request_id, "texts": texts}, request_index=request_id
        )
        if response.get("id") != request_id:
            raise TransportError(
                f"response id {response.get('id')} does not echo request", request_id
            )
        vectors = response.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise TransportError("embed response has wrong vector count", request_id)
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dim,):
                raise EmbeddingError(
                    f"provider returned dim {arr.shape} but declared {self.dim}"
                )
            out.append(arr)
        return out

    def close(self) -> None:
        self._client.close()


def embed(provider, texts: Sequence[str]) -> list[np.ndarray]:
    """Embed texts through any provider; unit-norm vectors, input order."""
    texts = list(texts)
    if not texts:
        return []
    vectors = provider.embed(texts)
    if len(vectors) != len(texts):
        raise EmbeddingError(
            f"provider returned {len(vectors)} vectors for {len(texts)} texts"
        )
    return [normalize(v) for v in vectors]


class VectorIndex:
    """Exhaustive cosine index: unit vectors stacked in ascending id order."""

    def __init__(self, vectors: Mapping[str, Iterable[float]]):
        if not vectors:
            raise EmbeddingError("vector index needs at least one vector")
        self.ids: list[str] = sorted(vectors)
        rows = [normalize(vectors[doc_id]) for doc_id in self.ids]
        dims = {r.shape[0] for r in rows}
        if len(dims) != 1:
            raise EmbeddingError(f"mixed vector dimensions: {sorted(dims)}")
        self.dim: int = dims.pop()
        self.matrix: np.ndarray = np.stack(rows)
        self._row: dict[str, int] = {doc_id: i for i, doc_id in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._row

    def vector(self, doc_id: str) -> np.ndarray:
        return self.matrix[self._row[doc_id]]

    def score_all(self, query_vec) -> np.ndarray:
        q = normalize(query_vec)
        if q.shape[0] != self.dim:
            raise EmbeddingError(f"query dim {q.shape[0]} != index dim {self.dim}")
        return self.matrix @ q


def build_vector_index(corpus: Corpus, provider) -> VectorIndex:
    ids = corpus.ids()
    vectors = embed(provider, [corpus[d].text for d in ids])
    return VectorIndex(dict(zip(ids, vectors)))


def knn_search(idx: VectorIndex, query_vec, top_n: int = 10, query_id: str = "") -> Ranking:
    """Exact top-n by cosine; equal scores ordered by ascending doc id."""
    if top_n < 1:
        raise GraphirError(f"top_n must be >= 1, got {top_n}")
    scores = idx.score_all(query_vec)
    # ids are sorted ascending, so a stable sort realizes the tie rule
    order = np.argsort(-scores, kind="stable")[:top_n]
    return Ranking(query_id, tuple((idx.ids[i], float(scores[i])) for i in order))


def build_knn_graph(idx: VectorIndex, k: int) -> CitationGraph:
    """Directed graph with an edge from each doc to its k cosine-nearest others."""
    if k < 1:
        raise GraphirError(f"k must be >= 1, got {k}")
    if k >= len(idx):
        raise GraphirError(f"k={k} must be smaller than the index size {len(idx)}")
    sims = idx.matrix @ idx.matrix.T
    edges = []
    for row, doc_id in enumerate(idx.ids):
        scores = sims[row].copy()
        scores[row] = -np.inf  # no self-loop
        order = np.argsort(-scores, kind="stable")[:k]
        edges.extend((doc_id, idx.ids[col], SIMILARITY_KIND) for col in order)
    return CitationGraph(idx.ids, edges)


def save_vectors_file(vectors: Mapping[str, np.ndarray], path: str | Path) -> None:
    """Write the precomputed-vectors format: {"id": str, "vec": [...]} lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id in sorted(vectors):
            vec = [float(x) for x in vectors[doc_id]]
            fh.write(json.dumps({"id": doc_id, "vec": vec}) + "\n")


def load_vectors_file(path: str | Path) -> dict[str, np.ndarray]:
    vectors: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            doc_id = str(rec["id"])
            if doc_id in vectors:
                raise EmbeddingError(f"duplicate vector id {doc_id!r} (line {lineno})")
            vectors[doc_id] = np.asarray(rec["vec"], dtype=np.float64)
    if not vectors:
        raise EmbeddingError(f"{path}: no vectors found")
    return vectors
