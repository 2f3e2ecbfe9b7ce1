"""Rankings, reciprocal-rank fusion, and Rocchio pseudo-relevance feedback.

A Ranking is the common currency between retrievers, fusers, and rerankers:
an ordered (doc id, score) list for one query, scores non-increasing, ids
unique. Ties are always broken by ascending doc id so that every ranking
produced anywhere in the package is reproducible.

Fused scores sum 1 / (k + rank) per input ranking, optionally weighted. A
document missing from an input ranking contributes nothing for that input:
the sum runs over the models that actually ranked it. Rocchio feedback moves
the query embedding toward the centroid of the top retrieved documents
(pseudo-relevant set); no negative term, since no non-relevant labels exist
at inference time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import EmbeddingError, RankingError


@dataclass(frozen=True)
class Ranking:
    """Ordered (doc id, score) pairs for one query. Rank of a doc is its
    1-based position."""

    query_id: str
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "entries", tuple((str(d), float(s)) for d, s in self.entries)
        )
        seen = set()
        prev = math.inf
        for doc_id, score in self.entries:
            if doc_id in seen:
                raise RankingError(f"duplicate doc id {doc_id!r} in ranking")
            seen.add(doc_id)
            if score > prev:
                raise RankingError("ranking scores must be non-increasing")
            prev = score

    @classmethod
    def from_scores(cls, query_id: str, scores: Mapping[str, float]) -> "Ranking":
        """Sort descending by score, ascending by id on ties."""
        ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls(query_id, tuple(ordered))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def ids(self) -> list[str]:
        return [d for d, _ in self.entries]

    def scores(self) -> dict[str, float]:
        return {d: s for d, s in self.entries}

    def ranks(self) -> dict[str, int]:
        return {d: i + 1 for i, (d, _) in enumerate(self.entries)}

    def top(self, n: int) -> "Ranking":
        return Ranking(self.query_id, self.entries[:n])


@dataclass(frozen=True)
class RrfConfig:
    k: float = 5.0

    def __post_init__(self):
        if self.k <= 0:
            raise RankingError(f"rrf smoothing constant must be > 0, got {self.k}")


@dataclass(frozen=True)
class WrrfConfig:
    k: float = 5.0
    weights: tuple[float, ...] = (0.1, 0.9)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.k <= 0:
            raise RankingError(f"rrf smoothing constant must be > 0, got {self.k}")
        if any(w < 0 for w in self.weights):
            raise RankingError("weights must be non-negative")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise RankingError(f"weights must sum to 1, got {sum(self.weights)}")


@dataclass(frozen=True)
class RocchioConfig:
    alpha: float = 1.0
    beta: float = 0.75
    feedback_k: int = 5

    def __post_init__(self):
        if self.feedback_k < 1:
            raise RankingError(f"feedback_k must be >= 1, got {self.feedback_k}")


def _check_same_query(rankings: Sequence[Ranking]) -> str:
    if len(rankings) < 2:
        raise RankingError("fusion needs at least two rankings")
    qids = {r.query_id for r in rankings}
    if len(qids) != 1:
        raise RankingError(f"rankings cover different queries: {sorted(qids)}")
    return rankings[0].query_id


def rrf_fuse(rankings: Sequence[Ranking], cfg: RrfConfig = RrfConfig()) -> Ranking:
    """Reciprocal-rank fusion over the union of the input candidate sets."""
    qid = _check_same_query(rankings)
    fused: dict[str, float] = {}
    for ranking in rankings:
        for rank, (doc_id, _) in enumerate(ranking.entries, start=1):
            fused[doc_id] = fused.get(doc_id, 0.0) + 1.0 / (cfg.k + rank)
    return Ranking.from_scores(qid, fused)


def wrrf_fuse(rankings: Sequence[Ranking], cfg: WrrfConfig = WrrfConfig()) -> Ranking:
    """Weighted reciprocal-rank fusion; one weight per input ranking."""
    qid = _check_same_query(rankings)
    if len(cfg.weights) != len(rankings):
        raise RankingError(
            f"{len(cfg.weights)} weights for {len(rankings)} rankings"
        )
    fused: dict[str, float] = {}
    for weight, ranking in zip(cfg.weights, rankings):
        for rank, (doc_id, _) in enumerate(ranking.entries, start=1):
            fused[doc_id] = fused.get(doc_id, 0.0) + weight / (cfg.k + rank)
    return Ranking.from_scores(qid, fused)


def rocchio_expand(
    query_vec: np.ndarray,
    initial: Ranking,
    index,
    cfg: RocchioConfig = RocchioConfig(),
) -> np.ndarray:
    """Return normalize(alpha * query + beta * centroid(top feedback docs)).

    ``index`` needs a ``vector(doc_id)`` lookup (a dense VectorIndex). The
    result is re-normalized because downstream cosine search assumes unit
    queries.
    """
    if len(initial) == 0:
        raise RankingError("rocchio needs a non-empty initial ranking")
    feedback_ids = initial.ids()[: cfg.feedback_k]
    vectors = []
    for doc_id in feedback_ids:
        try:
            vectors.append(index.vector(doc_id))
        except KeyError:
            raise EmbeddingError(f"no vector for feedback document {doc_id!r}")
    centroid = np.mean(np.stack(vectors), axis=0)
    combined = cfg.alpha * np.asarray(query_vec, dtype=np.float64) + cfg.beta * centroid
    norm = float(np.linalg.norm(combined))
    if norm == 0.0 or not math.isfinite(norm):
        raise EmbeddingError("expanded query vector has zero or non-finite norm")
    return combined / norm
