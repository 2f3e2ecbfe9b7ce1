"""Tokenization and sparse retrieval (Okapi BM25, ltc TF-IDF).

Hangul-aware matching works by decomposing each precomposed syllable into its
conjoining jamo using the Unicode arithmetic (syllable code point minus U+AC00
factored into lead/vowel/trail indexes), so queries and documents written in
full syllables match at the jamo level. Decomposition rewrites characters in
place inside a token and never changes token boundaries.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import Corpus
from .errors import GraphirError
from .fusion import Ranking

_SYLLABLE_BASE = 0xAC00
_SYLLABLE_COUNT = 11172  # 19 leads * 21 vowels * 28 trails
_LEAD_BASE = 0x1100
_VOWEL_BASE = 0x1161
_TRAIL_BASE = 0x11A7

_INDEX_MAGIC = "graphir.lexical-index"
_INDEX_VERSION = 1


def decompose_syllable(ch: str) -> str:
    """Split one Hangul syllable into conjoining jamo; other chars pass through.

    Matches Unicode NFD: lead and vowel always present, trail only when the
    syllable has one.
    """
    offset = ord(ch) - _SYLLABLE_BASE
    if not 0 <= offset < _SYLLABLE_COUNT:
        return ch
    lead, rem = divmod(offset, 588)  # 21 * 28
    vowel, trail = divmod(rem, 28)
    out = chr(_LEAD_BASE + lead) + chr(_VOWEL_BASE + vowel)
    if trail:
        out += chr(_TRAIL_BASE + trail)
    return out


def decompose_text(text: str) -> str:
    return "".join(decompose_syllable(ch) for ch in text)


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    jamo_decompose: bool = False
    token_pattern: str = r"\w+"

    def to_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "jamo_decompose": self.jamo_decompose,
            "token_pattern": self.token_pattern,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TokenizerConfig":
        return cls(
            lowercase=bool(data.get("lowercase", True)),
            jamo_decompose=bool(data.get("jamo_decompose", False)),
            token_pattern=str(data.get("token_pattern", r"\w+")),
        )


def tokenize(text: str, cfg: TokenizerConfig = TokenizerConfig()) -> list[str]:
    """Lowercase (if configured), extract tokens, then jamo-decompose each."""
    if cfg.lowercase:
        text = text.lower()
    tokens = re.findall(cfg.token_pattern, text)
    if cfg.jamo_decompose:
        tokens = [decompose_text(t) for t in tokens]
    return tokens


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 <= 0:
            raise GraphirError(f"k1 must be > 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise GraphirError(f"b must be in [0, 1], got {self.b}")


@dataclass
class InvertedIndex:
    """Term -> (doc id, term frequency) postings with document lengths.

    Postings lists are sorted by doc id; the tokenizer that produced the
    index travels with it so queries tokenize the same way.
    """

    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)

    @property
    def doc_count(self) -> int:
        return len(self.doc_lengths)

    @property
    def avg_doc_length(self) -> float:
        if not self.doc_lengths:
            return 0.0
        return sum(self.doc_lengths.values()) / len(self.doc_lengths)

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))


def build_index(corpus: Corpus, cfg: TokenizerConfig = TokenizerConfig()) -> InvertedIndex:
    """Tokenize every document and build the inverted index."""
    if len(corpus) == 0:
        raise GraphirError("cannot index an empty corpus")
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for doc_id, doc in corpus.documents.items():  # ascending id order
        tokens = tokenize(doc.text, cfg)
        doc_lengths[doc_id] = len(tokens)
        for term, tf in sorted(Counter(tokens).items()):
            postings.setdefault(term, []).append((doc_id, tf))
    return InvertedIndex(postings=postings, doc_lengths=doc_lengths, tokenizer=cfg)


def bm25_idf(doc_count: int, df: int) -> float:
    # +1 inside the log keeps scores non-negative even when df > N/2.
    return math.log((doc_count - df + 0.5) / (df + 0.5) + 1.0)


def bm25_search(
    idx: InvertedIndex,
    query_terms: Sequence[str],
    params: Bm25Params = Bm25Params(),
    top_n: int = 10,
    query_id: str = "",
) -> Ranking:
    """Okapi BM25 over the postings. Repeated query terms contribute per
    occurrence, which is the usual sum-over-query-terms formulation.
    """
    if top_n < 1:
        raise GraphirError(f"top_n must be >= 1, got {top_n}")
    n = idx.doc_count
    avgdl = idx.avg_doc_length
    scores: dict[str, float] = {}
    for term in query_terms:
        plist = idx.postings.get(term)
        if not plist:
            continue
        idf = bm25_idf(n, len(plist))
        for doc_id, tf in plist:
            dl = idx.doc_lengths[doc_id]
            denom = tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl)
            scores[doc_id] = scores.get(doc_id, 0.0) + idf * tf * (params.k1 + 1.0) / denom
    return Ranking.from_scores(query_id, scores).top(top_n)


def _tfidf_doc_weights(idx: InvertedIndex) -> tuple[dict[str, dict[str, float]], dict[str, float]]:
    """Per-doc term weights (1 + ln tf) * ln(N/df) and per-doc L2 norms."""
    n = idx.doc_count
    weights: dict[str, dict[str, float]] = {d: {} for d in idx.doc_lengths}
    for term, plist in idx.postings.items():
        idf = math.log(n / len(plist))
        if idf == 0.0:
            # term in every document: weight 0, but keep it as a match
            for doc_id, _ in plist:
                weights[doc_id][term] = 0.0
            continue
        for doc_id, tf in plist:
            weights[doc_id][term] = (1.0 + math.log(tf)) * idf
    norms = {
        d: math.sqrt(sum(w * w for w in ws.values())) for d, ws in weights.items()
    }
    return weights, norms


def tfidf_search(
    idx: InvertedIndex,
    query_terms: Sequence[str],
    top_n: int = 10,
    query_id: str = "",
) -> Ranking:
    """Cosine similarity between ltc-weighted query and document vectors.

    Candidates are documents sharing at least one query term. Degenerate
    zero-norm vectors (every term appearing in every document) score 0.
    """
    if top_n < 1:
        raise GraphirError(f"top_n must be >= 1, got {top_n}")
    n = idx.doc_count
    q_weights: dict[str, float] = {}
    for term, qtf in Counter(query_terms).items():
        df = idx.df(term)
        if df == 0:
            continue
        q_weights[term] = (1.0 + math.log(qtf)) * math.log(n / df)
    candidates = set()
    for term in q_weights:
        candidates.update(doc_id for doc_id, _ in idx.postings[term])
    if not candidates:
        return Ranking(query_id, ())

    doc_weights, doc_norms = _tfidf_doc_weights(idx)
    q_norm = math.sqrt(sum(w * w for w in q_weights.values()))
    scores: dict[str, float] = {}
    for doc_id in candidates:
        if q_norm == 0.0 or doc_norms[doc_id] == 0.0:
            scores[doc_id] = 0.0
            continue
        dot = sum(
            q_w * doc_weights[doc_id].get(term, 0.0) for term, q_w in q_weights.items()
        )
        scores[doc_id] = dot / (q_norm * doc_norms[doc_id])
    return Ranking.from_scores(query_id, scores).top(top_n)


def save_index(idx: InvertedIndex, path: str | Path) -> None:
    payload = {
        "format": _INDEX_MAGIC,
        "version": _INDEX_VERSION,
        "tokenizer": idx.tokenizer.to_dict(),
        "doc_lengths": idx.doc_lengths,
        "postings": {t: [[d, tf] for d, tf in pl] for t, pl in idx.postings.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)


def load_index(path: str | Path) -> InvertedIndex:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != _INDEX_MAGIC:
        raise GraphirError(f"{path}: not a lexical index file")
    if payload.get("version") != _INDEX_VERSION:
        raise GraphirError(f"{path}: unsupported index version {payload.get('version')}")
    return InvertedIndex(
        postings={t: [(d, int(tf)) for d, tf in pl] for t, pl in payload["postings"].items()},
        doc_lengths={d: int(v) for d, v in payload["doc_lengths"].items()},
        tokenizer=TokenizerConfig.from_dict(payload["tokenizer"]),
    )
