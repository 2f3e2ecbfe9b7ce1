"""Retrieval and generation metrics, plus graph diagnostics.

All metrics are stored as fractions in [0, 1]; the CSV emitter multiplies by
100 at the last moment so nothing gets converted twice. Relevance is binary:
the datasets carry no graded labels.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import MCQItem
from .dense import VectorIndex, cosine_sim
from .errors import GraphirError
from .fusion import Ranking
from .graph import CitationGraph
from .lexical import TokenizerConfig, tokenize

ROUGE_TOKENIZER = TokenizerConfig(lowercase=True, jamo_decompose=False)


def recall_at_k(ranking: Ranking, gold: set[str], k: int) -> float:
    """Fraction of the gold set present in the top k."""
    if not gold:
        raise GraphirError("recall needs a non-empty gold set")
    top = set(ranking.ids()[:k])
    return len(gold & top) / len(gold)


def ndcg_at_k(ranking: Ranking, gold: set[str], k: int) -> float:
    """Binary-gain nDCG: hits discounted by 1/log2(rank + 1), over the ideal."""
    if not gold:
        raise GraphirError("ndcg needs a non-empty gold set")
    dcg = 0.0
    for rank, doc_id in enumerate(ranking.ids()[:k], start=1):
        if doc_id in gold:
            dcg += 1.0 / math.log2(rank + 1)
    ideal = sum(1.0 / math.log2(r + 1) for r in range(1, min(len(gold), k) + 1))
    return dcg / ideal


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _lcs_len(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_scores(
    candidate: str,
    reference: str,
    cfg: TokenizerConfig = ROUGE_TOKENIZER,
) -> tuple[float, float]:
    """(ROUGE-1 F1, ROUGE-L F1) over the lexical module's tokens.

    Empty against empty is defined as (0.0, 0.0).
    """
    cand = tokenize(candidate, cfg)
    ref = tokenize(reference, cfg)
    if not cand or not ref:
        return 0.0, 0.0

    cand_counts = Counter(cand)
    ref_counts = Counter(ref)
    overlap = sum(min(n, ref_counts[t]) for t, n in cand_counts.items())
    rouge1 = _f1(overlap / len(cand), overlap / len(ref))

    lcs = _lcs_len(cand, ref)
    rougel = _f1(lcs / len(cand), lcs / len(ref))
    return rouge1, rougel


def mcq_accuracy(
    predictions: Mapping[str, int | None],
    items: Sequence[MCQItem],
    context_mode: str,
) -> float:
    """Top-1 accuracy of predicted option numbers.

    The gold answer is ``answer_partial`` in partial mode (always the abstain
    option) and ``answer_full`` otherwise. A None prediction (undecodable
    response) counts as incorrect. Raises for qids not in ``items``.
    """
    if context_mode not in ("zero", "partial", "full"):
        raise GraphirError(f"unknown context mode {context_mode!r}")
    by_qid = {item.qid: item for item in items}
    if not predictions:
        return 0.0
    correct = 0
    for qid, choice in predictions.items():
        if qid not in by_qid:
            raise GraphirError(f"prediction for unknown qid {qid!r}")
        item = by_qid[qid]
        gold = item.answer_partial if context_mode == "partial" else item.answer_full
        if choice == gold:
            correct += 1
    return correct / len(predictions)


def one_hop_hit_rate(
    queries: Sequence[tuple[set[str], set[str]]],
    graph: CitationGraph,
) -> float:
    """Fraction of (seeds, gold) queries with a direct seed -> gold edge."""
    if not queries:
        return 0.0
    hits = 0
    for seeds, gold in queries:
        found = False
        for seed in seeds:
            if seed not in graph.nodes:
                continue
            if any(target in gold for target, _ in graph.out_index[seed]):
                found = True
                break
        hits += found
    return hits / len(queries)


@dataclass(frozen=True)
class GapProbe:
    """Similarity failure threshold and citation-hop budget for gap probing."""

    epsilon: float
    hops: int = 1

    def __post_init__(self):
        if self.hops < 1:
            raise GraphirError(f"hops must be >= 1, got {self.hops}")


@dataclass(frozen=True)
class GapProbeResult:
    is_gap: bool
    sim: float  # query-gold similarity mapped to [0, 1]
    reachable: bool


def gap_probe(
    query_vec,
    entry: str,
    gold: str,
    idx: VectorIndex,
    graph: CitationGraph,
    probe: GapProbe,
) -> GapProbeResult:
    """Is this a retrieval gap: gold semantically far from the query yet
    reachable from the entry document along citations?
    """
    if gold not in idx:
        raise GraphirError(f"no vector for document {gold!r}")
    sim = (cosine_sim(query_vec, idx.vector(gold)) + 1.0) / 2.0
    reachable = gold in graph.neighbors(entry, direction="out", hops=probe.hops)
    return GapProbeResult(is_gap=sim < probe.epsilon and reachable, sim=sim, reachable=reachable)


@dataclass
class MetricReport:
    """Per-query metric values keyed by label (e.g. "recall@10") plus means."""

    query_count: int
    per_query: dict[str, dict[str, float]]
    means: dict[str, float]

    @classmethod
    def from_per_query(cls, per_query: dict[str, dict[str, float]]) -> "MetricReport":
        counts = {len(v) for v in per_query.values()}
        if len(counts) > 1:
            raise GraphirError(f"inconsistent query counts per metric: {sorted(counts)}")
        count = counts.pop() if counts else 0
        means = {
            label: (sum(values.values()) / len(values) if values else 0.0)
            for label, values in per_query.items()
        }
        return cls(query_count=count, per_query=per_query, means=means)


def metric_label(metric: str, cutoff: int) -> str:
    return f"{metric}@{cutoff}"


def report_to_json(report: MetricReport, path: str | Path, meta: Mapping | None = None) -> None:
    """Full per-query detail, values as fractions."""
    payload = {
        "meta": dict(meta or {}),
        "query_count": report.query_count,
        "means": {k: report.means[k] for k in sorted(report.means)},
        "per_query": {
            label: {qid: report.per_query[label][qid] for qid in sorted(report.per_query[label])}
            for label in sorted(report.per_query)
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def report_to_csv(report: MetricReport, path: str | Path, method: str) -> None:
    """One row per method x metric x cutoff; values as percentages."""
    rows = []
    for label in sorted(report.means):
        metric, _, cutoff = label.partition("@")
        rows.append((method, metric, int(cutoff) if cutoff else "", report.means[label]))
    rows.sort(key=lambda r: (r[1], r[2] if isinstance(r[2], int) else -1))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "metric", "cutoff", "value"])
        for method_name, metric, cutoff, value in rows:
            writer.writerow([method_name, metric, cutoff, f"{value * 100:.4f}"])
