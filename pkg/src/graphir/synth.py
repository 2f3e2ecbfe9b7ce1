"""Synthetic corpora for experiments, demos, and the acceptance suite.

Two generators:

* a planted-gap retrieval suite, where each query's wording matches an entry
  document but the gold document uses vocabulary shared with nothing else and
  is only reachable through the entry document's citation edge, and
* a two-document multiple-choice suite, where document B carries a marker
  token with the correct option number, so a context-aware mock can answer
  exactly when B is present and abstain otherwise.

Everything is driven by one integer seed and is fully reproducible.
"""

from __future__ import annotations

import random
import string
from dataclasses import dataclass

from .corpus import Corpus, Document, MCQItem, QAPair

ABSTAIN_TEXT = "Cannot be determined from the information provided."
DEFAULT_MARKER = "[KEY"


@dataclass(frozen=True)
class PlantedQuery:
    qid: str
    text: str
    gold: frozenset[str]
    entry_id: str


class _Words:
    """Unique random lowercase words, so vocabularies stay disjoint."""

    def __init__(self, rng: random.Random):
        self._rng = rng
        self._used: set[str] = set()

    def fresh(self) -> str:
        while True:
            length = self._rng.randint(5, 8)
            word = "".join(self._rng.choice(string.ascii_lowercase) for _ in range(length))
            if word not in self._used:
                self._used.add(word)
                return word

    def batch(self, n: int) -> list[str]:
        return [self.fresh() for _ in range(n)]


def planted_gap_suite(
    n_docs: int = 500,
    n_queries: int = 50,
    seed: int = 7,
) -> tuple[Corpus, list[PlantedQuery]]:
    """Build a corpus where dense retrieval misses the gold documents.

    Each query i gets an entry document sharing its distinctive wording and a
    gold document written in vocabulary unique to itself. The only route from
    query to gold is the entry document's citation edge. Some filler
    documents link to several others, giving the degree penalties hubs to
    damp. ``n_docs`` counts total documents (entries and golds included) and
    must leave room for at least one filler per query pair.
    """
    if n_docs < 3 * n_queries:
        raise ValueError("n_docs must be at least 3 * n_queries")
    rng = random.Random(seed)
    words = _Words(rng)
    filler_pool = words.batch(600)

    documents: dict[str, Document] = {}
    queries: list[PlantedQuery] = []

    for i in range(n_queries):
        distinctive = words.batch(6)
        entry_id = f"E{i:03d}"
        gold_id = f"G{i:03d}"
        entry_text = " ".join(distinctive + rng.sample(filler_pool, 2))
        gold_text = " ".join(words.batch(10))
        documents[entry_id] = Document(
            id=entry_id,
            title=f"Guide {i}",
            path=(f"Guide {i}", "Overview"),
            text=entry_text,
            links=(gold_id,),
        )
        documents[gold_id] = Document(
            id=gold_id,
            title=f"Guide {i}",
            path=(f"Guide {i}", "Annex 1"),
            text=gold_text,
            links=(),
        )
        query_words = rng.sample(distinctive, 5)
        queries.append(
            PlantedQuery(
                qid=f"q{i:03d}",
                text=" ".join(query_words),
                gold=frozenset({gold_id}),
                entry_id=entry_id,
            )
        )

    n_fillers = n_docs - 2 * n_queries
    filler_ids = [f"F{j:04d}" for j in range(n_fillers)]
    for j, filler_id in enumerate(filler_ids):
        text = " ".join(rng.sample(filler_pool, 12))
        links: tuple[str, ...] = ()
        if j % 25 == 0 and n_fillers > 8:
            # hub fillers cite several neighbors; their votes should be damped
            targets = rng.sample([f for f in filler_ids if f != filler_id], 6)
            links = tuple(sorted(targets))
        documents[filler_id] = Document(
            id=filler_id,
            title="Ledger",
            path=("Ledger", f"Entry {j}"),
            text=text,
            links=links,
        )

    return Corpus(documents), queries


def planted_qa_pairs(queries: list[PlantedQuery]) -> list[QAPair]:
    """Wrap planted queries in the QA record shape."""
    return [
        QAPair(
            qid=q.qid,
            question=q.text,
            gold_answer="see the annex provision",
            matched_doc_ids=tuple(sorted(q.gold)),
            related_doc_ids=(q.entry_id,),
        )
        for q in queries
    ]


def synthetic_mcq_suite(
    n_items: int = 100,
    seed: int = 5,
    marker: str = DEFAULT_MARKER,
) -> tuple[Corpus, list[MCQItem]]:
    """Two-document MCQ items with a strict conditional dependency.

    Document A states that the decisive value is delegated elsewhere;
    document B contains "<marker> <answer_full>]" so a rule-based client can
    read the correct option off the context exactly when B is present. The
    abstain option is always the last one and is the gold answer under
    partial context.
    """
    rng = random.Random(seed)
    words = _Words(rng)
    documents: dict[str, Document] = {}
    items: list[MCQItem] = []

    for i in range(n_items):
        a_id = f"A{i:03d}"
        b_id = f"B{i:03d}"
        answer_full = rng.randint(1, 4)
        noise_a = " ".join(words.batch(4))
        noise_b = " ".join(words.batch(4))
        documents[a_id] = Document(
            id=a_id,
            title=f"Handbook {i}",
            path=(f"Handbook {i}", "Provision"),
            text=(
                f"Provision {i} requires compliance with the controlling value; "
                f"the value itself is specified in the annex. {noise_a}"
            ),
            links=(b_id,),
        )
        documents[b_id] = Document(
            id=b_id,
            title=f"Handbook {i}",
            path=(f"Handbook {i}", "Annex"),
            text=(
                f"Annex for provision {i}: the controlling value corresponds to "
                f"option {marker} {answer_full}]. {noise_b}"
            ),
            links=(),
        )
        options = (
            "A limit of 10 units applies.",
            "A limit of 20 units applies.",
            "A limit of 30 units applies.",
            "A limit of 40 units applies.",
            ABSTAIN_TEXT,
        )
        items.append(
            MCQItem(
                qid=f"mcq{i:03d}",
                question=f"Which limit applies under provision {i}?",
                options=options,
                abstain_index=5,
                answer_full=answer_full,
                answer_partial=5,
                doc_a_id=a_id,
                doc_b_id=b_id,
            )
        )

    return Corpus(documents), items
