"""Corpus and QA dataset loading.

A corpus is stored as line-delimited JSON, one document per line:

    {"id": str, "title": str, "path": [str], "text": str, "links": [str]}

``path`` holds the hierarchy labels from macro to micro (for statute-like
corpora: statute, article, paragraph). ``links`` lists ids of documents this
one explicitly cites. Companion datasets use the same encoding:

    qa.jsonl   {"qid", "question", "gold_answer", "matched_doc_ids", "related_doc_ids"}
    mcq.jsonl  {"qid", "question", "options", "abstain_index",
                "answer_full", "answer_partial", "doc_a_id", "doc_b_id"}

Multiple-choice answer fields are 1-based option numbers. All files are UTF-8.
Dangling links are tolerated at load time (real corpora cite out-of-corpus
law) and surface through :func:`validate_corpus` instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import CorpusFormatError, ValidationFailure

_DOC_FIELDS = ("id", "title", "path", "text", "links")
_QA_FIELDS = ("qid", "question", "gold_answer", "matched_doc_ids", "related_doc_ids")
_MCQ_FIELDS = (
    "qid",
    "question",
    "options",
    "abstain_index",
    "answer_full",
    "answer_partial",
    "doc_a_id",
    "doc_b_id",
)


@dataclass(frozen=True)
class Document:
    """One atomic retrieval unit with hierarchical metadata."""

    id: str
    title: str
    path: tuple[str, ...]
    text: str
    links: tuple[str, ...] = ()


@dataclass(frozen=True)
class CorpusStats:
    doc_count: int
    avg_char_length: float
    avg_word_count: float
    avg_out_links: float


@dataclass(frozen=True)
class Corpus:
    """An immutable id -> Document mapping plus corpus-level statistics.

    ``documents`` iterates in ascending id order, so anything derived from a
    corpus (indexes, graphs, reports) is deterministic.
    """

    documents: dict[str, Document]
    stats: CorpusStats = field(init=False)

    def __post_init__(self):
        for doc_id, doc in self.documents.items():
            if doc_id != doc.id:
                raise ValidationFailure(
                    f"corpus key {doc_id!r} does not match document id {doc.id!r}"
                )
        ordered = {k: self.documents[k] for k in sorted(self.documents)}
        object.__setattr__(self, "documents", ordered)
        object.__setattr__(self, "stats", compute_stats(ordered.values()))

    def __len__(self) -> int:
        return len(self.documents)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.documents

    def __getitem__(self, doc_id: str) -> Document:
        return self.documents[doc_id]

    def ids(self) -> list[str]:
        return list(self.documents)


@dataclass(frozen=True)
class QAPair:
    """A real-world question with its gold document set."""

    qid: str
    question: str
    gold_answer: str
    matched_doc_ids: tuple[str, ...]
    related_doc_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class MCQItem:
    """A two-document multiple-choice item with an abstain option.

    Option numbers are 1-based. ``answer_partial`` always equals
    ``abstain_index``: with only ``doc_a`` in context the item is
    unanswerable by construction, so abstaining is the correct choice.
    """

    qid: str
    question: str
    options: tuple[str, ...]
    abstain_index: int
    answer_full: int
    answer_partial: int
    doc_a_id: str
    doc_b_id: str


@dataclass
class ValidationReport:
    """Report-only view of corpus hygiene. Never mutates the corpus."""

    dangling_links: list[tuple[str, str]]  # (source id, missing target id)
    empty_text_ids: list[str]

    @property
    def dangling_count(self) -> int:
        return len(self.dangling_links)

    @property
    def empty_text_count(self) -> int:
        return len(self.empty_text_ids)

    def to_dict(self) -> dict:
        return {
            "dangling_count": self.dangling_count,
            "dangling_links": [
                {"source": s, "target": t} for s, t in self.dangling_links
            ],
            "empty_text_count": self.empty_text_count,
            "empty_text_ids": list(self.empty_text_ids),
        }


def compute_stats(documents: Iterable[Document]) -> CorpusStats:
    """Corpus-level averages. A word is a maximal non-whitespace run."""
    docs = list(documents)
    n = len(docs)
    if n == 0:
        return CorpusStats(0, 0.0, 0.0, 0.0)
    chars = sum(len(d.text) for d in docs)
    words = sum(len(d.text.split()) for d in docs)
    links = sum(len(d.links) for d in docs)
    return CorpusStats(n, chars / n, words / n, links / n)


def _iter_jsonl(path: str | Path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON ({exc.msg})", lineno) from exc
            if not isinstance(record, dict):
                raise CorpusFormatError("record is not a JSON object", lineno)
            yield lineno, record


def _require(record: Mapping, fields: tuple[str, ...], lineno: int) -> None:
    missing = [f for f in fields if f not in record]
    if missing:
        raise CorpusFormatError(f"missing field(s) {missing}", lineno)


def load_corpus(path: str | Path) -> Corpus:
    """Load a corpus.jsonl file.

    Raises :class:`CorpusFormatError` (with line number) for malformed lines
    and :class:`ValidationFailure` for duplicate ids. Dangling links and empty
    texts load fine; see :func:`validate_corpus`.
    """
    documents: dict[str, Document] = {}
    for lineno, record in _iter_jsonl(path):
        _require(record, _DOC_FIELDS, lineno)
        doc_id = record["id"]
        if not isinstance(doc_id, str) or not doc_id:
            raise CorpusFormatError("document id must be a non-empty string", lineno)
        if doc_id in documents:
            raise ValidationFailure(f"duplicate document id {doc_id!r} (line {lineno})")
        documents[doc_id] = Document(
            id=doc_id,
            title=str(record["title"]),
            path=tuple(str(p) for p in record["path"]),
            text=str(record["text"]),
            links=tuple(str(t) for t in record["links"]),
        )
    return Corpus(documents)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write corpus.jsonl in ascending id order. Round-trips with load_corpus."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents.values():
            fh.write(
                json.dumps(
                    {
                        "id": doc.id,
                        "title": doc.title,
                        "path": list(doc.path),
                        "text": doc.text,
                        "links": list(doc.links),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Check link resolution and text presence. Report-only."""
    dangling = []
    empty = []
    for doc in corpus.documents.values():
        for target in doc.links:
            if target not in corpus.documents:
                dangling.append((doc.id, target))
        if not doc.text:
            empty.append(doc.id)
    return ValidationReport(dangling_links=dangling, empty_text_ids=empty)


def load_qa(path: str | Path, corpus: Corpus) -> list[QAPair]:
    """Load qa.jsonl, enforcing invariants against ``corpus``.

    An item with an empty gold set or an unresolvable document id is rejected
    with its qid in the error message.
    """
    pairs = []
    for lineno, record in _iter_jsonl(path):
        _require(record, _QA_FIELDS, lineno)
        qid = str(record["qid"])
        matched = tuple(str(x) for x in record["matched_doc_ids"])
        related = tuple(str(x) for x in record["related_doc_ids"])
        if not matched:
            raise ValidationFailure(f"qa item {qid!r}: matched_doc_ids is empty")
        for doc_id in matched + related:
            if doc_id not in corpus:
                raise ValidationFailure(
                    f"qa item {qid!r}: document id {doc_id!r} not in corpus"
                )
        pairs.append(
            QAPair(
                qid=qid,
                question=str(record["question"]),
                gold_answer=str(record["gold_answer"]),
                matched_doc_ids=matched,
                related_doc_ids=related,
            )
        )
    return pairs


def load_mcq(path: str | Path, corpus: Corpus) -> list[MCQItem]:
    """Load mcq.jsonl, enforcing invariants against ``corpus``.

    Rejected (with qid in the error): option lists shorter than 2, answer
    indexes outside 1..len(options), ``answer_partial != abstain_index``,
    identical or unresolvable document ids.
    """
    items = []
    for lineno, record in _iter_jsonl(path):
        _require(record, _MCQ_FIELDS, lineno)
        qid = str(record["qid"])
        options = tuple(str(o) for o in record["options"])
        if len(options) < 2:
            raise ValidationFailure(f"mcq item {qid!r}: needs at least 2 options")
        abstain = int(record["abstain_index"])
        full = int(record["answer_full"])
        partial = int(record["answer_partial"])
        for name, idx in (("abstain_index", abstain), ("answer_full", full), ("answer_partial", partial)):
            if not 1 <= idx <= len(options):
                raise ValidationFailure(
                    f"mcq item {qid!r}: {name}={idx} outside 1..{len(options)}"
                )
        if partial != abstain:
            raise ValidationFailure(
                f"mcq item {qid!r}: answer_partial ({partial}) must equal "
                f"abstain_index ({abstain}); partial-context items are "
                "unanswerable by construction"
            )
        doc_a = str(record["doc_a_id"])
        doc_b = str(record["doc_b_id"])
        if doc_a == doc_b:
            raise ValidationFailure(f"mcq item {qid!r}: doc_a_id equals doc_b_id")
        for doc_id in (doc_a, doc_b):
            if doc_id not in corpus:
                raise ValidationFailure(
                    f"mcq item {qid!r}: document id {doc_id!r} not in corpus"
                )
        items.append(
            MCQItem(
                qid=qid,
                question=str(record["question"]),
                options=options,
                abstain_index=abstain,
                answer_full=full,
                answer_partial=partial,
                doc_a_id=doc_a,
                doc_b_id=doc_b,
            )
        )
    return items


def save_qa(pairs: Iterable[QAPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(
                json.dumps(
                    {
                        "qid": p.qid,
                        "question": p.question,
                        "gold_answer": p.gold_answer,
                        "matched_doc_ids": list(p.matched_doc_ids),
                        "related_doc_ids": list(p.related_doc_ids),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def save_mcq(items: Iterable[MCQItem], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in items:
            fh.write(
                json.dumps(
                    {
                        "qid": m.qid,
                        "question": m.question,
                        "options": list(m.options),
                        "abstain_index": m.abstain_index,
                        "answer_full": m.answer_full,
                        "answer_partial": m.answer_partial,
                        "doc_a_id": m.doc_a_id,
                        "doc_b_id": m.doc_b_id,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
