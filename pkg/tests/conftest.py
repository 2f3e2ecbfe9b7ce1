import json

import pytest

from graphir.corpus import Corpus, Document


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


def doc_record(doc_id, text, title="T", path=("T", "Article 1"), links=()):
    return {
        "id": doc_id,
        "title": title,
        "path": list(path),
        "text": text,
        "links": list(links),
    }


def make_corpus(texts, links=None):
    """Corpus from {id: text}, optionally {id: [link ids]}."""
    links = links or {}
    docs = {
        doc_id: Document(
            id=doc_id,
            title="T",
            path=("T", f"Article {i}"),
            text=text,
            links=tuple(links.get(doc_id, ())),
        )
        for i, (doc_id, text) in enumerate(sorted(texts.items()), start=1)
    }
    return Corpus(docs)


@pytest.fixture
def tiny_corpus_file(tmp_path):
    path = tmp_path / "corpus.jsonl"
    write_jsonl(
        path,
        [
            doc_record("d1", "fire safety valve", links=["d2"]),
            doc_record("d2", "sprinkler head spacing rules"),
            doc_record("d3", "emergency exit width", links=["d1", "d2"]),
        ],
    )
    return path
