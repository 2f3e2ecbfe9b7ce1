"""Load a small statute-like corpus, validate it, and build its citation graph.

Documents carry hierarchical path metadata and explicit link annotations;
textual references like "Article 5" are resolved by a regex pattern within
the same title. Run with: python demos/01_corpus_and_citation_graph.py
"""

import json
import tempfile
from pathlib import Path

from graphir import RefPattern, build_graph, load_corpus, validate_corpus

RECORDS = [
    {
        "id": "act-2",
        "title": "Fire Safety Act",
        "path": ["Fire Safety Act", "Article 2"],
        "text": "Openings are defined for the purposes of Article 5 and Article 9.",
        "links": ["act-5"],
    },
    {
        "id": "act-5",
        "title": "Fire Safety Act",
        "path": ["Fire Safety Act", "Article 5"],
        "text": "The opening height shall not exceed 1.2 meters from the floor.",
        "links": [],
    },
    {
        "id": "act-9",
        "title": "Fire Safety Act",
        "path": ["Fire Safety Act", "Article 9"],
        "text": "Inspections follow the schedule in the enforcement decree.",
        "links": ["decree-3"],
    },
]

with tempfile.TemporaryDirectory() as workdir:
    corpus_path = Path(workdir) / "corpus.jsonl"
    corpus_path.write_text("\n".join(json.dumps(r) for r in RECORDS) + "\n")

    corpus = load_corpus(corpus_path)
    print("loaded:", corpus.stats)

    report = validate_corpus(corpus)
    print("dangling links:", report.dangling_links)  # decree-3 is out of corpus

    pattern = RefPattern(pattern=r"Article (\d+)", label="Article {}")
    graph = build_graph(corpus, [pattern])
    print("edges:")
    for src, dst, kind in sorted(graph.edges):
        print(f"  {src} -> {dst}  [{kind}]")

    # the hyperlink act-2 -> act-5 suppressed the duplicate textual match,
    # while "Article 9" resolved to a textual edge
    print("one hop out of act-2:", sorted(graph.neighbors("act-2", "out", 1)))
    print("in-degree of act-5:", graph.degree("act-5", "in"))
