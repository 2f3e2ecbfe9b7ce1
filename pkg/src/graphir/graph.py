"""Directed citation graph built from link annotations and textual references.

Two edge kinds exist for citation graphs: ``hyperlink`` edges come from each
document's explicit ``links`` annotations, ``textual`` edges from regex
patterns resolved against same-title documents (references like "Article 5"
inside a body usually point within the same statute). Similarity graphs built
elsewhere reuse the same container with their own kind marker.

Degree counts collapse parallel edges of different kinds: a document citing
another both ways still cites one distinct target, which is what the degree
penalties downstream care about.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .corpus import Corpus, Document
from .errors import GraphirError, UnknownNodeError

Edge = tuple[str, str, str]  # (source, target, kind)

_DIRECTIONS = ("out", "in", "both")


class EdgeKind(str, Enum):
    HYPERLINK = "hyperlink"
    TEXTUAL = "textual"


@dataclass(frozen=True)
class RefPattern:
    """A textual-reference rule.

    ``pattern`` must contain exactly one capture group. The captured text is
    substituted into ``label`` ("Article {}" turns a captured "5" into
    "Article 5") and looked up among documents sharing the source document's
    title whose hierarchy path ends with that label. ``resolver`` overrides
    the default lookup; it receives (source document, captured text) and
    returns a target id or None.
    """

    pattern: str
    label: str = "{}"
    resolver: Callable[[Document, str], str | None] | None = None

    def compiled(self) -> re.Pattern:
        compiled = re.compile(self.pattern)
        if compiled.groups != 1:
            raise GraphirError(
                f"pattern {self.pattern!r} must have exactly one capture group"
            )
        return compiled


@dataclass
class GraphBuildReport:
    """Unresolved textual references and dangling link annotations."""

    unresolved: list[dict] = field(default_factory=list)
    dangling_links: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "unresolved_count": len(self.unresolved),
            "unresolved": list(self.unresolved),
            "dangling_link_count": len(self.dangling_links),
            "dangling_links": list(self.dangling_links),
        }


class CitationGraph:
    """Immutable directed multigraph over document ids with typed edges."""

    def __init__(
        self,
        nodes: Iterable[str],
        edges: Iterable[Edge],
        build_report: GraphBuildReport | None = None,
    ):
        self.nodes: frozenset[str] = frozenset(nodes)
        edge_set = set()
        for src, dst, kind in edges:
            if src == dst:
                raise GraphirError(f"self-loop on {src!r} is not allowed")
            if src not in self.nodes or dst not in self.nodes:
                raise GraphirError(f"edge ({src!r}, {dst!r}) has endpoint outside nodes")
            edge_set.add((src, dst, str(kind)))
        self.edges: frozenset[Edge] = frozenset(edge_set)
        self.build_report = build_report

        out: dict[str, list[tuple[str, str]]] = {n: [] for n in self.nodes}
        inc: dict[str, list[tuple[str, str]]] = {n: [] for n in self.nodes}
        for src, dst, kind in sorted(self.edges):
            out[src].append((dst, kind))
            inc[dst].append((src, kind))
        self.out_index: dict[str, tuple[tuple[str, str], ...]] = {
            n: tuple(v) for n, v in out.items()
        }
        self.in_index: dict[str, tuple[tuple[str, str], ...]] = {
            n: tuple(v) for n, v in inc.items()
        }
        # Degrees count distinct counterparts, not annotation redundancy.
        self.out_degree: dict[str, int] = {
            n: len({t for t, _ in v}) for n, v in self.out_index.items()
        }
        self.in_degree: dict[str, int] = {
            n: len({s for s, _ in v}) for n, v in self.in_index.items()
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, CitationGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __hash__(self):
        return hash((self.nodes, self.edges))

    def __repr__(self) -> str:
        return f"CitationGraph(nodes={len(self.nodes)}, edges={len(self.edges)})"

    def _check_node(self, node: str) -> None:
        if node not in self.nodes:
            raise UnknownNodeError(node)

    def _step(self, node: str, direction: str) -> set[str]:
        if direction == "out":
            return {t for t, _ in self.out_index[node]}
        if direction == "in":
            return {s for s, _ in self.in_index[node]}
        return {t for t, _ in self.out_index[node]} | {
            s for s, _ in self.in_index[node]
        }

    def neighbors(self, node: str, direction: str = "out", hops: int = 1) -> set[str]:
        """Breadth-first closure up to ``hops`` edges away, start excluded."""
        self._check_node(node)
        if direction not in _DIRECTIONS:
            raise GraphirError(f"direction must be one of {_DIRECTIONS}, got {direction!r}")
        if hops < 1:
            raise GraphirError(f"hops must be >= 1, got {hops}")
        seen: set[str] = set()
        frontier = {node}
        for _ in range(hops):
            nxt = set()
            for cur in frontier:
                nxt |= self._step(cur, direction)
            frontier = nxt - seen - {node}
            if not frontier:
                break
            seen |= frontier
        return seen

    def degree(self, node: str, direction: str = "out") -> int:
        self._check_node(node)
        if direction == "out":
            return self.out_degree[node]
        if direction == "in":
            return self.in_degree[node]
        if direction == "both":
            return len(self._step(node, "both"))
        raise GraphirError(f"direction must be one of {_DIRECTIONS}, got {direction!r}")


def build_graph(corpus: Corpus, patterns: Sequence[RefPattern] = ()) -> CitationGraph:
    """Build the citation graph for a corpus.

    Every corpus document becomes a node. One hyperlink edge is added per
    resolvable ``links`` entry; one textual edge per resolvable pattern match
    that does not duplicate an existing (source, target) pair (hyperlinks are
    curated ground truth and take precedence). Self-references are dropped as
    parse artifacts. Unresolvable references accumulate in ``build_report``
    rather than failing the build. Deterministic for a given corpus.
    """
    report = GraphBuildReport()
    nodes = set(corpus.documents)
    edges: set[Edge] = set()
    linked_pairs: set[tuple[str, str]] = set()

    for doc in corpus.documents.values():
        for target in doc.links:
            if target == doc.id:
                continue
            if target not in nodes:
                report.dangling_links.append({"source": doc.id, "target": target})
                continue
            if (doc.id, target) not in linked_pairs:
                edges.add((doc.id, target, EdgeKind.HYPERLINK.value))
                linked_pairs.add((doc.id, target))

    if patterns:
        compiled = [(p, p.compiled()) for p in patterns]
        label_index = _label_index(corpus)
        for doc in corpus.documents.values():
            for pat, rx in compiled:
                for match in rx.finditer(doc.text):
                    captured = match.group(1)
                    target = _resolve(pat, doc, captured, label_index)
                    if target is None:
                        report.unresolved.append(
                            {
                                "source": doc.id,
                                "captured": captured,
                                "pattern": pat.pattern,
                            }
                        )
                        continue
                    if target == doc.id:
                        continue
                    if (doc.id, target) not in linked_pairs:
                        edges.add((doc.id, target, EdgeKind.TEXTUAL.value))
                        linked_pairs.add((doc.id, target))

    return CitationGraph(nodes, edges, build_report=report)


def _label_index(corpus: Corpus) -> dict[tuple[str, str], list[str]]:
    index: dict[tuple[str, str], list[str]] = {}
    for doc in corpus.documents.values():
        if doc.path:
            index.setdefault((doc.title, doc.path[-1]), []).append(doc.id)
    return index


def _resolve(
    pattern: RefPattern,
    doc: Document,
    captured: str,
    label_index: dict[tuple[str, str], list[str]],
) -> str | None:
    if pattern.resolver is not None:
        return pattern.resolver(doc, captured)
    label = pattern.label.format(captured)
    candidates = label_index.get((doc.title, label), [])
    if len(candidates) == 1:
        return candidates[0]
    return None  # ambiguous or absent: reported, never guessed


def save_graph_edges(graph: CitationGraph, path: str | Path) -> None:
    """Export edges as line-delimited JSON, sorted for reproducible diffs."""
    with open(path, "w", encoding="utf-8") as fh:
        for src, dst, kind in sorted(graph.edges):
            fh.write(json.dumps({"src": src, "dst": dst, "kind": kind}) + "\n")


def load_graph_edges(path: str | Path, extra_nodes: Iterable[str] = ()) -> CitationGraph:
    """Rebuild a graph from an edge export.

    Edge files carry no isolated nodes, so callers holding the full id set
    (for example from an index) pass it via ``extra_nodes``.
    """
    edges = []
    nodes = set(extra_nodes)
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            edges.append((rec["src"], rec["dst"], rec["kind"]))
            nodes.add(rec["src"])
            nodes.add(rec["dst"])
    return CitationGraph(nodes, edges)


def save_build_report(graph: CitationGraph, path: str | Path) -> None:
    report = graph.build_report or GraphBuildReport()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
