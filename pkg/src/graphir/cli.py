"""Command-line interface.

Subcommands: ingest, graph, index, search, eval, safety-eval. See the README
for worked examples. All outputs are plain JSON or CSV so runs can be diffed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .corpus import load_corpus, validate_corpus
from .dense import (
    DeterministicProvider,
    ExternalProvider,
    VectorIndex,
    build_vector_index,
    embed,
    knn_search,
    load_vectors_file,
    save_vectors_file,
)
from .errors import GraphirError
from .fusion import RocchioConfig, RrfConfig, WrrfConfig, rocchio_expand, rrf_fuse, wrrf_fuse
from .graph import RefPattern, build_graph, load_graph_edges, save_build_report, save_graph_edges
from .harness import (
    ExternalAnswerClient,
    RuleAnswerClient,
    ScriptedAnswerClient,
    SEED_ENV_VAR,
    load_run_config,
    run_retrieval_experiment,
    run_safety_experiment,
)
from .lexical import Bm25Params, TokenizerConfig, bm25_search, build_index, load_index, save_index, tfidf_search, tokenize
from .sar import SarConfig, cosine_to_unit, sar_rerank


def _env_seed(default: int = 13) -> int:
    value = os.environ.get(SEED_ENV_VAR)
    return int(value) if value else default


def _tokenizer_from_args(args) -> TokenizerConfig:
    return TokenizerConfig(lowercase=not args.no_lowercase, jamo_decompose=args.jamo)


def _provider_from_args(args):
    if getattr(args, "provider", None):
        return ExternalProvider(args.provider)
    return DeterministicProvider(seed=args.seed, dim=args.dim)


def cmd_ingest(args) -> int:
    corpus = load_corpus(args.corpus)
    stats = corpus.stats
    print(
        json.dumps(
            {
                "doc_count": stats.doc_count,
                "avg_char_length": round(stats.avg_char_length, 2),
                "avg_word_count": round(stats.avg_word_count, 2),
                "avg_out_links": round(stats.avg_out_links, 4),
            }
        )
    )
    if args.validate:
        print(json.dumps(validate_corpus(corpus).to_dict(), ensure_ascii=False))
    return 0


def cmd_graph(args) -> int:
    corpus = load_corpus(args.corpus)
    patterns = []
    if args.patterns:
        with open(args.patterns, "r", encoding="utf-8") as fh:
            for entry in json.load(fh):
                patterns.append(RefPattern(pattern=entry["pattern"], label=entry.get("label", "{}")))
    graph = build_graph(corpus, patterns)
    save_graph_edges(graph, args.out)
    report_path = args.out + ".report.json"
    save_build_report(graph, report_path)
    print(
        json.dumps(
            {
                "nodes": len(graph.nodes),
                "edges": len(graph.edges),
                "unresolved": len(graph.build_report.unresolved),
                "dangling_links": len(graph.build_report.dangling_links),
                "edges_file": args.out,
                "report_file": report_path,
            }
        )
    )
    return 0


def cmd_index(args) -> int:
    corpus = load_corpus(args.corpus)
    if args.kind in ("bm25", "tfidf"):
        index = build_index(corpus, _tokenizer_from_args(args))
        save_index(index, args.out)
        print(json.dumps({"kind": args.kind, "docs": index.doc_count, "terms": len(index.postings), "out": args.out}))
        return 0
    # dense
    if args.vectors:
        vectors = load_vectors_file(args.vectors)
        missing = [d for d in corpus.ids() if d not in vectors]
        if missing:
            raise GraphirError(f"vectors file misses {len(missing)} corpus ids (first: {missing[0]!r})")
        vectors = {d: vectors[d] for d in corpus.ids()}
        index = VectorIndex(vectors)
    else:
        provider = _provider_from_args(args)
        try:
            index = build_vector_index(corpus, provider)
        finally:
            provider.close()
    save_vectors_file({d: index.vector(d) for d in index.ids}, args.out)
    print(json.dumps({"kind": "dense", "docs": len(index), "dim": index.dim, "out": args.out}))
    return 0


def _load_any_index(path: str):
    """A lexical index file or a dense vectors file, detected by content."""
    try:
        return "lexical", load_index(path)
    except (GraphirError, json.JSONDecodeError):
        return "dense", VectorIndex(load_vectors_file(path))


def _search_one(kind, index, args, query_id="cli"):
    # retrieve at full depth so fusion and reranking see every score; the
    # printed output is truncated to --top afterwards
    if kind == "lexical":
        depth = index.doc_count
        terms = tokenize(args.query, index.tokenizer)
        if args.lexical == "tfidf":
            return tfidf_search(index, terms, top_n=depth, query_id=query_id)
        return bm25_search(index, terms, Bm25Params(), top_n=depth, query_id=query_id)
    provider = _provider_from_args(args)
    try:
        depth = len(index)
        query_vec = embed(provider, [args.query])[0]
        if args.rocchio:
            alpha, beta, k = args.rocchio.split(",")
            initial = knn_search(index, query_vec, top_n=depth, query_id=query_id)
            query_vec = rocchio_expand(
                query_vec, initial, index,
                RocchioConfig(alpha=float(alpha), beta=float(beta), feedback_k=int(k)),
            )
        return knn_search(index, query_vec, top_n=depth, query_id=query_id)
    finally:
        provider.close()


def cmd_search(args) -> int:
    loaded = [_load_any_index(p) for p in args.index]
    if args.fuse and len(loaded) < 2:
        raise GraphirError("fusion needs at least two index files")
    if not args.fuse and len(loaded) > 1:
        raise GraphirError("pass --fuse to search multiple indexes")

    rankings = [_search_one(kind, idx, args) for kind, idx in loaded]
    if args.fuse == "rrf":
        ranking = rrf_fuse(rankings, RrfConfig(k=args.k))
    elif args.fuse == "wrrf":
        weights = tuple(float(w) for w in args.weights.split(","))
        ranking = wrrf_fuse(rankings, WrrfConfig(k=args.k, weights=weights))
    else:
        ranking = rankings[0]

    if args.sar:
        beta, seeds, direction = args.sar.split(",")
        if not args.graph:
            raise GraphirError("--sar needs --graph <edges file>")
        dense_indexes = [idx for kind, idx in loaded if kind == "dense"]
        if args.fuse or not dense_indexes:
            raise GraphirError("--sar applies to a single dense index search")
        graph = load_graph_edges(args.graph, extra_nodes=dense_indexes[0].ids)
        cfg = SarConfig(beta=float(beta), seed_count=int(seeds), direction=direction)
        ranking = sar_rerank(cosine_to_unit(ranking), graph, cfg)

    for rank, (doc_id, score) in enumerate(ranking.entries[: args.top], start=1):
        print(json.dumps({"rank": rank, "id": doc_id, "score": score}))
    return 0


def cmd_eval(args) -> int:
    cfg = load_run_config(args.config)
    report = run_retrieval_experiment(cfg)
    print(json.dumps({"method": cfg.method_name, "queries": report.query_count, "means": {k: report.means[k] for k in sorted(report.means)}}))
    return 0


def _make_client(args):
    if args.client:
        return ExternalAnswerClient(args.client)
    spec = args.mock
    if spec == "rule" or spec.startswith("rule:"):
        _, _, marker = spec.partition(":")
        return RuleAnswerClient(marker=marker or "[KEY")
    if spec.startswith("scripted:"):
        path = spec.split(":", 1)[1]
        with open(path, "r", encoding="utf-8") as fh:
            return ScriptedAnswerClient(json.load(fh))
    raise GraphirError(f"unknown mock spec {spec!r}; use rule[:MARKER] or scripted:FILE")


def cmd_safety_eval(args) -> int:
    cfg = load_run_config(args.config)
    client = _make_client(args)
    try:
        result = run_safety_experiment(cfg, client)
    finally:
        client.close()
    summary = {
        "safety_rate": result.safety_rate,
        "modes": {
            mode: {
                "accuracy": r.accuracy,
                "abstention_rate": r.abstention_rate,
                "undecodable_rate": r.undecodable_rate,
                "failed": r.n_failed,
            }
            for mode, r in result.per_mode.items()
        },
    }
    print(json.dumps(summary))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphir", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a corpus and print its statistics")
    p.add_argument("corpus")
    p.add_argument("--validate", action="store_true", help="also print the validation report")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("graph", help="build the citation graph and export its edges")
    p.add_argument("corpus")
    p.add_argument("--patterns", help="JSON file with [{'pattern', 'label'}] entries")
    p.add_argument("--out", required=True, help="edges output (jsonl)")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("index", help="build a bm25/tfidf/dense index file")
    p.add_argument("corpus")
    p.add_argument("--kind", choices=["bm25", "tfidf", "dense"], required=True)
    p.add_argument("--vectors", help="precomputed vectors file (dense)")
    p.add_argument("--provider", help="external embedding provider command (dense)")
    p.add_argument("--seed", type=int, default=_env_seed(), help="deterministic embedder seed")
    p.add_argument("--dim", type=int, default=64, help="deterministic embedder dimension")
    p.add_argument("--jamo", action="store_true", help="decompose Hangul syllables into jamo")
    p.add_argument("--no-lowercase", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="query one index, or fuse several")
    p.add_argument("index", nargs="+", help="index file(s): lexical json or dense vectors jsonl")
    p.add_argument("--query", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--lexical", choices=["bm25", "tfidf"], default="bm25", help="scoring for lexical index files")
    p.add_argument("--fuse", choices=["rrf", "wrrf"])
    p.add_argument("--k", type=float, default=5.0, help="fusion smoothing constant")
    p.add_argument("--weights", default="0.1,0.9", help="wrrf weights, comma separated")
    p.add_argument("--rocchio", metavar="ALPHA,BETA,K", help="expand the dense query before searching")
    p.add_argument("--sar", metavar="BETA,SEEDS,DIR", help="structure-aware rerank of a dense search")
    p.add_argument("--graph", help="edges file for --sar")
    p.add_argument("--provider", help="external embedding provider command")
    p.add_argument("--seed", type=int, default=_env_seed())
    p.add_argument("--dim", type=int, default=64)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="run a retrieval experiment from a run-config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("safety-eval", help="run the context-ablation safety protocol")
    p.add_argument("config")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--client", help="external answer-model command")
    group.add_argument("--mock", help="rule[:MARKER] or scripted:FILE")
    p.set_defaults(func=cmd_safety_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GraphirError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
