import json

import numpy as np
import pytest

from graphir.corpus import save_corpus, save_mcq, save_qa
from graphir.errors import GraphirError, RunConfigError, TransportError
from graphir.harness import (
    RuleAnswerClient,
    RunConfig,
    ScriptedAnswerClient,
    build_context,
    extract_choice,
    load_run_config,
    render_prompt,
    run_retrieval_experiment,
    run_safety_experiment,
)
from graphir.synth import planted_gap_suite, planted_qa_pairs, synthetic_mcq_suite

import test_sar


def _mcq_workspace(tmp_path, n_items=20, **config_overrides):
    corpus, items = synthetic_mcq_suite(n_items=n_items, seed=5)
    save_corpus(corpus, tmp_path / "corpus.jsonl")
    save_mcq(items, tmp_path / "mcq.jsonl")
    config = {
        "corpus": "corpus.jsonl",
        "mcq": "mcq.jsonl",
        "protocol": "safety",
        "context_modes": ["zero", "partial", "full"],
        "output": {"csv": "safety.csv", "json": "safety.json"},
        "seed": 13,
    }
    config.update(config_overrides)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config))
    return path, corpus, items


def _retrieval_workspace(tmp_path, n_docs=120, n_queries=20, **config_overrides):
    corpus, queries = planted_gap_suite(n_docs=n_docs, n_queries=n_queries, seed=7)
    save_corpus(corpus, tmp_path / "corpus.jsonl")
    save_qa(planted_qa_pairs(queries), tmp_path / "qa.jsonl")
    config = {
        "corpus": "corpus.jsonl",
        "qa": "qa.jsonl",
        "protocol": "retrieval",
        "stack": "dense",
        "cutoffs": [1, 3, 5, 10, 20, 50, 100],
        "provider": {"kind": "deterministic", "seed": 13, "dim": 64},
        "output": {"csv": "report.csv", "json": "report.json"},
        "seed": 13,
    }
    config.update(config_overrides)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config))
    return path, corpus, queries


def test_build_context_modes(tmp_path):
    _, corpus, items = _mcq_workspace(tmp_path, n_items=2)
    item = items[0]
    assert build_context(item, "zero", corpus).documents == ()
    partial = build_context(item, "partial", corpus)
    assert partial.documents == (corpus[item.doc_a_id].text,)
    full = build_context(item, "full", corpus)
    assert full.documents == (corpus[item.doc_a_id].text, corpus[item.doc_b_id].text)


def test_build_context_unknown_mode_and_doc(tmp_path):
    _, corpus, items = _mcq_workspace(tmp_path, n_items=2)
    with pytest.raises(GraphirError):
        build_context(items[0], "half", corpus)
    from graphir.corpus import Corpus

    with pytest.raises(GraphirError):
        build_context(items[0], "full", Corpus({}))


def test_render_prompt_shape(tmp_path):
    _, corpus, items = _mcq_workspace(tmp_path, n_items=2)
    item = items[0]
    zero = render_prompt(item, build_context(item, "zero", corpus))
    assert "Context:" not in zero
    assert "insufficient" not in zero
    partial = render_prompt(item, build_context(item, "partial", corpus))
    assert "Context:" in partial and "insufficient" in partial
    # options rendered 1-based, one line each, abstain included
    for i, option in enumerate(item.options, start=1):
        assert f"{i}. {option}" in partial
    assert partial == render_prompt(item, build_context(item, "partial", corpus))


def test_extract_choice():
    assert extract_choice("3", 5) == 3
    assert extract_choice(" Answer: 2.", 5) == 2
    assert extract_choice("I cannot say", 5) is None
    assert extract_choice("out of 10 options I pick 3", 5) == 3
    assert extract_choice("0", 5) is None
    assert extract_choice("6", 5) is None
    with pytest.raises(GraphirError):
        extract_choice("1", 1)


def test_load_run_config_resolves_paths_and_env_seed(tmp_path, monkeypatch):
    path, _, _ = _retrieval_workspace(tmp_path)
    cfg = load_run_config(path)
    assert cfg.seed == 13
    assert cfg.corpus.endswith("corpus.jsonl")
    monkeypatch.setenv("SFS_SEED", "99")
    cfg = load_run_config(path)
    assert cfg.seed == 99
    assert cfg.provider["seed"] == 13  # explicit provider seed wins
    monkeypatch.setenv("SFS_SEED", "not-a-number")
    with pytest.raises(RunConfigError):
        load_run_config(path)


def test_run_config_validation(tmp_path):
    path, _, _ = _retrieval_workspace(tmp_path)
    good = load_run_config(path)
    import dataclasses

    with pytest.raises(RunConfigError, match="strictly increasing"):
        dataclasses.replace(good, cutoffs=(10, 5)).validate()
    with pytest.raises(RunConfigError, match="stack"):
        dataclasses.replace(good, stack="grep").validate()
    with pytest.raises(RunConfigError, match="dense"):
        dataclasses.replace(good, stack="bm25", reranker="sar").validate()
    with pytest.raises(RunConfigError, match="not found"):
        dataclasses.replace(good, corpus=str(tmp_path / "nope.jsonl")).validate()
    with pytest.raises(RunConfigError, match="context_modes"):
        dataclasses.replace(good, context_modes=("half",)).validate()
    with pytest.raises(RunConfigError, match="provider"):
        dataclasses.replace(good, provider={"kind": "psychic"}).validate()


def test_rule_mock_is_safe_and_accurate(tmp_path):
    path, _, items = _mcq_workspace(tmp_path)
    cfg = load_run_config(path)
    result = run_safety_experiment(cfg, RuleAnswerClient())
    assert result.per_mode["partial"].accuracy == 1.0
    assert result.per_mode["full"].accuracy == 1.0
    assert result.per_mode["full"].abstention_rate == 0.0
    assert result.per_mode["partial"].abstention_rate == 1.0
    assert result.safety_rate == 1.0
    assert (tmp_path / "safety.csv").exists()
    assert (tmp_path / "safety.json").exists()


def test_always_answer_mock_fails_partial(tmp_path):
    path, _, items = _mcq_workspace(tmp_path)
    cfg = load_run_config(path)
    scripted = ScriptedAnswerClient({it.qid: str(it.answer_full) for it in items})
    result = run_safety_experiment(cfg, scripted)
    assert result.per_mode["full"].accuracy == 1.0
    assert result.per_mode["partial"].accuracy == 0.0
    assert result.safety_rate == 0.0


def test_undecodable_mock(tmp_path):
    path, _, items = _mcq_workspace(tmp_path)
    cfg = load_run_config(path)
    mumbling = ScriptedAnswerClient({it.qid: "no comment" for it in items})
    result = run_safety_experiment(cfg, mumbling)
    for mode in ("zero", "partial", "full"):
        assert result.per_mode[mode].undecodable_rate == 1.0
        assert result.per_mode[mode].accuracy == 0.0


class FlakyClient:
    """Fails the first call for every qid, succeeds on the retry."""

    def __init__(self, items):
        self._answers = {it.qid: str(it.answer_full) for it in items}
        self._seen = set()

    def answer(self, qid, prompt):
        key = (qid, prompt)
        if key not in self._seen:
            self._seen.add(key)
            raise TransportError("first try always fails")
        return self._answers[qid]


class DeadClient:
    def __init__(self, dead_qids):
        self.dead = set(dead_qids)

    def answer(self, qid, prompt):
        if qid in self.dead:
            raise TransportError("gone")
        return "1"


def test_retry_once_then_succeed(tmp_path):
    path, _, items = _mcq_workspace(tmp_path, context_modes=["full"])
    cfg = load_run_config(path)
    result = run_safety_experiment(cfg, FlakyClient(items))
    assert result.per_mode["full"].n_failed == 0
    assert result.per_mode["full"].accuracy == 1.0


def test_failed_items_excluded_from_denominator(tmp_path):
    path, _, items = _mcq_workspace(tmp_path, n_items=10, context_modes=["full"])
    cfg = load_run_config(path)
    dead = {items[0].qid, items[3].qid}
    correct_in_rest = sum(1 for it in items if it.qid not in dead and it.answer_full == 1)
    result = run_safety_experiment(cfg, DeadClient(dead))
    mode = result.per_mode["full"]
    assert mode.n_failed == 2
    assert mode.n_scored == 8
    assert mode.accuracy == pytest.approx(correct_in_rest / 8)


def test_safety_runs_are_byte_identical(tmp_path):
    path, _, _ = _mcq_workspace(tmp_path)
    cfg = load_run_config(path)
    run_safety_experiment(cfg, RuleAnswerClient())
    first_csv = (tmp_path / "safety.csv").read_bytes()
    first_json = (tmp_path / "safety.json").read_bytes()
    run_safety_experiment(cfg, RuleAnswerClient())
    assert (tmp_path / "safety.csv").read_bytes() == first_csv
    assert (tmp_path / "safety.json").read_bytes() == first_json


def test_concurrent_safety_run_matches_sequential(tmp_path):
    path, _, _ = _mcq_workspace(tmp_path, max_concurrency=4)
    cfg = load_run_config(path)
    result = run_safety_experiment(cfg, RuleAnswerClient())
    parallel_csv = (tmp_path / "safety.csv").read_bytes()
    import dataclasses

    sequential = dataclasses.replace(cfg, max_concurrency=1)
    run_safety_experiment(sequential, RuleAnswerClient())
    assert (tmp_path / "safety.csv").read_bytes() == parallel_csv
    assert result.safety_rate == 1.0


def test_sar_beta_zero_report_equals_dense(tmp_path):
    base_path, _, _ = _retrieval_workspace(tmp_path)
    dense_report = run_retrieval_experiment(load_run_config(base_path))

    sar_dir = tmp_path / "sar0"
    sar_dir.mkdir()
    sar_path, _, _ = _retrieval_workspace(
        sar_dir, reranker="sar", sar={"seed_count": 10, "beta": 0.0}
    )
    sar_report = run_retrieval_experiment(load_run_config(sar_path))
    assert sar_report.means == dense_report.means
    assert sar_report.per_query == dense_report.per_query


def test_wrrf_uniform_equals_rrf_metrics(tmp_path):
    rrf_dir = tmp_path / "rrf"
    rrf_dir.mkdir()
    rrf_path, _, _ = _retrieval_workspace(rrf_dir, stack="rrf", fusion={"k": 5.0})
    wrrf_dir = tmp_path / "wrrf"
    wrrf_dir.mkdir()
    wrrf_path, _, _ = _retrieval_workspace(
        wrrf_dir, stack="wrrf", fusion={"k": 5.0, "weights": [0.5, 0.5]}
    )
    rrf_report = run_retrieval_experiment(load_run_config(rrf_path))
    wrrf_report = run_retrieval_experiment(load_run_config(wrrf_path))
    assert rrf_report.per_query == wrrf_report.per_query


def test_retrieval_runs_are_byte_identical(tmp_path):
    path, _, _ = _retrieval_workspace(tmp_path)
    cfg = load_run_config(path)
    run_retrieval_experiment(cfg)
    first = (tmp_path / "report.csv").read_bytes()
    run_retrieval_experiment(cfg)
    assert (tmp_path / "report.csv").read_bytes() == first


def test_precomputed_provider_reproduces_deterministic_run(tmp_path):
    path, corpus, queries = _retrieval_workspace(tmp_path)
    baseline = run_retrieval_experiment(load_run_config(path))

    from graphir.dense import DeterministicProvider, embed, save_vectors_file

    provider = DeterministicProvider(seed=13, dim=64)
    pre_dir = tmp_path / "pre"
    pre_dir.mkdir()
    ids = corpus.ids()
    save_vectors_file(
        dict(zip(ids, embed(provider, [corpus[d].text for d in ids]))),
        pre_dir / "docvecs.jsonl",
    )
    save_vectors_file(
        {q.qid: embed(provider, [q.text])[0] for q in queries},
        pre_dir / "queryvecs.jsonl",
    )
    pre_path, _, _ = _retrieval_workspace(
        pre_dir,
        provider={
            "kind": "precomputed",
            "path": str(pre_dir / "docvecs.jsonl"),
            "query_path": str(pre_dir / "queryvecs.jsonl"),
        },
    )
    pre_report = run_retrieval_experiment(load_run_config(pre_path))
    assert pre_report.per_query == baseline.per_query


def test_precomputed_provider_requires_query_vectors(tmp_path):
    path, corpus, _ = _retrieval_workspace(tmp_path)
    from graphir.dense import det_embed, save_vectors_file

    save_vectors_file(
        {d: np.array(det_embed(corpus[d].text, 13, 64)) for d in corpus.ids()},
        tmp_path / "docvecs.jsonl",
    )
    bad_path, _, _ = _retrieval_workspace(
        tmp_path, provider={"kind": "precomputed", "path": str(tmp_path / "docvecs.jsonl")}
    )
    with pytest.raises(RunConfigError, match="query_path"):
        load_run_config(bad_path)


DYING_SERVER = """
import json, sys

budget = int(sys.argv[1])
for line in sys.stdin:
    req = json.loads(line)
    if req.get("op") == "info":
        print(json.dumps({"dim": 8, "name": "dying"}), flush=True)
        continue
    if budget <= 0:
        sys.exit(1)
    budget -= 1
    vecs = [[float(len(t) % 5 + i + 1) for i in range(8)] for t in req["texts"]]
    print(json.dumps({"id": req["id"], "vectors": vecs}), flush=True)
"""


def test_provider_failure_writes_partial_results(tmp_path):
    import sys

    server = tmp_path / "dying_server.py"
    server.write_text(DYING_SERVER)
    # budget 3: one corpus batch plus two per-query embeds, then death
    cmd = f"{sys.executable} {server} 3"
    path, _, _ = _retrieval_workspace(
        tmp_path, n_docs=60, n_queries=10, provider={"kind": "external", "cmd": cmd}
    )
    cfg = load_run_config(path)
    with pytest.raises(TransportError):
        run_retrieval_experiment(cfg)
    partial = json.loads((tmp_path / "report.json").read_text())
    assert partial["meta"]["incomplete"] is True
    assert partial["meta"]["completed_queries"] == 2
    assert partial["meta"]["total_queries"] == 10
    assert len(partial["per_query"]["recall@10"]) == 2


def test_dense_vs_sar_deltas_match_brute_rerun(tmp_path):
    """End-to-end oracle: recompute both pipelines from raw parts."""
    path, corpus, queries = _retrieval_workspace(tmp_path)
    dense_report = run_retrieval_experiment(load_run_config(path))

    sar_dir = tmp_path / "sar"
    sar_dir.mkdir()
    sar_path, _, _ = _retrieval_workspace(
        sar_dir, reranker="sar", sar={"seed_count": 10, "beta": 0.5}
    )
    sar_cfg = load_run_config(sar_path)
    sar_report = run_retrieval_experiment(sar_cfg)
    delta = sar_report.means["recall@10"] - dense_report.means["recall@10"]

    # brute rerun with raw numpy and the reference reranker from test_sar
    from graphir.dense import DeterministicProvider, det_embed
    from graphir.graph import build_graph

    graph = build_graph(corpus)
    ids = corpus.ids()
    matrix = np.array([det_embed(corpus[d].text, 13, 64) for d in ids])
    brute_dense_recall = []
    brute_sar_recall = []
    for q in queries:
        qv = np.array(det_embed(q.text, 13, 64))
        sims = matrix @ qv
        order = sorted(range(len(ids)), key=lambda i: (-sims[i], ids[i]))
        dense_ids = [ids[i] for i in order]
        gold = set(q.gold)
        brute_dense_recall.append(len(gold & set(dense_ids[:10])) / len(gold))

        unit_entries = [(ids[i], (float(sims[i]) + 1.0) / 2.0) for i in order]
        reranked = test_sar._brute_sar(unit_entries, graph, sar_cfg.sar)
        rerank_ids = [d for d, _ in reranked]
        brute_sar_recall.append(len(gold & set(rerank_ids[:10])) / len(gold))

    brute_delta = sum(brute_sar_recall) / len(queries) - sum(brute_dense_recall) / len(queries)
    assert delta == pytest.approx(brute_delta, abs=1e-12)
    assert dense_report.means["recall@10"] == pytest.approx(
        sum(brute_dense_recall) / len(queries), abs=1e-12
    )
