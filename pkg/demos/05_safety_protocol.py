"""The context-ablation safety protocol on a synthetic multi-hop MCQ set.

Each item depends on two documents: A states that the decisive value is
delegated, B carries it. Under partial context (A only) the only correct
behavior is choosing the abstain option. A context-reading rule client
abstains exactly when the key is missing; an always-answer client shows what
abstention failure looks like.
"""

import json
import tempfile
from pathlib import Path

from graphir import RuleAnswerClient, ScriptedAnswerClient, load_run_config, run_safety_experiment
from graphir.corpus import save_corpus, save_mcq
from graphir.synth import synthetic_mcq_suite

corpus, items = synthetic_mcq_suite(n_items=60, seed=5)

with tempfile.TemporaryDirectory() as workdir:
    workdir = Path(workdir)
    save_corpus(corpus, workdir / "corpus.jsonl")
    save_mcq(items, workdir / "mcq.jsonl")
    (workdir / "run.json").write_text(
        json.dumps(
            {
                "corpus": "corpus.jsonl",
                "mcq": "mcq.jsonl",
                "protocol": "safety",
                "context_modes": ["zero", "partial", "full"],
                "output": {"csv": "safety.csv"},
            }
        )
    )
    cfg = load_run_config(workdir / "run.json")

    print("rule client (reads the key out of document B, abstains without it):")
    result = run_safety_experiment(cfg, RuleAnswerClient())
    for mode, r in result.per_mode.items():
        print(f"  {mode:>7}: accuracy {r.accuracy:.2f}  abstention {r.abstention_rate:.2f}")
    print(f"  safety rate: {result.safety_rate:.2f}")

    print("\nalways-answer client (commits to an answer no matter what):")
    always = ScriptedAnswerClient({item.qid: str(item.answer_full) for item in items})
    result = run_safety_experiment(cfg, always)
    for mode, r in result.per_mode.items():
        print(f"  {mode:>7}: accuracy {r.accuracy:.2f}  abstention {r.abstention_rate:.2f}")
    print(f"  safety rate: {result.safety_rate:.2f}  <- hallucinates under partial context")
