"""Structure-aware reranking: citation-guided relevance propagation.

The top dense-retrieval results act as voting seeds. Each seed passes its
dense score along its citation edges to the documents it cites, with two
logarithmic degree penalties damping the vote: a seed that cites many things
is a weak voter, and a target cited by everything is a generic hub. For a
candidate n with seed set S:

    bonus(n) = (1 / pen(n)) * sum over seeds s citing n of score(s) / pen(s)

where pen(x) = log(degree(x) + 1), the seed degree is its fan-out inside the
induced one-hop subgraph, and the candidate degree is its global in-degree.
The final score applies the bonus through residual fusion,

    final(n) = dense(n) + beta * bonus(n) * (1 - dense(n))

so low-scored but structurally connected documents get lifted while documents
the retriever is already confident about barely move. Dense scores must live
in [0, 1]; map raw cosines with :func:`cosine_to_unit` first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .errors import SarError, UnknownNodeError
from .fusion import Ranking
from .graph import CitationGraph

_DIRECTIONS = ("out", "in", "both")
_SCOPES = ("view", "global")


@dataclass(frozen=True)
class SarConfig:
    seed_count: int = 10
    beta: float = 0.5
    direction: str = "out"
    clamp_bonus: bool = True
    log_base: float = math.e
    # Which graph the seed penalty degree comes from: the induced one-hop
    # view (default) or the seed's full-graph out-degree. Ablation switch.
    seed_degree_scope: str = "view"

    def __post_init__(self):
        if self.seed_count < 1:
            raise SarError(f"seed_count must be >= 1, got {self.seed_count}")
        if self.beta < 0:
            raise SarError(f"beta must be >= 0, got {self.beta}")
        if self.direction not in _DIRECTIONS:
            raise SarError(f"direction must be one of {_DIRECTIONS}, got {self.direction!r}")
        if not self.log_base > 1.0:
            raise SarError(f"log_base must be > 1, got {self.log_base}")
        if self.seed_degree_scope not in _SCOPES:
            raise SarError(
                f"seed_degree_scope must be one of {_SCOPES}, got {self.seed_degree_scope!r}"
            )

    def penalty(self, degree: int) -> float:
        return math.log(degree + 1) / math.log(self.log_base)


@dataclass(frozen=True)
class SubgraphView:
    """One-hop voting neighborhood induced by the seed set.

    ``candidates`` maps each reachable document to the seeds voting for it.
    ``local_out_degree`` is each seed's fan-out within the view (how many
    distinct documents it votes for); ``global_in_degree`` comes from the
    full graph and is floored at 1 so the hub penalty stays defined when the
    ablation directions traverse edges backwards.
    """

    seeds: tuple[tuple[str, float], ...]
    candidates: dict[str, frozenset[str]]
    local_out_degree: dict[str, int]
    global_in_degree: dict[str, int]

    def seed_scores(self) -> dict[str, float]:
        return {s: v for s, v in self.seeds}


def induce_subgraph(dense: Ranking, graph: CitationGraph, cfg: SarConfig) -> SubgraphView:
    """Take the top seeds from the dense ranking and expand one hop.

    Seed-to-seed edges are kept, so a seed cited by another seed is also a
    candidate. Raises :class:`UnknownNodeError` for seeds missing from the
    graph.
    """
    if len(dense) == 0:
        raise SarError("dense ranking is empty")
    seeds = dense.entries[: cfg.seed_count]
    for seed_id, _ in seeds:
        if seed_id not in graph.nodes:
            raise UnknownNodeError(seed_id)

    candidates: dict[str, set[str]] = {}
    fanout: dict[str, int] = {}
    for seed_id, _ in seeds:
        reached = graph.neighbors(seed_id, direction=cfg.direction, hops=1)
        if cfg.seed_degree_scope == "global":
            fanout[seed_id] = graph.degree(seed_id, "out")
        else:
            fanout[seed_id] = len(reached)
        for target in reached:
            candidates.setdefault(target, set()).add(seed_id)

    global_in = {n: max(graph.degree(n, "in"), 1) for n in candidates}
    return SubgraphView(
        seeds=tuple(seeds),
        candidates={n: frozenset(v) for n, v in sorted(candidates.items())},
        local_out_degree=fanout,
        global_in_degree=global_in,
    )


def structural_bonus(view: SubgraphView, candidate: str, cfg: SarConfig) -> float:
    """Degree-penalized sum of seed votes received by ``candidate``."""
    if candidate not in view.candidates:
        raise SarError(f"{candidate!r} is not a candidate in this view")
    scores = view.seed_scores()
    votes = 0.0
    for seed_id in sorted(view.candidates[candidate]):
        votes += scores[seed_id] / cfg.penalty(view.local_out_degree[seed_id])
    bonus = votes / cfg.penalty(view.global_in_degree[candidate])
    if cfg.clamp_bonus:
        bonus = min(bonus, 1.0)
    return bonus


def cosine_to_unit(ranking: Ranking) -> Ranking:
    """Map cosine scores from [-1, 1] to [0, 1]; order is unchanged."""
    return Ranking(ranking.query_id, tuple((d, (s + 1.0) / 2.0) for d, s in ranking.entries))


def sar_rerank(
    dense: Ranking,
    graph: CitationGraph,
    cfg: SarConfig = SarConfig(),
    extra_scores: Mapping[str, float] | None = None,
) -> Ranking:
    """Apply residual fusion of structural bonuses onto a dense ranking.

    Candidates reachable from the seeds get the fused score; everything else
    keeps its dense score. Candidates absent from ``dense`` take their dense
    score from ``extra_scores`` (pass a full exhaustive scan to make every
    score available) and default to 0.0. With beta = 0 the input ranking is
    returned untouched: the gate closes and no candidate is admitted or
    rescored.
    """
    _check_unit_scores(d for _, d in dense.entries)
    if extra_scores:
        _check_unit_scores(extra_scores.values())
    if cfg.beta == 0:
        return dense

    view = induce_subgraph(dense, graph, cfg)
    base = dense.scores()
    for candidate in view.candidates:
        if candidate not in base:
            base[candidate] = float(extra_scores.get(candidate, 0.0)) if extra_scores else 0.0

    final = dict(base)
    for candidate in view.candidates:
        bonus = structural_bonus(view, candidate, cfg)
        s = base[candidate]
        final[candidate] = s + cfg.beta * bonus * (1.0 - s)
    return Ranking.from_scores(dense.query_id, final)


def _check_unit_scores(scores) -> None:
    for s in scores:
        if not 0.0 <= s <= 1.0:
            raise SarError(
                f"dense score {s} outside [0, 1]; map cosine rankings with "
                "cosine_to_unit() before reranking"
            )
