"""Structure-aware retrieval and evaluation over citation-linked corpora.

The package covers the full loop: corpus loading and validation, citation
graph construction, sparse (BM25 / TF-IDF with Hangul jamo support) and dense
retrieval, rank fusion and Rocchio feedback, structure-aware reranking, IR
and QA metrics, and an experiment harness with a context-ablation safety
protocol.
"""

from .corpus import (
    Corpus,
    CorpusStats,
    Document,
    MCQItem,
    QAPair,
    ValidationReport,
    load_corpus,
    load_mcq,
    load_qa,
    save_corpus,
    validate_corpus,
)
from .dense import (
    DeterministicProvider,
    ExternalProvider,
    PrecomputedProvider,
    VectorIndex,
    build_knn_graph,
    build_vector_index,
    cosine_sim,
    det_embed,
    embed,
    knn_search,
    load_vectors_file,
    normalize,
    save_vectors_file,
)
from .errors import (
    CorpusFormatError,
    EmbeddingError,
    GraphirError,
    RankingError,
    RunConfigError,
    SarError,
    TransportError,
    UnknownNodeError,
    ValidationFailure,
)
from .fusion import (
    Ranking,
    RocchioConfig,
    RrfConfig,
    WrrfConfig,
    rocchio_expand,
    rrf_fuse,
    wrrf_fuse,
)
from .graph import (
    CitationGraph,
    EdgeKind,
    GraphBuildReport,
    RefPattern,
    build_graph,
    load_graph_edges,
    save_graph_edges,
)
from .harness import (
    ContextBundle,
    ExternalAnswerClient,
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
from .lexical import (
    Bm25Params,
    InvertedIndex,
    TokenizerConfig,
    bm25_search,
    build_index,
    decompose_syllable,
    tfidf_search,
    tokenize,
)
from .metrics import (
    GapProbe,
    GapProbeResult,
    MetricReport,
    gap_probe,
    mcq_accuracy,
    ndcg_at_k,
    one_hop_hit_rate,
    recall_at_k,
    rouge_scores,
)
from .sar import (
    SarConfig,
    SubgraphView,
    cosine_to_unit,
    induce_subgraph,
    sar_rerank,
    structural_bonus,
)

__version__ = "0.1.0"
