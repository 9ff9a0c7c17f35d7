"""Context retrieval experiments for named entity recognition on long documents."""

from .corpus import (
    Corpus,
    CorpusFormatError,
    Document,
    FoldSplit,
    Sentence,
    Token,
    entity_counts,
    length_histogram,
    load_corpus,
    save_corpus,
    split_folds,
)
from .metrics import (
    Entity,
    MetricsReport,
    evaluate,
    extract_entities,
    token_error_count,
)
from .oracle import (
    OracleConfig,
    OracleDecision,
    distance_distribution,
    oracle_rank,
    oracle_retrieve,
)
from .retrieval import (
    HEURISTICS,
    Bm25Params,
    ContextualExample,
    RankedCandidate,
    SentenceIndex,
    assemble_context,
    bm25_score,
    build_index,
    detect_nouns,
    retrieve_after,
    retrieve_before,
    retrieve_bm25,
    retrieve_random,
    retrieve_samenoun,
    retrieve_surrounding,
)
from .tagging import (
    ExternalProcessTagger,
    MemorizingTagger,
    ProtocolError,
    TagRequest,
    TagResponse,
    TaggingError,
    tag_with_context,
    train_memorizing,
)
from .experiments import (
    ExperimentConfig,
    ResultsTable,
    aggregate,
    run_experiment,
)

__all__ = [name for name in dir() if not name.startswith("_")]
