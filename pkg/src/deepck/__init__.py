"""Depth measurement, evidence-based mining, and candidate construction for
commonsense knowledge triples."""

from .backends import (
    BackendDescriptor,
    BigramBackend,
    CapabilityError,
    ContextOverflowError,
    EmbeddingBackend,
    NextTokenDistribution,
    TokenSequence,
    TrainableBigramBackend,
    WordVocab,
    chain_backend,
    token_rank,
    uniform_backend,
)
from .classifier import (
    AssembledInput,
    AssemblyError,
    ClassifierConfig,
    LinearHead,
    PoolingHead,
    PredictionBundle,
    assemble_input,
    baseline_triple_classify,
    classify_triple,
    forward,
    load_checkpoint,
    loss,
    predict_avg,
    predict_max,
    predict_vote,
    save_checkpoint,
    train,
    train_baseline,
)
from .depth import (
    DEEP_RANK_THRESHOLD,
    BinStat,
    DepthScore,
    RelationProfile,
    UndefinedCorrelationError,
    bin_statistics,
    depth_distribution,
    depth_rank,
    is_deep,
    pearson,
    perplexity,
    relation_depth_profile,
    score_triple,
    score_triples,
)
from .encoder import TorchEncoderBackend
from .evaluation import (
    DepthBandReport,
    EvalReport,
    evaluate,
    performance_by_depth,
    report_from_counts,
    sweep_k,
)
from .propagation import (
    Attribute,
    CandidateTriple,
    SaturationError,
    TaxonomyTree,
    beam_search,
    build_deep_candidates,
    generate_candidates,
    horizontal_propagate,
    negative_sample,
    train_generator,
    vertical_propagate,
)
from .retrieval import (
    Corpus,
    EvidencePair,
    EvidenceSet,
    find_sentences,
    ingest_corpus,
    overlap_score,
    select_evidence,
)
from .runconfig import ConfigError, RunConfig
from .triples import (
    LabeledTriple,
    RelationPhrase,
    RenderedSentence,
    TripleParseError,
    parse_triple_file,
    read_triple_file,
    render_template,
    rephrase_relation,
    write_triple_file,
)

__version__ = "0.1.0"
