"""Pooled acoustic word embeddings and same-different evaluation."""

from .corpus import (
    AlignmentTable,
    FeatureArchive,
    WordSegment,
    filter_words,
    parse_alignments,
    read_feature_archive,
    slice_frames,
    write_alignments,
    write_feature_archive,
)
from .embed import (
    EmbeddingSet,
    Normalizer,
    PcaModel,
    PoolingMethod,
    apply_normalizer,
    embed_segments,
    fit_normalizer,
    fit_pca,
    pool,
    project_pca,
    read_embedding_set,
    subsample_indices,
    write_embedding_set,
)
from .errors import (
    AlignmentParseError,
    ArchiveFormatError,
    AwepoolError,
    ConsistencyError,
    DataError,
    ShapeMismatchError,
    UndefinedMetricError,
    UnknownUtteranceError,
    ValidationError,
)
from .harness import (
    ExperimentConfig,
    ResultRecord,
    SweepEntry,
    build_embeddings,
    export_projection_2d,
    generate_synthetic,
    run_experiment,
    select_best,
    sweep,
)
from .samediff import (
    SameDiffResult,
    ScoredPairs,
    auc_roc,
    average_precision,
    cosine_similarity,
    evaluate,
    pairwise_scores,
)

__version__ = "0.1.0"
