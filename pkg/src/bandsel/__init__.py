"""Hyperspectral-to-multispectral band selection for nitrogen-status classification."""

from .bandcluster import (
    ALLOWED_WIDTHS,
    Band,
    apply_band_windows,
    band_from_center,
    cluster_band,
    resolve_overlaps,
    within_window_selection,
)
from .classify import CvResult, QdaClassifier, cross_validate, stratified_folds, weighted_f1
from .dataset import (
    ClassThresholds,
    LabeledDataset,
    NitrogenLabel,
    SpectraTable,
    assign_classes,
    load_labels,
    load_spectra,
    merge_sensors,
    remove_outliers,
    write_labels_csv,
    write_spectra_csv,
)
from .ensemble import (
    EliminationTrace,
    RreRound,
    SubsetCvScorer,
    SubsetEvaluation,
    aggregate_ranks,
    evaluate_nested_subsets,
    fitness,
    recursive_ranker_elimination,
)
from .errors import BandselError, ConvergenceError, ParseError, ValidationError
from .pipeline import (
    ComparisonRow,
    PipelineConfig,
    Report,
    emit_artifacts,
    evaluate,
    load_config,
    prepare,
    run_full_pipeline,
    select,
)
from .ranking import RankVector, to_rank_vector
from .rankers import (
    RANKER_NAMES,
    AnovaFRanker,
    CcsaRanker,
    FeatureRanker,
    LassoPathRanker,
    RandomForestRanker,
    RankerConfig,
    ReliefFRanker,
    SvmRfeRanker,
    build_ranker_suite,
    rank_all,
)
from .synthgen import InformativeBand, SensorGrid, SynthConfig, generate
from .windowing import (
    CorrelationWindower,
    FeatureNormalizer,
    Normalizer,
    Window,
    WindowMap,
    apply_normalizer,
    apply_windows,
    build_windows,
    correlation_matrix,
    fit_normalizer,
)

__version__ = "0.1.0"
