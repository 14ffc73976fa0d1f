"""Label-efficient antigenic similarity prediction for influenza A HA pairs.

The library turns haemagglutination-inhibition titre tables and protein
embeddings into a binary pair-classification problem (antigenically
Similar vs Variant), then measures how much supervision the classifiers
actually need: nested cross-validation over supervision ratios, with
self-training and graph label spreading consuming the pairs whose labels
were masked or never measured.
"""

from .classifiers import ClassifierSpec, train
from .config import (
    ConfigError,
    RunConfig,
    config_to_toml,
    load_config,
    parse_config,
    settings_from_config,
)
from .corpus import (
    Corpus,
    CorpusError,
    HITitreTable,
    Label,
    PairExample,
    StrainRecord,
    ThresholdConfig,
    archetti_horsfall,
    build_corpus,
    label_pair,
    read_corpus_csv,
    read_fasta,
    read_titres,
    write_corpus_csv,
    write_fasta,
)
from .experiment import (
    CellResult,
    FoldRecord,
    RunResult,
    RunSettings,
    ScoreRow,
    list_cells,
    run_experiment,
)
from .features import (
    EmbeddingError,
    EmbeddingStore,
    featurize_corpus,
    featurize_pair,
    load_embeddings,
    write_embeddings,
)
from .folds import FoldPlan, MaskPlan, make_folds, mask_labels
from .forest import RandomForest
from .grids import grid_search
from .labelspread import (
    LabelSpreadingSpec,
    SpreadResult,
    build_knn_graph,
    label_spread,
    normalize_adjacency,
    one_hot,
)
from .metrics import bootstrap_ci, bootstrap_ci_folds, f1_score, macro_class_f1
from .report import (
    ReportError,
    read_report_json,
    report_digest,
    write_flat_csv,
    write_report_json,
)
from .selftraining import PromotionRecord, SelfTrainingSpec, self_train
from .svm import SVM, smo_solve
from .synthetic import SyntheticSpec, make_synthetic

__version__ = "0.1.0"

__all__ = [
    "CellResult",
    "ClassifierSpec",
    "ConfigError",
    "Corpus",
    "CorpusError",
    "EmbeddingError",
    "EmbeddingStore",
    "FoldPlan",
    "FoldRecord",
    "HITitreTable",
    "Label",
    "LabelSpreadingSpec",
    "MaskPlan",
    "PairExample",
    "PromotionRecord",
    "RandomForest",
    "ReportError",
    "RunConfig",
    "RunResult",
    "RunSettings",
    "SVM",
    "ScoreRow",
    "SelfTrainingSpec",
    "SpreadResult",
    "StrainRecord",
    "SyntheticSpec",
    "ThresholdConfig",
    "archetti_horsfall",
    "bootstrap_ci",
    "bootstrap_ci_folds",
    "build_corpus",
    "build_knn_graph",
    "config_to_toml",
    "f1_score",
    "featurize_corpus",
    "featurize_pair",
    "grid_search",
    "label_pair",
    "label_spread",
    "list_cells",
    "load_config",
    "load_embeddings",
    "macro_class_f1",
    "make_folds",
    "make_synthetic",
    "mask_labels",
    "normalize_adjacency",
    "one_hot",
    "parse_config",
    "read_corpus_csv",
    "read_fasta",
    "read_report_json",
    "read_titres",
    "report_digest",
    "run_experiment",
    "self_train",
    "settings_from_config",
    "smo_solve",
    "train",
    "write_corpus_csv",
    "write_embeddings",
    "write_fasta",
    "write_flat_csv",
    "write_report_json",
]
