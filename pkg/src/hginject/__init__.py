"""Node-injection attacks on hypergraph neural networks.

The pipeline: build a hypergraph from node features or a citation graph,
train a two-layer surrogate, score nodes by cycle ratio to pick the elite
node and its hyperedges, sample injected features from a KDE over the elite
node's feature values, refine them through the surrogate's weights, and
optimize a small generator head against a hinge-plus-distance loss. Rounding
out the package: detectors (PCA reconstruction error, histogram outlier
scores), ablation variants, a random-injection baseline, and an experiment
CLI that writes CSV/JSON artifacts and figures.

All randomness flows through numpy's default_rng (PCG64); fixing a seed
fixes every artifact byte for byte.
"""

__version__ = "0.1.0"

from .attack import (
    AttackConfig,
    AttackResult,
    AttackedHypergraph,
    attack_loss,
    attacked_forward,
    inject,
    random_injection_baseline,
    run_attack,
)
from .datasets import Dataset, Splits, load_planetoid, make_splits, row_normalize, save_planetoid
from .elite import (
    CycleStats,
    EliteSelection,
    budget_subset,
    centrality_elite,
    cycle_ratios,
    select_elite,
)
from .errors import (
    BudgetError,
    ConfigError,
    DataError,
    DimensionError,
    DivergenceError,
    EmptyInputError,
    HginjectError,
    InjectionError,
    NoEliteError,
    ParseError,
    ProtocolError,
    RefinementError,
    SchemaError,
    StratificationError,
)
from .evaluation import (
    DetectionReport,
    ablation_variant,
    evaluate_under_detection,
    hbos_detect,
    pca_detect,
    remove_injected,
)
from .generator import (
    GeneratorNet,
    KdeModel,
    RefinementContext,
    binarize_features,
    feature_bounds,
    fit_kde,
    generate,
    init_generator,
    refine,
    sample_preliminary,
)
from .hgnn import (
    SurrogateParams,
    TrainConfig,
    cross_entropy_feature_gradient,
    cross_entropy_loss,
    forward,
    hidden_embeddings,
    init_params,
    log_softmax,
    misclassification_rate,
    normalized_adjacency,
    predict,
    train_surrogate,
)
from .hypergraph import Hypergraph, build_hor, build_knn, build_l1, clique_expand

__all__ = [
    "AttackConfig",
    "AttackResult",
    "AttackedHypergraph",
    "BudgetError",
    "ConfigError",
    "CycleStats",
    "DataError",
    "Dataset",
    "DetectionReport",
    "DimensionError",
    "DivergenceError",
    "EliteSelection",
    "EmptyInputError",
    "GeneratorNet",
    "HginjectError",
    "Hypergraph",
    "InjectionError",
    "KdeModel",
    "NoEliteError",
    "ParseError",
    "ProtocolError",
    "RefinementContext",
    "RefinementError",
    "SchemaError",
    "Splits",
    "StratificationError",
    "SurrogateParams",
    "TrainConfig",
    "ablation_variant",
    "attack_loss",
    "attacked_forward",
    "binarize_features",
    "budget_subset",
    "build_hor",
    "build_knn",
    "build_l1",
    "centrality_elite",
    "clique_expand",
    "cross_entropy_feature_gradient",
    "cross_entropy_loss",
    "cycle_ratios",
    "evaluate_under_detection",
    "feature_bounds",
    "fit_kde",
    "forward",
    "generate",
    "hbos_detect",
    "hidden_embeddings",
    "init_generator",
    "init_params",
    "inject",
    "load_planetoid",
    "log_softmax",
    "make_splits",
    "misclassification_rate",
    "normalized_adjacency",
    "pca_detect",
    "predict",
    "random_injection_baseline",
    "refine",
    "remove_injected",
    "row_normalize",
    "run_attack",
    "sample_preliminary",
    "save_planetoid",
    "select_elite",
    "train_surrogate",
]
