"""One-shot federated-learning model-market simulator.

Parties train small classifiers on partitioned data and upload them to a
market store; the library selects ensemble teams from the store (including
a data-free diversity-based pipeline and the usual baselines), runs
size-weighted voting inference, and provides diversity and exhaustive-
inspection analytics alongside a CLI that drives whole experiments.
"""

from .analysis import (
    InspectionResult,
    ReportBundle,
    ReportRow,
    SweepSeries,
    binary_disagreement,
    cohens_kappa,
    complete_inspection,
    emit_report,
    k_sweep,
    team_diversity,
)
from .clustering import ClusterAssignment, cluster
from .config import ExperimentConfig, load_config, parse_config
from .data import (
    Dataset,
    PartitionPlan,
    PartitionSpec,
    label_distributions,
    load_csv,
    make_synthetic,
    partition,
)
from .ensemble import VoteResult, evaluate_team, fuse, vote
from .errors import (
    ConfigError,
    ConflictError,
    ConvergenceError,
    IntegrityError,
    InvalidInputError,
    ModelMarketError,
    NotFoundError,
    ParseError,
    PartitionError,
    ResourceError,
    StorageError,
    TrainingError,
)
from .linalg import ScalerParams, fit_apply_scaler, kernel_pca, pca, sym_eigen
from .market import MarketStore, ModelRecord
from .selection import (
    EnsembleTeam,
    RepresentationMatrix,
    SelectionConfig,
    baseline_select,
    dedes_select,
    dedes_select_debug,
    outlier_filter,
    represent,
)
from .training import (
    ModelParams,
    TrainConfig,
    TrainResult,
    accuracy,
    predict,
    train_local,
    train_oracle,
)

__version__ = "0.1.0"
