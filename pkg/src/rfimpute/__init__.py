"""Random-forest missing-data imputation, amputation, and benchmarking."""

from .ampute import (
    InducedMask,
    MissingnessSpec,
    induce,
    induce_mar,
    induce_mcar,
    induce_nmar,
)
from .bench import (
    BenchReport,
    DatasetSource,
    ExperimentPlan,
    correlation_groups,
    run_plan,
    simulate_equicorrelated,
    simulate_regression_benchmark,
    table_one_cells,
)
from .errors import (
    AllMissingError,
    ConfigError,
    DegenerateBaselineError,
    EmptyDataError,
    InsufficientColumnsError,
    MechanismError,
    NoCellsError,
    ParseError,
    RfImputeError,
)
from .forest import (
    ForestConfig,
    ForestModel,
    ProximityMatrix,
    SplitRule,
    assign_with_otf,
    grow_forest,
    load_forest,
    proximity,
    route_table,
    save_forest,
    terminal_impute_otf,
)
from .impute import (
    ImputationTrace,
    ImputeSpec,
    impute,
    impute_knn,
    impute_mforest,
    impute_otf,
    impute_proximity,
    impute_unsupervised,
    strawman,
)
from .metrics import ImputationScore, relative_error, score, table_change
from .table import (
    Column,
    DatasetStats,
    MixedTable,
    correlation_rho,
    dataset_stats,
    read_csv,
    write_csv,
)

__version__ = "0.1.0"
