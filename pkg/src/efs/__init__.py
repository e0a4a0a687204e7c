"""Ensemble forward selection: randomized greedy fits, their exact weights, and df analysis."""
from efs._backend import BACKEND
from efs.analysis import (
    DfEstimate,
    ErrorDecomposition,
    EscapeDesign,
    MajorizationReport,
    build_escape_design,
    df_decomposition,
    df_monte_carlo,
    elastic_net_orthogonal,
    majorization_check,
    prediction_decomposition,
    training_gap,
)
from efs.greedy import (
    DesignMatrix,
    FeatureOrdering,
    FittedModel,
    SelectionPath,
    efs_base_fit,
    efs_ensemble_fit,
    efs_exact_orthogonal,
    fs_fit,
    orthonormal_design,
)
from efs.simlab import (
    ExperimentConfig,
    ExperimentResult,
    calibrate_sigma2,
    cv_select_m,
    gen_banded_gaussian,
    run_experiment,
)
from efs.weights import (
    AsymptoticWeightSpec,
    WeightTable,
    asymptotic_weight,
    enumerate_weights,
    exact_weight,
    exact_weight_table,
    limit_weight,
    logistic_approx,
    mc_weight_table,
    sandwich_bounds,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
