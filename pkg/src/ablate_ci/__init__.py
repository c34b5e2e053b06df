"""Randomized-ablation feature importance with confidence intervals.

Measure how much each feature matters to a fitted model by replacing its
values with draws from the feature's own empirical distribution and
averaging the resulting change in loss.  Alongside the point estimate, the
library quantifies uncertainty two ways: over the data distribution (every
ablated point is a sample) or over the ablation randomness alone (every
replicate average is a sample), with Student-t or normal intervals.

Typical use:

    from ablate_ci import (
        Dataset, LossSpec, fit_ols, draw_replacement_table,
        compute_delta_matrix, rv_samples, fd_samples, confidence_interval,
    )

or drive everything through ``RunConfig`` / ``run_pipeline`` (what the
``ablate-ci`` command does).
"""

__version__ = "0.1.0"

from .ablation import (
    DeltaMatrix,
    ReplacementTable,
    ablate_row,
    compute_delta_matrix,
    derive_seed,
    draw_replacement_table,
)
from .core import (
    AblationError,
    Dataset,
    IngestionError,
    InsufficientSamplesError,
    InvalidArgumentError,
    LossSpec,
    ModelContractError,
    ModelInterface,
    RiskReport,
    SingularFitError,
    compute_loss,
    fixed_data_risk,
)
from .estimator import SampleSequence, fd_samples, point_estimate, rv_samples
from .io import RunConfig, RunResult, load_csv, write_result
from .models import (
    ConstantModel,
    ExecModel,
    KNNModel,
    LinearModel,
    ModelSpec,
    build_model,
    exec_model,
    fit_constant,
    fit_knn,
    fit_ols,
    parse_model_spec,
)
from .oracle import CoverageReport, exact_fd_importance, simulate_coverage
from .uncertainty import (
    ImportanceEstimate,
    Interval,
    confidence_interval,
    mle_variance,
    normal_quantile,
    sem,
    student_t_cdf,
    t_quantile,
    unbiased_variance,
)

__all__ = [
    "__version__",
    "AblationError",
    "Dataset",
    "LossSpec",
    "ModelInterface",
    "RiskReport",
    "compute_loss",
    "fixed_data_risk",
    "IngestionError",
    "InsufficientSamplesError",
    "InvalidArgumentError",
    "ModelContractError",
    "SingularFitError",
    "ReplacementTable",
    "DeltaMatrix",
    "ablate_row",
    "compute_delta_matrix",
    "derive_seed",
    "draw_replacement_table",
    "SampleSequence",
    "point_estimate",
    "rv_samples",
    "fd_samples",
    "ImportanceEstimate",
    "Interval",
    "confidence_interval",
    "mle_variance",
    "unbiased_variance",
    "normal_quantile",
    "sem",
    "student_t_cdf",
    "t_quantile",
    "CoverageReport",
    "exact_fd_importance",
    "simulate_coverage",
    "ConstantModel",
    "LinearModel",
    "KNNModel",
    "ExecModel",
    "ModelSpec",
    "build_model",
    "exec_model",
    "fit_constant",
    "fit_ols",
    "fit_knn",
    "parse_model_spec",
    "RunConfig",
    "RunResult",
    "load_csv",
    "write_result",
]
