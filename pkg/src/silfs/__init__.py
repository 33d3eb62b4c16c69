"""Subgroup identification in linear models with latent factor structure.

The response is modelled as a subject-specific intercept drawn from a
small set of group centroids plus a factor-augmented sparse regression on
the covariates.  Factors are estimated by principal components; the
intercepts are clustered through a center-augmented penalty solved by
DC-ADMM (absolute distance) or cyclic coordinate descent (squared
distance).
"""

__version__ = "0.1.0"

from .errors import (ConvergenceWarning, DataError, InvalidArgumentError,  # noqa: E402
                     NumericalFailureError, SelectionFailureError, SilfsError)
from .factor_model import (Dataset, FactorDecomposition, eigenvalue_ratio,  # noqa: E402
                           estimate_factors, no_factors, select_num_factors)
from .numerics import (cluster_1d, lasso_cd, ridge_init,  # noqa: E402
                       select_ridge_lambda, soft_threshold)
from .objective import (SilfsFit, SolverConfig, assign_labels, car_penalty,  # noqa: E402
                        fitted_values, objective)
from .admm import dc_subgradient, fit_dc_admm  # noqa: E402
from .ccd import fit_ccd  # noqa: E402
from .pipeline import Prepared, factor_step, fit_solver, prepare  # noqa: E402
from .selection import SelectionReport, bic, gcv, select_k, select_lambdas, select_model  # noqa: E402
from .metrics import MetricsReport, rand_index, rmse_metrics, selection_metrics  # noqa: E402
from .simulation import (SyntheticDataset, generate, generate_collinearity_case,  # noqa: E402
                         generate_scenario_ab, generate_toy)
from .benchmark import ScenarioSpec, run_benchmark  # noqa: E402

__all__ = [
    "ConvergenceWarning", "DataError", "InvalidArgumentError", "NumericalFailureError",
    "SelectionFailureError", "SilfsError",
    "Dataset", "FactorDecomposition", "eigenvalue_ratio", "estimate_factors", "no_factors",
    "select_num_factors",
    "cluster_1d", "lasso_cd", "ridge_init", "select_ridge_lambda", "soft_threshold",
    "SilfsFit", "SolverConfig", "assign_labels", "car_penalty", "fitted_values", "objective",
    "dc_subgradient", "fit_dc_admm", "fit_ccd",
    "Prepared", "factor_step", "fit_solver", "prepare",
    "SelectionReport", "bic", "gcv", "select_k", "select_lambdas", "select_model",
    "MetricsReport", "rand_index", "rmse_metrics", "selection_metrics",
    "SyntheticDataset", "generate", "generate_collinearity_case", "generate_scenario_ab",
    "generate_toy",
    "ScenarioSpec", "run_benchmark",
]
