"""Generalized propose-test-release mechanisms with data-dependent privacy accounting."""

from ._accel import USING_NUMBA
from .errors import (
    BudgetOverflowError,
    DomainError,
    GenPtrError,
    InfeasibleCalibrationError,
    NumericalError,
)
from .mech_core import (
    DataDependentLoss,
    PrivacyBudget,
    RandomSource,
    RdpCurve,
    compose_dp,
    compose_rdp,
    laplace_data_dep_dp,
    rdp_to_dp,
    sample_noise,
    tail_bound,
)
from .ptr_engine import (
    DpTest,
    GenPtrSpec,
    PtrOutcome,
    classic_ptr,
    gen_ptr_budget,
    run_generalized_ptr,
    select_hyperparameters,
    tuner_budget,
    upper_bound_test,
)

__version__ = "0.1.0"

__all__ = [
    "USING_NUMBA",
    "BudgetOverflowError",
    "DomainError",
    "GenPtrError",
    "InfeasibleCalibrationError",
    "NumericalError",
    "DataDependentLoss",
    "PrivacyBudget",
    "RandomSource",
    "RdpCurve",
    "compose_dp",
    "compose_rdp",
    "laplace_data_dep_dp",
    "rdp_to_dp",
    "sample_noise",
    "tail_bound",
    "DpTest",
    "GenPtrSpec",
    "PtrOutcome",
    "classic_ptr",
    "gen_ptr_budget",
    "run_generalized_ptr",
    "select_hyperparameters",
    "tuner_budget",
    "upper_bound_test",
]
