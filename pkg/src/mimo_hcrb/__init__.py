"""Hybrid Cramer-Rao bounds for coherent distributed MIMO radar localization
under Gaussian phase-synchronization errors."""

from .bounds import (
    BoundResult,
    ClosedFormVariant,
    compare_paths,
    crb_no_mismatch,
    hcrb_closed_form,
    hcrb_oracle,
    r_delta_inverse,
)
from .numerics import DEFAULT_POLICY, TolerancePolicy
from .scenario import (
    Scenario,
    SignalModel,
    circular_layout,
    load_scenario,
    load_scenario_file,
)

__version__ = "0.1.0"

__all__ = [
    "BoundResult",
    "ClosedFormVariant",
    "DEFAULT_POLICY",
    "Scenario",
    "SignalModel",
    "TolerancePolicy",
    "circular_layout",
    "compare_paths",
    "crb_no_mismatch",
    "hcrb_closed_form",
    "hcrb_oracle",
    "load_scenario",
    "load_scenario_file",
    "r_delta_inverse",
]
