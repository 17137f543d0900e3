"""Simultaneous estimation of several optical phases.

Submodules: ``hilbert`` (Fock states), ``probes`` (probe families),
``fisher`` (FI/QFI and bounds), ``measure`` (POVMs), ``circuits`` (linear
optics), ``estimate`` (SMC and MLE) and ``bench`` (scenario runner).
"""

from .fisher import (
    CostMatrix,
    InfoMatrix,
    ProbabilityModel,
    empirical_fi,
    fi_matrix,
    inverse_bound,
    qfi_matrix,
    scaling_table,
    weighted_bound,
)
from .hilbert import FockState, OccupationVector, apply_phases, covariance_matrix, wrap_phase
from .measure import Povm, born_model, optimal_povm, probe_adapted_povm
from .probes import GeneralizedNoonSpec, make_generalized_noon, make_noon, optimal_alpha_sq

__all__ = [
    "CostMatrix",
    "FockState",
    "GeneralizedNoonSpec",
    "InfoMatrix",
    "OccupationVector",
    "Povm",
    "ProbabilityModel",
    "apply_phases",
    "born_model",
    "covariance_matrix",
    "empirical_fi",
    "fi_matrix",
    "inverse_bound",
    "make_generalized_noon",
    "make_noon",
    "optimal_alpha_sq",
    "optimal_povm",
    "probe_adapted_povm",
    "qfi_matrix",
    "scaling_table",
    "weighted_bound",
    "wrap_phase",
]
