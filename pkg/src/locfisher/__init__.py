"""Quantum and classical Fisher information for localizing incoherent point sources.

Positions are in units of ``alpha = chi / (2 sigma)``.
"""

from .cfim import DetectionKind, DetectionModel, direct_imaging_cfim, spade_cfim, spade_probabilities
from .errors import (
    CoincidentSources,
    ConditioningFailure,
    ConfigurationError,
    ConvergenceFailure,
    DegenerateFit,
    DegenerateQubitState,
    EmptyConfig,
    LocFisherError,
    NonFiniteInput,
    NonpositiveWeight,
    NumericalFailure,
    QuadratureNonConvergence,
    SingularTransform,
    TruncationInsufficient,
)
from .gram import blockwise_inverse, build_gram_blocks
from .model import FisherKind, FisherMatrix, PhotonBudget, PSFKind, PSFModel, SourceConfiguration, validate
from .qfim_analytic import analytic_qfim, auto_dps
from .qfim_numeric import build_truncated_state, converged_qfim, numeric_qfim
from .qubit import eigen_core, qubit_core, qubit_qfim
from .spectra import crb_bound, eigen_report, fit_scaling, reparameterize

__version__ = "0.1.0"
