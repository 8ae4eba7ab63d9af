"""Imputation of a missing univariate response with a Bayesian Gaussian
linear cluster-weighted model fitted by Gibbs sampling."""

from .exceptions import (CwmImputeError, DataIntegrityError, DegenerateFitError, FileError,
                         NotSpdError,
                         NumericalError, SingularFitError, ValidationError)
from .gibbs import Chain, GibbsState, Hyperparams, McmcConfig, run_chain
from .model import LcwmModel, MissingDataset, fmm_to_lcwm, lcwm_to_fmm

__version__ = "0.1.0"

__all__ = [
    "Chain", "CwmImputeError", "DataIntegrityError", "DegenerateFitError", "FileError", "GibbsState",
    "Hyperparams", "LcwmModel", "McmcConfig", "MissingDataset", "NotSpdError",
    "NumericalError", "SingularFitError", "ValidationError", "fmm_to_lcwm", "lcwm_to_fmm",
    "run_chain",
]
