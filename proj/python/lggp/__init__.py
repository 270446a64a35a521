"""Log-Gaussian gamma process estimation.

Thin Python layer over the C++ core: model evaluation, iterated posterior
linearization, NUTS-based fitting schemes, and prediction.
"""

from lggp._lggp import (
    Dataset,
    HyperPriorSpec,
    InferenceResult,
    InputGrid,
    InvalidInputError,
    KernelParams,
    Model,
    MomentState,
    NumericalFailureError,
    ProcessPrior,
    QuantileSummary,
    add_noise_diag,
    fit_direct_hmc,
    fit_pl,
    fit_pl_tempered,
    gamma_loglik,
    gamma_loglik_grad,
    gaussian_logpdf,
    gp_predict,
    iterate_pl,
    load_dataset,
    predict,
    preprocess_spectrum,
    save_dataset,
    se_covariance,
    simulate_lggp,
)

__all__ = [
    "Dataset",
    "HyperPriorSpec",
    "InferenceResult",
    "InputGrid",
    "InvalidInputError",
    "KernelParams",
    "Model",
    "MomentState",
    "NumericalFailureError",
    "ProcessPrior",
    "QuantileSummary",
    "add_noise_diag",
    "fit_direct_hmc",
    "fit_pl",
    "fit_pl_tempered",
    "gamma_loglik",
    "gamma_loglik_grad",
    "gaussian_logpdf",
    "gp_predict",
    "iterate_pl",
    "load_dataset",
    "predict",
    "preprocess_spectrum",
    "save_dataset",
    "se_covariance",
    "simulate_lggp",
]
