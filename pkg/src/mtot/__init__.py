"""Multiple tensor-on-tensor regression: solver, tuning, PCR baseline, generators, metrics."""

from .errors import ConfigError, NumericalError
from .metrics import MetricReport, msee, mspe, smspe
from .pcr import PcrModel, pcr_cv, pcr_fit, pcr_predict
from .simulate import GeneratedData, KernelSpec, SimSpec, bspline_basis, generate, gp_sample
from .solver import (
    Dataset,
    FitConfig,
    MtotModel,
    assemble_coefficients,
    fit,
    loss,
    predict,
)
from .tuning import CvReport, RankGrid, build_grid, cross_validate, make_rank_grid, numerical_rank

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "NumericalError",
    "Dataset",
    "FitConfig",
    "MtotModel",
    "fit",
    "predict",
    "loss",
    "assemble_coefficients",
    "CvReport",
    "RankGrid",
    "build_grid",
    "make_rank_grid",
    "numerical_rank",
    "cross_validate",
    "PcrModel",
    "pcr_fit",
    "pcr_predict",
    "pcr_cv",
    "SimSpec",
    "GeneratedData",
    "KernelSpec",
    "generate",
    "gp_sample",
    "bspline_basis",
    "MetricReport",
    "smspe",
    "mspe",
    "msee",
    "__version__",
]
