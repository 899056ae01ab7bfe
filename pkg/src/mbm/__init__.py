"""Exact synthesis of multifractional Brownian motion and estimation of min h."""
from .errors import (
    ConfigError,
    DegeneratePath,
    DomainError,
    EmptyWindow,
    HurstSpecError,
    MbmError,
    NotPositiveSemidefinite,
    OutOfRange,
    ParameterDomainError,
    PathFormatError,
)
from .estim import (
    A1,
    A2,
    FilterSpec,
    LocalEstimateConfig,
    hmin_estimate,
    lambda_inverse,
    lambda_of_H,
    local_estimate,
    psi,
    quad_variation,
    ratio_stat,
    rho_filter,
)
from .formats import read_path_csv, write_path_csv
from .hurst import (
    HurstFunction,
    make_constant,
    make_cusp,
    make_plateau,
    make_sine,
    parse_hurst_spec,
)
from .kernel import c_coef, expected_qv, increment_cov, moment_report, qv_variance, r_cov, u_ratio
from .lab import ExperimentConfig, Study, run_study, write_report
from .synth import PathSample, build_cov_matrix, cholesky_factor, sample_path

__version__ = "0.1.0"
