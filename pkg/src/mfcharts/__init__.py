"""Phase-II monitoring of multivariate functional data.

Smoothing on cubic B-splines, multivariate functional PCA, Hotelling T2 and
SPE control charts with contributions, regression-adjusted charts for
scalar and functional responses, real-time monitoring on truncated domains
and a simulation generator.
"""

from .basis import BSplineBasis, SmoothFit, eval_basis, make_basis, penalty_matrix, select_lambda_gcv, smooth_penalized
from .charts import ChartFrame, contributions, control_charts_pca, empirical_limit, spe_statistic, t2_statistic
from .fof import FofModel, fit_fof_pc, predict_fof_pc, regr_cc_fof
from .mfd import MFD, FunctionalSummary, LongRecord, inner_product, mfd_from_grid, mfd_from_long, standardize
from .mfpca import PCAModel, fit_mfpca, project_scores, reconstruct
from .realtime import RealTimeFamily, fit_real_time, monitor_real_time, real_time_path, truncate_family
from .simgen import SimConfig, SimDataset, simulate_mfd, simulate_scenario
from .sof import SofModel, bootstrap_beta, control_charts_sof_pc, fit_sof_pc, predict_sof

__version__ = "0.1.0"

__all__ = [
    "BSplineBasis",
    "SmoothFit",
    "make_basis",
    "eval_basis",
    "penalty_matrix",
    "smooth_penalized",
    "select_lambda_gcv",
    "MFD",
    "FunctionalSummary",
    "LongRecord",
    "mfd_from_grid",
    "mfd_from_long",
    "standardize",
    "inner_product",
    "PCAModel",
    "fit_mfpca",
    "project_scores",
    "reconstruct",
    "ChartFrame",
    "t2_statistic",
    "spe_statistic",
    "empirical_limit",
    "contributions",
    "control_charts_pca",
    "SofModel",
    "fit_sof_pc",
    "predict_sof",
    "control_charts_sof_pc",
    "bootstrap_beta",
    "FofModel",
    "fit_fof_pc",
    "predict_fof_pc",
    "regr_cc_fof",
    "RealTimeFamily",
    "truncate_family",
    "fit_real_time",
    "monitor_real_time",
    "real_time_path",
    "SimConfig",
    "SimDataset",
    "simulate_mfd",
    "simulate_scenario",
]
