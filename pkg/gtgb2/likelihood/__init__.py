from gtgb2.likelihood.compound import CompoundErrorParams, VEDLink, log_norm_const, compound_log_kernel
from gtgb2.likelihood.dataset import Dataset, DimensionError
from gtgb2.likelihood.frontier import FrontierBasis, FrontierSpec, Frontier, residuals
from gtgb2.likelihood.loglik import (
  obs_loglik, obs_loglik_batch, total_loglik, panel_loglik, panel_loglik_groups, group_log_integrals, residual_matrix
)
