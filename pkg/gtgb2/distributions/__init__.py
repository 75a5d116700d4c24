from gtgb2.distributions.params import GTParams, GB2Params, ParameterDomainError, INF, half_gt
from gtgb2.distributions.densities import (
  gt_logpdf, gb2_logpdf, gt_log_norm, gb2_log_norm, gt_log_kernel, gb2_log_kernel, gb2_cdf, gb2_sf, gb2_isf, gt_cdf, gt_sf,
  convert_parametrization, convert_parametrization_inverse, stacy_convert, stacy_convert_inverse
)
from gtgb2.distributions.sampling import gb2_sample, gt_sample
