import math
from typing import Tuple

import numpy as np
from scipy.special import betaln, gammaln, xlogy, betainc, betaincinv, gammainc, gammaincc, gammainccinv

from gtgb2.distributions.params import GTParams, GB2Params, ParameterDomainError, INF

# The private helpers take sigma as a scalar or an array (per-observation scales), nu/psi/tau as scalars.
# An infinite nu selects the GED/GG limit formulas; large finite nu never does.


def _gt_log_norm(sigma, nu: float, psi: float):
  if math.isinf(nu):
    return math.log(psi) - math.log(2.0) - gammaln(1.0 / psi) - math.log(psi) / psi - np.log(sigma)
  return math.log(psi) - math.log(2.0) - betaln(1.0 / psi, nu / psi) - math.log(nu) / psi - np.log(sigma)


def _gt_log_kernel(v, sigma, nu: float, psi: float):
  x = np.abs(v) / sigma
  with np.errstate(divide="ignore"):
    if math.isinf(nu):
      return -np.power(x, psi) / psi
    return -((1.0 + nu) / psi) * np.logaddexp(0.0, psi * np.log(x) - math.log(nu))


def _gb2_log_norm(sigma, nu: float, psi: float, tau: float):
  if math.isinf(nu):
    return math.log(psi) - gammaln(tau / psi) - (tau / psi) * math.log(psi) - np.log(sigma)
  return math.log(psi) - betaln(tau / psi, nu / psi) - (tau / psi) * math.log(nu) - np.log(sigma)


def _gb2_log_kernel(u, sigma, nu: float, psi: float, tau: float):
  u = np.asarray(u, dtype=float)
  x = np.maximum(u, 0.0) / sigma
  with np.errstate(divide="ignore", invalid="ignore"):
    shape_term = xlogy(tau - 1.0, x)
    if math.isinf(nu):
      tail_term = -np.power(x, psi) / psi
    else:
      tail_term = -((tau + nu) / psi) * np.logaddexp(0.0, psi * np.log(x) - math.log(nu))
  # u == 0 keeps a finite value only for tau == 1; tau < 1 diverges and tau > 1 vanishes there
  valid = (u > 0) | ((u == 0) & (tau == 1.0))
  return np.where(valid, shape_term + tail_term, -np.inf)


def gt_log_norm(p: GTParams) -> float:
  return float(_gt_log_norm(p.sigma, p.nu, p.psi))


def gt_log_kernel(v, p: GTParams):
  return _gt_log_kernel(v, p.sigma, p.nu, p.psi)


def gt_logpdf(v, p: GTParams):
  """ln f_GT(v). Symmetric in v with the mode at 0."""
  out = _gt_log_norm(p.sigma, p.nu, p.psi) + _gt_log_kernel(v, p.sigma, p.nu, p.psi)
  return float(out) if np.ndim(out) == 0 else out


def gb2_log_norm(p: GB2Params) -> float:
  return float(_gb2_log_norm(p.sigma, p.nu, p.psi, p.tau))


def gb2_log_kernel(u, p: GB2Params):
  return _gb2_log_kernel(u, p.sigma, p.nu, p.psi, p.tau)


def gb2_logpdf(u, p: GB2Params):
  """
  ln f_GB2(u). Returns -inf for u < 0, and at u == 0 -inf for tau > 1, ln f(0) for tau == 1 and
  (by convention, the density being unbounded there) -inf for tau < 1. +inf is never returned.
  """
  out = _gb2_log_norm(p.sigma, p.nu, p.psi, p.tau) + _gb2_log_kernel(u, p.sigma, p.nu, p.psi, p.tau)
  return float(out) if np.ndim(out) == 0 else out


def _gb2_ratio(u, p: GB2Params):
  x = np.maximum(np.asarray(u, dtype=float), 0.0) / p.sigma
  return np.power(x, p.psi)


def gb2_cdf(u, p: GB2Params):
  r = _gb2_ratio(u, p)
  if p.nu_is_inf:
    return gammainc(p.tau / p.psi, r / p.psi)
  r = r / p.nu
  with np.errstate(divide="ignore"):
    return betainc(p.tau / p.psi, p.nu / p.psi, 1.0 / (1.0 + 1.0 / r))


def gb2_sf(u, p: GB2Params):
  r = _gb2_ratio(u, p)
  if p.nu_is_inf:
    return gammaincc(p.tau / p.psi, r / p.psi)
  return betainc(p.nu / p.psi, p.tau / p.psi, 1.0 / (1.0 + r / p.nu))


def gb2_isf(q, p: GB2Params):
  """Inverse survival function, accurate deep in the upper tail."""
  q = np.asarray(q, dtype=float)
  if p.nu_is_inf:
    g = gammainccinv(p.tau / p.psi, q)
    return p.sigma * np.power(p.psi * g, 1.0 / p.psi)
  w = betaincinv(p.nu / p.psi, p.tau / p.psi, q)
  with np.errstate(divide="ignore"):
    r = (1.0 - w) / w
  return p.sigma * np.power(p.nu * r, 1.0 / p.psi)


def gt_sf(v, p: GTParams):
  v = np.asarray(v, dtype=float)
  half = 0.5 * gb2_sf(np.abs(v), GB2Params(p.sigma, p.nu, p.psi, 1.0))
  return np.where(v >= 0, half, 1.0 - half)


def gt_cdf(v, p: GTParams):
  return gt_sf(-np.asarray(v, dtype=float), p)


def convert_parametrization(p: GB2Params) -> Tuple[float, float, float, float]:
  """(sigma, nu, psi, tau) -> standard GB2 (a, b, p, q)."""
  if p.nu_is_inf:
    raise ParameterDomainError("the standard GB2 parametrization needs a finite nu; use stacy_convert for the GG limit")
  return p.psi, p.sigma * p.nu**(1.0 / p.psi), p.tau / p.psi, p.nu / p.psi


def convert_parametrization_inverse(a: float, b: float, p: float, q: float) -> GB2Params:
  psi = a
  nu = q * a
  return GB2Params(sigma=b / nu**(1.0 / psi), nu=nu, psi=psi, tau=p * a)


def stacy_convert(p: GB2Params) -> Tuple[float, float, float]:
  """GG subset (sigma, tau, psi) -> Stacy (a, d, p)."""
  if not p.nu_is_inf:
    raise ParameterDomainError(f"the Stacy parametrization covers the GG limit only, got nu={p.nu}")
  return p.sigma * p.psi**(1.0 / p.psi), p.tau, p.psi


def stacy_convert_inverse(a: float, d: float, p: float) -> GB2Params:
  return GB2Params(sigma=a / p**(1.0 / p), nu=INF, psi=p, tau=d)
