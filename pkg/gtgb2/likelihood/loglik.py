from typing import List, Optional

import numpy as np

from gtgb2.distributions.densities import _gt_log_norm, _gt_log_kernel, _gb2_log_norm, _gb2_log_kernel
from gtgb2.helpers import DEBUG
from gtgb2.likelihood.compound import CompoundErrorParams, VEDLink
from gtgb2.likelihood.dataset import Dataset, DimensionError
from gtgb2.likelihood.frontier import Frontier, residuals
from gtgb2.quadrature import QuadratureConfig, QuadratureError, HalflineBatch, integrate_halfline_batch, waypoint_matrix


def group_log_integrals(R: np.ndarray, theta: CompoundErrorParams, cfg: Optional[QuadratureConfig] = None, sigma_u: Optional[np.ndarray] = None) -> HalflineBatch:
  """
  ln int_0^inf prod_t k_GT(R[g, t] + omega*u) k_GB2(u) du for every row g of the NaN-padded residual matrix R.
  A single-column R gives the per-observation integrals C_t; wider R gives time-invariant panel groups.
  """
  R = np.atleast_2d(np.asarray(R, dtype=float))
  mask = np.isfinite(R)
  R0 = np.where(mask, R, 0.0)
  n = R.shape[0]
  su = np.broadcast_to(theta.u.sigma if sigma_u is None else np.asarray(sigma_u, dtype=float), (n,))
  v, u_params, omega = theta.v, theta.u, theta.omega

  def log_f(u: np.ndarray, rows: np.ndarray) -> np.ndarray:
    resid = R0[rows][:, None, :] + omega * u[:, :, None]
    gt = np.where(mask[rows][:, None, :], _gt_log_kernel(resid, v.sigma, v.nu, v.psi), 0.0).sum(axis=2)
    return gt + _gb2_log_kernel(u, su[rows][:, None], u_params.nu, u_params.psi, u_params.tau)

  waypoints = waypoint_matrix(-omega * np.where(mask, R, np.nan), theta, su)
  if DEBUG >= 3: print(f"waypoints (first row): {waypoints[0][np.isfinite(waypoints[0])]}")
  return integrate_halfline_batch(log_f, waypoints, cfg, scale=np.maximum(su, v.sigma), singular_tau=u_params.tau, singular_scale=su)


def _with_normalizer(A: np.ndarray, R: np.ndarray, theta: CompoundErrorParams, cfg: Optional[QuadratureConfig], sigma_u) -> np.ndarray:
  try:
    return A + group_log_integrals(R, theta, cfg, sigma_u).log_value
  except QuadratureError as e:
    raise QuadratureError(str(e), A + e.log_value, e.log_error, e.failed) from e


def obs_loglik_batch(eps: np.ndarray, theta: CompoundErrorParams, cfg: Optional[QuadratureConfig] = None, sigma_u: Optional[np.ndarray] = None) -> np.ndarray:
  """ln L_t = A_t + C_t for each residual. With per-observation sigma_u, A_t is recomputed per observation."""
  eps = np.asarray(eps, dtype=float).reshape(-1)
  su = theta.u.sigma if sigma_u is None else np.asarray(sigma_u, dtype=float)
  A = _gt_log_norm(theta.v.sigma, theta.v.nu, theta.v.psi) + _gb2_log_norm(su, theta.u.nu, theta.u.psi, theta.u.tau)
  A = np.broadcast_to(A, eps.shape)
  return _with_normalizer(A, eps[:, None], theta, cfg, sigma_u)


def obs_loglik(eps: float, theta: CompoundErrorParams, cfg: Optional[QuadratureConfig] = None) -> float:
  return float(obs_loglik_batch(np.array([eps]), theta, cfg)[0])


def total_loglik(d: Dataset, f: Frontier, theta: CompoundErrorParams, ved: Optional[VEDLink] = None, cfg: Optional[QuadratureConfig] = None) -> float:
  """Sum of per-observation log-likelihoods; with a VED link theta.u.sigma is replaced by exp(gamma + delta . w_t)."""
  eps = residuals(d, f)
  sigma_u = None
  if ved is not None:
    if d.W is None:
      raise DimensionError("a VED link needs VED covariates (Dataset.W)")
    sigma_u = ved.sigma_u(d.W)
  return float(np.sum(obs_loglik_batch(eps, theta, cfg, sigma_u)))


def residual_matrix(eps: np.ndarray, groups: List[np.ndarray]) -> np.ndarray:
  width = max(g.size for g in groups)
  R = np.full((len(groups), width), np.nan)
  for i, g in enumerate(groups):
    if g.size == 0:
      raise DimensionError(f"panel group {i} is empty")
    R[i, :g.size] = eps[g]
  return R


def panel_loglik_groups(d: Dataset, f: Frontier, theta: CompoundErrorParams, cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
  eps = residuals(d, f)
  groups = d.groups()
  R = residual_matrix(eps, groups)
  sizes = np.array([g.size for g in groups], dtype=float)
  A = sizes * _gt_log_norm(theta.v.sigma, theta.v.nu, theta.v.psi) + _gb2_log_norm(theta.u.sigma, theta.u.nu, theta.u.psi, theta.u.tau)
  return _with_normalizer(A, R, theta, cfg, None)


def panel_loglik(d: Dataset, f: Frontier, theta: CompoundErrorParams, cfg: Optional[QuadratureConfig] = None) -> float:
  """Time-invariant inefficiency: one u_i per panel unit, integrated out once per unit."""
  return float(np.sum(panel_loglik_groups(d, f, theta, cfg)))
