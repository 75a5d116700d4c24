from dataclasses import dataclass
from typing import Optional

import numpy as np

from gtgb2.distributions import GTParams, GB2Params, ParameterDomainError
from gtgb2.distributions.densities import _gt_log_norm, _gt_log_kernel, _gb2_log_norm, _gb2_log_kernel


@dataclass(frozen=True)
class CompoundErrorParams:
  """eps = v - omega*u with v ~ GT and u ~ GB2. omega is +1 for production frontiers, -1 for cost frontiers."""
  v: GTParams
  u: GB2Params
  omega: int = 1

  def __post_init__(self):
    if self.omega not in (-1, 1):
      raise ParameterDomainError(f"omega must be +1 (production) or -1 (cost), got {self.omega}")

  def with_sigma_u(self, sigma_u: float) -> 'CompoundErrorParams':
    return CompoundErrorParams(self.v, self.u.with_sigma(sigma_u), self.omega)

  def to_dict(self) -> dict:
    return {"v": self.v.to_dict(), "u": self.u.to_dict(), "omega": self.omega}

  @classmethod
  def from_dict(cls, data: dict) -> 'CompoundErrorParams':
    return cls(GTParams.from_dict(data["v"]), GB2Params.from_dict(data["u"]), int(data.get("omega", 1)))


@dataclass(frozen=True)
class VEDLink:
  """Inefficiency scale driven by covariates: sigma_u,t = exp(gamma + delta . w_t)."""
  gamma: float
  delta: np.ndarray

  def __post_init__(self):
    object.__setattr__(self, "delta", np.atleast_1d(np.asarray(self.delta, dtype=float)))

  def sigma_u(self, W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[1] != self.delta.size:
      raise ValueError(f"VED covariates have shape {W.shape}, expected (T, {self.delta.size})")
    return np.exp(self.gamma + W @ self.delta)

  def to_dict(self) -> dict:
    return {"gamma": self.gamma, "delta": self.delta.tolist()}


def log_norm_const(theta: CompoundErrorParams, sigma_u=None):
  """
  A: log of the product of the GT and GB2 normalizing constants. The GB2 factor uses nu_u^(tau/psi_u).
  sigma_u overrides theta.u.sigma and may be an array (one value per observation).
  """
  su = theta.u.sigma if sigma_u is None else sigma_u
  return _gt_log_norm(theta.v.sigma, theta.v.nu, theta.v.psi) + _gb2_log_norm(su, theta.u.nu, theta.u.psi, theta.u.tau)


def compound_log_kernel(u, eps, theta: CompoundErrorParams, sigma_u=None):
  """Log of the integrand behind ln L_t - A: the GT kernel at eps + omega*u times the GB2 kernel at u."""
  su = theta.u.sigma if sigma_u is None else sigma_u
  gt = _gt_log_kernel(eps + theta.omega * np.asarray(u, dtype=float), theta.v.sigma, theta.v.nu, theta.v.psi)
  return gt + _gb2_log_kernel(u, su, theta.u.nu, theta.u.psi, theta.u.tau)
