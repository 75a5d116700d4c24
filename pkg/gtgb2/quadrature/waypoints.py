import math
from typing import Optional, TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
  from gtgb2.likelihood.compound import CompoundErrorParams

BRACKETS = (1.0, 3.0)


def gb2_mode(sigma, nu: float, psi: float, tau: float):
  """Mode of the GB2 (GG when nu is infinite) inefficiency density; 0 when tau <= 1."""
  sigma = np.asarray(sigma, dtype=float)
  if tau <= 1:
    return np.zeros_like(sigma)
  if math.isinf(nu):
    return sigma * (tau - 1.0)**(1.0 / psi)
  return sigma * nu**(1.0 / psi) * ((tau - 1.0) / (nu + 1.0))**(1.0 / psi)


def waypoint_matrix(peaks: np.ndarray, theta: 'CompoundErrorParams', sigma_u: Optional[np.ndarray] = None) -> np.ndarray:
  """
  Candidate modes of the compound integrand, one row per integral, NaN for pruned entries.

  peaks is (n, m), NaN-padded: the u values where each GT factor peaks (u = -omega*eps). For a single
  factor this gives the peak with brackets at +-{1,3} sigma_v; for m factors (a panel group) the brackets sit
  around the mean peak at +-{1,3} sigma_v/sqrt(m). The GB2 mode is bracketed at +-{1,3} sigma_u.
  Brackets of a peak at u <= 0 are dropped since that factor is monotone on u > 0.
  """
  peaks = np.atleast_2d(np.asarray(peaks, dtype=float))
  n = peaks.shape[0]
  counts = np.sum(np.isfinite(peaks), axis=1)
  sums = np.sum(np.where(np.isfinite(peaks), peaks, 0.0), axis=1)
  with np.errstate(invalid="ignore", divide="ignore"):
    center = sums / counts
    spread = theta.v.sigma / np.sqrt(counts)
  center = np.where(center > 0, center, np.nan)
  sigma_u = np.broadcast_to(theta.u.sigma if sigma_u is None else np.asarray(sigma_u, dtype=float), (n,))
  mode = gb2_mode(sigma_u, theta.u.nu, theta.u.psi, theta.u.tau)

  columns = [peaks, center[:, None]]
  for k in BRACKETS:
    columns += [(center - k * spread)[:, None], (center + k * spread)[:, None]]
  columns.append(mode[:, None])
  for k in BRACKETS:
    columns += [(mode - k * sigma_u)[:, None], (mode + k * sigma_u)[:, None]]
  w = np.concatenate(columns, axis=1)
  return np.where(w > 0, w, np.nan)


def compound_waypoints(eps: float, theta: 'CompoundErrorParams') -> np.ndarray:
  """Sorted positive candidate modes for the single-observation compound integrand."""
  w = waypoint_matrix(np.array([[-theta.omega * eps]]), theta)[0]
  return np.unique(w[np.isfinite(w)])
