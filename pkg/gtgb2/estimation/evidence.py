import math
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

UNIFORM, OS = "uniform", "os"


class EvidenceUnavailableError(RuntimeError):
  pass


def bic(loglik: float, k: int, T: int) -> float:
  if T < 1:
    raise ValueError(f"BIC needs at least one observation, got T={T}")
  return k * math.log(T) - 2.0 * loglik


def ml_log_evidence(bic_value: float) -> float:
  return -bic_value / 2.0


def laplace_approximation(log_post_mode: float, hessian: np.ndarray) -> float:
  """
  ln p(y) ~ ln p(y, z_hat) + (d/2) ln(2 pi) - (1/2) ln det H, with H the Hessian of the negative log-posterior at the mode.
  log_post_mode must already include the log-Jacobian of the map to z.
  """
  H = np.atleast_2d(np.asarray(hessian, dtype=float))
  d = H.shape[0] if H.size else 0
  if d == 0:
    return float(log_post_mode)
  try:
    L = np.linalg.cholesky(0.5 * (H + H.T))
  except np.linalg.LinAlgError as e:
    raise EvidenceUnavailableError("Hessian at the posterior mode is not positive definite") from e
  log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
  return float(log_post_mode) + 0.5 * d * math.log(2.0 * math.pi) - 0.5 * log_det


def log_model_prior(k: Sequence[int], prior: str = UNIFORM) -> np.ndarray:
  k = np.asarray(k, dtype=float)
  if prior == UNIFORM:
    return np.zeros_like(k)
  if prior == OS:
    return -k * math.log(2.0)
  raise ValueError(f"Unsupported model prior {prior!r}, expected {UNIFORM!r} or {OS!r}")


def model_weights(log_evidences: Sequence[float], prior: str = UNIFORM, k: Optional[Sequence[int]] = None) -> np.ndarray:
  """
  Posterior model probabilities proportional to exp(log evidence) * p(M). The OS prior is p(M) ~ 2^-k.
  Models with a missing (NaN) evidence get weight 0.
  """
  log_ev = np.asarray(log_evidences, dtype=float)
  if log_ev.size == 0:
    raise ValueError("model_weights needs at least one model")
  if prior == OS and (k is None or len(k) != log_ev.size):
    raise ValueError("the OS prior needs one parameter count per model")
  log_prior = log_model_prior(k if k is not None else np.zeros(log_ev.size), prior)
  scores = np.where(np.isnan(log_ev), -np.inf, log_ev + log_prior)
  if not np.isfinite(scores).any():
    raise EvidenceUnavailableError("no model has a usable evidence value")
  return np.exp(scores - logsumexp(scores))
