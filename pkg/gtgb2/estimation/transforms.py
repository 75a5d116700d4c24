import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, logit, log_expit

from gtgb2.distributions import GTParams, GB2Params, ParameterDomainError
from gtgb2.estimation.spec import ModelSpec
from gtgb2.likelihood import CompoundErrorParams, VEDLink

# support of the free shape parameters: psi > 1 and nu > 2
PSI_LOWER = 1.0
NU_LOWER = 2.0

IDENTITY, LOG, SHIFTED_LOG, LOGIT = 0, 1, 2, 3


@dataclass(frozen=True)
class Slot:
  name: str
  kind: int
  lower: float = 0.0
  upper: float = math.inf


def _slot(name: str, spec: ModelSpec) -> Slot:
  if name.startswith("sigma_"):
    return Slot(name, LOG)
  if name.startswith("psi_"):
    return Slot(name, SHIFTED_LOG, PSI_LOWER)
  if name.startswith("nu_"):
    return Slot(name, SHIFTED_LOG, NU_LOWER)
  if name == "tau":
    lo, hi = spec.tau_bounds
    return Slot(name, LOGIT, lo, hi)
  return Slot(name, IDENTITY, -math.inf)


class ParameterLayout:
  """
  Maps between the natural parameter vector of a ModelSpec and the unconstrained vector z.

  Order: beta, sigma_v, [psi_v], [nu_v], sigma_u (or gamma, delta_1..), [psi_u], [nu_u], [tau].
    sigma -> ln sigma
    psi   -> ln(psi - 1)
    nu    -> ln(nu - 2)
    tau   -> logit((tau - lo) / (hi - lo)) on the tau prior support
    beta, gamma, delta unchanged
  """
  def __init__(self, spec: ModelSpec, n_beta: int, n_ved: int = 0, beta_names: Optional[Sequence[str]] = None):
    if spec.ved and n_ved < 1:
      raise ValueError(f"{spec.label}: a VED model needs at least one VED covariate")
    self.spec = spec
    self.n_beta = n_beta
    self.n_ved = n_ved if spec.ved else 0
    self.beta_names = [f"beta_{b}" for b in beta_names] if beta_names is not None else [f"beta_{j}" for j in range(n_beta)]
    if len(self.beta_names) != n_beta:
      raise ValueError(f"{len(self.beta_names)} coefficient names for {n_beta} coefficients")
    self.slots: List[Slot] = [Slot(b, IDENTITY, -math.inf) for b in self.beta_names] + [_slot(n, spec) for n in spec.stochastic_names(self.n_ved)]
    self.names: List[str] = [s.name for s in self.slots]
    self._kind = np.array([s.kind for s in self.slots], dtype=int)
    self._lower = np.array([s.lower for s in self.slots])
    self._upper = np.array([s.upper for s in self.slots])

  @property
  def dim(self) -> int:
    return len(self.slots)

  def to_natural(self, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    x = z.copy()
    k = self._kind
    with np.errstate(over="ignore"):
      x[k == LOG] = np.exp(z[k == LOG])
      x[k == SHIFTED_LOG] = self._lower[k == SHIFTED_LOG] + np.exp(z[k == SHIFTED_LOG])
    lo, hi = self._lower[k == LOGIT], self._upper[k == LOGIT]
    x[k == LOGIT] = lo + (hi - lo) * expit(z[k == LOGIT])
    return x

  def to_unconstrained(self, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (self.dim,):
      raise ValueError(f"expected {self.dim} parameters, got shape {x.shape}")
    for s, value in zip(self.slots, x):
      inside = s.lower < value < s.upper if s.kind in (LOG, SHIFTED_LOG, LOGIT) else math.isfinite(value)
      if not inside:
        raise ParameterDomainError(f"{s.name}={value} is outside ({s.lower}, {s.upper})")
    z = x.copy()
    k = self._kind
    z[k == LOG] = np.log(x[k == LOG])
    z[k == SHIFTED_LOG] = np.log(x[k == SHIFTED_LOG] - self._lower[k == SHIFTED_LOG])
    lo, hi = self._lower[k == LOGIT], self._upper[k == LOGIT]
    z[k == LOGIT] = logit((x[k == LOGIT] - lo) / (hi - lo))
    return z

  def jacobian_diag(self, z) -> np.ndarray:
    """dx/dz for each coordinate; the map is elementwise so the Jacobian is diagonal."""
    z = np.asarray(z, dtype=float)
    k = self._kind
    d = np.ones_like(z)
    d[(k == LOG) | (k == SHIFTED_LOG)] = np.exp(z[(k == LOG) | (k == SHIFTED_LOG)])
    lo, hi = self._lower[k == LOGIT], self._upper[k == LOGIT]
    p = expit(z[k == LOGIT])
    d[k == LOGIT] = (hi - lo) * p * (1.0 - p)
    return d

  def log_jacobian(self, z) -> float:
    z = np.asarray(z, dtype=float)
    k = self._kind
    total = float(np.sum(z[(k == LOG) | (k == SHIFTED_LOG)]))
    zl = z[k == LOGIT]
    total += float(np.sum(np.log(self._upper[k == LOGIT] - self._lower[k == LOGIT]) + log_expit(zl) + log_expit(-zl)))
    return total

  def unpack(self, x) -> Tuple[np.ndarray, CompoundErrorParams, Optional[VEDLink]]:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
      raise ParameterDomainError(f"non-finite parameter vector {x}")
    beta = x[:self.n_beta]
    vals = dict(zip(self.names[self.n_beta:], x[self.n_beta:].tolist()))
    spec = self.spec
    tau = spec.resolve("tau", vals.get("tau"))
    v = GTParams(vals["sigma_v"], spec.resolve("nu_v", vals.get("nu_v")), spec.resolve("psi_v", vals.get("psi_v")))
    link = None
    sigma_u = vals.get("sigma_u")
    if spec.ved:
      link = VEDLink(vals["gamma"], [vals[f"delta_{j + 1}"] for j in range(self.n_ved)])
      sigma_u = math.exp(link.gamma)
    u = GB2Params(sigma_u, spec.resolve("nu_u", vals.get("nu_u")), spec.resolve("psi_u", vals.get("psi_u"), tau=tau), tau)
    if spec.a4_mode:
      u.check_a4()
    return beta, CompoundErrorParams(v, u, spec.omega), link

  def as_dict(self, x) -> Dict[str, float]:
    return dict(zip(self.names, np.asarray(x, dtype=float).tolist()))

  def from_dict(self, values: Mapping[str, float], defaults: Optional[Mapping[str, float]] = None) -> np.ndarray:
    """Natural parameter vector from a name -> value mapping; names missing from values fall back to defaults."""
    merged = dict(defaults or {})
    merged.update(values)
    missing = [n for n in self.names if n not in merged]
    if missing:
      raise KeyError(f"{self.spec.label}: no value for {', '.join(missing)}")
    return np.array([float(merged[n]) for n in self.names])
