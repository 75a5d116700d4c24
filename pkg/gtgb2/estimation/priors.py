import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from pydantic import Field
from scipy import stats

from gtgb2.config import JsonConfig
from gtgb2.distributions import GB2Params, INF, gb2_logpdf
from gtgb2.estimation.transforms import ParameterLayout, PSI_LOWER, NU_LOWER, LOGIT


@dataclass(frozen=True)
class GGPrior:
  """Generalized gamma GG(scale, tau, psi) in the same parametrization as the inefficiency density."""
  scale: float
  tau: float = 1.0
  psi: float = 1.0

  def logpdf(self, x: float) -> float:
    if x <= 0:
      return -math.inf
    return float(gb2_logpdf(x, GB2Params(self.scale, INF, self.psi, self.tau)))


@lru_cache(maxsize=32)
def _beta_prior(k: int, df: float, precision: float):
  return stats.multivariate_t(loc=np.zeros(k), shape=np.eye(k) / precision, df=df)


class PriorSpec(JsonConfig):
  """
  Independent proper priors:
    sigma_v, sigma_u ~ GG(sigma_scale, 1, 1)
    psi_v - 1 ~ GG(psi_v_scale, 1, 1),  psi_u - 1 ~ GG(psi_u_scale, 1, 1)
    nu_v - 2, nu_u - 2 ~ GG(nu_scale, 1, 1)
    tau ~ U(lo, hi), the transform support of the model
    beta ~ multivariate t with beta_df degrees of freedom, location 0, precision beta_precision * I
    gamma, delta_j ~ N(0, ved_sd^2)
  """
  sigma_scale: float = Field(1.0, gt=0)
  psi_v_scale: float = Field(2.0, gt=0)
  psi_u_scale: float = Field(30.0, gt=0)
  nu_scale: float = Field(30.0, gt=0)
  beta_df: float = Field(3.0, gt=0)
  beta_precision: float = Field(10.0, gt=0)
  ved_sd: float = Field(3.0, gt=0)

  def component(self, name: str) -> GGPrior:
    if name.startswith("sigma_"): return GGPrior(self.sigma_scale)
    if name == "psi_v": return GGPrior(self.psi_v_scale)
    if name == "psi_u": return GGPrior(self.psi_u_scale)
    if name.startswith("nu_"): return GGPrior(self.nu_scale)
    raise KeyError(name)

  def log_prior(self, layout: ParameterLayout, x) -> float:
    x = np.asarray(x, dtype=float)
    total = float(_beta_prior(layout.n_beta, self.beta_df, self.beta_precision).logpdf(x[:layout.n_beta])) if layout.n_beta else 0.0
    for slot, value in zip(layout.slots[layout.n_beta:], x[layout.n_beta:]):
      name = slot.name
      if name.startswith("sigma_"):
        total += self.component(name).logpdf(value)
      elif name.startswith("psi_"):
        total += self.component(name).logpdf(value - PSI_LOWER)
      elif name.startswith("nu_"):
        total += self.component(name).logpdf(value - NU_LOWER)
      elif slot.kind == LOGIT:
        total += -math.log(slot.upper - slot.lower) if slot.lower < value < slot.upper else -math.inf
      else:
        total += float(stats.norm.logpdf(value, scale=self.ved_sd))
    return total
