from typing import Optional, Union, Tuple

import numpy as np

from gtgb2.distributions.params import GTParams, GB2Params, half_gt

Size = Optional[Union[int, Tuple[int, ...]]]


def _chi_square(rng: np.random.Generator, df: float, size: Size):
  # fractional degrees of freedom
  return rng.gamma(shape=df / 2.0, scale=2.0, size=size)


def gb2_sample(rng: np.random.Generator, p: GB2Params, size: Size = None):
  """
  Finite nu: W = sigma * nu^(1/psi) * (X1/X2)^(1/psi) with X1 ~ chi2(2 tau/psi), X2 ~ chi2(2 nu/psi).
  Infinite nu (GG): sigma * G^(1/psi) with G ~ Gamma(tau/psi, scale=psi).
  """
  if p.nu_is_inf:
    g = rng.gamma(shape=p.tau / p.psi, scale=p.psi, size=size)
    return p.sigma * np.power(g, 1.0 / p.psi)
  x1 = _chi_square(rng, 2.0 * p.tau / p.psi, size)
  x2 = _chi_square(rng, 2.0 * p.nu / p.psi, size)
  return p.sigma * p.nu**(1.0 / p.psi) * np.power(x1 / x2, 1.0 / p.psi)


def gt_sample(rng: np.random.Generator, p: GTParams, size: Size = None):
  magnitude = gb2_sample(rng, half_gt(p), size)
  sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
  out = sign * magnitude
  return float(out) if size is None else out
