import math
from dataclasses import dataclass
from typing import Optional, Union

INF = math.inf


class ParameterDomainError(ValueError):
  pass


def _as_float(name: str, value) -> float:
  try:
    value = float(value)
  except (TypeError, ValueError) as e:
    raise ParameterDomainError(f"{name} must be a real number, got {value!r}") from e
  if math.isnan(value):
    raise ParameterDomainError(f"{name} must not be NaN")
  return value


def _positive(name: str, value) -> float:
  value = _as_float(name, value)
  if not (0 < value < INF):
    raise ParameterDomainError(f"{name} must be positive and finite, got {value}")
  return value


def _tail(name: str, value) -> float:
  if value is None or (isinstance(value, str) and value.lower() in ("inf", "infinity")):
    return INF
  value = _as_float(name, value)
  if value <= 0:
    raise ParameterDomainError(f"{name} must be positive or infinite, got {value}")
  return value


def encode_nu(nu: float) -> Union[float, str]:
  return "inf" if math.isinf(nu) else nu


@dataclass(frozen=True)
class GTParams:
  """Generalized t: scale sigma, tail nu (INF for the GED limit), shape psi."""
  sigma: float
  nu: float
  psi: float

  def __post_init__(self):
    object.__setattr__(self, "sigma", _positive("sigma_v", self.sigma))
    object.__setattr__(self, "nu", _tail("nu_v", self.nu))
    object.__setattr__(self, "psi", _positive("psi_v", self.psi))

  @property
  def nu_is_inf(self) -> bool:
    return math.isinf(self.nu)

  def to_dict(self) -> dict:
    return {"sigma": self.sigma, "nu": encode_nu(self.nu), "psi": self.psi}

  @classmethod
  def from_dict(cls, data: dict) -> 'GTParams':
    return cls(**data)


@dataclass(frozen=True)
class GB2Params:
  """Generalized beta of the second kind: scale sigma, tail nu (INF for the GG limit), shapes psi and tau."""
  sigma: float
  nu: float
  psi: float
  tau: float

  def __post_init__(self):
    object.__setattr__(self, "sigma", _positive("sigma_u", self.sigma))
    object.__setattr__(self, "nu", _tail("nu_u", self.nu))
    object.__setattr__(self, "psi", _positive("psi_u", self.psi))
    object.__setattr__(self, "tau", _positive("tau", self.tau))

  @property
  def nu_is_inf(self) -> bool:
    return math.isinf(self.nu)

  def check_a4(self) -> None:
    # non-increasing inefficiency density
    if self.tau > 1:
      raise ParameterDomainError(f"tau={self.tau} violates the non-increasing density restriction (tau <= 1)")

  def with_sigma(self, sigma: float) -> 'GB2Params':
    return GB2Params(sigma, self.nu, self.psi, self.tau)

  def to_dict(self) -> dict:
    return {"sigma": self.sigma, "nu": encode_nu(self.nu), "psi": self.psi, "tau": self.tau}

  @classmethod
  def from_dict(cls, data: dict) -> 'GB2Params':
    return cls(**data)


def half_gt(p: GTParams, sigma: Optional[float] = None) -> GB2Params:
  """|V| for V ~ GT(sigma, nu, psi) is GB2(sigma, nu, psi, tau=1)."""
  return GB2Params(p.sigma if sigma is None else sigma, p.nu, p.psi, 1.0)
