import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Union

from gtgb2.distributions import INF, ParameterDomainError
from gtgb2.likelihood import FrontierBasis

FREE, FIXED, INFINITE, TIED = "free", "fixed", "inf", "tied"

# lower edge of the uniform tau prior, and its upper edge with and without the tau <= 1 restriction
TAU_LOWER = 0.05
TAU_UPPER_A4 = 1.0
TAU_UPPER = 10.0

SHAPE_NAMES = ("psi_v", "nu_v", "psi_u", "nu_u", "tau")


@dataclass(frozen=True)
class Restriction:
  state: str = FREE
  value: Optional[float] = None

  def __post_init__(self):
    if self.state not in (FREE, FIXED, INFINITE, TIED):
      raise ValueError(f"unknown restriction state {self.state!r}")
    if self.state == FIXED:
      if self.value is None or not math.isfinite(self.value) or self.value <= 0:
        raise ParameterDomainError(f"fixed restriction needs a finite positive value, got {self.value}")
      object.__setattr__(self, "value", float(self.value))

  @property
  def is_free(self) -> bool:
    return self.state == FREE

  def encode(self) -> Union[str, float]:
    return self.value if self.state == FIXED else self.state

  @classmethod
  def decode(cls, value: Union[str, float, None]) -> 'Restriction':
    if value is None or value == FREE:
      return cls(FREE)
    if value in (INFINITE, "infinite", "infinity"):
      return cls(INFINITE)
    if value in (TIED, "tau"):
      return cls(TIED)
    return cls(FIXED, float(value))


def _free() -> Restriction:
  return Restriction(FREE)


@dataclass(frozen=True)
class ModelSpec:
  """
  A restriction pattern of the GT-GB2 family plus frontier, orientation and likelihood options.

  Each of psi_v, nu_v, psi_u, nu_u and tau is free, fixed at a value, at its infinite limit (nu only)
  or tied to tau (psi_u only, the Weibull case). Restricted parameters are not estimated.
  """
  label: str = "GT-GB2"
  psi_v: Restriction = field(default_factory=_free)
  nu_v: Restriction = field(default_factory=_free)
  psi_u: Restriction = field(default_factory=_free)
  nu_u: Restriction = field(default_factory=_free)
  tau: Restriction = field(default_factory=_free)
  omega: int = 1
  basis: FrontierBasis = field(default_factory=FrontierBasis)
  ved: bool = False
  panel: bool = False
  a4_mode: bool = False

  def __post_init__(self):
    if self.omega not in (-1, 1):
      raise ParameterDomainError(f"omega must be +1 or -1, got {self.omega}")
    for name in ("psi_v", "psi_u", "tau"):
      if getattr(self, name).state == INFINITE:
        raise ValueError(f"{self.label}: {name} has no infinite limit")
    for name in ("psi_v", "nu_v", "nu_u", "tau"):
      if getattr(self, name).state == TIED:
        raise ValueError(f"{self.label}: only psi_u can be tied to tau")
    if self.ved and self.panel:
      raise ValueError(f"{self.label}: VED links are not supported with the panel likelihood")
    if self.a4_mode and self.tau.state == FIXED and self.tau.value > TAU_UPPER_A4:
      raise ParameterDomainError(f"{self.label}: tau fixed at {self.tau.value} violates tau <= 1")

  @property
  def tau_bounds(self):
    return TAU_LOWER, TAU_UPPER_A4 if self.a4_mode else TAU_UPPER

  def free_shapes(self) -> List[str]:
    return [name for name in SHAPE_NAMES if getattr(self, name).is_free]

  def stochastic_names(self, n_ved: int = 0) -> List[str]:
    """Names of the estimated stochastic parameters in the order they appear in the parameter vector."""
    names = ["sigma_v"]
    names += [n for n in ("psi_v", "nu_v") if getattr(self, n).is_free]
    names += (["gamma"] + [f"delta_{j + 1}" for j in range(n_ved)]) if self.ved else ["sigma_u"]
    names += [n for n in ("psi_u", "nu_u", "tau") if getattr(self, n).is_free]
    return names

  def k(self, n_beta: int, n_ved: int = 0) -> int:
    return n_beta + len(self.stochastic_names(n_ved))

  def resolve(self, name: str, free_value: Optional[float] = None, tau: Optional[float] = None) -> float:
    r = getattr(self, name)
    if r.state == FIXED: return r.value
    if r.state == INFINITE: return INF
    if r.state == TIED: return tau
    return free_value

  def with_options(self, **changes) -> 'ModelSpec':
    return replace(self, **changes)

  def to_dict(self) -> dict:
    return {
      "label": self.label,
      "restrictions": {name: getattr(self, name).encode() for name in SHAPE_NAMES},
      "omega": self.omega,
      "basis": self.basis.model_dump(),
      "ved": self.ved,
      "panel": self.panel,
      "a4_mode": self.a4_mode,
    }

  @classmethod
  def from_dict(cls, data: dict) -> 'ModelSpec':
    restrictions = {name: Restriction.decode(value) for name, value in data.get("restrictions", {}).items()}
    return cls(
      label=data["label"],
      omega=int(data.get("omega", 1)),
      basis=FrontierBasis(**data.get("basis", {})),
      ved=bool(data.get("ved", False)),
      panel=bool(data.get("panel", False)),
      a4_mode=bool(data.get("a4_mode", False)),
      **restrictions,
    )
