from concurrent.futures import as_completed
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import Field, field_validator, model_validator
from tqdm import tqdm

from gtgb2.config import JsonConfig
from gtgb2.distributions import gb2_sample, gt_sample
from gtgb2.estimation.spec import ModelSpec
from gtgb2.estimation.transforms import ParameterLayout
from gtgb2.helpers import DEBUG, compute_pool, make_rng, spawn_seeds
from gtgb2.likelihood import CompoundErrorParams, Dataset, FrontierBasis, FrontierSpec, VEDLink
from gtgb2.models import build_model_spec

# stochastic parameter values used when a config leaves them out
DEFAULT_PARAMS = {
  "sigma_v": 0.2, "psi_v": 2.0, "nu_v": 10.0, "sigma_u": 0.3, "gamma": float(np.log(0.3)), "psi_u": 2.0, "nu_u": 10.0, "tau": 1.0,
}


class SimConfig(JsonConfig):
  """
  Synthetic data from a model of the registry. Cross-sections have n_obs rows; panels (n_units set) have
  n_units * n_periods rows with one inefficiency draw per unit. n_ved > 0 makes sigma_u covariate-driven.
  """
  model: str = "N-HN"
  omega: int = 1
  basis: FrontierBasis = Field(default_factory=FrontierBasis)
  a4_mode: bool = False
  n_obs: int = Field(1000, ge=1)
  n_units: Optional[int] = Field(None, ge=1)
  n_periods: int = Field(1, ge=1)
  n_covariates: int = Field(1, ge=0)
  covariates: Literal["normal", "uniform"] = "normal"
  uniform_low: float = 0.0
  uniform_high: float = 1.0
  n_ved: int = Field(0, ge=0)
  beta: Optional[List[float]] = None
  params: Dict[str, float] = Field(default_factory=dict)
  seed: int = 0

  @field_validator("omega")
  @classmethod
  def _check_omega(cls, v: int) -> int:
    if v not in (-1, 1):
      raise ValueError(f"omega must be +1 or -1, got {v}")
    return v

  @model_validator(mode="after")
  def _check_shape(self) -> 'SimConfig':
    if self.covariates == "uniform" and not self.uniform_low < self.uniform_high:
      raise ValueError(f"uniform covariates need low < high, got ({self.uniform_low}, {self.uniform_high})")
    if self.n_units is not None and self.n_ved:
      raise ValueError("VED simulation is not supported for panels")
    return self

  @property
  def panel(self) -> bool:
    return self.n_units is not None

  @property
  def size(self) -> int:
    return self.n_units * self.n_periods if self.panel else self.n_obs

  def spec(self) -> ModelSpec:
    return build_model_spec(self.model, omega=self.omega, basis=self.basis, ved=self.n_ved > 0, panel=self.panel, a4_mode=self.a4_mode)

  def layout(self) -> ParameterLayout:
    columns = [f"x{j + 1}" for j in range(self.n_covariates)]
    names = self.basis.names(columns)
    return ParameterLayout(self.spec(), len(names), self.n_ved, names)

  def true_params(self) -> Dict[str, float]:
    """Natural-scale parameter values, keyed like a fitted model's parameters."""
    layout = self.layout()
    beta = self.beta if self.beta is not None else [1.0] + [0.5] * (layout.n_beta - 1)
    if len(beta) != layout.n_beta:
      raise ValueError(f"beta has {len(beta)} coefficients, the {self.basis.kind} frontier needs {layout.n_beta}")
    defaults = {**DEFAULT_PARAMS, **{f"delta_{j + 1}": 0.5 for j in range(self.n_ved)}, **dict(zip(layout.beta_names, beta))}
    return layout.as_dict(layout.from_dict(self.params, defaults))

  def truth(self) -> Tuple[np.ndarray, CompoundErrorParams, Optional[VEDLink]]:
    layout = self.layout()
    return layout.unpack(layout.from_dict(self.true_params()))


def _covariates(rng: np.random.Generator, cfg: SimConfig, n: int) -> np.ndarray:
  if cfg.covariates == "uniform":
    return rng.uniform(cfg.uniform_low, cfg.uniform_high, size=(n, cfg.n_covariates))
  return rng.standard_normal(size=(n, cfg.n_covariates))


def simulate(cfg: SimConfig, X: Optional[np.ndarray] = None) -> Tuple[Dataset, np.ndarray]:
  """
  Draws covariates (unless X is given), then u, then v, and returns the dataset with the true u.
  The draw order does not depend on omega, so flipping omega under one seed moves y by 2u.
  """
  rng = make_rng(cfg.seed)
  beta, theta, link = cfg.truth()
  n = cfg.size
  if X is None:
    X = _covariates(rng, cfg, n)
  else:
    X = np.asarray(X, dtype=float).reshape(n, -1)
  columns = tuple(f"x{j + 1}" for j in range(X.shape[1]))
  panel_id = time_id = W = None
  if cfg.panel:
    panel_id = np.repeat(np.arange(1, cfg.n_units + 1), cfg.n_periods)
    time_id = np.tile(np.arange(1, cfg.n_periods + 1), cfg.n_units).astype(float)
  elif cfg.basis.time_trend:
    time_id = np.arange(1, n + 1, dtype=float)
  if link is not None:
    W = rng.standard_normal(size=(n, cfg.n_ved))

  if cfg.panel:
    u = np.repeat(gb2_sample(rng, theta.u, cfg.n_units), cfg.n_periods)
  elif link is not None:
    u = link.sigma_u(W) * gb2_sample(rng, theta.u.with_sigma(1.0), n)
  else:
    u = gb2_sample(rng, theta.u, n)
  v = gt_sample(rng, theta.v, n)

  d = Dataset(np.zeros(n), X, columns, panel_id, time_id, W, tuple(f"w{j + 1}" for j in range(cfg.n_ved)))
  d.y = FrontierSpec(cfg.basis, beta).mean(d) + v - cfg.omega * u
  if DEBUG >= 2: print(f"simulate {cfg.model}: T={n} seed={cfg.seed} mean u={u.mean():.4g}")
  return d, u


def simulate_replications(cfg: SimConfig, n: int, threads: int = 1, progress: bool = False) -> List[Tuple[Dataset, np.ndarray]]:
  """n independent datasets with seeds spawned from cfg.seed, in replication order."""
  configs = [cfg.model_copy(update={"seed": s}) for s in spawn_seeds(cfg.seed, n)]
  out: List[Optional[Tuple[Dataset, np.ndarray]]] = [None] * n
  with compute_pool(threads, "gtgb2_simulate") as pool:
    futures = {pool.submit(simulate, c): i for i, c in enumerate(configs)}
    for future in tqdm(as_completed(futures), total=n, desc="simulate", disable=not progress):
      out[futures[future]] = future.result()
  return out
