import math
import time
from concurrent.futures import as_completed
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import Field, model_validator
from tqdm import tqdm

from gtgb2.config import JsonConfig
from gtgb2.distributions import ParameterDomainError
from gtgb2.estimation.fit import FitConfig, FitResult, Objective, fit, make_layout, moment_start, MAP
from gtgb2.estimation.priors import PriorSpec
from gtgb2.estimation.spec import ModelSpec, SHAPE_NAMES
from gtgb2.estimation.transforms import ParameterLayout
from gtgb2.helpers import DEBUG, compute_pool, make_rng, pretty_print_duration, spawn_seeds
from gtgb2.likelihood import Dataset
from gtgb2.quadrature import QuadratureConfig

DEFAULT_STEP = 0.1


class InitializationError(RuntimeError):
  pass


class MHConfig(JsonConfig):
  n_iter: int = Field(50_000, ge=1)
  burn_in: int = Field(10_000, ge=0)
  thin: int = Field(10, ge=1)
  proposal_scale: Optional[List[float]] = None
  adapt_window: int = Field(100, ge=1)
  target_accept: float = Field(0.25, gt=0, lt=1)
  init_from_map: bool = True
  seed: int = 0
  quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)

  @model_validator(mode="after")
  def _check(self) -> 'MHConfig':
    if self.burn_in >= self.n_iter:
      raise ValueError(f"burn_in ({self.burn_in}) must be smaller than n_iter ({self.n_iter})")
    if self.proposal_scale is not None and any(not s > 0 for s in self.proposal_scale):
      raise ValueError("proposal scales must be positive")
    return self

  @property
  def n_kept(self) -> int:
    return -(-(self.n_iter - self.burn_in) // self.thin)


@dataclass
class WalkResult:
  draws: np.ndarray
  log_target: np.ndarray
  acceptance_rate: float
  scale: np.ndarray


def random_walk_metropolis(log_target: Callable[[np.ndarray], float], z0: np.ndarray, scale: np.ndarray, cfg: MHConfig, progress: bool = False, desc: str = "mh") -> WalkResult:
  """
  Gaussian random-walk Metropolis with per-coordinate steps scale * lambda. During burn-in, ln lambda moves
  by (acceptance - target) / sqrt(k) after the k-th window of adapt_window iterations; it is frozen afterwards.
  Every thin-th post-burn-in state is kept.
  """
  rng = make_rng(cfg.seed)
  z = np.array(z0, dtype=float)
  scale = np.array(scale, dtype=float)
  lp = log_target(z)
  if not math.isfinite(lp):
    raise InitializationError(f"log target is {lp} at the initial point")
  draws = np.empty((cfg.n_kept, z.size))
  trace = np.empty(cfg.n_kept)
  log_lambda, window, batch, accepted, kept = 0.0, 0, 0, 0, 0
  for i in tqdm(range(cfg.n_iter), desc=desc, disable=not progress):
    proposal = z + math.exp(log_lambda) * scale * rng.standard_normal(z.size)
    lp_new = log_target(proposal)
    accept = math.log1p(-rng.random()) < lp_new - lp
    if accept:
      z, lp = proposal, lp_new
    if i < cfg.burn_in:
      window += accept
      if (i + 1) % cfg.adapt_window == 0:
        batch += 1
        log_lambda += (window / cfg.adapt_window - cfg.target_accept) / math.sqrt(batch)
        if DEBUG >= 2: print(f"{desc}: window {batch} acceptance {window / cfg.adapt_window:.3f} lambda {math.exp(log_lambda):.4g}")
        window = 0
      continue
    accepted += accept
    if (i - cfg.burn_in) % cfg.thin == 0:
      draws[kept], trace[kept] = z, lp
      kept += 1
  rate = accepted / (cfg.n_iter - cfg.burn_in)
  if DEBUG >= 1: print(f"{desc}: acceptance {rate:.3f} after burn-in, lambda {math.exp(log_lambda):.4g}")
  return WalkResult(draws, trace, rate, math.exp(log_lambda) * scale)


def _long_run_variance(x: np.ndarray) -> np.ndarray:
  # batch means with about sqrt(n) batches
  n = x.shape[0]
  size = max(1, int(math.sqrt(n)))
  m = n // size
  means = x[:m * size].reshape(m, size, *x.shape[1:]).mean(axis=1)
  return size * means.var(axis=0, ddof=1) if m > 1 else x.var(axis=0, ddof=1)


def geweke_z(draws: np.ndarray, first: float = 0.1, last: float = 0.5) -> np.ndarray:
  """Geweke z-scores comparing the means of the first and last fractions of a chain, one per column."""
  x = np.asarray(draws, dtype=float)
  x = x.reshape(x.shape[0], -1)
  n = x.shape[0]
  a, b = x[:int(first * n)], x[n - int(last * n):]
  if a.shape[0] < 4 or b.shape[0] < 4:
    raise ValueError(f"chain of {n} draws is too short for a Geweke diagnostic")
  return (a.mean(axis=0) - b.mean(axis=0)) / np.sqrt(_long_run_variance(a) / a.shape[0] + _long_run_variance(b) / b.shape[0])


@dataclass(frozen=True, eq=False)
class PosteriorChain:
  spec: ModelSpec
  names: Tuple[str, ...]
  draws_z: np.ndarray
  log_posterior_trace: np.ndarray
  acceptance_rate: float
  seed: int
  n_beta: int
  n_ved: int = 0
  proposal_scale: Optional[np.ndarray] = None

  @property
  def label(self) -> str:
    return self.spec.label

  @property
  def layout(self) -> ParameterLayout:
    return ParameterLayout(self.spec, self.n_beta, self.n_ved, [n[len("beta_"):] for n in self.names[:self.n_beta]])

  @property
  def n_draws(self) -> int:
    return self.draws_z.shape[0]

  def natural_draws(self) -> np.ndarray:
    layout = self.layout
    return np.array([layout.to_natural(z) for z in self.draws_z]).reshape(self.n_draws, len(self.names))

  def frame(self, resolved: bool = True) -> pd.DataFrame:
    """Natural-scale draws; with resolved, restricted shape parameters appear as constant columns (inf for the limits)."""
    df = pd.DataFrame(self.natural_draws(), columns=list(self.names))
    if resolved:
      for name in SHAPE_NAMES:
        if name not in df.columns:
          tau = df["tau"].to_numpy() if "tau" in df.columns else self.spec.resolve("tau")
          df[name] = self.spec.resolve(name, tau=tau) if name == "psi_u" else self.spec.resolve(name)
    return df

  def summary(self) -> pd.DataFrame:
    df = self.frame()
    return pd.DataFrame({"mean": df.mean(), "sd": df.std(ddof=1), "q025": df.quantile(0.025), "q975": df.quantile(0.975)})

  def geweke(self, first: float = 0.1, last: float = 0.5) -> pd.Series:
    return pd.Series(geweke_z(self.draws_z, first, last), index=list(self.names))

  def to_dict(self) -> dict:
    """Chain metadata; the draws are stored separately as CSV."""
    return {
      "spec": self.spec.to_dict(),
      "names": list(self.names),
      "acceptance_rate": self.acceptance_rate,
      "seed": self.seed,
      "n_beta": self.n_beta,
      "n_ved": self.n_ved,
      "n_draws": self.n_draws,
      "proposal_scale": None if self.proposal_scale is None else self.proposal_scale.tolist(),
    }

  @classmethod
  def from_dict(cls, data: dict, draws_z: np.ndarray, log_posterior_trace: np.ndarray) -> 'PosteriorChain':
    return cls(
      spec=ModelSpec.from_dict(data["spec"]),
      names=tuple(data["names"]),
      draws_z=np.asarray(draws_z, dtype=float).reshape(-1, len(data["names"])),
      log_posterior_trace=np.asarray(log_posterior_trace, dtype=float),
      acceptance_rate=float(data["acceptance_rate"]),
      seed=int(data["seed"]),
      n_beta=int(data["n_beta"]),
      n_ved=int(data.get("n_ved", 0)),
      proposal_scale=None if data.get("proposal_scale") is None else np.asarray(data["proposal_scale"], dtype=float),
    )


def _initial_state(d: Dataset, layout: ParameterLayout, spec: ModelSpec, priors: PriorSpec, cfg: MHConfig, initial: Optional[FitResult], fit_cfg: Optional[FitConfig]):
  if initial is None and cfg.init_from_map:
    initial = fit(d, spec, priors, MAP, fit_cfg)
  if initial is None:
    z0 = layout.to_unconstrained(layout.from_dict(moment_start(d, layout)))
    return z0, np.full(layout.dim, DEFAULT_STEP)
  if tuple(initial.names) != tuple(layout.names):
    raise ValueError(f"{spec.label}: initial fit has parameters {initial.names}, the chain needs {layout.names}")
  if initial.hessian_pd and initial.hessian_z.size:
    step = 2.38 / math.sqrt(layout.dim) * np.sqrt(np.diag(np.linalg.inv(initial.hessian_z)))
  else:
    step = np.full(layout.dim, DEFAULT_STEP)
  return initial.theta_hat_z, step


def sample_parameters(
  d: Dataset,
  spec: ModelSpec,
  priors: Optional[PriorSpec] = None,
  cfg: Optional[MHConfig] = None,
  initial: Optional[FitResult] = None,
  fit_cfg: Optional[FitConfig] = None,
  progress: bool = False,
) -> PosteriorChain:
  """
  Random-walk Metropolis in z-space on ln L + ln prior + ln |dx/dz|, with the latent u integrated out.
  Starts at the MAP fit (given as initial, or computed) whose inverse Hessian sets the per-coordinate steps.
  """
  cfg = cfg or MHConfig()
  priors = priors or PriorSpec()
  layout = make_layout(d, spec)
  if layout.dim == 0:
    raise ValueError(f"{spec.label}: nothing to sample")
  objective = Objective(d, layout, priors, cfg.quadrature)

  def log_target(z: np.ndarray) -> float:
    try:
      return objective.log_posterior(z)
    except ParameterDomainError:
      return -math.inf

  start = time.perf_counter()
  z0, step = _initial_state(d, layout, spec, priors, cfg, initial, fit_cfg)
  if cfg.proposal_scale is not None:
    if len(cfg.proposal_scale) != layout.dim:
      raise ValueError(f"{len(cfg.proposal_scale)} proposal scales for {layout.dim} parameters")
    step = np.asarray(cfg.proposal_scale, dtype=float)
  try:
    walk = random_walk_metropolis(log_target, z0, step, cfg, progress, desc=f"mh {spec.label}")
  except InitializationError as e:
    raise InitializationError(f"{spec.label}: {e}") from e
  if DEBUG >= 1: print(f"{spec.label}: {cfg.n_kept} draws in {pretty_print_duration(time.perf_counter() - start)}")
  return PosteriorChain(spec, tuple(layout.names), walk.draws, walk.log_target, walk.acceptance_rate, cfg.seed, layout.n_beta, layout.n_ved, walk.scale)


def sample_chains(
  d: Dataset,
  spec: ModelSpec,
  n_chains: int,
  priors: Optional[PriorSpec] = None,
  cfg: Optional[MHConfig] = None,
  fit_cfg: Optional[FitConfig] = None,
  threads: int = 1,
) -> List[PosteriorChain]:
  """Independent chains from one MAP start with seeds spawned from cfg.seed, in seed order."""
  cfg = cfg or MHConfig()
  initial = fit(d, spec, priors, MAP, fit_cfg) if cfg.init_from_map else None
  configs = [cfg.model_copy(update={"seed": s}) for s in spawn_seeds(cfg.seed, n_chains)]
  chains: List[Optional[PosteriorChain]] = [None] * n_chains
  with compute_pool(threads, "gtgb2_mh") as pool:
    futures = {pool.submit(sample_parameters, d, spec, priors, c, initial, fit_cfg): i for i, c in enumerate(configs)}
    for future in as_completed(futures):
      chains[futures[future]] = future.result()
  return chains
