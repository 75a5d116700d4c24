import math
import time
import traceback
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
from pydantic import Field
from scipy.optimize import minimize

from gtgb2.config import JsonConfig
from gtgb2.distributions import ParameterDomainError
from gtgb2.estimation.evidence import bic, laplace_approximation, EvidenceUnavailableError
from gtgb2.estimation.priors import PriorSpec
from gtgb2.estimation.spec import ModelSpec
from gtgb2.estimation.transforms import ParameterLayout
from gtgb2.helpers import DEBUG, make_rng, pretty_print_duration
from gtgb2.likelihood import CompoundErrorParams, Dataset, DimensionError, FrontierSpec, VEDLink, total_loglik, panel_loglik
from gtgb2.quadrature import QuadratureConfig, QuadratureError

ML, MAP = "ML", "MAP"
PENALTY = 1e300


class FitConfig(JsonConfig):
  n_starts: int = Field(5, ge=1)
  start_maxiter: int = Field(300, ge=1)
  polish_maxiter: int = Field(4000, ge=1)
  xatol: float = Field(1e-6, gt=0)
  fatol: float = Field(1e-8, gt=0)
  hessian_rel_step: float = Field(1e-4, gt=0)
  hessian_rel_tol: float = Field(1e-11, gt=0)
  start_jitter: float = Field(0.0, ge=0)
  seed: int = 0
  quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)


def make_layout(d: Dataset, spec: ModelSpec) -> ParameterLayout:
  if spec.ved and d.W is None:
    raise DimensionError(f"{spec.label}: the VED link needs VED covariates in the dataset")
  if spec.panel and not d.has_panel:
    raise DimensionError(f"{spec.label}: the panel likelihood needs a panel_id column")
  n_ved = d.W.shape[1] if spec.ved else 0
  names = spec.basis.names(list(d.columns))
  return ParameterLayout(spec, len(names), n_ved, names)


class Objective:
  """ln L, ln prior and ln posterior of a model on a dataset as functions of the natural vector x or of z."""
  def __init__(self, d: Dataset, layout: ParameterLayout, priors: Optional[PriorSpec] = None, quadrature: Optional[QuadratureConfig] = None):
    self.d = d
    self.layout = layout
    self.priors = priors or PriorSpec()
    self.quadrature = quadrature or QuadratureConfig()
    self.n_evals = 0

  def loglik(self, x) -> float:
    beta, theta, ved = self.layout.unpack(x)
    f = FrontierSpec(self.layout.spec.basis, beta)
    try:
      if self.layout.spec.panel:
        return panel_loglik(self.d, f, theta, self.quadrature)
      return total_loglik(self.d, f, theta, ved, self.quadrature)
    except QuadratureError as e:
      if DEBUG >= 1: print(f"{self.layout.spec.label}: quadrature did not converge for {int(np.sum(e.failed))} integrals, using the partial value")
      if DEBUG >= 3: traceback.print_exc()
      return float(np.sum(e.log_value))

  def log_prior(self, x) -> float:
    return self.priors.log_prior(self.layout, x)

  def log_posterior(self, z) -> float:
    """Log-posterior density of z: ln L + ln prior + ln |dx/dz|."""
    x = self.layout.to_natural(z)
    lp = self.log_prior(x)
    if not math.isfinite(lp):
      return -math.inf
    return self.loglik(x) + lp + self.layout.log_jacobian(z)

  def negative(self, mode: str) -> Callable[[np.ndarray], float]:
    def fun(z: np.ndarray) -> float:
      self.n_evals += 1
      try:
        value = self.loglik(self.layout.to_natural(z)) if mode == ML else self.log_posterior(z)
      except ParameterDomainError:
        return PENALTY
      return -value if math.isfinite(value) else PENALTY
    return fun


def numerical_hessian(fun: Callable[[np.ndarray], float], z: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
  """Central-difference Hessian with steps h_i = rel_step * (1 + |z_i|), symmetrized."""
  z = np.asarray(z, dtype=float)
  d = z.size
  h = rel_step * (1.0 + np.abs(z))
  H = np.zeros((d, d))
  f0 = fun(z)
  E = np.diag(h)
  for i in range(d):
    H[i, i] = (fun(z + E[i]) - 2.0 * f0 + fun(z - E[i])) / h[i]**2
    for j in range(i + 1, d):
      pp = fun(z + E[i] + E[j])
      pm = fun(z + E[i] - E[j])
      mp = fun(z - E[i] + E[j])
      mm = fun(z - E[i] - E[j])
      H[i, j] = H[j, i] = (pp - pm - mp + mm) / (4.0 * h[i] * h[j])
  return 0.5 * (H + H.T)


def _is_pd(H: np.ndarray) -> bool:
  if H.size == 0:
    return True
  if not np.all(np.isfinite(H)):
    return False
  try:
    np.linalg.cholesky(H)
    return True
  except np.linalg.LinAlgError:
    return False


@dataclass(frozen=True, eq=False)
class FitResult:
  spec: ModelSpec
  mode: str
  names: Tuple[str, ...]
  theta_hat: np.ndarray
  theta_hat_z: np.ndarray
  loglik: float
  logposterior: float
  hessian_z: np.ndarray
  bic: float
  log_evidence_laplace: Optional[float]
  converged: bool
  hessian_pd: bool
  n_obs: int
  k: int
  n_beta: int
  n_ved: int = 0
  n_evals: int = 0
  message: str = ""

  @property
  def label(self) -> str:
    return self.spec.label

  @property
  def layout(self) -> ParameterLayout:
    names = [n[len("beta_"):] for n in self.names[:self.n_beta]]
    return ParameterLayout(self.spec, self.n_beta, self.n_ved, names)

  @property
  def params(self) -> Dict[str, float]:
    return dict(zip(self.names, self.theta_hat.tolist()))

  def unpack(self) -> Tuple[np.ndarray, CompoundErrorParams, Optional[VEDLink]]:
    return self.layout.unpack(self.theta_hat)

  @property
  def theta(self) -> CompoundErrorParams:
    return self.unpack()[1]

  @property
  def frontier(self) -> FrontierSpec:
    return FrontierSpec(self.spec.basis, self.theta_hat[:self.n_beta])

  @property
  def std_errors_z(self) -> np.ndarray:
    if not self.hessian_pd or self.hessian_z.size == 0:
      return np.full(self.theta_hat_z.size, np.nan)
    return np.sqrt(np.diag(np.linalg.inv(self.hessian_z)))

  @property
  def std_errors(self) -> np.ndarray:
    """Natural-scale standard errors by the delta method."""
    return self.std_errors_z * np.abs(self.layout.jacobian_diag(self.theta_hat_z))

  def to_dict(self) -> dict:
    return {
      "spec": self.spec.to_dict(),
      "mode": self.mode,
      "names": list(self.names),
      "theta_hat": self.theta_hat.tolist(),
      "theta_hat_z": self.theta_hat_z.tolist(),
      "std_errors": self.std_errors.tolist(),
      "loglik": self.loglik,
      "logposterior": self.logposterior,
      "hessian_z": self.hessian_z.tolist(),
      "bic": self.bic,
      "log_evidence_laplace": self.log_evidence_laplace,
      "converged": bool(self.converged),
      "hessian_pd": bool(self.hessian_pd),
      "n_obs": self.n_obs,
      "k": self.k,
      "n_beta": self.n_beta,
      "n_ved": self.n_ved,
      "n_evals": self.n_evals,
      "message": self.message,
    }

  @classmethod
  def from_dict(cls, data: dict) -> 'FitResult':
    dim = len(data["names"])
    return cls(
      spec=ModelSpec.from_dict(data["spec"]),
      mode=data["mode"],
      names=tuple(data["names"]),
      theta_hat=np.asarray(data["theta_hat"], dtype=float),
      theta_hat_z=np.asarray(data["theta_hat_z"], dtype=float),
      loglik=float(data["loglik"]),
      logposterior=float(data["logposterior"]),
      hessian_z=np.asarray(data["hessian_z"], dtype=float).reshape(dim, dim),
      bic=float(data["bic"]),
      log_evidence_laplace=None if data.get("log_evidence_laplace") is None else float(data["log_evidence_laplace"]),
      converged=bool(data["converged"]),
      hessian_pd=bool(data["hessian_pd"]),
      n_obs=int(data["n_obs"]),
      k=int(data["k"]),
      n_beta=int(data["n_beta"]),
      n_ved=int(data.get("n_ved", 0)),
      n_evals=int(data.get("n_evals", 0)),
      message=data.get("message", ""),
    )


def moment_start(d: Dataset, layout: ParameterLayout) -> Dict[str, float]:
  """
  OLS coefficients, and half-normal method-of-moments scales from the residual variance and third moment.
  Shape parameters start at their normal/half-normal-like values.
  """
  spec = layout.spec
  design = spec.basis.design(d)
  beta = np.linalg.lstsq(design, d.y, rcond=None)[0]
  e = d.y - design @ beta
  s2 = float(np.var(e)) or 1.0
  s = math.sqrt(s2)
  m3 = float(np.mean((e - e.mean())**3))
  cube = -spec.omega * m3 / (math.sqrt(2.0 / math.pi) * (4.0 / math.pi - 1.0))
  sigma_u = max(float(np.cbrt(cube)), 0.1 * s) if cube > 0 else 0.1 * s
  sigma_v = math.sqrt(max(s2 - (1.0 - 2.0 / math.pi) * sigma_u**2, (0.1 * s)**2))
  beta[0] += spec.omega * sigma_u * math.sqrt(2.0 / math.pi)
  start = dict(zip(layout.beta_names, beta.tolist()))
  start.update(sigma_v=sigma_v, sigma_u=sigma_u, gamma=math.log(sigma_u), psi_v=2.0, nu_v=10.0, psi_u=2.0, nu_u=10.0, tau=0.9 if spec.a4_mode else 1.0)
  start.update({f"delta_{j + 1}": 0.0 for j in range(layout.n_ved)})
  if DEBUG >= 2: print(f"{spec.label}: moment start sigma_v={sigma_v:.4g} sigma_u={sigma_u:.4g}")
  return start


# multi-start fan around the moment start: scale multipliers, then shape values
FAN = [
  {"sigma_v": 1.5, "sigma_u": 0.5},
  {"sigma_v": 0.5, "sigma_u": 2.0},
  {"psi_v": 1.3, "psi_u": 1.3, "nu_v": 4.0, "nu_u": 4.0, "tau": 0.5},
  {"psi_v": 3.0, "psi_u": 3.0, "nu_v": 30.0, "nu_u": 30.0, "tau": 2.0},
]


def start_points(d: Dataset, layout: ParameterLayout, cfg: FitConfig, initial: Optional[Mapping[str, float]] = None) -> List[np.ndarray]:
  base = moment_start(d, layout)
  lo, hi = layout.spec.tau_bounds
  points = []
  if initial:
    points.append(layout.to_unconstrained(layout.from_dict(initial, base)))
  points.append(layout.to_unconstrained(layout.from_dict(base)))
  rng = make_rng(cfg.seed)
  stochastic = np.arange(layout.dim) >= layout.n_beta
  for i in range(cfg.n_starts - 1):
    values = dict(base)
    for name, change in FAN[i % len(FAN)].items():
      if name.startswith("sigma_"):
        values[name] = base[name] * change
        if name == "sigma_u": values["gamma"] = math.log(values[name])
      else:
        values[name] = min(change, 0.5 * (lo + hi)) if name == "tau" and change >= hi else change
    z = layout.to_unconstrained(layout.from_dict(values))
    if cfg.start_jitter > 0:
      z = z + np.where(stochastic, rng.normal(0.0, cfg.start_jitter, size=z.size), 0.0)
    points.append(z)
  return points


def _simplex(z: np.ndarray, step: float = 0.2) -> np.ndarray:
  return np.vstack([z, z + step * np.eye(z.size)])


def _nelder_mead(fun, z0: np.ndarray, maxiter: int, cfg: FitConfig, adaptive: bool):
  return minimize(fun, z0, method="Nelder-Mead", options={"maxiter": maxiter, "xatol": cfg.xatol, "fatol": cfg.fatol, "adaptive": adaptive, "initial_simplex": _simplex(z0)})


def fit(
  d: Dataset,
  spec: ModelSpec,
  priors: Optional[PriorSpec] = None,
  mode: str = MAP,
  cfg: Optional[FitConfig] = None,
  initial: Optional[Mapping[str, float]] = None,
) -> FitResult:
  """
  ML or MAP estimate of a model in z-space: short Nelder-Mead runs from each start, then an adaptive
  Nelder-Mead polish from the best one. The Hessian of the negative objective is taken by central
  differences with a tighter quadrature tolerance.
  """
  if mode not in (ML, MAP):
    raise ValueError(f"Unsupported fit mode {mode!r}, expected {ML!r} or {MAP!r}")
  cfg = cfg or FitConfig()
  priors = priors or PriorSpec()
  layout = make_layout(d, spec)
  objective = Objective(d, layout, priors, cfg.quadrature)
  fun = objective.negative(mode)
  start_time = time.perf_counter()

  starts = start_points(d, layout, cfg, initial)
  converged, message = True, "no free parameters"
  z_hat = starts[0]
  if layout.dim:
    runs = [_nelder_mead(fun, z0, cfg.start_maxiter, cfg, adaptive=False) for z0 in starts]
    if DEBUG >= 2: print(f"{spec.label} {mode}: start objectives {[round(float(r.fun), 4) for r in runs]}")
    best = min(runs, key=lambda r: r.fun)
    polish = _nelder_mead(fun, best.x, cfg.polish_maxiter, cfg, adaptive=True)
    # one restart at the polished point guards against a collapsed simplex
    again = _nelder_mead(fun, polish.x, cfg.polish_maxiter, cfg, adaptive=True)
    final = again if again.fun <= polish.fun else polish
    z_hat = final.x
    converged = bool(final.success) and final.fun < PENALTY and abs(polish.fun - again.fun) <= max(1e-6, 1e-9 * abs(final.fun))
    message = str(final.message)

  precise = Objective(d, layout, priors, cfg.quadrature.model_copy(update={"rel_tol": min(cfg.quadrature.rel_tol, cfg.hessian_rel_tol)}))
  H = numerical_hessian(precise.negative(mode), z_hat, cfg.hessian_rel_step) if layout.dim else np.zeros((0, 0))
  hessian_pd = _is_pd(H)
  if converged and not hessian_pd:
    warnings.warn(f"{spec.label} {mode}: Hessian at the optimum is not positive definite", RuntimeWarning)

  x_hat = layout.to_natural(z_hat)
  loglik = precise.loglik(x_hat)
  logposterior = loglik + precise.log_prior(x_hat) + layout.log_jacobian(z_hat)
  evidence = None
  if mode == MAP and hessian_pd:
    try:
      evidence = laplace_approximation(logposterior, H)
    except EvidenceUnavailableError:
      evidence = None

  result = FitResult(
    spec=spec, mode=mode, names=tuple(layout.names), theta_hat=x_hat, theta_hat_z=np.asarray(z_hat, dtype=float), loglik=loglik, logposterior=logposterior,
    hessian_z=H, bic=bic(loglik, layout.dim, d.n_obs), log_evidence_laplace=evidence, converged=converged, hessian_pd=hessian_pd, n_obs=d.n_obs,
    k=layout.dim, n_beta=layout.n_beta, n_ved=layout.n_ved, n_evals=objective.n_evals + precise.n_evals, message=message
  )
  if DEBUG >= 1: print(f"{spec.label} {mode}: lnL={loglik:.4f} k={layout.dim} converged={converged} in {pretty_print_duration(time.perf_counter() - start_time)}")
  return result


def laplace_log_evidence(fr: FitResult, priors: Optional[PriorSpec] = None) -> float:
  """
  Laplace log-evidence of a MAP fit. With priors given, the log-prior at the mode is re-evaluated under them;
  the Hessian is kept from the fit.
  """
  if fr.mode != MAP:
    raise EvidenceUnavailableError(f"{fr.label}: the Laplace evidence needs a MAP fit, got {fr.mode}")
  if not fr.hessian_pd:
    raise EvidenceUnavailableError(f"{fr.label}: Hessian at the posterior mode is not positive definite")
  log_post = fr.logposterior
  if priors is not None:
    layout = fr.layout
    log_post = fr.loglik + priors.log_prior(layout, fr.theta_hat) + layout.log_jacobian(fr.theta_hat_z)
  return laplace_approximation(log_post, fr.hessian_z)
