import math
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from gtgb2.bayes.mh import PosteriorChain
from gtgb2.distributions import GTParams, GB2Params, ParameterDomainError, gb2_isf, gb2_logpdf, gb2_sample, gb2_sf, gt_logpdf, gt_sf, half_gt
from gtgb2.helpers import DEBUG
from gtgb2.likelihood import CompoundErrorParams, Dataset, FrontierSpec, VEDLink, compound_log_kernel, residuals
from gtgb2.quadrature import QuadratureConfig, integrate_halfline_batch, waypoint_matrix, compound_waypoints

PROPOSAL_INFLATION = 1.5
# the truncated-GT component is dropped when its truncation point is this many sigma_v into the upper tail
GT_DROP_SIGMAS = 6.0
GRID_POINTS = 512
TAIL_MASS = 1e-7
GRID_TOL = 5e-7
MASS_TOL = 1e-6
MAX_REFINEMENTS = 6


def latent_u_conditional_logpdf(u, eps: float, theta: CompoundErrorParams, sigma_u: Optional[float] = None):
  """Unnormalized ln p(u | eps, theta): GT kernel at eps + omega*u times GB2 kernel at u; -inf for u <= 0."""
  u = np.asarray(u, dtype=float)
  positive = u > 0
  with np.errstate(divide="ignore", invalid="ignore"):
    out = np.where(positive, compound_log_kernel(np.where(positive, u, 1.0), eps, theta, sigma_u), -np.inf)
  return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MixtureProposal:
  """
  Equal-weight mixture of GB2 (scale sigma_u * 1.5) and a GT (scale sigma_v * 1.5) truncated to u > 0.
  With w = omega*eps + u the GT factor of the target is symmetric in w, so the GT component draws w > shift.
  """
  u_params: GB2Params
  v_params: Optional[GTParams]
  shift: float
  log_mass: float = 0.0

  @classmethod
  def build(cls, eps: float, theta: CompoundErrorParams, sigma_u: Optional[float] = None, inflation: float = PROPOSAL_INFLATION) -> 'MixtureProposal':
    su = theta.u.sigma if sigma_u is None else float(sigma_u)
    u_params = theta.u.with_sigma(inflation * su)
    shift = theta.omega * float(eps)
    if shift > GT_DROP_SIGMAS * theta.v.sigma:
      return cls(u_params, None, shift)
    v_params = GTParams(inflation * theta.v.sigma, theta.v.nu, theta.v.psi)
    return cls(u_params, v_params, shift, float(np.log(gt_sf(shift, v_params))))

  def _truncated_gt(self, rng: np.random.Generator, n: int) -> np.ndarray:
    h = half_gt(self.v_params)
    q = 1.0 - rng.random(n)
    c = self.shift
    if c >= 0:
      w = gb2_isf(q * gb2_sf(c, h), h)
    else:
      positive = rng.random(n) < 0.5 / math.exp(self.log_mass)
      with np.errstate(divide="ignore"):
        above = gb2_isf(q, h)
        below = -gb2_isf(1.0 - q * (1.0 - gb2_sf(-c, h)), h)
      w = np.where(positive, above, below)
    return w - c

  def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
    u = gb2_sample(rng, self.u_params, n)
    if self.v_params is None:
      return u
    pick_gt = rng.random(n) < 0.5
    return np.where(pick_gt, self._truncated_gt(rng, n), u)

  def logpdf(self, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    lg = gb2_logpdf(np.maximum(u, 0.0), self.u_params)
    if self.v_params is not None:
      lt = gt_logpdf(u + self.shift, self.v_params) - self.log_mass
      lg = np.logaddexp(lg, lt) - math.log(2.0)
    return np.where(u > 0, lg, -np.inf)


def sample_latent_u(
  rng: np.random.Generator, eps: float, theta: CompoundErrorParams, n: int, sigma_u: Optional[float] = None, burn_in: int = 100, start: Optional[float] = None
) -> np.ndarray:
  """Independence Metropolis-Hastings draws of u | eps, theta with the mixture proposal; all draws are positive."""
  proposal = MixtureProposal.build(eps, theta, sigma_u)
  total = n + burn_in
  candidates = proposal.sample(rng, total)
  log_w = latent_u_conditional_logpdf(candidates, eps, theta, sigma_u) - proposal.logpdf(candidates)
  log_unif = np.log1p(-rng.random(total))
  if start is not None and start > 0:
    current = float(start)
    current_w = float(latent_u_conditional_logpdf(current, eps, theta, sigma_u) - proposal.logpdf(current))
  else:
    usable = np.flatnonzero(np.isfinite(log_w))
    if usable.size == 0:
      raise ParameterDomainError(f"no proposal draw has positive target density at eps={eps}")
    current, current_w = float(candidates[usable[0]]), float(log_w[usable[0]])
  out = np.empty(total)
  accepted = 0
  for i in range(total):
    if log_unif[i] < log_w[i] - current_w:
      current, current_w = candidates[i], log_w[i]
      accepted += 1
    out[i] = current
  if DEBUG >= 2: print(f"latent u at eps={eps:.4g}: acceptance {accepted / total:.3f}, GT component {'on' if proposal.v_params is not None else 'off'}")
  return out[burn_in:]


@dataclass
class LatentDrawSet:
  """u draws for selected observations, one row per observation."""
  rows: Tuple[int, ...]
  u: np.ndarray

  @property
  def r(self) -> np.ndarray:
    return np.exp(-self.u)

  def mean_efficiency(self) -> np.ndarray:
    return self.r.mean(axis=1)

  def summary(self) -> Dict[str, float]:
    return efficiency_summary(self.mean_efficiency())

  def to_frame(self) -> pd.DataFrame:
    return pd.DataFrame(self.u.T, columns=[f"u_{row}" for row in self.rows])


def _plug_in(d: Dataset, beta: np.ndarray, spec_basis, theta: CompoundErrorParams, ved: Optional[VEDLink], rows: np.ndarray):
  eps = residuals(d, FrontierSpec(spec_basis, beta))[rows]
  sigma_u = ved.sigma_u(d.W)[rows] if ved is not None else np.full(rows.size, theta.u.sigma)
  return eps, sigma_u


def sample_latent_at(
  rng: np.random.Generator, d: Dataset, f: FrontierSpec, theta: CompoundErrorParams, rows: Sequence[int], n: int, ved: Optional[VEDLink] = None
) -> LatentDrawSet:
  """Plug-in latent draws at a point estimate."""
  rows = np.asarray(rows, dtype=int)
  eps, sigma_u = _plug_in(d, f.beta, f.basis, theta, ved, rows)
  return LatentDrawSet(tuple(rows.tolist()), np.array([sample_latent_u(rng, e, theta, n, s) for e, s in zip(eps, sigma_u)]))


def sample_latent_from_chain(rng: np.random.Generator, chain: PosteriorChain, d: Dataset, rows: Sequence[int], thin: int = 1, burn_in: int = 20) -> LatentDrawSet:
  """
  One u draw per selected observation for every thin-th parameter draw of the chain. Each observation's
  latent chain continues from its previous state while theta moves along the parameter chain.
  """
  rows = np.asarray(rows, dtype=int)
  layout = chain.layout
  picks = chain.draws_z[::thin]
  out = np.empty((rows.size, picks.shape[0]))
  state = [None] * rows.size
  for j, z in enumerate(picks):
    beta, theta, ved = layout.unpack(layout.to_natural(z))
    eps, sigma_u = _plug_in(d, beta, chain.spec.basis, theta, ved, rows)
    for i, (e, s) in enumerate(zip(eps, sigma_u)):
      state[i] = sample_latent_u(rng, e, theta, 1, s, burn_in=burn_in, start=state[i])[0]
      out[i, j] = state[i]
  return LatentDrawSet(tuple(rows.tolist()), out)


def _log_integrals(eps, theta: CompoundErrorParams, log_g: Callable[[np.ndarray], np.ndarray], cfg: Optional[QuadratureConfig], sigma_u, shift: float = 0.0) -> np.ndarray:
  """ln int_0^inf g(shift + s) k(shift + s | eps) ds per residual, by the batched quadrature."""
  eps = np.atleast_1d(np.asarray(eps, dtype=float))
  n = eps.size
  su = np.broadcast_to(theta.u.sigma if sigma_u is None else np.asarray(sigma_u, dtype=float), (n,))

  def log_f(s: np.ndarray, rows: np.ndarray) -> np.ndarray:
    u = shift + s
    with np.errstate(divide="ignore"):
      return compound_log_kernel(u, eps[rows][:, None], theta, su[rows][:, None]) + log_g(u)

  waypoints = waypoint_matrix(-theta.omega * eps[:, None] - shift, theta, su) if shift == 0 else np.full((n, 1), np.nan)
  scale = np.maximum(su, theta.v.sigma)
  tau = theta.u.tau if shift == 0 else None
  return integrate_halfline_batch(log_f, waypoints, cfg, scale=scale, singular_tau=tau, singular_scale=su).log_value


def _no_weight(u: np.ndarray) -> np.ndarray:
  return np.zeros_like(u)


def conditional_mean_u(eps, theta: CompoundErrorParams, cfg: Optional[QuadratureConfig] = None, sigma_u=None) -> np.ndarray:
  """E[u | eps] at a parameter value."""
  return np.exp(_log_integrals(eps, theta, np.log, cfg, sigma_u) - _log_integrals(eps, theta, _no_weight, cfg, sigma_u))


def conditional_efficiency(eps, theta: CompoundErrorParams, cfg: Optional[QuadratureConfig] = None, sigma_u=None) -> np.ndarray:
  """E[exp(-u) | eps] at a parameter value."""
  return np.exp(_log_integrals(eps, theta, np.negative, cfg, sigma_u) - _log_integrals(eps, theta, _no_weight, cfg, sigma_u))


def efficiency_summary(values) -> Dict[str, float]:
  values = np.asarray(values, dtype=float)
  lo, hi = float(values.min()), float(values.max())
  return {"mean": float(values.mean()), "min": lo, "max": hi, "range": hi - lo}


def _auto_grid(eps: float, theta: CompoundErrorParams, su: float, upper: float, n_points: int) -> np.ndarray:
  scale = max(su, theta.v.sigma)
  lo = max(scale * 1e-12**(1.0 / min(theta.u.tau, 1.0)), 1e-300)
  breaks = compound_waypoints(eps, theta.with_sigma_u(su))
  breaks = np.unique(np.concatenate([[0.05 * scale], breaks[(breaks > lo) & (breaks < upper)], [upper]]))
  n_geo = max(n_points // 4, 8)
  per_segment = max((n_points - n_geo) // max(breaks.size - 1, 1), 8)
  pieces = [np.geomspace(lo, breaks[0], n_geo)]
  pieces += [np.linspace(a, b, per_segment)[1:] for a, b in zip(breaks[:-1], breaks[1:])]
  return np.concatenate(pieces)


def efficiency_density_grid(
  eps: float,
  theta: CompoundErrorParams,
  grid: Optional[np.ndarray] = None,
  space: str = "u",
  n_points: int = GRID_POINTS,
  sigma_u: Optional[float] = None,
  cfg: Optional[QuadratureConfig] = None,
) -> Tuple[np.ndarray, np.ndarray]:
  """
  Density of u | eps (space="u") or of r = exp(-u) | eps (space="r", Jacobian 1/r) on a grid, normalized by
  quadrature. Without a grid one is built: geometric near 0, piecewise linear between the integrand's candidate
  modes, extended until the tail mass is below 1e-7, and refined until the trapezoid mass is within 1e-6 of one.
  """
  if space not in ("u", "r"):
    raise ValueError(f"Unsupported efficiency space {space!r}, expected 'u' or 'r'")
  su = theta.u.sigma if sigma_u is None else float(sigma_u)
  log_c = float(_log_integrals(eps, theta, _no_weight, cfg, su)[0])

  def density(u: np.ndarray) -> np.ndarray:
    return np.exp(latent_u_conditional_logpdf(u, eps, theta, su) - log_c)

  if grid is None:
    scale = max(su, theta.v.sigma)
    breaks = compound_waypoints(eps, theta.with_sigma_u(su))
    upper = (breaks.max() if breaks.size else 0.0) + 10.0 * scale
    for _ in range(60):
      tail = float(_log_integrals(eps, theta, _no_weight, cfg, su, shift=upper)[0]) - log_c
      if tail < math.log(TAIL_MASS):
        break
      upper *= 2.0
    expected = 1.0 - math.exp(tail)
    for k in range(MAX_REFINEMENTS + 1):
      u = _auto_grid(eps, theta, su, upper, n_points * 2**k)
      values = density(u)
      mass = float(np.trapezoid(values, u))
      if abs(mass - expected) <= GRID_TOL:
        break
      if DEBUG >= 2: print(f"efficiency grid at eps={eps:.4g}: mass {mass:.8f} with {u.size} points, refining")
    else:
      warnings.warn(f"efficiency grid at eps={eps:.4g} integrates to {mass:.8f}; the grid is too coarse", RuntimeWarning)
  else:
    u = np.asarray(grid, dtype=float) if space == "u" else -np.log(np.asarray(grid, dtype=float))
    values = density(u)
    order = np.argsort(u)
    mass = float(np.trapezoid(values[order], u[order]))
    if abs(mass - 1.0) > MASS_TOL:
      warnings.warn(f"efficiency grid at eps={eps:.4g} integrates to {mass:.8f}; refine the grid", RuntimeWarning)
  if space == "u":
    return u, values
  r = np.exp(-u)
  order = np.argsort(r)
  return r[order], (values / r)[order]


def grid_mean(grid: np.ndarray, values: np.ndarray) -> float:
  return float(np.trapezoid(grid * values, grid))
