import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field

from gtgb2.config import JsonConfig
from gtgb2.helpers import DEBUG


class QuadratureConfig(JsonConfig):
  rel_tol: float = Field(1e-9, gt=0)
  abs_tol: float = Field(1e-12, gt=0)
  max_subdivisions: int = Field(200, ge=10)
  tail_cutoff_multiplier: float = Field(10.0, gt=0)


class QuadratureError(RuntimeError):
  def __init__(self, message: str, log_value: np.ndarray, log_error: np.ndarray, failed: np.ndarray):
    super().__init__(message)
    self.log_value = log_value
    self.log_error = log_error
    self.failed = failed


# 15-point Kronrod rule on [-1, 1] and its embedded 7-point Gauss rule (QUADPACK qk15 constants)
_XGK = np.array([
  0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
  0.586087235467691130294144845693013, 0.405845151377397166906606412076961, 0.207784955007898467600689403773245, 0.0
])
_WGK = np.array([
  0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
  0.169004726639267902826583426598550, 0.190350578064785409913256402421014, 0.204432940075298892414161999234649, 0.209482141084727828012999174891714
])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780, 0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 13]] = _WG[0]
GAUSS_WEIGHTS[[3, 11]] = _WG[1]
GAUSS_WEIGHTS[[5, 9]] = _WG[2]
GAUSS_WEIGHTS[7] = _WG[3]

# panel kinds: u = t on [a, b]; u = c + L t / (1 - t) on t in [0, 1); u = t^(1/tau) on [0, p0^tau]
DIRECT, TAIL, POWER = 0, 1, 2

# log_f(u, rows) -> log integrand, u of shape (n, 15), rows of shape (n,) naming the integral each row belongs to
BatchLogIntegrand = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class HalflineBatch:
  log_value: np.ndarray
  log_error: np.ndarray
  n_intervals: np.ndarray

  @property
  def rel_error(self) -> np.ndarray:
    with np.errstate(invalid="ignore"):
      return np.exp(self.log_error - self.log_value)


@dataclass
class _Intervals:
  row: np.ndarray
  lo: np.ndarray
  hi: np.ndarray
  kind: np.ndarray
  shift: np.ndarray
  scale: np.ndarray
  power: np.ndarray
  log_value: Optional[np.ndarray] = None
  log_error: Optional[np.ndarray] = None
  log_peak: Optional[np.ndarray] = None

  def take(self, mask: np.ndarray) -> '_Intervals':
    return _Intervals(*(None if a is None else a[mask] for a in self._arrays()))

  def _arrays(self):
    return (self.row, self.lo, self.hi, self.kind, self.shift, self.scale, self.power, self.log_value, self.log_error, self.log_peak)

  @staticmethod
  def concat(parts: Sequence['_Intervals']) -> '_Intervals':
    columns = zip(*(p._arrays() for p in parts))
    return _Intervals(*(None if any(a is None for a in c) else np.concatenate(c) for c in columns))


def group_logsumexp(values: np.ndarray, groups: np.ndarray, n: int) -> np.ndarray:
  top = np.full(n, -np.inf)
  np.maximum.at(top, groups, values)
  safe = np.where(np.isfinite(top), top, 0.0)
  acc = np.zeros(n)
  with np.errstate(invalid="ignore"):
    np.add.at(acc, groups, np.exp(values - safe[groups]))
  with np.errstate(divide="ignore"):
    return np.where(acc > 0, safe + np.log(acc), -np.inf)


def _map_nodes(iv: _Intervals) -> Tuple[np.ndarray, np.ndarray]:
  mid = 0.5 * (iv.lo + iv.hi)
  half = 0.5 * (iv.hi - iv.lo)
  t = mid[:, None] + half[:, None] * NODES
  u = t.copy()
  log_jac = np.zeros_like(t)
  tail = iv.kind == TAIL
  if tail.any():
    tt = t[tail]
    u[tail] = iv.shift[tail, None] + iv.scale[tail, None] * tt / (1.0 - tt)
    log_jac[tail] = np.log(iv.scale[tail, None]) - 2.0 * np.log1p(-tt)
  power = iv.kind == POWER
  if power.any():
    tt = t[power]
    q = iv.power[power, None]
    u[power] = np.power(tt, q)
    log_jac[power] = np.log(q) + (q - 1.0) * np.log(tt)
  return u, log_jac


def _evaluate(log_f: BatchLogIntegrand, iv: _Intervals) -> _Intervals:
  u, log_jac = _map_nodes(iv)
  with np.errstate(all="ignore"):
    g = log_f(u, iv.row) + log_jac
  if np.isposinf(g).any():
    raise QuadratureError("integrand is not finite on the integration nodes", np.array([np.inf]), np.array([np.inf]), np.array([True]))
  g = np.where(np.isnan(g), -np.inf, g)
  peak = g.max(axis=1)
  finite = np.isfinite(peak)
  scaled = np.exp(g - np.where(finite, peak, 0.0)[:, None])
  half = 0.5 * (iv.hi - iv.lo)
  kronrod = half * (scaled @ KRONROD_WEIGHTS)
  gauss = half * (scaled @ GAUSS_WEIGHTS)
  err = np.abs(kronrod - gauss)
  with np.errstate(divide="ignore"):
    iv.log_value = np.where(finite & (kronrod > 0), peak + np.log(kronrod), -np.inf)
    iv.log_error = np.where(finite & (err > 0), peak + np.log(err), -np.inf)
  iv.log_peak = peak
  return iv


def _initial_intervals(waypoints: np.ndarray, scale: np.ndarray, cfg: QuadratureConfig, singular_tau: Optional[float], singular_scale: Optional[np.ndarray]) -> _Intervals:
  n = waypoints.shape[0]
  rows = np.arange(n)
  parts = []
  start = np.zeros(n)
  finite = np.isfinite(waypoints) & (waypoints > 0)
  if singular_tau is not None and singular_tau < 1:
    first = np.min(np.where(finite, waypoints, np.inf), axis=1, initial=np.inf)
    p0 = np.minimum(first, singular_scale) / 10.0
    parts.append(_Intervals(rows, np.zeros(n), p0**singular_tau, np.full(n, POWER), np.zeros(n), np.ones(n), np.full(n, 1.0 / singular_tau)))
    start = p0

  w = np.where(finite & (waypoints > start[:, None]), waypoints, np.nan)
  w = np.sort(w, axis=1)
  dup = np.zeros_like(w, dtype=bool)
  dup[:, 1:] = w[:, 1:] == w[:, :-1]
  w = np.sort(np.where(dup, np.nan, w), axis=1)

  edges = np.concatenate([start[:, None], w], axis=1)
  left, right = edges[:, :-1], edges[:, 1:]
  valid = np.isfinite(right)
  r, c = np.nonzero(valid)
  if r.size:
    parts.append(_Intervals(r, left[r, c], right[r, c], np.full(r.size, DIRECT), np.zeros(r.size), np.ones(r.size), np.ones(r.size)))

  has = np.isfinite(w).any(axis=1)
  last = np.where(has, np.max(np.where(np.isfinite(w), w, -np.inf), axis=1, initial=-np.inf), start)
  cut = last + cfg.tail_cutoff_multiplier * scale
  parts.append(_Intervals(rows, last, cut, np.full(n, DIRECT), np.zeros(n), np.ones(n), np.ones(n)))
  parts.append(_Intervals(rows, np.zeros(n), np.ones(n), np.full(n, TAIL), cut, scale, np.ones(n)))
  return _Intervals.concat(parts)


def integrate_halfline_batch(
  log_f: BatchLogIntegrand,
  waypoints: np.ndarray,
  cfg: Optional[QuadratureConfig] = None,
  scale: Optional[np.ndarray] = None,
  singular_tau: Optional[float] = None,
  singular_scale: Optional[np.ndarray] = None,
) -> HalflineBatch:
  """
  ln of int_0^inf exp(log_f(u)) du for a batch of integrands, adaptively and all at once.

  waypoints is (n, k), NaN-padded, in any order; duplicates and non-positive entries are dropped.
  Each integral is split into panels [0, w1], ..., [w_k, w_k + m*scale] and a tail [w_k + m*scale, inf)
  mapped to [0, 1). With singular_tau < 1 the first panel [0, min(w1, singular_scale)/10] is integrated
  in t = u^tau, which removes the u^(tau-1) singularity. Every panel gets the 15-point Gauss-Kronrod rule;
  intervals of unconverged integrals are bisected until the summed error estimate is below
  max(rel_tol * I, abs_tol * peak) where peak is the largest integrand value seen.
  """
  cfg = cfg or QuadratureConfig()
  waypoints = np.atleast_2d(np.asarray(waypoints, dtype=float))
  n = waypoints.shape[0]
  if scale is None:
    top = np.max(np.where(np.isfinite(waypoints), waypoints, 0.0), axis=1, initial=0.0)
    scale = np.maximum(top, 1.0)
  scale = np.broadcast_to(np.asarray(scale, dtype=float), (n,)).copy()
  if singular_scale is None:
    singular_scale = scale
  singular_scale = np.broadcast_to(np.asarray(singular_scale, dtype=float), (n,))

  iv = _evaluate(log_f, _initial_intervals(waypoints, scale, cfg, singular_tau, singular_scale))
  initial = np.bincount(iv.row, minlength=n)
  failed = np.zeros(n, dtype=bool)
  log_rel, log_abs = math.log(cfg.rel_tol), math.log(cfg.abs_tol)

  while True:
    total = group_logsumexp(iv.log_value, iv.row, n)
    total_err = group_logsumexp(iv.log_error, iv.row, n)
    peak = np.full(n, -np.inf)
    np.maximum.at(peak, iv.row, iv.log_peak)
    log_tol = np.maximum(log_rel + total, log_abs + peak)
    counts = np.bincount(iv.row, minlength=n)
    done = (total_err <= log_tol) | ~np.isfinite(peak)
    exhausted = ~done & (counts - initial >= cfg.max_subdivisions)
    failed |= exhausted
    done |= exhausted
    if done.all():
      break
    local_tol = log_tol[iv.row] - np.log(counts[iv.row])
    split = ~done[iv.row] & (iv.log_error > local_tol)
    if DEBUG >= 3: print(f"quadrature: {int((~done).sum())} open integrals, splitting {int(split.sum())} intervals")
    kept = iv.take(~split)
    parent = iv.take(split)
    mid = 0.5 * (parent.lo + parent.hi)
    left = _Intervals(parent.row, parent.lo, mid, parent.kind, parent.shift, parent.scale, parent.power)
    right = _Intervals(parent.row, mid, parent.hi, parent.kind, parent.shift, parent.scale, parent.power)
    fresh = _evaluate(log_f, _Intervals.concat([_strip(left), _strip(right)]))
    iv = _Intervals.concat([kept, fresh])

  if failed.any():
    raise QuadratureError(f"quadrature did not converge within {cfg.max_subdivisions} subdivisions for {int(failed.sum())} of {n} integrals", total, total_err, failed)
  return HalflineBatch(total, total_err, np.bincount(iv.row, minlength=n))


def _strip(iv: _Intervals) -> _Intervals:
  return _Intervals(iv.row, iv.lo, iv.hi, iv.kind, iv.shift, iv.scale, iv.power)


def integrate_halfline(
  f: Callable[[np.ndarray], np.ndarray],
  waypoints: Union[Sequence[float], np.ndarray] = (),
  cfg: Optional[QuadratureConfig] = None,
  scale: Optional[float] = None,
  singular_tau: Optional[float] = None,
) -> Tuple[float, float]:
  """
  Returns (ln of int_0^inf exp(f(u)) du, estimated relative error). f maps an array of u to log-integrand values.
  """
  w = np.asarray(waypoints, dtype=float).reshape(1, -1)
  result = integrate_halfline_batch(lambda u, rows: f(u), w, cfg, scale=None if scale is None else np.array([scale]), singular_tau=singular_tau)
  return float(result.log_value[0]), float(result.rel_error[0])
