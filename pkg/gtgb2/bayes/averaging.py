import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from gtgb2.estimation.spec import ModelSpec, SHAPE_NAMES, FREE, FIXED, INFINITE, TIED
from gtgb2.helpers import DEBUG

Grid = Tuple[np.ndarray, np.ndarray]


@dataclass
class AveragedResult:
  """
  Model-averaged quantities. summary has one row per parameter with the pooled mean over models where the
  parameter is finite and p_inf, the posterior probability of its infinite limit.
  """
  weights: Dict[str, float]
  summary: pd.DataFrame
  grid: Optional[np.ndarray] = None
  density: Optional[np.ndarray] = None
  per_model: Dict[str, Dict[str, float]] = field(default_factory=dict)

  def mean(self, name: str) -> float:
    return float(self.summary.loc[name, "mean"])

  def density_frame(self) -> pd.DataFrame:
    if self.grid is None:
      raise ValueError("no density grids were averaged")
    return pd.DataFrame({"x": self.grid, "density": self.density})


def normalize_weights(weights: Mapping[str, float]) -> Dict[str, float]:
  if not weights:
    raise ValueError("no model weights given")
  values = np.array([float(w) for w in weights.values()])
  if np.any(~np.isfinite(values)) or np.any(values < 0):
    raise ValueError(f"model weights must be finite and non-negative, got {dict(weights)}")
  total = values.sum()
  if total <= 0:
    raise ValueError("model weights sum to zero")
  return {label: float(w / total) for label, w in zip(weights, values)}


def _check_labels(weights: Mapping[str, float], results: Mapping, what: str) -> None:
  if set(weights) != set(results):
    missing, extra = sorted(set(weights) - set(results)), sorted(set(results) - set(weights))
    raise ValueError(f"weights and {what} name different models: without {what} {missing}, without weight {extra}")


def _pooled_summary(weights: Dict[str, float], summaries: Mapping[str, Mapping[str, float]]) -> pd.DataFrame:
  names = list(next(iter(summaries.values())))
  for label, s in summaries.items():
    if set(s) != set(names):
      raise ValueError(f"{label}: parameters {sorted(s)} differ from {sorted(names)}")
  rows = {}
  for name in names:
    values = np.array([float(summaries[label][name]) for label in weights])
    w = np.array(list(weights.values()))
    inf = np.isinf(values)
    p_inf = float(w[inf].sum())
    finite_w = w[~inf].sum()
    mean = float(np.sum(w[~inf] * values[~inf]) / finite_w) if finite_w > 0 else math.nan
    rows[name] = {"mean": mean, "p_inf": p_inf}
  return pd.DataFrame.from_dict(rows, orient="index")


def _common_grid(densities: Mapping[str, Grid]) -> np.ndarray:
  grids = [np.asarray(g, dtype=float) for g, _ in densities.values()]
  if all(g.shape == grids[0].shape and np.array_equal(g, grids[0]) for g in grids):
    return grids[0]
  return np.unique(np.concatenate(grids))


def _mix_densities(weights: Dict[str, float], densities: Mapping[str, Grid], grid: Optional[np.ndarray]) -> Grid:
  grid = _common_grid(densities) if grid is None else np.asarray(grid, dtype=float)
  pooled = np.zeros_like(grid)
  for label, w in weights.items():
    x, f = (np.asarray(a, dtype=float) for a in densities[label])
    if x.shape != f.shape:
      raise ValueError(f"{label}: grid has {x.size} points but the density has {f.size}")
    if x.shape == grid.shape and np.array_equal(x, grid):
      pooled += w * f
    else:
      pooled += w * np.interp(grid, x, f, left=0.0, right=0.0)
  return grid, pooled


def average_models(
  weights: Mapping[str, float],
  summaries: Optional[Mapping[str, Mapping[str, float]]] = None,
  densities: Optional[Mapping[str, Grid]] = None,
  grid: Optional[np.ndarray] = None,
) -> AveragedResult:
  """
  Bayesian model averaging with posterior model probabilities. Parameter means combine linearly; a model at an
  infinite limit contributes to p_inf instead of the mean. Densities mix on a common grid (the shared grid,
  the union of the model grids with linear interpolation, or the given grid).
  """
  w = normalize_weights(weights)
  if summaries is None and densities is None:
    raise ValueError("nothing to average: pass summaries, densities or both")
  result = AveragedResult(weights=w, summary=pd.DataFrame(columns=["mean", "p_inf"]))
  if summaries is not None:
    _check_labels(w, summaries, "summaries")
    result.summary = _pooled_summary(w, summaries)
    result.per_model = {label: {k: float(v) for k, v in summaries[label].items()} for label in w}
  if densities is not None:
    _check_labels(w, densities, "densities")
    result.grid, result.density = _mix_densities(w, densities, grid)
  if DEBUG >= 1: print(f"averaged {len(w)} models, top weight {max(w.values()):.4f}")
  return result


def pool_draws(rng: np.random.Generator, frames: Mapping[str, pd.DataFrame], weights: Mapping[str, float], n: int) -> pd.DataFrame:
  """n draws from the model mixture: multinomial model counts, rows resampled with replacement from each chain."""
  w = normalize_weights(weights)
  _check_labels(w, frames, "chains")
  columns = list(next(iter(frames.values())).columns)
  for label, df in frames.items():
    if list(df.columns) != columns:
      raise ValueError(f"{label}: chain columns {list(df.columns)} differ from {columns}")
  counts = rng.multinomial(n, np.array(list(w.values())))
  parts = []
  for (label, _), count in zip(w.items(), counts):
    if count == 0:
      continue
    df = frames[label]
    if len(df) == 0:
      raise ValueError(f"{label}: chain has no draws")
    picked = df.iloc[rng.integers(0, len(df), size=count)].reset_index(drop=True)
    picked.insert(0, "model", label)
    parts.append(picked)
  return pd.concat(parts, ignore_index=True)


def restriction_probabilities(weights: Mapping[str, float], specs: Mapping[str, ModelSpec], names: Sequence[str] = SHAPE_NAMES) -> pd.DataFrame:
  """Posterior probability of each restriction state per shape parameter (free, fixed, infinite, tied to tau)."""
  w = normalize_weights(weights)
  _check_labels(w, specs, "specs")
  out = pd.DataFrame(0.0, index=list(names), columns=[FREE, FIXED, INFINITE, TIED])
  for label, p in w.items():
    for name in names:
      out.loc[name, getattr(specs[label], name).state] += p
  return out
