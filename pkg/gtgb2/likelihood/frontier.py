from dataclasses import dataclass
from typing import Callable, List, Literal, Optional, Union

import numpy as np

from gtgb2.config import JsonConfig
from gtgb2.likelihood.dataset import Dataset, DimensionError


class FrontierBasis(JsonConfig):
  """
  Covariate expansion for a frontier that is linear in beta.

  linear:   1, [t], x_1..x_J
  translog: 1, [t], x_1..x_J, x_1^2..x_J^2, x_j*x_g for j < g
  Mean-centering (covariates and trend) defaults to on for translog and off for linear.
  """
  kind: Literal["linear", "translog"] = "linear"
  center: Optional[bool] = None
  time_trend: bool = False

  @property
  def centered(self) -> bool:
    return self.center if self.center is not None else self.kind == "translog"

  def width(self, n_covariates: int) -> int:
    j = n_covariates
    w = 1 + int(self.time_trend) + j
    if self.kind == "translog":
      w += j * (j + 1) // 2
    return w

  def names(self, columns) -> List[str]:
    names = ["const"] + (["t"] if self.time_trend else []) + list(columns)
    if self.kind == "translog":
      names += [f"{c}^2" for c in columns]
      names += [f"{a}*{b}" for i, a in enumerate(columns) for b in columns[i + 1:]]
    return names

  def design(self, d: Dataset) -> np.ndarray:
    X = d.X - d.X.mean(axis=0) if self.centered and d.X.shape[1] else d.X
    blocks = [np.ones((d.n_obs, 1))]
    if self.time_trend:
      if d.time_id is None:
        raise DimensionError("a time trend needs a time_id column")
      t = d.time_id - d.time_id.mean() if self.centered else d.time_id
      blocks.append(t.reshape(-1, 1))
    blocks.append(X)
    if self.kind == "translog":
      j = X.shape[1]
      blocks.append(X**2)
      cross = [X[:, a] * X[:, b] for a in range(j) for b in range(a + 1, j)]
      if cross:
        blocks.append(np.column_stack(cross))
    return np.concatenate(blocks, axis=1)


@dataclass(frozen=True)
class FrontierSpec:
  basis: FrontierBasis
  beta: np.ndarray

  def __post_init__(self):
    object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))

  def mean(self, d: Dataset) -> np.ndarray:
    design = self.basis.design(d)
    if design.shape[1] != self.beta.size:
      raise DimensionError(f"beta has {self.beta.size} coefficients, the {self.basis.kind} design has {design.shape[1]} columns")
    return design @ self.beta


# library mode: any callable mapping a dataset to residuals stands in for a FrontierSpec
ResidualFunction = Callable[[Dataset], np.ndarray]
Frontier = Union[FrontierSpec, ResidualFunction]


def residuals(d: Dataset, f: Frontier) -> np.ndarray:
  """eps_t = y_t - ln g(x_t; beta), y already in logs."""
  if isinstance(f, FrontierSpec):
    return d.y - f.mean(d)
  eps = np.asarray(f(d), dtype=float).reshape(-1)
  if eps.size != d.n_obs:
    raise DimensionError(f"residual function returned {eps.size} values for {d.n_obs} observations")
  return eps
