from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from gtgb2.helpers import DEBUG

PANEL_COLUMN = "panel_id"
TIME_COLUMN = "time_id"
RESPONSE_COLUMN = "y"


class DimensionError(ValueError):
  pass


def _finite(name: str, a: np.ndarray) -> np.ndarray:
  if not np.all(np.isfinite(a)):
    raise DimensionError(f"{name} contains missing or non-finite values")
  return a


@dataclass
class Dataset:
  """y (already in logs), raw covariates X with column names, optional panel/time ids and VED covariates W."""
  y: np.ndarray
  X: np.ndarray
  columns: Tuple[str, ...] = ()
  panel_id: Optional[np.ndarray] = None
  time_id: Optional[np.ndarray] = None
  W: Optional[np.ndarray] = None
  w_columns: Tuple[str, ...] = ()

  def __post_init__(self):
    self.y = _finite("y", np.asarray(self.y, dtype=float).reshape(-1))
    n = self.y.size
    if n == 0:
      raise DimensionError("dataset has no observations")
    X = np.asarray(self.X, dtype=float)
    if X.ndim == 1 and X.size == n:
      X = X.reshape(n, 1)
    if X.size == 0:
      X = np.zeros((n, 0))
    if X.ndim != 2 or X.shape[0] != n:
      raise DimensionError(f"X has shape {X.shape}, expected ({n}, J)")
    self.X = _finite("X", X)
    self.columns = tuple(self.columns) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
    if len(self.columns) != X.shape[1]:
      raise DimensionError(f"{len(self.columns)} column names for {X.shape[1]} covariates")
    if self.panel_id is not None:
      self.panel_id = np.asarray(self.panel_id).reshape(-1)
      if self.panel_id.size != n:
        raise DimensionError(f"panel_id has {self.panel_id.size} entries for {n} observations")
    if self.time_id is not None:
      self.time_id = _finite("time_id", np.asarray(self.time_id, dtype=float).reshape(-1))
      if self.time_id.size != n:
        raise DimensionError(f"time_id has {self.time_id.size} entries for {n} observations")
    if self.W is not None:
      W = np.asarray(self.W, dtype=float)
      if W.ndim == 1:
        W = W.reshape(-1, 1)
      if W.shape[0] != n:
        raise DimensionError(f"W has {W.shape[0]} rows for {n} observations")
      self.W = _finite("W", W)
      self.w_columns = tuple(self.w_columns) or tuple(f"w{j + 1}" for j in range(W.shape[1]))

  @property
  def n_obs(self) -> int:
    return self.y.size

  @property
  def has_panel(self) -> bool:
    return self.panel_id is not None

  def groups(self) -> List[np.ndarray]:
    """Row indices per panel unit, units in order of first appearance."""
    if self.panel_id is None:
      raise DimensionError("dataset has no panel_id")
    _, first, inverse = np.unique(self.panel_id, return_index=True, return_inverse=True)
    order = np.argsort(first)
    groups = [np.flatnonzero(inverse == g) for g in order]
    if any(g.size == 0 for g in groups):
      raise DimensionError("empty panel group")
    return groups

  def subset(self, rows: Sequence[int]) -> 'Dataset':
    rows = np.asarray(rows)
    return Dataset(
      self.y[rows], self.X[rows], self.columns, None if self.panel_id is None else self.panel_id[rows], None if self.time_id is None else self.time_id[rows],
      None if self.W is None else self.W[rows], self.w_columns
    )

  def to_frame(self) -> pd.DataFrame:
    df = pd.DataFrame({RESPONSE_COLUMN: self.y})
    for j, name in enumerate(self.columns):
      df[name] = self.X[:, j]
    if self.W is not None:
      for j, name in enumerate(self.w_columns):
        df[name] = self.W[:, j]
    if self.panel_id is not None:
      df[PANEL_COLUMN] = self.panel_id
    if self.time_id is not None:
      df[TIME_COLUMN] = self.time_id
    return df

  def to_csv(self, path: str) -> None:
    self.to_frame().to_csv(path, index=False, float_format="%.17g")

  @classmethod
  def from_frame(cls, df: pd.DataFrame, covariates: Optional[Sequence[str]] = None, ved_cols: Optional[Sequence[str]] = None) -> 'Dataset':
    ved_cols = list(ved_cols or [])
    missing = [c for c in [RESPONSE_COLUMN] + list(covariates or []) + ved_cols if c not in df.columns]
    if missing:
      raise DimensionError(f"columns not found in dataset: {', '.join(missing)}")
    reserved = {RESPONSE_COLUMN, PANEL_COLUMN, TIME_COLUMN, *ved_cols}
    covariates = list(covariates) if covariates is not None else [c for c in df.columns if c not in reserved]
    if df[[RESPONSE_COLUMN] + covariates + ved_cols].isna().any().any():
      raise DimensionError("dataset contains missing values")
    if DEBUG >= 1: print(f"dataset: {len(df)} rows, covariates={covariates}, ved={ved_cols}")
    return cls(
      y=df[RESPONSE_COLUMN].to_numpy(dtype=float),
      X=df[covariates].to_numpy(dtype=float) if covariates else np.zeros((len(df), 0)),
      columns=tuple(covariates),
      panel_id=df[PANEL_COLUMN].to_numpy() if PANEL_COLUMN in df.columns else None,
      time_id=df[TIME_COLUMN].to_numpy(dtype=float) if TIME_COLUMN in df.columns else None,
      W=df[ved_cols].to_numpy(dtype=float) if ved_cols else None,
      w_columns=tuple(ved_cols),
    )

  @classmethod
  def from_csv(cls, path: str, covariates: Optional[Sequence[str]] = None, ved_cols: Optional[Sequence[str]] = None) -> 'Dataset':
    try:
      df = pd.read_csv(path)
    except FileNotFoundError as e:
      raise FileNotFoundError(f"Dataset not found at {path}") from e
    return cls.from_frame(df, covariates, ved_cols)
