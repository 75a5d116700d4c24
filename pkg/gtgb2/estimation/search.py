import asyncio
import traceback
from concurrent.futures import as_completed
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from gtgb2.estimation.evidence import OS, UNIFORM, ml_log_evidence, model_weights
from gtgb2.estimation.fit import FitConfig, FitResult, fit, MAP, ML
from gtgb2.estimation.priors import PriorSpec
from gtgb2.estimation.spec import ModelSpec
from gtgb2.helpers import DEBUG, compute_pool
from gtgb2.likelihood import Dataset

PINNED_LABEL = "GT-GB2"
TABLE_COLUMNS = ["label", "w1", "w2", "w3", "log_evidence", "log_evidence_ml", "loglik", "bic", "k"]


@dataclass
class SearchResult:
  table: pd.DataFrame
  fits: Dict[str, Tuple[FitResult, FitResult]] = field(default_factory=dict)
  failures: Dict[str, str] = field(default_factory=dict)

  def weights(self, column: str = "w1") -> Dict[str, float]:
    return dict(zip(self.table["label"], self.table[column]))


def comparison_table(labels: Sequence[str], log_evidence: Sequence[float], loglik: Sequence[float], bic: Sequence[float], k: Sequence[int]) -> pd.DataFrame:
  """
  w1: Laplace evidence, uniform model prior; w2: Laplace evidence, OS prior 2^-k; w3: -BIC/2, uniform prior.
  Rows sorted by w1 (then label), with GT-GB2 first when present.
  """
  log_evidence = np.asarray(log_evidence, dtype=float)
  bic = np.asarray(bic, dtype=float)
  ml = np.array([ml_log_evidence(b) for b in bic])
  table = pd.DataFrame({
    "label": list(labels),
    "w1": model_weights(log_evidence, UNIFORM) if np.isfinite(log_evidence).any() else np.nan,
    "w2": model_weights(log_evidence, OS, k) if np.isfinite(log_evidence).any() else np.nan,
    "w3": model_weights(ml, UNIFORM),
    "log_evidence": log_evidence,
    "log_evidence_ml": ml,
    "loglik": np.asarray(loglik, dtype=float),
    "bic": bic,
    "k": np.asarray(k, dtype=int),
  })
  table = table.sort_values(["w1", "label"], ascending=[False, True], kind="mergesort")
  pinned = table["label"] == PINNED_LABEL
  return pd.concat([table[pinned], table[~pinned]]).reset_index(drop=True)


def fit_pair(d: Dataset, spec: ModelSpec, priors: Optional[PriorSpec] = None, cfg: Optional[FitConfig] = None) -> Tuple[FitResult, FitResult]:
  """MAP fit (for the Laplace evidence), then an ML fit started from the MAP estimate (for ln L and BIC)."""
  map_fit = fit(d, spec, priors, MAP, cfg)
  ml_fit = fit(d, spec, priors, ML, cfg, initial=map_fit.params)
  return map_fit, ml_fit


def _table_from_fits(fits: Dict[str, Tuple[FitResult, FitResult]]) -> pd.DataFrame:
  labels = list(fits)
  evidence = [np.nan if fits[l][0].log_evidence_laplace is None else fits[l][0].log_evidence_laplace for l in labels]
  return comparison_table(labels, evidence, [fits[l][1].loglik for l in labels], [fits[l][1].bic for l in labels], [fits[l][1].k for l in labels])


def model_search(
  d: Dataset,
  registry: Sequence[ModelSpec],
  priors: Optional[PriorSpec] = None,
  cfg: Optional[FitConfig] = None,
  threads: int = 1,
  progress: bool = False,
) -> SearchResult:
  """Fits every model of the registry (MAP and ML) and ranks them. A failing model is recorded, not fatal."""
  if not registry:
    raise ValueError("model_search needs a non-empty registry")
  fits: Dict[str, Tuple[FitResult, FitResult]] = {}
  failures: Dict[str, str] = {}
  with compute_pool(threads, "gtgb2_search") as pool:
    futures = {pool.submit(fit_pair, d, spec, priors, cfg): spec.label for spec in registry}
    for future in tqdm(as_completed(futures), total=len(futures), desc="model search", disable=not progress):
      label = futures[future]
      try:
        fits[label] = future.result()
      except Exception as e:
        failures[label] = f"{type(e).__name__}: {e}"
        if DEBUG >= 1: print(f"model search: {label} failed: {failures[label]}")
        if DEBUG >= 3: traceback.print_exc()
  return _finish(registry, fits, failures)


async def model_search_async(
  d: Dataset,
  registry: Sequence[ModelSpec],
  priors: Optional[PriorSpec] = None,
  cfg: Optional[FitConfig] = None,
  threads: int = 1,
) -> SearchResult:
  if not registry:
    raise ValueError("model_search needs a non-empty registry")
  loop = asyncio.get_running_loop()
  with compute_pool(threads, "gtgb2_search") as pool:
    results = await asyncio.gather(*(loop.run_in_executor(pool, partial(fit_pair, d, spec, priors, cfg)) for spec in registry), return_exceptions=True)
  fits, failures = {}, {}
  for spec, result in zip(registry, results):
    if isinstance(result, Exception):
      failures[spec.label] = f"{type(result).__name__}: {result}"
    else:
      fits[spec.label] = result
  return _finish(registry, fits, failures)


def _finish(registry: Sequence[ModelSpec], fits: Dict[str, Tuple[FitResult, FitResult]], failures: Dict[str, str]) -> SearchResult:
  ordered = {spec.label: fits[spec.label] for spec in registry if spec.label in fits}
  table = _table_from_fits(ordered) if ordered else pd.DataFrame(columns=TABLE_COLUMNS)
  if DEBUG >= 1: print(f"model search: {len(ordered)} fitted, {len(failures)} failed")
  return SearchResult(table, ordered, failures)


def registry_subset(registry: Sequence[ModelSpec], labels: List[str]) -> List[ModelSpec]:
  by_label = {spec.label: spec for spec in registry}
  missing = [l for l in labels if l not in by_label]
  if missing:
    raise ValueError(f"Unknown model labels: {', '.join(missing)}")
  return [by_label[l] for l in labels]
