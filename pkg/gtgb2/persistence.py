import glob
import json
import os
from datetime import datetime, timezone
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from gtgb2.bayes import PosteriorChain
from gtgb2.estimation import FitResult
from gtgb2.helpers import DEBUG, VERSION, versions

FLOAT_FORMAT = "%.17g"
# keys left out when comparing documents of two runs
VOLATILE_KEYS = ("created", "versions")


def meta_block(command: str, seed: Optional[int]) -> dict:
  return {"version": VERSION, "command": command, "seed": seed, "created": datetime.now(timezone.utc).isoformat(timespec="seconds"), "versions": versions()}


def write_json(path: str, payload: dict, command: str, seed: Optional[int] = None) -> str:
  os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
  with open(path, "w") as f:
    json.dump({"meta": meta_block(command, seed), **payload}, f, indent=2)
  if DEBUG >= 1: print(f"wrote {path}")
  return path


def read_json(path: str) -> dict:
  try:
    with open(path, "r") as f:
      return json.load(f)
  except FileNotFoundError as e:
    raise FileNotFoundError(f"Result file not found at {path}") from e


def strip_volatile(doc: dict) -> dict:
  meta = {k: v for k, v in doc.get("meta", {}).items() if k not in VOLATILE_KEYS}
  return {**doc, "meta": meta}


def write_frame(path: str, df: pd.DataFrame) -> str:
  os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
  df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
  if DEBUG >= 1: print(f"wrote {path} ({len(df)} rows)")
  return path


def read_frame(path: str) -> pd.DataFrame:
  try:
    return pd.read_csv(path, float_precision="round_trip")
  except FileNotFoundError as e:
    raise FileNotFoundError(f"Table not found at {path}") from e


def write_grid(path: str, x: np.ndarray, density: np.ndarray) -> str:
  """Two-column density grid (abscissa, density)."""
  return write_frame(path, pd.DataFrame({"x": x, "density": density}))


def read_grid(path: str) -> Tuple[np.ndarray, np.ndarray]:
  df = read_frame(path)
  return df["x"].to_numpy(dtype=float), df["density"].to_numpy(dtype=float)


def fit_path(out: str, label: str) -> str:
  return os.path.join(out, f"{label}_fit.json")


def write_fit(out: str, fr: FitResult, command: str, seed: Optional[int] = None) -> str:
  return write_json(fit_path(out, fr.label), {"fit": fr.to_dict()}, command, seed)


def read_fit(path: str) -> FitResult:
  doc = read_json(path)
  if "fit" not in doc:
    raise ValueError(f"{path} holds no fit result")
  return FitResult.from_dict(doc["fit"])


def chain_stem(out: str, label: str, index: int) -> str:
  return os.path.join(out, f"{label}_chain{index}")


def write_chain(out: str, chain: PosteriorChain, index: int, command: str) -> str:
  """Chain metadata as JSON, z-scale draws with the log-posterior trace and natural-scale draws as CSV."""
  stem = chain_stem(out, chain.label, index)
  z = pd.DataFrame(chain.draws_z, columns=list(chain.names))
  z["log_posterior"] = chain.log_posterior_trace
  write_frame(f"{stem}_draws_z.csv", z)
  write_frame(f"{stem}_draws.csv", chain.frame())
  return write_json(f"{stem}.json", {"chain": chain.to_dict(), "summary": chain.summary().to_dict(orient="index")}, command, chain.seed)


def read_chain(path: str) -> PosteriorChain:
  stem = path[:-len(".json")] if path.endswith(".json") else path
  doc = read_json(f"{stem}.json")
  z = read_frame(f"{stem}_draws_z.csv")
  names = doc["chain"]["names"]
  return PosteriorChain.from_dict(doc["chain"], z[names].to_numpy(dtype=float), z["log_posterior"].to_numpy(dtype=float))


def find_chains(directory: str, label: str) -> List[str]:
  return sorted(p for p in glob.glob(os.path.join(directory, f"{label}_chain*.json")))


def read_chains(directory: str, label: str) -> List[PosteriorChain]:
  return [read_chain(p) for p in find_chains(directory, label)]


def density_path(out: str, label: str, row: int) -> str:
  return os.path.join(out, f"density_{label}_{row}.csv")


def find_density_rows(directory: str, label: str) -> Dict[int, str]:
  prefix = f"density_{label}_"
  found = {}
  for p in glob.glob(os.path.join(directory, f"{prefix}*.csv")):
    tail = os.path.basename(p)[len(prefix):-len(".csv")]
    if tail.isdigit():
      found[int(tail)] = p
  return dict(sorted(found.items()))
