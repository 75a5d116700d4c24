import os
import platform
from typing import Optional, List
from concurrent.futures import ThreadPoolExecutor

import numpy as np

DEBUG = int(os.getenv("DEBUG", default="0"))
VERSION = "0.1.0"

gtgb2_text = r"""
       _         _    ____  
  __ _| |_ __ _ | |__|___ \ 
 / _` | __/ _` || '_ \ __) |
| (_| | || (_| || |_) / __/ 
 \__, |\__\__, ||_.__/_____|
 |___/    |___/             
    """


def compute_pool(threads: int = 1, prefix: str = "gtgb2_worker") -> ThreadPoolExecutor:
  """Thread pool for independent fits. Callers own the pool and shut it down."""
  return ThreadPoolExecutor(max_workers=max(1, threads), thread_name_prefix=prefix)


def make_rng(seed: Optional[int]) -> np.random.Generator:
  return np.random.default_rng(seed)


def spawn_seeds(seed: Optional[int], n: int) -> List[int]:
  """Independent integer seeds for replications or chains, one generator per thread."""
  return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def versions() -> dict:
  import scipy
  import pandas
  import pydantic
  return {
    "gtgb2": VERSION,
    "python": platform.python_version(),
    "numpy": np.__version__,
    "scipy": scipy.__version__,
    "pandas": pandas.__version__,
    "pydantic": pydantic.__version__,
  }


def pretty_print_duration(seconds: float) -> str:
  if seconds < 1:
    return f"{seconds * 1000:.0f} ms"
  elif seconds < 60:
    return f"{seconds:.2f} s"
  elif seconds < 3600:
    return f"{int(seconds // 60)}m {seconds % 60:.0f}s"
  else:
    return f"{int(seconds // 3600)}h {int(seconds % 3600 // 60)}m"


def parse_list(value: Optional[str], cast=str) -> List:
  if value is None or value.strip() == "":
    return []
  return [cast(item.strip()) for item in value.split(",") if item.strip()]
