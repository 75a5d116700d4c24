from typing import List, Optional

from gtgb2.estimation.spec import ModelSpec, Restriction
from gtgb2.likelihood import FrontierBasis

# observation error v: restrictions on (psi_v, nu_v)
observation_cards = {
  "N": {"name": "normal", "psi_v": 2.0, "nu_v": "inf"},
  "T": {"name": "Student's t", "psi_v": 2.0},
  "LAP": {"name": "Laplace", "psi_v": 1.0, "nu_v": "inf"},
  "TLAP": {"name": "t-Laplace", "psi_v": 1.0},
  "GED": {"name": "GED", "nu_v": "inf"},
  "GT": {"name": "generalized t"},
}

# inefficiency u: restrictions on (psi_u, nu_u, tau)
inefficiency_cards = {
  "GB2": {"name": "GB2"},
  "GG": {"name": "generalized gamma", "nu_u": "inf"},
  "GAM": {"name": "gamma", "nu_u": "inf", "psi_u": 1.0},
  "W": {"name": "Weibull", "nu_u": "inf", "psi_u": "tau"},
  "EXP": {"name": "exponential", "nu_u": "inf", "psi_u": 1.0, "tau": 1.0},
  "HN": {"name": "half-normal", "nu_u": "inf", "psi_u": 2.0, "tau": 1.0},
  "HT": {"name": "half-Student's t", "psi_u": 2.0, "tau": 1.0},
  "HGED": {"name": "half-GED", "nu_u": "inf", "tau": 1.0},
  "HGT": {"name": "half-generalized t", "tau": 1.0},
}

# the 34-model comparison registry, in the order of the reference ranking table
TABLE_REGISTRY = [
  "GT-GB2", "LAP-GG", "TLAP-GB2", "GT-GG", "GED-GG", "GED-GB2", "T-GB2", "N-GG", "LAP-GAM", "GT-EXP", "GED-EXP", "LAP-EXP",
  "GT-HGT", "GT-HGED", "GED-HGED", "GED-HGT", "T-EXP", "LAP-HGED", "N-EXP", "LAP-HGT", "T-HGED", "T-HGT", "N-HGED", "N-HGT",
  "GT-HT", "GED-HT", "LAP-HT", "T-HT", "N-HT", "GT-HN", "GED-HN", "T-HN", "LAP-HN", "N-HN",
]

# constructible by label but outside the comparison registry
EXTRA_MODELS = ["N-GAM", "N-W", "T-GAM", "T-GG", "GED-GAM", "GED-W"]

aliases = {"N-EX": "N-EXP"}


def _split(label: str):
  prefix, _, suffix = label.partition("-")
  return observation_cards[prefix], inefficiency_cards[suffix]


model_cards = {}
for _label in TABLE_REGISTRY + EXTRA_MODELS:
  _v, _u = _split(_label)
  model_cards[_label] = {
    "restrictions": {k: val for k, val in {**_v, **_u}.items() if k != "name"},
    "pretty": f"{_v['name']} / {_u['name']}",
    "table": _label in TABLE_REGISTRY,
  }


def canonical_label(label: str) -> str:
  label = label.strip().upper()
  return aliases.get(label, label)


def get_pretty_name(label: str) -> Optional[str]:
  return model_cards.get(canonical_label(label), {}).get("pretty", None)


def get_supported_models(table_only: bool = False) -> List[str]:
  return [label for label, card in model_cards.items() if card["table"] or not table_only]


def build_model_spec(label: str, omega: int = 1, basis: Optional[FrontierBasis] = None, ved: bool = False, panel: bool = False, a4_mode: bool = False) -> ModelSpec:
  canonical = canonical_label(label)
  if canonical not in model_cards:
    raise ValueError(f"Unsupported model label {label!r}. Supported models: {', '.join(get_supported_models())}")
  restrictions = {name: Restriction.decode(value) for name, value in model_cards[canonical]["restrictions"].items()}
  return ModelSpec(label=canonical, omega=omega, basis=basis or FrontierBasis(), ved=ved, panel=panel, a4_mode=a4_mode, **restrictions)


def build_registry(labels: Optional[List[str]] = None, **options) -> List[ModelSpec]:
  """ModelSpecs for the given labels (default: the 34-model comparison registry), sharing frontier and likelihood options."""
  return [build_model_spec(label, **options) for label in (labels or TABLE_REGISTRY)]
