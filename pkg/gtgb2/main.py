import argparse
import json
import os
import sys
import time
import traceback
from functools import partial
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import Field, ValidationError, model_validator
from rich.console import Console
from rich.text import Text

from gtgb2 import persistence
from gtgb2.bayes import (
  MHConfig, PosteriorChain, average_models, conditional_efficiency, conditional_mean_u, efficiency_density_grid, efficiency_summary, pool_draws,
  restriction_probabilities, sample_chains, sample_latent_from_chain, sample_parameters
)
from gtgb2.config import JsonConfig
from gtgb2.estimation import FitConfig, FitResult, ModelSpec, PriorSpec, fit, model_search, ML, MAP
from gtgb2.estimation.spec import SHAPE_NAMES
from gtgb2.helpers import DEBUG, make_rng, parse_list, pretty_print_duration
from gtgb2.likelihood import CompoundErrorParams, Dataset, DimensionError, FrontierBasis, FrontierSpec, VEDLink, residuals
from gtgb2.models import TABLE_REGISTRY, build_model_spec, build_registry, canonical_label, get_supported_models
from gtgb2.quadrature import QuadratureConfig
from gtgb2.simulate import SimConfig, simulate
from gtgb2.viz import averaged_table, chain_table, efficiency_table, fit_table, print_banner, render, search_table

COMMANDS = ["fit", "search", "sample", "efficiency", "average", "simulate"]
FIT_MODES = {"ml": ML, "map": MAP}
# search.csv weight column per model prior; ML ranking always uses w3
WEIGHT_COLUMNS = {"uniform": "w1", "os": "w2"}
NEEDS_DATA = ("fit", "search", "sample", "efficiency")


class RunConfig(JsonConfig):
  """Everything one CLI invocation needs, from flags and an optional JSON config file (flags win)."""
  command: Literal["fit", "search", "sample", "efficiency", "average", "simulate"]
  data: Optional[str] = None
  model: str = "GT-GB2"
  models: Optional[List[str]] = None
  covariates: Optional[List[str]] = None
  frontier: Literal["linear", "translog"] = "linear"
  center: Optional[bool] = None
  time_trend: bool = False
  omega: Literal["production", "cost"] = "production"
  prior_models: Literal["uniform", "os"] = "uniform"
  mode: Literal["ml", "map", "mcmc"] = "map"
  seed: int = 0
  threads: int = Field(1, ge=1)
  out: str = "."
  a4: bool = False
  ved_cols: List[str] = Field(default_factory=list)
  panel: Literal["pooled", "time-invariant"] = "pooled"
  progress: bool = True

  rel_tol: Optional[float] = Field(None, gt=0)
  abs_tol: Optional[float] = Field(None, gt=0)
  n_starts: Optional[int] = Field(None, ge=1)
  n_iter: Optional[int] = Field(None, ge=1)
  burn_in: Optional[int] = Field(None, ge=0)
  thin: Optional[int] = Field(None, ge=1)
  target_accept: Optional[float] = Field(None, gt=0, lt=1)
  chains: int = Field(1, ge=1)

  rows: List[int] = Field(default_factory=lambda: [0])
  space: Literal["u", "r"] = "r"
  n_points: int = Field(512, ge=16)
  n_draws: int = Field(2000, ge=1)
  chain_dir: Optional[str] = None
  in_dir: Optional[str] = None
  weights: Optional[str] = None

  n_obs: int = Field(1000, ge=1)
  n_units: Optional[int] = Field(None, ge=1)
  n_periods: int = Field(1, ge=1)
  n_covariates: int = Field(1, ge=0)
  n_ved: int = Field(0, ge=0)
  beta: Optional[List[float]] = None
  params: Dict[str, float] = Field(default_factory=dict)

  @model_validator(mode="after")
  def _check(self) -> 'RunConfig':
    if self.command in NEEDS_DATA and self.data is None:
      raise ValueError(f"{self.command} needs --data")
    if self.command == "average" and self.in_dir is None:
      raise ValueError("average needs --in-dir with chain, fit or density files")
    if self.command == "average" and self.models is None and self.weights is None:
      raise ValueError("average needs --models or --weights")
    if self.command == "search" and self.mode == "mcmc":
      raise ValueError("search compares Laplace and BIC evidence; use --mode map or ml")
    if self.panel == "time-invariant" and self.ved_cols:
      raise ValueError("VED covariates are not supported with the time-invariant panel likelihood")
    if self.command == "efficiency" and self.panel == "time-invariant":
      raise ValueError("efficiency scores are computed per observation; use --panel pooled")
    if any(r < 0 for r in self.rows):
      raise ValueError("--rows must be non-negative")
    return self

  @property
  def omega_sign(self) -> int:
    return 1 if self.omega == "production" else -1

  def basis(self) -> FrontierBasis:
    return FrontierBasis(kind=self.frontier, center=self.center, time_trend=self.time_trend)

  def spec_options(self) -> dict:
    return {"omega": self.omega_sign, "basis": self.basis(), "ved": bool(self.ved_cols), "panel": self.panel == "time-invariant", "a4_mode": self.a4}

  def quadrature(self) -> QuadratureConfig:
    overrides = {k: v for k, v in (("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)) if v is not None}
    return QuadratureConfig(**overrides)

  def fit_config(self) -> FitConfig:
    overrides = {"n_starts": self.n_starts} if self.n_starts is not None else {}
    return FitConfig(seed=self.seed, quadrature=self.quadrature(), **overrides)

  def mh_config(self) -> MHConfig:
    overrides = {k: getattr(self, k) for k in ("n_iter", "burn_in", "thin", "target_accept") if getattr(self, k) is not None}
    return MHConfig(seed=self.seed, quadrature=self.quadrature(), **overrides)

  def sim_config(self) -> SimConfig:
    return SimConfig(
      model=self.model, omega=self.omega_sign, basis=self.basis(), a4_mode=self.a4, n_obs=self.n_obs, n_units=self.n_units, n_periods=self.n_periods,
      n_covariates=self.n_covariates, n_ved=self.n_ved, beta=self.beta, params=self.params, seed=self.seed
    )


def parse_params(value: str) -> Dict[str, float]:
  out = {}
  for item in parse_list(value):
    name, sep, number = item.partition("=")
    if not sep:
      raise argparse.ArgumentTypeError(f"expected name=value, got {item!r}")
    try:
      out[name.strip()] = float(number)
    except ValueError as e:
      raise argparse.ArgumentTypeError(f"{name.strip()}: {number!r} is not a number") from e
  return out


def build_parser() -> argparse.ArgumentParser:
  parser = argparse.ArgumentParser(prog="gtgb2", description="Stochastic frontier models with generalized t / GB2 compound errors", argument_default=argparse.SUPPRESS)
  parser.add_argument("command", nargs="?", choices=COMMANDS, help="Command to run")
  parser.add_argument("--config", type=str, help="JSON file with flag values (keys use underscores); flags win")
  parser.add_argument("--data", type=str, help="Dataset CSV (column y in logs); output path for simulate")
  parser.add_argument("--model", type=str, help="Model label, e.g. GT-GB2 or LAP-GG")
  parser.add_argument("--models", type=parse_list, help="Comma separated model labels (search, efficiency, average)")
  parser.add_argument("--covariates", type=parse_list, help="Comma separated covariate columns (default: all other columns)")
  parser.add_argument("--frontier", type=str, choices=["linear", "translog"], help="Frontier basis")
  parser.add_argument("--center", action=argparse.BooleanOptionalAction, help="Mean-center covariates (default on for translog)")
  parser.add_argument("--time-trend", action=argparse.BooleanOptionalAction, help="Add a time trend from the time_id column")
  parser.add_argument("--omega", type=str, choices=["production", "cost"], help="Frontier orientation")
  parser.add_argument("--prior-models", type=str, choices=["uniform", "os"], help="Prior over models for the weights")
  parser.add_argument("--mode", type=str, choices=["ml", "map", "mcmc"], help="Inference mode")
  parser.add_argument("--seed", type=int, help="Random seed")
  parser.add_argument("--threads", type=int, help="Worker threads for model search and chains")
  parser.add_argument("--out", type=str, help="Output directory")
  parser.add_argument("--a4", action=argparse.BooleanOptionalAction, help="Restrict tau <= 1 (inefficiency density non-increasing)")
  parser.add_argument("--ved-cols", type=parse_list, help="Comma separated columns driving sigma_u")
  parser.add_argument("--panel", type=str, choices=["pooled", "time-invariant"], help="Likelihood for panel data")
  parser.add_argument("--progress", action=argparse.BooleanOptionalAction, help="Show progress bars")
  parser.add_argument("--rel-tol", type=float, help="Quadrature relative tolerance")
  parser.add_argument("--abs-tol", type=float, help="Quadrature absolute tolerance")
  parser.add_argument("--n-starts", type=int, help="Optimizer starting points")
  parser.add_argument("--n-iter", type=int, help="MH iterations")
  parser.add_argument("--burn-in", type=int, help="MH burn-in iterations")
  parser.add_argument("--thin", type=int, help="MH thinning")
  parser.add_argument("--target-accept", type=float, help="MH target acceptance rate during burn-in")
  parser.add_argument("--chains", type=int, help="Number of MH chains")
  parser.add_argument("--rows", type=partial(parse_list, cast=int), help="Comma separated observation rows for density grids")
  parser.add_argument("--space", type=str, choices=["u", "r"], help="Density grids for u or for r = exp(-u)")
  parser.add_argument("--n-points", type=int, help="Density grid points")
  parser.add_argument("--n-draws", type=int, help="Latent or pooled draws to keep")
  parser.add_argument("--chain-dir", type=str, help="Directory with chains from sample")
  parser.add_argument("--in-dir", type=str, help="Directory with chain, fit and density files to average")
  parser.add_argument("--weights", type=str, help="search.csv holding the model weights")
  parser.add_argument("--n-obs", type=int, help="Simulated observations")
  parser.add_argument("--n-units", type=int, help="Simulated panel units")
  parser.add_argument("--n-periods", type=int, help="Simulated periods per unit")
  parser.add_argument("--n-covariates", type=int, help="Simulated covariates")
  parser.add_argument("--n-ved", type=int, help="Simulated VED covariates")
  parser.add_argument("--beta", type=partial(parse_list, cast=float), help="Comma separated frontier coefficients")
  parser.add_argument("--params", type=parse_params, help="Comma separated name=value stochastic parameters")
  return parser


def load_config(parser: argparse.ArgumentParser, argv: Optional[List[str]] = None) -> RunConfig:
  flags = vars(parser.parse_args(argv))
  merged = {}
  config_path = flags.pop("config", None)
  if config_path is not None:
    try:
      with open(config_path, "r") as f:
        merged = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
      parser.error(f"cannot read config {config_path}: {e}")
  merged.update(flags)
  try:
    return RunConfig.model_validate(merged)
  except ValidationError as e:
    parser.error(f"invalid arguments: {e}")


def check_label(parser: argparse.ArgumentParser, label: str) -> str:
  canonical = canonical_label(label)
  supported = get_supported_models()
  if canonical not in supported:
    parser.error(f"unknown model {label!r}; supported models: {', '.join(supported)}")
  return canonical


def load_data(cfg: RunConfig, parser: argparse.ArgumentParser) -> Dataset:
  try:
    d = Dataset.from_csv(cfg.data, cfg.covariates, cfg.ved_cols)
  except (FileNotFoundError, DimensionError) as e:
    parser.error(str(e))
  if cfg.panel == "time-invariant" and not d.has_panel:
    parser.error("--panel time-invariant needs a panel_id column")
  if cfg.time_trend and d.time_id is None:
    parser.error("--time-trend needs a time_id column")
  if cfg.command == "efficiency" and any(r >= d.n_obs for r in cfg.rows):
    parser.error(f"--rows must be below {d.n_obs}")
  return d


def model_spec(cfg: RunConfig, parser: argparse.ArgumentParser, label: str) -> ModelSpec:
  return build_model_spec(check_label(parser, label), **cfg.spec_options())


def selected_labels(cfg: RunConfig, parser: argparse.ArgumentParser, default: List[str]) -> List[str]:
  return list(dict.fromkeys(check_label(parser, label) for label in (cfg.models or default)))


def run_chains(cfg: RunConfig, d: Dataset, spec: ModelSpec) -> List[PosteriorChain]:
  if cfg.chains == 1:
    return [sample_parameters(d, spec, PriorSpec(), cfg.mh_config(), fit_cfg=cfg.fit_config(), progress=cfg.progress)]
  return sample_chains(d, spec, cfg.chains, PriorSpec(), cfg.mh_config(), cfg.fit_config(), cfg.threads)


def resolved_params(fr: FitResult) -> Dict[str, float]:
  """Point estimates with restricted shape parameters filled in (inf for the limits)."""
  params = fr.params
  tau = params["tau"] if "tau" in params else fr.spec.resolve("tau")
  for name in SHAPE_NAMES:
    if name not in params:
      params[name] = fr.spec.resolve(name, tau=tau)
  return params


def posterior_point(chains: List[PosteriorChain]) -> Tuple[np.ndarray, CompoundErrorParams, Optional[VEDLink]]:
  layout = chains[0].layout
  means = pd.concat([c.frame(resolved=False) for c in chains], ignore_index=True).mean()
  return layout.unpack(layout.from_dict(means.to_dict()))


def cmd_fit(cfg: RunConfig, parser: argparse.ArgumentParser, console: Console) -> int:
  if cfg.mode == "mcmc":
    return cmd_sample(cfg, parser, console)
  d = load_data(cfg, parser)
  spec = model_spec(cfg, parser, cfg.model)
  fr = fit(d, spec, PriorSpec(), FIT_MODES[cfg.mode], cfg.fit_config())
  persistence.write_fit(cfg.out, fr, "fit", cfg.seed)
  render(fit_table(fr), console)
  return 0


def cmd_search(cfg: RunConfig, parser: argparse.ArgumentParser, console: Console) -> int:
  d = load_data(cfg, parser)
  registry = build_registry(selected_labels(cfg, parser, TABLE_REGISTRY), **cfg.spec_options())
  result = model_search(d, registry, PriorSpec(), cfg.fit_config(), cfg.threads, cfg.progress)
  persistence.write_frame(os.path.join(cfg.out, "search.csv"), result.table)
  payload = {"table": json.loads(result.table.to_json(orient="records", double_precision=15)), "failures": result.failures}
  persistence.write_json(os.path.join(cfg.out, "search.json"), payload, "search", cfg.seed)
  for map_fit, ml_fit in result.fits.values():
    persistence.write_fit(cfg.out, ml_fit if cfg.mode == "ml" else map_fit, "search", cfg.seed)
  render(search_table(result), console)
  return 0 if len(result.table) else 1


def cmd_sample(cfg: RunConfig, parser: argparse.ArgumentParser, console: Console) -> int:
  d = load_data(cfg, parser)
  spec = model_spec(cfg, parser, cfg.model)
  for i, chain in enumerate(run_chains(cfg, d, spec)):
    persistence.write_chain(cfg.out, chain, i, "sample")
    render(chain_table(chain), console)
  return 0


def efficiency_point(cfg: RunConfig, parser: argparse.ArgumentParser, d: Dataset, spec: ModelSpec):
  """Parameter point and chains for one model: chains from --chain-dir, a fit from --in-dir, or a fresh run."""
  if cfg.chain_dir is not None:
    chains = persistence.read_chains(cfg.chain_dir, spec.label)
    if not chains:
      parser.error(f"no {spec.label} chains in {cfg.chain_dir}")
    return spec, posterior_point(chains), chains
  if cfg.in_dir is not None:
    fr = persistence.read_fit(persistence.fit_path(cfg.in_dir, spec.label))
    return fr.spec, fr.unpack(), []
  if cfg.mode == "mcmc":
    chains = run_chains(cfg, d, spec)
    for i, chain in enumerate(chains):
      persistence.write_chain(cfg.out, chain, i, "efficiency")
    return spec, posterior_point(chains), chains
  fr = fit(d, spec, PriorSpec(), FIT_MODES[cfg.mode], cfg.fit_config())
  persistence.write_fit(cfg.out, fr, "efficiency", cfg.seed)
  return spec, fr.unpack(), []


def cmd_efficiency(cfg: RunConfig, parser: argparse.ArgumentParser, console: Console) -> int:
  d = load_data(cfg, parser)
  qcfg = cfg.quadrature()
  rng = make_rng(cfg.seed)
  summaries, records = {}, []
  for label in selected_labels(cfg, parser, [cfg.model]):
    spec, (beta, theta, ved), chains = efficiency_point(cfg, parser, d, model_spec(cfg, parser, label))
    eps = residuals(d, FrontierSpec(spec.basis, beta))
    sigma_u = ved.sigma_u(d.W) if ved is not None else np.full(d.n_obs, theta.u.sigma)
    scores = pd.DataFrame({"row": np.arange(d.n_obs), "eps": eps, "mean_u": conditional_mean_u(eps, theta, qcfg, sigma_u), "efficiency": conditional_efficiency(eps, theta, qcfg, sigma_u)})
    persistence.write_frame(os.path.join(cfg.out, f"efficiency_{label}.csv"), scores)
    sources = {"plug-in": efficiency_summary(scores["efficiency"])}
    for row in cfg.rows:
      x, density = efficiency_density_grid(eps[row], theta, space=cfg.space, n_points=cfg.n_points, sigma_u=sigma_u[row], cfg=qcfg)
      persistence.write_grid(persistence.density_path(cfg.out, label, row), x, density)
    if chains:
      draws_per_chain = max(1, -(-cfg.n_draws // len(chains)))
      sets = [sample_latent_from_chain(rng, c, d, cfg.rows, thin=max(1, c.n_draws // draws_per_chain)) for c in chains]
      u = np.concatenate([s.u for s in sets], axis=1)
      persistence.write_frame(os.path.join(cfg.out, f"latent_{label}.csv"), pd.DataFrame(u.T, columns=[f"u_{row}" for row in cfg.rows]))
      sources["posterior"] = efficiency_summary(np.exp(-u).mean(axis=1))
    for source, s in sources.items():
      summaries[f"{label} ({source})"] = s
      records.append({"model": label, "source": source, **s})
  persistence.write_frame(os.path.join(cfg.out, "efficiency_summary.csv"), pd.DataFrame(records, columns=["model", "source", "mean", "min", "max", "range"]))
  render(efficiency_table(summaries), console)
  return 0


def model_weights_from(cfg: RunConfig, parser: argparse.ArgumentParser) -> Dict[str, float]:
  if cfg.weights is None:
    return {label: 1.0 for label in selected_labels(cfg, parser, [])}
  table = persistence.read_frame(cfg.weights)
  column = "w3" if cfg.mode == "ml" else WEIGHT_COLUMNS[cfg.prior_models]
  weights = dict(zip(table["label"], table[column].astype(float)))
  if cfg.models is None:
    return weights
  labels = selected_labels(cfg, parser, [])
  missing = [label for label in labels if label not in weights]
  if missing:
    parser.error(f"{cfg.weights} has no weights for {', '.join(missing)}")
  return {label: weights[label] for label in labels}


def cmd_average(cfg: RunConfig, parser: argparse.ArgumentParser, console: Console) -> int:
  weights = model_weights_from(cfg, parser)
  summaries, frames = {}, {}
  for label in weights:
    chains = persistence.read_chains(cfg.in_dir, label)
    if chains:
      frames[label] = pd.concat([c.frame() for c in chains], ignore_index=True)
      summaries[label] = frames[label].mean().to_dict()
      continue
    path = persistence.fit_path(cfg.in_dir, label)
    if not os.path.exists(path):
      parser.error(f"no chains or fit for {label} in {cfg.in_dir}")
    summaries[label] = resolved_params(persistence.read_fit(path))
  result = average_models(weights, summaries)

  found = {label: persistence.find_density_rows(cfg.in_dir, label) for label in weights}
  rows = sorted(set.intersection(*(set(f) for f in found.values())))
  for row in rows:
    mixed = average_models(weights, densities={label: persistence.read_grid(found[label][row]) for label in weights})
    persistence.write_grid(os.path.join(cfg.out, f"density_average_{row}.csv"), mixed.grid, mixed.density)

  restrictions = restriction_probabilities(result.weights, {label: build_model_spec(label) for label in weights})
  summary = result.summary.rename_axis("param").reset_index()
  persistence.write_frame(os.path.join(cfg.out, "average_summary.csv"), summary)
  payload = {
    "weights": result.weights,
    "summary": json.loads(summary.to_json(orient="records", double_precision=15)),
    "restrictions": json.loads(restrictions.to_json(orient="index", double_precision=15)),
    "density_rows": rows,
  }
  persistence.write_json(os.path.join(cfg.out, "average.json"), payload, "average", cfg.seed)
  if len(frames) == len(weights):
    persistence.write_frame(os.path.join(cfg.out, "pooled_draws.csv"), pool_draws(make_rng(cfg.seed), frames, result.weights, cfg.n_draws))
  render(averaged_table(result, restrictions), console)
  return 0


def cmd_simulate(cfg: RunConfig, parser: argparse.ArgumentParser, console: Console) -> int:
  check_label(parser, cfg.model)
  try:
    sim = cfg.sim_config()
  except ValidationError as e:
    parser.error(f"invalid simulation settings: {e}")
  d, u = simulate(sim)
  data_path = cfg.data or os.path.join(cfg.out, "simulated.csv")
  persistence.write_frame(data_path, d.to_frame())
  persistence.write_frame(os.path.join(cfg.out, "u.csv"), pd.DataFrame({"u": u}))
  persistence.write_json(os.path.join(cfg.out, "truth.json"), {"config": sim.model_dump(), "params": sim.true_params()}, "simulate", cfg.seed)
  console.print(Text(f"{sim.model}: {d.n_obs} observations written to {data_path}", style="bright_yellow"))
  return 0


handlers = {
  "fit": cmd_fit,
  "search": cmd_search,
  "sample": cmd_sample,
  "efficiency": cmd_efficiency,
  "average": cmd_average,
  "simulate": cmd_simulate,
}


def main(argv: Optional[List[str]] = None, console: Optional[Console] = None) -> int:
  parser = build_parser()
  cfg = load_config(parser, argv)
  console = console or Console()
  if cfg.progress and console.is_terminal:
    print_banner(console)
  start = time.perf_counter()
  try:
    code = handlers[cfg.command](cfg, parser, console)
  except Exception as e:
    console.print(Text(f"{cfg.command} failed: {type(e).__name__}: {e}", style="bold red"))
    if DEBUG >= 1: traceback.print_exc()
    return 1
  if DEBUG >= 1: print(f"{cfg.command} finished in {pretty_print_duration(time.perf_counter() - start)}")
  return code


def run():
  sys.exit(main())


if __name__ == "__main__":
  run()
