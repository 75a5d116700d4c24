import math
from typing import Dict, Optional

import pandas as pd
from rich.console import Console, Group
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from gtgb2.bayes import AveragedResult, PosteriorChain
from gtgb2.estimation import FitResult, SearchResult
from gtgb2.helpers import gtgb2_text
from gtgb2.models import get_pretty_name


def _num(x, digits: int = 4) -> str:
  if x is None:
    return "-"
  x = float(x)
  if math.isnan(x):
    return "-"
  if math.isinf(x):
    return "inf" if x > 0 else "-inf"
  return f"{x:.{digits}f}"


def fit_table(fr: FitResult) -> Panel:
  table = Table(show_header=True, header_style="bold cyan")
  table.add_column("parameter")
  table.add_column("estimate", justify="right")
  table.add_column("s.e.", justify="right")
  for name, value, se in zip(fr.names, fr.theta_hat, fr.std_errors):
    table.add_row(name, _num(value), _num(se))
  footer = Text(f"ln L {_num(fr.loglik, 3)}   BIC {_num(fr.bic, 2)}   k {fr.k}   T {fr.n_obs}", style="bright_yellow")
  if fr.log_evidence_laplace is not None:
    footer.append(f"   ln p(y|M) {_num(fr.log_evidence_laplace, 3)}")
  if not fr.converged:
    footer.append("   not converged", style="bold red")
  title = f"{fr.label} ({get_pretty_name(fr.label) or 'custom'}) {fr.mode}"
  return Panel(Group(table, footer), title=title, border_style="bright_yellow")


def search_table(result: SearchResult, top: Optional[int] = None) -> Panel:
  table = Table(show_header=True, header_style="bold cyan")
  for column, header in (("label", "model"), ("w1", "w1"), ("w2", "w2"), ("w3", "w3"), ("log_evidence", "ln p(y|M)"), ("log_evidence_ml", "ln p_ML(y|M)"),
                         ("loglik", "ln L"), ("bic", "BIC"), ("k", "k")):
    table.add_column(header, justify="left" if column == "label" else "right")
  rows = result.table if top is None else result.table.head(top)
  for row in rows.itertuples(index=False):
    table.add_row(row.label, _num(row.w1), _num(row.w2), _num(row.w3), _num(row.log_evidence, 2), _num(row.log_evidence_ml, 2), _num(row.loglik, 3), _num(row.bic, 2), str(row.k))
  parts = [table]
  if result.failures:
    parts.append(Text("failed: " + "; ".join(f"{label} ({reason})" for label, reason in result.failures.items()), style="red"))
  return Panel(Group(*parts), title=f"Model comparison ({len(result.table)} models)", border_style="cyan")


def chain_table(chain: PosteriorChain) -> Panel:
  summary = chain.summary()
  geweke = chain.geweke() if chain.n_draws >= 40 else None
  table = Table(show_header=True, header_style="bold cyan")
  for header in ("parameter", "mean", "sd", "2.5%", "97.5%", "geweke z"):
    table.add_column(header, justify="left" if header == "parameter" else "right")
  for name, row in summary.iterrows():
    z = _num(geweke[name], 2) if geweke is not None and name in geweke.index else "-"
    table.add_row(str(name), _num(row["mean"]), _num(row["sd"]), _num(row["q025"]), _num(row["q975"]), z)
  footer = Text(f"{chain.n_draws} draws, acceptance {chain.acceptance_rate:.3f}, seed {chain.seed}", style="bright_yellow")
  return Panel(Group(table, footer), title=f"{chain.label} posterior", border_style="green")


def efficiency_table(summaries: Dict[str, Dict[str, float]]) -> Panel:
  table = Table(show_header=True, header_style="bold cyan")
  for header in ("model", "mean", "min", "max", "range"):
    table.add_column(header, justify="left" if header == "model" else "right")
  for label, s in summaries.items():
    table.add_row(label, _num(s["mean"]), _num(s["min"]), _num(s["max"]), _num(s["range"]))
  return Panel(table, title="Efficiency r = exp(-u)", border_style="magenta")


def averaged_table(result: AveragedResult, restrictions: Optional[pd.DataFrame] = None) -> Panel:
  weights = Table(show_header=True, header_style="bold cyan")
  weights.add_column("model")
  weights.add_column("weight", justify="right")
  for label, w in sorted(result.weights.items(), key=lambda kv: -kv[1]):
    weights.add_row(label, _num(w))
  summary = Table(show_header=True, header_style="bold cyan")
  for header in ("parameter", "pooled mean", "P(inf)"):
    summary.add_column(header, justify="left" if header == "parameter" else "right")
  for name, row in result.summary.iterrows():
    summary.add_row(str(name), _num(row["mean"]), _num(row["p_inf"]))
  parts = [weights, summary]
  if restrictions is not None:
    states = Table(show_header=True, header_style="bold cyan")
    states.add_column("shape")
    for column in restrictions.columns:
      states.add_column(column, justify="right")
    for name, row in restrictions.iterrows():
      states.add_row(str(name), *(_num(v) for v in row))
    parts.append(states)
  return Panel(Group(*parts), title="Averaged results", border_style="cyan")


def print_banner(console: Console) -> None:
  console.print(Text(gtgb2_text, style="bright_yellow"))


def render(panel: Panel, console: Optional[Console] = None) -> None:
  (console or Console()).print(panel)
