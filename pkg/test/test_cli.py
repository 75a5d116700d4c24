import io
import json
import os
import tempfile
import unittest

import numpy as np
import pandas as pd
import pytest
from rich.console import Console

from gtgb2 import persistence
from gtgb2.estimation import PriorSpec, fit, ML
from gtgb2.estimation.search import TABLE_COLUMNS
from gtgb2.likelihood import Dataset
from gtgb2.main import RunConfig, build_parser, load_config, main
from gtgb2.models import build_model_spec

QUICK = ["--n-starts", "1", "--rel-tol", "1e-8", "--no-progress"]


def quiet() -> Console:
  return Console(file=io.StringIO(), width=160)


def cli(*argv) -> int:
  return main([str(a) for a in argv], console=quiet())


class TestFitAndEfficiency(unittest.TestCase):
  @classmethod
  def setUpClass(cls):
    cls.tmp = tempfile.TemporaryDirectory()
    cls.root = cls.tmp.name
    cls.data = os.path.join(cls.root, "d.csv")
    cls.fits = os.path.join(cls.root, "fits")
    assert cli("simulate", "--model", "N-HN", "--n-obs", 300, "--seed", 12, "--data", cls.data, "--out", cls.root) == 0
    assert cli("fit", "--model", "N-HN", "--data", cls.data, "--mode", "ml", "--out", cls.fits, *QUICK) == 0
    assert cli("efficiency", "--model", "N-HN", "--data", cls.data, "--in-dir", cls.fits, "--out", cls.fits, "--rows", "0,3", "--n-points", 128, *QUICK) == 0

  @classmethod
  def tearDownClass(cls):
    cls.tmp.cleanup()

  def test_fit_matches_library(self):
    cfg = RunConfig(command="fit", data=self.data, model="N-HN", mode="ml", n_starts=1, rel_tol=1e-8)
    expected = fit(Dataset.from_csv(self.data), build_model_spec("N-HN"), PriorSpec(), ML, cfg.fit_config())
    doc = persistence.read_json(persistence.fit_path(self.fits, "N-HN"))
    self.assertEqual(doc["meta"]["command"], "fit")
    self.assertAlmostEqual(doc["fit"]["loglik"], expected.loglik, delta=1e-12)
    np.testing.assert_allclose(doc["fit"]["theta_hat"], expected.theta_hat, rtol=0, atol=1e-12)

  def test_fit_round_trip(self):
    fr = persistence.read_fit(persistence.fit_path(self.fits, "N-HN"))
    self.assertEqual(fr.label, "N-HN")
    self.assertEqual(fr.names, ("beta_const", "beta_x1", "sigma_v", "sigma_u"))
    self.assertEqual(fr.mode, ML)

  def test_efficiency_outputs(self):
    summary = pd.read_csv(os.path.join(self.fits, "efficiency_summary.csv"))
    self.assertEqual(list(summary.columns), ["model", "source", "mean", "min", "max", "range"])
    self.assertEqual(summary.source.tolist(), ["plug-in"])
    np.testing.assert_allclose(summary["range"], summary["max"] - summary["min"], rtol=0, atol=1e-12)
    scores = pd.read_csv(os.path.join(self.fits, "efficiency_N-HN.csv"))
    self.assertEqual(len(scores), 300)
    self.assertTrue(((scores.efficiency > 0) & (scores.efficiency < 1)).all())
    self.assertTrue((scores.mean_u > 0).all())
    self.assertEqual(sorted(persistence.find_density_rows(self.fits, "N-HN")), [0, 3])
    r, density = persistence.read_grid(persistence.density_path(self.fits, "N-HN", 3))
    self.assertTrue(np.all((r > 0) & (r < 1)))
    self.assertTrue(np.all(np.diff(r) >= 0))
    self.assertTrue(np.all(density >= 0))

  def test_average_single_model_reproduces_files(self):
    out = os.path.join(self.root, "average")
    self.assertEqual(cli("average", "--models", "N-HN", "--in-dir", self.fits, "--out", out), 0)
    for row in (0, 3):
      with open(persistence.density_path(self.fits, "N-HN", row), "rb") as a, open(os.path.join(out, f"density_average_{row}.csv"), "rb") as b:
        self.assertEqual(a.read(), b.read())
    summary = persistence.read_frame(os.path.join(out, "average_summary.csv")).set_index("param")
    fr = persistence.read_fit(persistence.fit_path(self.fits, "N-HN"))
    self.assertEqual(summary.loc["sigma_u", "mean"], fr.params["sigma_u"])
    self.assertEqual(summary.loc["nu_u", "p_inf"], 1.0)
    doc = persistence.read_json(os.path.join(out, "average.json"))
    self.assertEqual(doc["weights"], {"N-HN": 1.0})
    self.assertEqual(doc["density_rows"], [0, 3])
    self.assertEqual(doc["restrictions"]["tau"]["fixed"], 1.0)
    self.assertFalse(os.path.exists(os.path.join(out, "pooled_draws.csv")))


class TestSearch(unittest.TestCase):
  @classmethod
  def setUpClass(cls):
    cls.tmp = tempfile.TemporaryDirectory()
    cls.data = os.path.join(cls.tmp.name, "d.csv")
    assert cli("simulate", "--model", "N-EXP", "--n-obs", 250, "--seed", 3, "--data", cls.data, "--out", cls.tmp.name) == 0
    cls.code = cli("search", "--models", "N-HN,N-EXP,LAP-EXP", "--data", cls.data, "--out", cls.tmp.name, *QUICK)

  @classmethod
  def tearDownClass(cls):
    cls.tmp.cleanup()

  def test_table(self):
    self.assertEqual(self.code, 0)
    table = pd.read_csv(os.path.join(self.tmp.name, "search.csv"))
    self.assertEqual(list(table.columns), TABLE_COLUMNS)
    self.assertEqual(sorted(table.label), ["LAP-EXP", "N-EXP", "N-HN"])
    self.assertAlmostEqual(table.w3.sum(), 1.0, delta=1e-9)
    for column in ("w1", "w2"):
      if table[column].notna().all():
        self.assertAlmostEqual(table[column].sum(), 1.0, delta=1e-9)
    if table.w1.notna().all():
      self.assertTrue(table.w1.is_monotonic_decreasing)
    self.assertTrue((table.k == 4).all())

  def test_documents(self):
    doc = persistence.read_json(os.path.join(self.tmp.name, "search.json"))
    self.assertEqual(doc["failures"], {})
    self.assertEqual([row["label"] for row in doc["table"]], pd.read_csv(os.path.join(self.tmp.name, "search.csv")).label.tolist())
    for label in ("N-HN", "N-EXP", "LAP-EXP"):
      self.assertEqual(persistence.read_fit(persistence.fit_path(self.tmp.name, label)).mode, "MAP")

  def test_weighted_average(self):
    out = os.path.join(self.tmp.name, "avg")
    self.assertEqual(cli("average", "--weights", os.path.join(self.tmp.name, "search.csv"), "--mode", "ml", "--in-dir", self.tmp.name, "--out", out), 0)
    doc = persistence.read_json(os.path.join(out, "average.json"))
    table = pd.read_csv(os.path.join(self.tmp.name, "search.csv"))
    for label, w in zip(table.label, table.w3):
      self.assertAlmostEqual(doc["weights"][label], w / table.w3.sum(), places=12)


class TestSample(unittest.TestCase):
  @classmethod
  def setUpClass(cls):
    cls.tmp = tempfile.TemporaryDirectory()
    cls.data = os.path.join(cls.tmp.name, "d.csv")
    assert cli("simulate", "--model", "N-EXP", "--n-obs", 150, "--seed", 8, "--data", cls.data, "--out", cls.tmp.name) == 0
    args = ["--model", "N-EXP", "--data", cls.data, "--out", cls.tmp.name, "--n-iter", 300, "--burn-in", 100, "--thin", 2, "--seed", 5, *QUICK]
    cls.code = cli("fit", "--mode", "mcmc", *args)

  @classmethod
  def tearDownClass(cls):
    cls.tmp.cleanup()

  def test_chain_files(self):
    self.assertEqual(self.code, 0)
    paths = persistence.find_chains(self.tmp.name, "N-EXP")
    self.assertEqual([os.path.basename(p) for p in paths], ["N-EXP_chain0.json"])
    chain = persistence.read_chain(paths[0])
    self.assertEqual(chain.n_draws, 100)
    self.assertEqual(chain.seed, 5)
    draws = pd.read_csv(os.path.join(self.tmp.name, "N-EXP_chain0_draws.csv"))
    np.testing.assert_allclose(draws[list(chain.names)].to_numpy(), chain.natural_draws(), rtol=1e-14)
    self.assertTrue(np.all(draws.psi_u == 1.0))

  def test_posterior_efficiency_and_pooling(self):
    out = os.path.join(self.tmp.name, "eff")
    self.assertEqual(cli("efficiency", "--model", "N-EXP", "--data", self.data, "--chain-dir", self.tmp.name, "--out", out, "--rows", "2", "--n-draws", 50, "--n-points", 64, *QUICK), 0)
    summary = pd.read_csv(os.path.join(out, "efficiency_summary.csv"))
    self.assertEqual(summary.source.tolist(), ["plug-in", "posterior"])
    latent = pd.read_csv(os.path.join(out, "latent_N-EXP.csv"))
    self.assertEqual(list(latent.columns), ["u_2"])
    self.assertEqual(len(latent), 50)
    self.assertTrue((latent.u_2 > 0).all())

    pooled_out = os.path.join(self.tmp.name, "avg")
    self.assertEqual(cli("average", "--models", "N-EXP", "--in-dir", self.tmp.name, "--out", pooled_out, "--n-draws", 40), 0)
    pooled = pd.read_csv(os.path.join(pooled_out, "pooled_draws.csv"))
    self.assertEqual(len(pooled), 40)
    self.assertEqual(set(pooled.model), {"N-EXP"})


class TestReproducibility(unittest.TestCase):
  def test_same_seed_same_files(self):
    with tempfile.TemporaryDirectory() as root:
      docs = []
      for name in ("a", "b"):
        out = os.path.join(root, name)
        self.assertEqual(cli("simulate", "--model", "LAP-GG", "--n-obs", 200, "--seed", 4, "--params", "psi_u=1.5,tau=0.8", "--out", out), 0)
        with open(os.path.join(out, "simulated.csv"), "rb") as f:
          docs.append((f.read(), persistence.strip_volatile(persistence.read_json(os.path.join(out, "truth.json")))))
      self.assertEqual(docs[0][0], docs[1][0])
      self.assertEqual(docs[0][1], docs[1][1])
      self.assertEqual(docs[0][1]["params"]["psi_u"], 1.5)
      self.assertEqual(docs[0][1]["meta"]["seed"], 4)


def test_unknown_label_exits_2(tmp_path, capsys):
  data = tmp_path / "d.csv"
  assert cli("simulate", "--n-obs", 20, "--data", data, "--out", tmp_path) == 0
  with pytest.raises(SystemExit) as e:
    cli("fit", "--model", "XX-YY", "--data", data, "--out", tmp_path)
  assert e.value.code == 2
  err = capsys.readouterr().err
  assert "XX-YY" in err
  assert "GT-GB2" in err and "N-HN" in err


def test_missing_ved_columns_exit_2(tmp_path, capsys):
  data = tmp_path / "d.csv"
  assert cli("simulate", "--n-obs", 20, "--data", data, "--out", tmp_path) == 0
  with pytest.raises(SystemExit) as e:
    cli("fit", "--model", "N-HN", "--data", data, "--ved-cols", "z1,z2", "--out", tmp_path)
  assert e.value.code == 2
  assert "z1" in capsys.readouterr().err


def test_missing_data_exits_2():
  with pytest.raises(SystemExit) as e:
    cli("fit", "--model", "N-HN")
  assert e.value.code == 2


def test_config_file_and_flag_precedence(tmp_path):
  path = tmp_path / "run.json"
  path.write_text(json.dumps({"command": "search", "model": "T-HN", "rel_tol": 1e-7, "models": ["N-HN"], "data": "x.csv"}))
  cfg = load_config(build_parser(), ["fit", "--config", str(path), "--model", "LAP-GG", "--threads", "3"])
  assert cfg.command == "fit"
  assert cfg.model == "LAP-GG"
  assert cfg.rel_tol == 1e-7
  assert cfg.models == ["N-HN"]
  assert cfg.threads == 3
  assert cfg.quadrature().rel_tol == 1e-7
  assert cfg.fit_config().n_starts == 5


def test_config_rejects_unknown_keys(tmp_path):
  path = tmp_path / "run.json"
  path.write_text(json.dumps({"command": "fit", "data": "x.csv", "moddel": "N-HN"}))
  with pytest.raises(SystemExit) as e:
    load_config(build_parser(), ["--config", str(path)])
  assert e.value.code == 2


def test_flag_parsing():
  cfg = load_config(build_parser(), ["simulate", "--beta", "1.0,0.5,0.25", "--params", "sigma_u=0.4, nu_v=6", "--rows", "1,2", "--omega", "cost", "--no-center"])
  assert cfg.beta == [1.0, 0.5, 0.25]
  assert cfg.params == {"sigma_u": 0.4, "nu_v": 6.0}
  assert cfg.rows == [1, 2]
  assert cfg.omega_sign == -1
  assert cfg.center is False
  assert cfg.sim_config().omega == -1
  with pytest.raises(SystemExit):
    load_config(build_parser(), ["simulate", "--params", "sigma_u"])
  with pytest.raises(SystemExit):
    load_config(build_parser(), ["search", "--data", "x.csv", "--mode", "mcmc"])
