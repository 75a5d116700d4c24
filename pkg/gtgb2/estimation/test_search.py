import unittest

import numpy as np
import pytest

from gtgb2.estimation import FitConfig, model_search, model_search_async, registry_subset
from gtgb2.estimation.search import TABLE_COLUMNS
from gtgb2.models import build_model_spec, build_registry
from gtgb2.simulate import SimConfig, simulate

FAST = FitConfig(n_starts=1, start_maxiter=150, polish_maxiter=800)


def small_data():
  d, _ = simulate(SimConfig(model="N-EXP", n_obs=200, seed=12))
  return d


class TestModelSearch(unittest.TestCase):
  @classmethod
  def setUpClass(cls):
    cls.d = small_data()
    cls.result = model_search(cls.d, build_registry(["N-HN", "N-EXP"]), cfg=FAST, threads=2)

  def test_table(self):
    table = self.result.table
    self.assertEqual(list(table.columns), TABLE_COLUMNS)
    self.assertEqual(set(table.label), {"N-HN", "N-EXP"})
    for column in ("w1", "w2", "w3"):
      self.assertLess(abs(table[column].sum() - 1.0), 1e-9)
    self.assertTrue(np.all(np.diff(table.w1.to_numpy()) <= 0))
    self.assertEqual(self.result.failures, {})

  def test_fits_are_map_then_ml(self):
    for label, (map_fit, ml_fit) in self.result.fits.items():
      self.assertEqual((map_fit.mode, ml_fit.mode), ("MAP", "ML"))
      row = self.result.table[self.result.table.label == label].iloc[0]
      self.assertEqual(row.loglik, ml_fit.loglik)
      self.assertEqual(row.log_evidence, map_fit.log_evidence_laplace)
      self.assertEqual(row.k, ml_fit.k)

  def test_single_model_gets_all_weight(self):
    result = model_search(self.d, build_registry(["N-EXP"]), cfg=FAST)
    self.assertEqual(result.weights("w1"), {"N-EXP": 1.0})
    self.assertEqual(result.weights("w3"), {"N-EXP": 1.0})

  def test_failures_are_recorded(self):
    registry = [build_model_spec("N-EXP"), build_model_spec("N-HN", ved=True)]
    result = model_search(self.d, registry, cfg=FAST)
    self.assertEqual(list(result.fits), ["N-EXP"])
    self.assertIn("N-HN", result.failures)
    self.assertIn("DimensionError", result.failures["N-HN"])
    self.assertEqual(list(result.table.label), ["N-EXP"])

  def test_errors(self):
    with self.assertRaises(ValueError):
      model_search(self.d, [], cfg=FAST)
    registry = build_registry(["N-HN", "N-EXP", "LAP-GG"])
    self.assertEqual([s.label for s in registry_subset(registry, ["LAP-GG", "N-HN"])], ["LAP-GG", "N-HN"])
    with self.assertRaises(ValueError):
      registry_subset(registry, ["GT-GB2"])


@pytest.mark.asyncio
async def test_async_search_matches_threads():
  d = small_data()
  registry = build_registry(["N-HN", "N-EXP"])
  sync = model_search(d, registry, cfg=FAST, threads=2)
  result = await model_search_async(d, registry, cfg=FAST, threads=2)
  assert list(result.table.label) == list(sync.table.label)
  np.testing.assert_array_equal(result.table.loglik.to_numpy(), sync.table.loglik.to_numpy())
  assert result.failures == {}
