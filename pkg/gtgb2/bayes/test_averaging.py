import unittest

import numpy as np
import pandas as pd
from scipy import stats

from gtgb2.bayes import average_models, normalize_weights, pool_draws, restriction_probabilities
from gtgb2.models import build_model_spec

# dairy-farm comparison: posterior probabilities under the uniform model prior and posterior means of sigma_u
POOLED_WEIGHTS = [0.1320, 0.4259, 0.2005, 0.0925, 0.0855, 0.0571, 0.0061]
POOLED_SIGMA_U = [0.250, 0.260, 0.251, 0.258, 0.259, 0.251, 0.251]


class TestAverageModels(unittest.TestCase):
  def test_printed_pooled_scale(self):
    labels = [f"m{i}" for i in range(len(POOLED_WEIGHTS))]
    result = average_models(dict(zip(labels, POOLED_WEIGHTS)), {label: {"sigma_u": s} for label, s in zip(labels, POOLED_SIGMA_U)})
    self.assertAlmostEqual(result.mean("sigma_u"), 0.256, delta=0.002)
    self.assertAlmostEqual(sum(result.weights.values()), 1.0, places=12)

  def test_single_model(self):
    grid = np.linspace(0.0, 3.0, 301)
    f = stats.expon.pdf(grid)
    result = average_models({"N-EXP": 1.0}, {"N-EXP": {"sigma_u": 0.31, "beta_const": 1.2}}, {"N-EXP": (grid, f)})
    self.assertEqual(result.mean("sigma_u"), 0.31)
    self.assertEqual(result.mean("beta_const"), 1.2)
    np.testing.assert_array_equal(result.grid, grid)
    np.testing.assert_array_equal(result.density, f)
    self.assertEqual(result.summary.loc["sigma_u", "p_inf"], 0.0)

  def test_equal_weights(self):
    result = average_models({"a": 0.5, "b": 0.5}, {"a": {"x": 1.0}, "b": {"x": 3.0}})
    self.assertEqual(result.mean("x"), 2.0)

  def test_infinite_limit(self):
    result = average_models({"a": 3.0, "b": 7.0}, {"a": {"nu_u": np.inf, "sigma_u": 0.2}, "b": {"nu_u": 5.0, "sigma_u": 0.3}})
    self.assertAlmostEqual(result.mean("nu_u"), 5.0, places=12)
    self.assertAlmostEqual(result.summary.loc["nu_u", "p_inf"], 0.3, places=12)
    self.assertAlmostEqual(result.mean("sigma_u"), 0.27, places=12)
    only_inf = average_models({"a": 1.0}, {"a": {"nu_u": np.inf}})
    self.assertTrue(np.isnan(only_inf.mean("nu_u")))
    self.assertEqual(only_inf.summary.loc["nu_u", "p_inf"], 1.0)

  def test_mixture_density(self):
    grid = np.linspace(-12.0, 12.0, 24001)
    densities = {"a": (grid, stats.norm.pdf(grid)), "b": (grid, stats.norm.pdf(grid, 1.0, 0.5))}
    result = average_models({"a": 0.2, "b": 0.8}, densities=densities)
    self.assertAlmostEqual(float(np.trapezoid(result.density, result.grid)), 1.0, delta=1e-8)
    np.testing.assert_allclose(result.density, 0.2 * densities["a"][1] + 0.8 * densities["b"][1], rtol=1e-14)
    self.assertEqual(list(result.density_frame().columns), ["x", "density"])

  def test_different_grids(self):
    a = np.array([0.0, 1.0, 2.0])
    b = np.array([0.5, 1.5])
    result = average_models({"a": 0.5, "b": 0.5}, densities={"a": (a, np.array([0.0, 1.0, 0.0])), "b": (b, np.array([1.0, 1.0]))})
    np.testing.assert_array_equal(result.grid, [0.0, 0.5, 1.0, 1.5, 2.0])
    np.testing.assert_allclose(result.density, [0.0, 0.75, 1.0, 0.75, 0.0])

  def test_errors(self):
    with self.assertRaises(ValueError):
      average_models({"a": 0.5, "b": 0.5}, {"a": {"x": 1.0}})
    with self.assertRaises(ValueError):
      average_models({"a": -0.5, "b": 1.5}, {"a": {"x": 1.0}, "b": {"x": 1.0}})
    with self.assertRaises(ValueError):
      average_models({"a": 1.0})
    with self.assertRaises(ValueError):
      average_models({"a": 0.5, "b": 0.5}, {"a": {"x": 1.0}, "b": {"y": 1.0}})
    with self.assertRaises(ValueError):
      normalize_weights({"a": 0.0})
    with self.assertRaises(ValueError):
      average_models({"a": 1.0}).density_frame()


class TestPoolDraws(unittest.TestCase):
  def test_counts_follow_weights(self):
    frames = {"a": pd.DataFrame({"sigma_u": np.full(50, 1.0)}), "b": pd.DataFrame({"sigma_u": np.full(80, 2.0)})}
    pooled = pool_draws(np.random.default_rng(0), frames, {"a": 0.25, "b": 0.75}, 4000)
    self.assertEqual(len(pooled), 4000)
    self.assertEqual(list(pooled.columns), ["model", "sigma_u"])
    self.assertAlmostEqual((pooled.model == "a").mean(), 0.25, delta=0.03)
    self.assertTrue(np.all(pooled.sigma_u[pooled.model == "a"] == 1.0))
    self.assertTrue(np.all(pooled.sigma_u[pooled.model == "b"] == 2.0))
    again = pool_draws(np.random.default_rng(0), frames, {"a": 0.25, "b": 0.75}, 4000)
    pd.testing.assert_frame_equal(pooled, again)

  def test_column_mismatch(self):
    frames = {"a": pd.DataFrame({"x": [1.0]}), "b": pd.DataFrame({"y": [1.0]})}
    with self.assertRaises(ValueError):
      pool_draws(np.random.default_rng(0), frames, {"a": 0.5, "b": 0.5}, 10)


class TestRestrictionProbabilities(unittest.TestCase):
  def test_states(self):
    specs = {"N-HN": build_model_spec("N-HN"), "GT-GB2": build_model_spec("GT-GB2"), "N-W": build_model_spec("N-W")}
    out = restriction_probabilities({"N-HN": 0.4, "GT-GB2": 0.5, "N-W": 0.1}, specs)
    self.assertAlmostEqual(out.loc["nu_u", "inf"], 0.5, places=12)
    self.assertAlmostEqual(out.loc["nu_u", "free"], 0.5, places=12)
    self.assertAlmostEqual(out.loc["psi_u", "tied"], 0.1, places=12)
    self.assertAlmostEqual(out.loc["psi_u", "fixed"], 0.4, places=12)
    np.testing.assert_allclose(out.sum(axis=1).to_numpy(), 1.0, rtol=1e-12)
