import unittest

from gtgb2.distributions import ParameterDomainError
from gtgb2.estimation import ModelSpec, Restriction, FIXED, FREE, INFINITE, TIED
from gtgb2.likelihood import FrontierBasis
from gtgb2.models import TABLE_REGISTRY, EXTRA_MODELS, build_model_spec, build_registry, get_pretty_name, get_supported_models

# parameter counts of the 34-model comparison: six translog coefficients (two inputs)
TABLE_K = {
  "GT-GB2": 13, "LAP-GG": 10, "TLAP-GB2": 12, "GT-GG": 12, "GED-GG": 11, "GED-GB2": 12, "T-GB2": 12, "N-GG": 10, "LAP-GAM": 9,
  "GT-EXP": 10, "GED-EXP": 9, "LAP-EXP": 8, "GT-HGT": 12, "GT-HGED": 11, "GED-HGED": 10, "GED-HGT": 11, "T-EXP": 9, "LAP-HGED": 9,
  "N-EX": 8, "LAP-HGT": 10, "T-HGED": 10, "T-HGT": 11, "N-HGED": 9, "N-HGT": 10, "GT-HT": 11, "GED-HT": 10, "LAP-HT": 9, "T-HT": 10,
  "N-HT": 9, "GT-HN": 10, "GED-HN": 9, "T-HN": 9, "LAP-HN": 8, "N-HN": 8,
}


class TestRegistry(unittest.TestCase):
  def test_table_registry(self):
    self.assertEqual(len(TABLE_REGISTRY), 34)
    self.assertEqual(len(set(TABLE_REGISTRY)), 34)
    self.assertEqual(get_supported_models(table_only=True), TABLE_REGISTRY)
    self.assertEqual(get_supported_models(), TABLE_REGISTRY + EXTRA_MODELS)

  def test_parameter_counts_with_translog(self):
    basis = FrontierBasis(kind="translog")
    for label, k in TABLE_K.items():
      spec = build_model_spec(label, basis=basis)
      self.assertEqual(spec.k(basis.width(2)), k, label)

  def test_parameter_counts_with_trend(self):
    basis = FrontierBasis(kind="translog", time_trend=True)
    n_beta = basis.width(4)
    self.assertEqual(n_beta, 16)
    for label, k in (("GT-GB2", 23), ("LAP-HN", 18), ("LAP-HT", 19), ("GT-HN", 20), ("GT-GG", 22), ("T-HGT", 21), ("N-EX", 18)):
      self.assertEqual(build_model_spec(label, basis=basis).k(n_beta), k, label)

  def test_restriction_rows(self):
    s = build_model_spec("N-HN")
    self.assertEqual([s.psi_v, s.nu_v, s.psi_u, s.nu_u, s.tau], [Restriction(FIXED, 2.0), Restriction(INFINITE), Restriction(FIXED, 2.0), Restriction(INFINITE), Restriction(FIXED, 1.0)])
    s = build_model_spec("LAP-GG")
    self.assertEqual([s.psi_v, s.nu_v, s.psi_u, s.nu_u, s.tau], [Restriction(FIXED, 1.0), Restriction(INFINITE), Restriction(FREE), Restriction(INFINITE), Restriction(FREE)])
    s = build_model_spec("TLAP-GB2")
    self.assertEqual(s.free_shapes(), ["nu_v", "psi_u", "nu_u", "tau"])
    s = build_model_spec("GT-HGT")
    self.assertEqual(s.free_shapes(), ["psi_v", "nu_v", "psi_u", "nu_u"])
    self.assertEqual(build_model_spec("GT-GB2").free_shapes(), ["psi_v", "nu_v", "psi_u", "nu_u", "tau"])

  def test_weibull_ties_psi_to_tau(self):
    s = build_model_spec("GED-W")
    self.assertEqual(s.psi_u, Restriction(TIED))
    self.assertEqual(s.resolve("psi_u", tau=0.7), 0.7)
    self.assertEqual(s.stochastic_names(), ["sigma_v", "psi_v", "sigma_u", "tau"])

  def test_alias_and_case(self):
    self.assertEqual(build_model_spec("n-ex").label, "N-EXP")
    self.assertEqual(get_pretty_name("LAP-GG"), "Laplace / generalized gamma")

  def test_unknown_label_lists_registry(self):
    with self.assertRaises(ValueError) as ctx:
      build_model_spec("FOO-BAR")
    self.assertIn("FOO-BAR", str(ctx.exception))
    self.assertIn("GT-GB2", str(ctx.exception))

  def test_build_registry_shares_options(self):
    registry = build_registry(["N-HN", "LAP-GG"], omega=-1, a4_mode=True)
    self.assertEqual([s.label for s in registry], ["N-HN", "LAP-GG"])
    self.assertTrue(all(s.omega == -1 and s.a4_mode for s in registry))
    self.assertEqual(len(build_registry()), 34)


class TestModelSpec(unittest.TestCase):
  def test_ved_names(self):
    s = build_model_spec("N-HN", ved=True)
    self.assertEqual(s.stochastic_names(2), ["sigma_v", "gamma", "delta_1", "delta_2"])
    self.assertEqual(s.k(3, 2), 7)

  def test_invalid_combinations(self):
    with self.assertRaises(ValueError):
      build_model_spec("N-HN", ved=True, panel=True)
    with self.assertRaises(ValueError):
      ModelSpec(label="bad", tau=Restriction(INFINITE))
    with self.assertRaises(ValueError):
      ModelSpec(label="bad", psi_v=Restriction(TIED))
    with self.assertRaises(ParameterDomainError):
      Restriction(FIXED, -1.0)
    with self.assertRaises(ParameterDomainError):
      ModelSpec(label="bad", tau=Restriction(FIXED, 2.0), a4_mode=True)

  def test_dict_round_trip(self):
    s = build_model_spec("GED-W", omega=-1, basis=FrontierBasis(kind="translog", time_trend=True), a4_mode=True)
    back = ModelSpec.from_dict(s.to_dict())
    self.assertEqual(back, s)
