import math
import unittest

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from gtgb2.distributions import GTParams, GB2Params, INF, gt_sample, gb2_sample
from gtgb2.likelihood import (
  CompoundErrorParams, VEDLink, Dataset, DimensionError, FrontierBasis, FrontierSpec, log_norm_const, obs_loglik, obs_loglik_batch, total_loglik,
  panel_loglik, panel_loglik_groups
)
from gtgb2.quadrature import QuadratureConfig, QuadratureError


def normal_half_normal(sigma_v, sigma_u, omega=1):
  return CompoundErrorParams(GTParams(sigma_v, INF, 2.0), GB2Params(sigma_u, INF, 2.0, 1.0), omega)


def skew_normal_logpdf(eps, sigma_v, sigma_u, omega=1):
  sigma = math.hypot(sigma_v, sigma_u)
  lam = sigma_u / sigma_v
  return math.log(2.0 / sigma) + stats.norm.logpdf(eps / sigma) + stats.norm.logcdf(-omega * eps * lam / sigma)


def normal_exponential_logpdf(eps, sigma_v, sigma_u):
  return -math.log(sigma_u) + sigma_v**2 / (2 * sigma_u**2) + eps / sigma_u + stats.norm.logcdf(-eps / sigma_v - sigma_v / sigma_u)


def simulate_residuals(rng, theta, n):
  return gt_sample(rng, theta.v, size=n) - theta.omega * gb2_sample(rng, theta.u, size=n)


class TestNormalizingConstant(unittest.TestCase):
  def test_closed_forms(self):
    self.assertAlmostEqual(log_norm_const(normal_half_normal(1.0, 1.0)), -math.log(math.pi), places=14)
    laplace_exp = CompoundErrorParams(GTParams(1.0, INF, 1.0), GB2Params(1.0, INF, 1.0, 1.0))
    self.assertAlmostEqual(log_norm_const(laplace_exp), -math.log(2.0), places=14)

  def test_arbitrary_precision_oracle(self):
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    theta = CompoundErrorParams(GTParams(0.7, 5.0, 1.5), GB2Params(0.4, 3.0, 1.2, 0.8))
    psi_v, nu_v, s_v = mp.mpf("1.5"), mp.mpf(5), mp.mpf("0.7")
    psi_u, nu_u, s_u, tau = mp.mpf("1.2"), mp.mpf(3), mp.mpf("0.4"), mp.mpf("0.8")
    gt = psi_v / (2 * s_v * nu_v**(1 / psi_v) * mp.beta(1 / psi_v, nu_v / psi_v))
    gb2 = psi_u / (s_u * nu_u**(tau / psi_u) * mp.beta(tau / psi_u, nu_u / psi_u))
    self.assertAlmostEqual(log_norm_const(theta), float(mp.log(gt * gb2)), places=12)


class TestObservationLikelihood(unittest.TestCase):
  def test_normal_half_normal_closed_form(self):
    rng = np.random.default_rng(0)
    eps = np.linspace(-5, 5, 101)
    for _ in range(20):
      sv, su, omega = rng.uniform(0.2, 2), rng.uniform(0.2, 2), int(rng.choice([-1, 1]))
      got = obs_loglik_batch(eps, normal_half_normal(sv, su, omega))
      expected = np.array([skew_normal_logpdf(e, sv, su, omega) for e in eps])
      np.testing.assert_allclose(got, expected, rtol=0, atol=1e-8)

  def test_normal_exponential_closed_form(self):
    rng = np.random.default_rng(1)
    eps = np.linspace(-5, 5, 101)
    for _ in range(20):
      sv, su = rng.uniform(0.2, 2), rng.uniform(0.2, 2)
      theta = CompoundErrorParams(GTParams(sv, INF, 2.0), GB2Params(su, INF, 1.0, 1.0))
      expected = np.array([normal_exponential_logpdf(e, sv, su) for e in eps])
      np.testing.assert_allclose(obs_loglik_batch(eps, theta), expected, rtol=0, atol=1e-8)

  def test_orientation_symmetry(self):
    theta = CompoundErrorParams(GTParams(0.5, 6.0, 1.4), GB2Params(0.8, 9.0, 1.7, 0.7), 1)
    cost = CompoundErrorParams(theta.v, theta.u, -1)
    eps = np.linspace(-4, 4, 33)
    np.testing.assert_allclose(obs_loglik_batch(eps, theta), obs_loglik_batch(-eps, cost), rtol=0, atol=1e-10)

  def test_scalar_matches_batch(self):
    theta = CompoundErrorParams(GTParams(0.5, 6.0, 1.4), GB2Params(0.8, INF, 1.7, 2.2))
    self.assertAlmostEqual(obs_loglik(-0.9, theta), float(obs_loglik_batch(np.array([-0.9, 0.3]), theta)[0]), places=12)

  def test_far_outlier_stays_finite(self):
    theta = normal_half_normal(0.1, 0.5)
    value = obs_loglik(-25.0, theta)
    self.assertTrue(math.isfinite(value))
    self.assertAlmostEqual(value, skew_normal_logpdf(-25.0, 0.1, 0.5), delta=1e-6)

  def test_partial_value_on_failure(self):
    theta = CompoundErrorParams(GTParams(0.3, 4.0, 1.1), GB2Params(1.0, 3.0, 1.3, 0.4))
    cfg = QuadratureConfig(rel_tol=1e-15, abs_tol=1e-300, max_subdivisions=10)
    with self.assertRaises(QuadratureError) as ctx:
      obs_loglik_batch(np.array([-1.0, 0.5]), theta, cfg)
    reference = obs_loglik_batch(np.array([-1.0, 0.5]), theta)
    np.testing.assert_allclose(ctx.exception.log_value, reference, atol=1e-3)


def _density_families():
  yield normal_half_normal(0.6, 1.0)
  yield CompoundErrorParams(GTParams(1.0, INF, 1.0), GB2Params(0.7, INF, 1.0, 1.0), -1)
  yield CompoundErrorParams(GTParams(0.5, 4.0, 2.0), GB2Params(0.9, 6.0, 1.5, 0.6))
  yield CompoundErrorParams(GTParams(0.4, 8.0, 1.3), GB2Params(0.6, INF, 2.5, 2.0))
  yield CompoundErrorParams(GTParams(0.8, INF, 3.0), GB2Params(0.5, 5.0, 2.0, 1.7), -1)
  yield CompoundErrorParams(GTParams(0.3, 3.0, 1.0), GB2Params(1.2, 4.0, 1.0, 0.3))


@pytest.mark.parametrize("theta", list(_density_families()))
def test_density_integrates_to_one(theta):
  f = lambda e: math.exp(obs_loglik(e, theta))
  total = quad(f, -np.inf, 0.0, epsabs=1e-10, limit=200)[0] + quad(f, 0.0, np.inf, epsabs=1e-10, limit=200)[0]
  assert abs(total - 1.0) < 1e-6


class TestTotalLikelihood(unittest.TestCase):
  def setUp(self):
    rng = np.random.default_rng(7)
    self.x = rng.uniform(0, 2, size=(50, 1))
    self.theta = normal_half_normal(0.3, 0.5)
    self.y = 0.5 + 0.8 * self.x[:, 0] + simulate_residuals(rng, self.theta, 50)
    self.frontier = FrontierSpec(FrontierBasis(kind="linear"), [0.5, 0.8])

  def test_matches_closed_form_sum(self):
    d = Dataset(self.y, self.x)
    eps = self.y - 0.5 - 0.8 * self.x[:, 0]
    expected = sum(skew_normal_logpdf(e, 0.3, 0.5) for e in eps)
    self.assertAlmostEqual(total_loglik(d, self.frontier, self.theta), expected, delta=1e-7)

  def test_location_equivariance(self):
    c = 4.0
    shifted = FrontierSpec(FrontierBasis(kind="linear"), [0.5 + c, 0.8])
    base = total_loglik(Dataset(self.y, self.x), self.frontier, self.theta)
    moved = total_loglik(Dataset(self.y + c, self.x), shifted, self.theta)
    self.assertLess(abs(base - moved), 1e-10)

  def test_residual_function(self):
    d = Dataset(self.y, self.x)
    by_callable = total_loglik(d, lambda data: data.y - 0.5 - 0.8 * data.X[:, 0], self.theta)
    self.assertAlmostEqual(by_callable, total_loglik(d, self.frontier, self.theta), places=10)

  def test_ved_with_zero_slope(self):
    W = np.random.default_rng(8).normal(size=(50, 2))
    d = Dataset(self.y, self.x, W=W)
    gamma = math.log(0.5)
    ved = total_loglik(d, self.frontier, self.theta, VEDLink(gamma, [0.0, 0.0]))
    plain = total_loglik(d, self.frontier, self.theta.with_sigma_u(math.exp(gamma)))
    self.assertLess(abs(ved - plain), 1e-12)

  def test_ved_matches_per_observation_scale(self):
    W = np.random.default_rng(9).normal(size=(50, 1))
    d = Dataset(self.y, self.x, W=W)
    link = VEDLink(-0.5, [0.4])
    scales = link.sigma_u(W)
    eps = self.y - 0.5 - 0.8 * self.x[:, 0]
    expected = sum(obs_loglik(e, self.theta.with_sigma_u(s)) for e, s in zip(eps, scales))
    self.assertAlmostEqual(total_loglik(d, self.frontier, self.theta, link), expected, delta=1e-8)

  def test_ved_needs_covariates(self):
    with self.assertRaises(DimensionError):
      total_loglik(Dataset(self.y, self.x), self.frontier, self.theta, VEDLink(0.0, [0.1]))

  def test_smooth_in_parameters(self):
    theta = CompoundErrorParams(GTParams(0.6, 5.0, 1.5), GB2Params(0.5, 6.0, 1.4, 0.7))
    rng = np.random.default_rng(10)
    eps = simulate_residuals(rng, theta, 20)
    d = Dataset(eps, np.zeros((20, 0)))
    f = FrontierSpec(FrontierBasis(kind="linear"), [0.0])

    def ll(sigma_v):
      return total_loglik(d, f, CompoundErrorParams(GTParams(sigma_v, 5.0, 1.5), theta.u))

    def central(h):
      return (ll(0.3 + h) - ll(0.3 - h)) / (2 * h)

    coarse, fine = central(1e-3), central(5e-4)
    self.assertGreater(abs(fine), 1.0)
    self.assertLess(abs(coarse - fine), 1e-3 * abs(fine))


class TestPanelLikelihood(unittest.TestCase):
  def test_single_period_matches_pooled(self):
    theta = CompoundErrorParams(GTParams(0.4, 7.0, 1.6), GB2Params(0.7, INF, 1.3, 0.8))
    rng = np.random.default_rng(11)
    eps = simulate_residuals(rng, theta, 30)
    f = FrontierSpec(FrontierBasis(kind="linear"), [0.0])
    pooled = total_loglik(Dataset(eps, np.zeros((30, 0))), f, theta)
    panel = panel_loglik(Dataset(eps, np.zeros((30, 0)), panel_id=np.arange(30)), f, theta)
    self.assertLess(abs(pooled - panel), 1e-10)

  def test_normal_half_normal_panel(self):
    theta = normal_half_normal(0.3, 0.6)
    rng = np.random.default_rng(12)
    units = np.repeat(np.arange(3), 4)
    u = gb2_sample(rng, theta.u, size=3)
    eps = rng.normal(scale=0.3, size=12) - u[units]
    d = Dataset(eps, np.zeros((12, 0)), panel_id=units)
    got = panel_loglik_groups(d, FrontierSpec(FrontierBasis(kind="linear"), [0.0]), theta)
    for i in range(3):
      e = eps[units == i]
      f = lambda s: math.exp(np.sum(stats.norm.logpdf(e + s, scale=0.3)) + stats.halfnorm.logpdf(s, scale=0.6))
      expected = math.log(quad(f, 0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)[0])
      self.assertAlmostEqual(got[i], expected, delta=1e-6)

  def test_group_order_follows_first_appearance(self):
    theta = normal_half_normal(0.3, 0.6)
    ids = np.array(["b", "a", "b", "a", "c"])
    eps = np.array([-0.2, 0.1, -0.4, 0.0, -1.0])
    d = Dataset(eps, np.zeros((5, 0)), panel_id=ids)
    got = panel_loglik_groups(d, FrontierSpec(FrontierBasis(kind="linear"), [0.0]), theta)
    single = panel_loglik_groups(d.subset([4]), FrontierSpec(FrontierBasis(kind="linear"), [0.0]), theta)
    self.assertAlmostEqual(got[2], single[0], places=12)
    self.assertAlmostEqual(got[2], skew_normal_logpdf(-1.0, 0.3, 0.6), delta=1e-8)

  def test_needs_panel_ids(self):
    with self.assertRaises(DimensionError):
      panel_loglik(Dataset([0.1, 0.2], np.zeros((2, 0))), FrontierSpec(FrontierBasis(kind="linear"), [0.0]), normal_half_normal(1.0, 1.0))
