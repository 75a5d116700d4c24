from gtgb2.estimation.spec import ModelSpec, Restriction, FREE, FIXED, INFINITE, TIED, TAU_LOWER, TAU_UPPER, TAU_UPPER_A4
from gtgb2.estimation.transforms import ParameterLayout, PSI_LOWER, NU_LOWER
from gtgb2.estimation.priors import PriorSpec, GGPrior
from gtgb2.estimation.evidence import (
  EvidenceUnavailableError, bic, ml_log_evidence, laplace_approximation, log_model_prior, model_weights, UNIFORM, OS
)
from gtgb2.estimation.fit import (
  FitConfig, FitResult, Objective, fit, laplace_log_evidence, make_layout, moment_start, numerical_hessian, ML, MAP
)
from gtgb2.estimation.search import SearchResult, comparison_table, fit_pair, model_search, model_search_async, registry_subset
