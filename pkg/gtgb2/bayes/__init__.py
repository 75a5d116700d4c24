from gtgb2.bayes.mh import (
  DEFAULT_STEP, InitializationError, MHConfig, PosteriorChain, WalkResult, geweke_z, random_walk_metropolis, sample_chains, sample_parameters
)
from gtgb2.bayes.latent import (
  LatentDrawSet, MixtureProposal, conditional_efficiency, conditional_mean_u, efficiency_density_grid, efficiency_summary, grid_mean,
  latent_u_conditional_logpdf, sample_latent_at, sample_latent_from_chain, sample_latent_u
)
from gtgb2.bayes.averaging import AveragedResult, average_models, normalize_weights, pool_draws, restriction_probabilities
