from gtgb2.simulate.generate import SimConfig, DEFAULT_PARAMS, simulate, simulate_replications
