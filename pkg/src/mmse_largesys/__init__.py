"""Multicell Massive MIMO uplink with M-MMSE combining: Monte Carlo SINR
and its large-system deterministic equivalent."""

from .combining import (SINRBreakdown, block_sinr_terms, complexity_counts, mmse_combiner, sinr_decomposition,
                        sinr_generic, sinr_quadratic, sinr_via_mse)
from .config import load_config, parse_config_text
from .detequiv import (DetEquivResult, FixedPointError, FixedPointSolution, closed_form_diagonal,
                       closed_form_uncorrelated, compute_B, compute_bounds, compute_T_star,
                       deterministic_equivalent, gamma_bar, solve_mu, solve_mu_arrays,
                       spectral_deterministic_equivalent)
from .estimation import (ChannelBlock, EstimationStatistics, compute_Phi, compute_Q, compute_Z,
                         estimation_statistics, sample_block)
from .harness import ExperimentResult, emit, run_detequiv, run_experiment, run_fig1, run_fig2, run_monte_carlo
from .network import (ConfigError, CorrelationSet, NetworkConfig, NetworkRealization, assemble_correlation_set,
                      exponential_correlation, generate_network)

__version__ = "0.1.0"
