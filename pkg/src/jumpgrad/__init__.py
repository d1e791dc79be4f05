"""jumpgrad: distributed gradient descent with Poisson jump communication.

Agents follow the continuous gradient flow of a partitioned quadratic
objective but exchange state only at Poisson-distributed events over
directed channels. The package simulates these jump dynamics, runs
seeded Monte-Carlo ensembles of the Lyapunov value, and certifies
sufficient communication rates via a Schur-complement criterion on the
generator-bound matrix.
"""

from .jumpsde import (DivergenceError, EventStream, PathConfig, SamplePath,
                      channel_rng, integrate_path, sample_jump_times,
                      sample_streams)
from .quadratic import (IllConditionedError, QuadraticProblem, Topology, block,
                        block_vector, complete_topology, gradient,
                        min_eigenvalue, objective, optimal_solution)
from .channels import (ChannelSpec, ChannelState, PiecewiseConstant,
                       channel_drift, channel_jump, drift_value)
from .distributed import (AssembledSystem, ErrorCoordinates, NetworkState,
                          SystemLayout, assemble_distributed_system,
                          assemble_error_system, coords_from_stack,
                          default_initial_state, error_stack,
                          from_error_coordinates, layout_for, nominal_flow,
                          synchronized_initial_state, to_error_coordinates)
from .stability import (BoundReport, LyapunovParams, MAssembly,
                        RateCertificate, assemble_M, certified_beta,
                        choose_rho, gamma_prime_value, generator_LV,
                        generator_terms, lyapunov_V, schur_rate_lambda_d,
                        schur_rate_lambda_s, theorem_rates,
                        verify_lemma1_bound)
from .ensemble import (EnsembleConfig, EnsembleStats, fit_decay_rate,
                       plateau_level, run_ensemble, write_trajectories_csv)
from .config import (ConfigError, ExperimentConfig, dump_config,
                     effective_dict, load_config, parse_config)
from .presets import (DEFAULT_SEED, PRESET_NAMES, preset_configs,
                      reference_channels, reference_problem)

__version__ = "0.1.0"
