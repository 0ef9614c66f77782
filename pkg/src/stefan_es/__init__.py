"""Extremum seeking through one-phase moving-boundary diffusion dynamics.

Subpackages: plant (front-fixed PDE solver), dither (probing-signal series),
controller (demodulation and filtered drive), backstepping (transforms and
energy decay), oracles (reference solutions), harness (scenario runner),
cli (command-line surface).
"""

from .backstepping import (AverageState, KernelSpec, LyapunovSample,
                           average_system_step, decay_constants,
                           forward_transform, inverse_transform, lyapunov_eval,
                           phi, random_average_state)
from .controller import (ControllerConfig, ControllerState, MapConfig,
                         ZeroAmplitudeError, actuator_input, control_update,
                         demod_gradient, demod_hessian, make_controller_state,
                         predictor_integral, static_map)
from .dither import (DitherConfig, TimeJet, TruncationError, beta_eval,
                     beta_profile, dither_signal, series_coefficients, xi,
                     xi_jet)
from .harness import (AuxLog, ParseError, PredictorReport, SettleMetrics,
                      SimConfig, TraceRecord, WindowTooShortError,
                      default_config, load_config, metrics_block,
                      predictor_equivalence_report, read_trace, run_scenario,
                      settle_metrics, write_trace)
from .oracles import (SimilaritySpec, fd_residual, make_similarity_spec,
                      similarity_interface, similarity_lambda,
                      similarity_profile)
from .plant import (ConfigurationError, IntegrationFailureError, PlantConfig,
                    PlantState, ValidityReport, domain_integral_u, init_state,
                    interface_gradient, step, validity_check)

__version__ = "0.1.0"
