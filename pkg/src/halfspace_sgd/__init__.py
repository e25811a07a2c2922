"""SGD on one-hidden-layer leaky-ReLU networks over noisy halfspace
benchmarks, with machine checks of the per-step training inequalities.

The package splits into:

* :mod:`halfspace_sgd.network` -- models, losses, exact gradients,
* :mod:`halfspace_sgd.distributions` -- benchmark distributions and
  their closed-form error rates,
* :mod:`halfspace_sgd.trainer` -- online / minibatch SGD with
  validation-based iterate selection and a per-step theory trace,
* :mod:`halfspace_sgd.theory` -- comparator, inequality verifiers, and
  the explicit-constant bounds,
* :mod:`halfspace_sgd.harness` -- configs, sweeps, oracles, figures,
  and the ``halfspace-sgd`` CLI.
"""

from .distributions import (ABSOLUTE_BOUNDARY, TWO_GAUSSIAN, AnalyticProfile,
                            DistributionSpec, absolute_boundary_from_opt,
                            analytic_profile, bayes_risk_two_gaussian,
                            boundary_from_opt, opt_lin_absolute,
                            opt_lin_two_gaussian, sample)
from .harness.version import __version__
from .network import (LEAKY_RELU, TANH, LossSpec, NetworkParams, forward,
                      forward_batch, init_params, loss_gradient)
from .rng import child_seed, stream_rng
from .theory import (Comparator, comparator_matrix, markov_error_bound,
                     theorem_bound, verify_general_key_identity,
                     verify_key_identity, xi_hat)
from .trainer import (BatchMode, ExperimentResult, NetworkConfig, TheoryTrace,
                      TrainConfig, train)

__all__ = [
    "ABSOLUTE_BOUNDARY", "TWO_GAUSSIAN", "AnalyticProfile", "BatchMode",
    "Comparator", "DistributionSpec", "ExperimentResult", "LEAKY_RELU",
    "LossSpec", "NetworkConfig", "NetworkParams", "TANH", "TheoryTrace",
    "TrainConfig", "__version__", "absolute_boundary_from_opt",
    "analytic_profile", "bayes_risk_two_gaussian", "boundary_from_opt",
    "child_seed", "comparator_matrix", "forward", "forward_batch",
    "init_params", "loss_gradient", "markov_error_bound", "opt_lin_absolute",
    "opt_lin_two_gaussian", "sample", "stream_rng", "theorem_bound", "train",
    "verify_general_key_identity", "verify_key_identity", "xi_hat",
]
