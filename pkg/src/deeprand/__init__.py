"""Simulation toolkit for key agreement under unknown-distribution (deep random) secrecy.

Modules
-------
core        permutations, box-mixture distributions, remoteness from symmetry
channel     Bernoulli degradation channel and the inner-product estimator
oracle      exhaustive Bayesian oracle for small n
drg         compliant distribution sampling and the recursive generator
protocol    the two-party protocol and its run records
adversary   passive opponent strategies and their evaluation
distill     advantage distillation, reconciliation, privacy amplification
harness     seeded two-phase experiments and reports
cli         command-line entry point
"""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402
from .core import DiscreteDistribution, Permutation, remoteness  # noqa: E402
from .oracle import JointDistribution, StrategyTable, check_degradation, check_indistinguishability  # noqa: E402
from .drg import DrgParams, DrgState, ZetaParams, drg_audit, drg_next, sample_zeta  # noqa: E402
from .protocol import ProtocolParams, RunRecord, Transcript, run_instance  # noqa: E402
from .adversary import default_suite, evaluate_strategies  # noqa: E402
from .distill import ad_rates, distill_chain, privacy_amplify, reconcile  # noqa: E402
from .harness import ExperimentConfig, run_experiment  # noqa: E402

__all__ = [
    "BACKEND",
    "DiscreteDistribution",
    "DrgParams",
    "DrgState",
    "ExperimentConfig",
    "JointDistribution",
    "Permutation",
    "ProtocolParams",
    "RunRecord",
    "StrategyTable",
    "Transcript",
    "ZetaParams",
    "ad_rates",
    "check_degradation",
    "check_indistinguishability",
    "default_suite",
    "distill_chain",
    "drg_audit",
    "drg_next",
    "evaluate_strategies",
    "privacy_amplify",
    "reconcile",
    "remoteness",
    "run_experiment",
    "run_instance",
    "sample_zeta",
]
