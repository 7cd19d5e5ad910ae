"""Partial detectability and generalized functional observers for
linear time-invariant descriptor systems (possibly non-square or
non-regular).

Submodules:

  linalg    tolerance-aware rank/kernel/subspace primitives
  system    the DescriptorSystem container
  pencil    Wong sequences and the quasi-Kronecker decomposition
  detect    detectability decision procedures
  observer  observer synthesis pipeline
  sim       closed-form-aware simulation
  cli       `descobs` command-line front end
  fixtures  bundled example systems
"""

from .detect import (
    DetectabilityCertificate,
    is_behaviorally_detectable,
    is_partially_detectable_qkf,
    is_partially_detectable_rank,
    is_partially_detectable_wong,
    legacy_functional_detectability,
    ss_partial_detectability,
)
from .linalg import Tolerances
from .observer import (
    NotPartiallyDetectable,
    ObserverRealization,
    ReducedSystem,
    SynthConfig,
    SynthesisReport,
    assemble,
    check_condition8,
    reduce,
    stabilizing_gain,
    synthesize,
)
from .pencil import QkfDecomposition, WongSequence, eta_compress, finite_spectrum, qkf, wong_sequence
from .sim import Signal, SimConfig, Trajectory, error_consistency, integrate_lti, sigma_solution, simulate
from .system import DescriptorSystem

__all__ = [
    "DescriptorSystem",
    "DetectabilityCertificate",
    "NotPartiallyDetectable",
    "ObserverRealization",
    "QkfDecomposition",
    "ReducedSystem",
    "Signal",
    "SimConfig",
    "SynthConfig",
    "SynthesisReport",
    "Tolerances",
    "Trajectory",
    "WongSequence",
    "assemble",
    "check_condition8",
    "error_consistency",
    "eta_compress",
    "finite_spectrum",
    "integrate_lti",
    "is_behaviorally_detectable",
    "is_partially_detectable_qkf",
    "is_partially_detectable_rank",
    "is_partially_detectable_wong",
    "legacy_functional_detectability",
    "qkf",
    "reduce",
    "sigma_solution",
    "simulate",
    "ss_partial_detectability",
    "stabilizing_gain",
    "synthesize",
    "wong_sequence",
    "__version__",
]

__version__ = "0.1.0"
