"""bellforge: variational detection of many-body Bell nonlocality.

Feeds measured moments of an (N, k, 2) scenario into a convex inverse
Ising descent; convergence certifies a local-variable model, saturation
distills the Bell inequality maximally violated by the data.
"""

from .detector import BellNonlocalityDetector
from .distill import (BellInequality, classical_bound, distill_gradient,
                      frustration_check, quantum_value, rationalize)
from .lvmodel import LvModel, MomentVector
from .mc import MomentEstimate, SamplerConfig, required_sweeps, sample_moments
from .oracle import (SpinSystem, QuantumStateSpec, StateHandle, bell_pair_data,
                     bell_operator_expectation, collective_variance,
                     coplanar_axes, ed_solve, susceptibility_to_variance,
                     two_point_dataset)
from .pbc import (PbcSpec, angle_functions, bell_expectation_u1,
                  max_quantum_violation, mprime_spectrum, pbc_bruteforce_bound,
                  pbc_inequality, pbc_symmetric_bound, witness_beta,
                  witness_verdict)
from .scenario import (Feature, MeasurementScenario, QuantumDataset,
                       SpinConfiguration, canonicalize_feature,
                       evaluate_feature, validate_dataset)
from .solver import (ConvergedLocal, GradientTrace, Inconclusive,
                     SaturatedNonlocal, SolverConfig, detect_saturation,
                     gradient, solve)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
